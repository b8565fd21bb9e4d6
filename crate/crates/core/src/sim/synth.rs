use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};

use crate::population::{Cents, ClaimPopulation};

const EDWARDS_SIZE: usize = 9000;
const EDWARDS_TOTAL: f64 = 1_100_000.0;
/// Share of claims drawn from the uniform $100–$150 spike.
pub const EDWARDS_SPIKE_WEIGHT: f64 = 0.4;
// Lognormal body with mean about $120 and coefficient of variation 0.75.
const EDWARDS_LOG_MU: f64 = 4.564;
const EDWARDS_LOG_SIGMA: f64 = 0.668;

const NETER_SIZE: usize = 4033;
const NETER_TOTAL: f64 = 7_500_000.0;
const NETER_LOG_SIGMA: f64 = 1.3;

/// Rescales draws to the target total and rounds to cents, at least one cent.
fn to_population(draws: Vec<f64>, total: f64) -> ClaimPopulation {
    let scale = total / draws.iter().sum::<f64>();
    let amounts = draws.into_iter().map(|v| Cents(((v * scale * 100.0).round() as i64).max(1)));
    ClaimPopulation::from_amounts(amounts).expect("positive amounts")
}

/// 9000 right-skewed claims totalling about $1.1M with a spike of values
/// between $100 and $150.
pub fn make_edwards_like(seed: u64) -> ClaimPopulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spike = Uniform::new(100.0, 150.0).expect("valid bounds");
    let body = LogNormal::new(EDWARDS_LOG_MU, EDWARDS_LOG_SIGMA).expect("valid lognormal");
    let draws = (0..EDWARDS_SIZE)
        .map(|_| {
            if rng.random::<f64>() < EDWARDS_SPIKE_WEIGHT {
                spike.sample(&mut rng)
            } else {
                body.sample(&mut rng)
            }
        })
        .collect();
    to_population(draws, EDWARDS_TOTAL)
}

/// 4033 lognormal claims totalling about $7.5M, more dispersed than
/// [`make_edwards_like`].
pub fn make_neter_like(seed: u64) -> ClaimPopulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = LogNormal::new(0.0, NETER_LOG_SIGMA).expect("valid lognormal");
    let draws = (0..NETER_SIZE).map(|_| body.sample(&mut rng)).collect();
    to_population(draws, NETER_TOTAL)
}
