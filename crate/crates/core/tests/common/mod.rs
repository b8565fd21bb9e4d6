#![allow(dead_code)]

use audit_design::{Cents, ClaimPopulation};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` claims between one cent and $10,000.
pub fn random_population(rng: &mut impl Rng, n: usize) -> ClaimPopulation {
    ClaimPopulation::from_amounts((0..n).map(|_| Cents(rng.random_range(1..=1_000_000)))).unwrap()
}

/// |a − b| ≤ tol·max(|b|, floor).
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(floor)
}
