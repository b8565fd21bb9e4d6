//! Whether ratio estimation should beat simple expansion for a population.
//!
//! The comparison reduces to the sign of g = Ūₑ, the mean over the error set
//! of U = x² − kx with k = μx + σx²/(2μx). Its mean and variance over random
//! error sets are closed forms; the probability that it is positive is given
//! both by a normal approximation and by Monte Carlo.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::planner::normal_cdf;
use crate::population::{ClaimPopulation, PopulationMoments};
use crate::scalar::Real;
use crate::sim::{draw_run_counts, replicate_rng};
use crate::variance::ErrorRate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GMoments<T> {
    /// E(g) = σx²/2, currency².
    pub mean: T,
    /// Var(g), currency⁴.
    pub variance: T,
}

/// The constant k in U = x² − kx.
pub fn g_constant<T: Real>(m: &PopulationMoments<T>) -> T {
    m.mu_x + m.sigma2_x / (T::lit(2.0) * m.mu_x)
}

fn check_inputs<T: Real>(op: &'static str, m: &PopulationMoments<T>, pi: T) -> Result<()> {
    if !(pi > T::zero() && pi <= T::one()) {
        return Err(Error::domain(op, format!("π = {pi} must be in (0, 1]")));
    }
    if m.n < 2 {
        return Err(Error::domain(op, "need at least 2 claims"));
    }
    if !(m.mu_x > T::zero()) {
        return Err(Error::domain(op, "mean claim amount must be positive"));
    }
    Ok(())
}

/// Mean and variance of g over error sets of size πN:
/// Var(g) = (1/π − 1)(1/(N−1))(σx2² + k²σx² − 2kμ12).
pub fn g_mean_variance<T: Real>(m: &PopulationMoments<T>, pi: &ErrorRate<T>) -> Result<GMoments<T>> {
    let p = pi.pi();
    check_inputs("g_mean_variance", m, p)?;
    let k = g_constant(m);
    // Var(U) over the population; nonnegative up to rounding.
    let var_u = (m.sigma2_x2 + k * k * m.sigma2_x - T::lit(2.0) * k * m.mu12).max(T::zero());
    let variance = (T::one() / p - T::one()) / (m.n_real() - T::one()) * var_u;
    Ok(GMoments { mean: m.sigma2_x / T::lit(2.0), variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalProbability {
    pub probability: f64,
    /// Var(g) is zero, so the normal approximation was not used.
    pub degenerate: bool,
}

/// P(g > 0) ≈ Φ(E(g)/√Var(g)).
pub fn prob_ratio_beats<T: Real>(m: &PopulationMoments<T>, pi: &ErrorRate<T>) -> Result<NormalProbability> {
    let g = g_mean_variance(m, pi)?;
    let (mean, var) = (g.mean.as_f64(), g.variance.as_f64());
    if var > 0.0 {
        return Ok(NormalProbability { probability: normal_cdf(mean / var.sqrt()), degenerate: false });
    }
    let probability = if mean > 0.0 { 1.0 } else { 0.5 };
    Ok(NormalProbability { probability, degenerate: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McProbability {
    /// Fraction of replicates with g strictly positive.
    pub probability: f64,
    pub replicates: u64,
    pub seed: u64,
    /// Error-set size Ne = round(πN).
    pub errors: u64,
    /// The population is constant, so g ≡ 0.
    pub degenerate: bool,
}

/// Monte Carlo estimate of P(g > 0) over error sets of size round(πN).
pub fn prob_ratio_beats_mc(
    pop: &ClaimPopulation,
    pi: &ErrorRate<f64>,
    replicates: u64,
    seed: u64,
) -> Result<McProbability> {
    let (rate, adj) = pi.snapped(pop.len())?;
    let ne = adj.errors;
    if ne == 0 {
        return Err(Error::domain("prob_ratio_beats_mc", "round(πN) = 0: no error set to draw"));
    }
    if replicates == 0 {
        return Err(Error::domain("prob_ratio_beats_mc", "need at least one replicate"));
    }
    let m = pop.moments::<f64>();
    check_inputs("prob_ratio_beats_mc", &m, rate.pi())?;
    let k = g_constant(&m);
    let u: Vec<f64> = pop
        .runs()
        .iter()
        .map(|r| {
            let x = r.amount.dollars();
            x * x - k * x
        })
        .collect();
    let positive = (0..replicates)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = replicate_rng(seed, i);
            let counts = draw_run_counts(pop, ne, &mut rng);
            let sum: f64 = counts.iter().zip(&u).map(|(&c, &u)| c as f64 * u).sum();
            sum > 0.0
        })
        .count() as u64;
    Ok(McProbability {
        probability: positive as f64 / replicates as f64,
        replicates,
        seed,
        errors: ne,
        degenerate: m.sigma2_x == 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Ratio,
    SimpleExpansion,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarlo {
    pub replicates: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectorOptions {
    /// Minimum normal-approximation probability for recommending ratio.
    pub threshold: f64,
    pub monte_carlo: Option<MonteCarlo>,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        Self { threshold: 0.5, monte_carlo: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectorReport {
    pub pi: f64,
    pub errors: u64,
    pub mean_g: f64,
    pub var_g: f64,
    pub prob_normal: f64,
    pub degenerate: bool,
    pub prob_mc: Option<McProbability>,
    pub recommendation: Recommendation,
}

pub fn select(pop: &ClaimPopulation, pi: &ErrorRate<f64>, options: &SelectorOptions) -> Result<SelectorReport> {
    let m = pop.moments::<f64>();
    let g = g_mean_variance(&m, pi)?;
    let normal = prob_ratio_beats(&m, pi)?;
    let prob_mc = match options.monte_carlo {
        Some(mc) => Some(prob_ratio_beats_mc(pop, pi, mc.replicates, mc.seed)?),
        None => None,
    };
    let recommendation = if normal.degenerate && g.mean == 0.0 {
        Recommendation::Indeterminate
    } else if normal.probability >= options.threshold {
        Recommendation::Ratio
    } else {
        Recommendation::SimpleExpansion
    };
    let errors = (pi.pi() * pop.len() as f64).round() as u64;
    Ok(SelectorReport {
        pi: pi.pi(),
        errors,
        mean_g: g.mean,
        var_g: g.variance,
        prob_normal: normal.probability,
        degenerate: normal.degenerate,
        prob_mc,
        recommendation,
    })
}
