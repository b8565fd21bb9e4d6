//! Brute-force enumeration over every error set of a small population. These
//! are the ground truth the closed forms are tested against.

use itertools::Itertools;
use serde::Serialize;

use super::experiments::sigma_r;
use super::generate::expanded_dollars;
use crate::error::{Error, Result};
use crate::population::ClaimPopulation;

/// Largest number of configurations an oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// C(n, k), or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(c)
}

fn guard(count: Option<u128>) -> Result<u128> {
    match count {
        Some(c) if c <= ENUMERATION_LIMIT => Ok(c),
        Some(c) => Err(Error::TooManyConfigurations { count: c, limit: ENUMERATION_LIMIT }),
        None => Err(Error::TooManyConfigurations { count: u128::MAX, limit: ENUMERATION_LIMIT }),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population variance (1/N divisor).
fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalOracle {
    pub subsets: u128,
    /// Mean over error sets of the variance of the disallowed amounts.
    pub mean_conditional_variance: f64,
    /// Variance over error sets of the mean disallowed amount.
    pub variance_of_conditional_mean: f64,
    /// Mean over error sets of the realized ratio residual variance.
    pub mean_sigma_r2: f64,
    /// Mean over error sets of X̄ₑ·X̄ₑ^(2); `None` when Ne = 0.
    pub mean_xbar_x2bar: Option<f64>,
}

/// Every error set of size `errors`, each disallowed in full.
pub fn oracle_enumerate_conditional(pop: &ClaimPopulation, errors: u64) -> Result<ConditionalOracle> {
    let xs = expanded_dollars(pop);
    let n = xs.len();
    if errors as usize > n {
        return Err(Error::domain("oracle", format!("{errors} errors in {n} claims")));
    }
    let subsets = guard(binomial(n as u64, errors))?;
    let (mut cond_var, mut cond_mean, mut sig_r, mut prod) = (vec![], vec![], vec![], vec![]);
    let mut y = vec![0.0; n];
    for set in (0..n).combinations(errors as usize) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &i in &set {
            y[i] = xs[i];
        }
        cond_var.push(variance(&y));
        cond_mean.push(mean(&y));
        sig_r.push(sigma_r(&xs, &y));
        if !set.is_empty() {
            let k = set.len() as f64;
            let m1 = set.iter().map(|&i| xs[i]).sum::<f64>() / k;
            let m2 = set.iter().map(|&i| xs[i] * xs[i]).sum::<f64>() / k;
            prod.push(m1 * m2);
        }
    }
    Ok(ConditionalOracle {
        subsets,
        mean_conditional_variance: mean(&cond_var),
        variance_of_conditional_mean: variance(&cond_mean),
        mean_sigma_r2: mean(&sig_r),
        mean_xbar_x2bar: (!prod.is_empty()).then(|| mean(&prod)),
    })
}

/// Mean conditional variance of the disallowed amounts when `errors` claims
/// are in error and `partial` of those are disallowed at fraction q.
pub fn oracle_enumerate_partial(pop: &ClaimPopulation, errors: u64, partial: u64, q: f64) -> Result<f64> {
    let xs = expanded_dollars(pop);
    let n = xs.len();
    if errors as usize > n || partial > errors {
        return Err(Error::domain("oracle", format!("need p ≤ T ≤ N, got p = {partial}, T = {errors}, N = {n}")));
    }
    let outer = binomial(n as u64, errors);
    let inner = binomial(errors, partial);
    guard(outer.zip(inner).and_then(|(a, b)| a.checked_mul(b)))?;
    let mut vars = vec![];
    let mut y = vec![0.0; n];
    for set in (0..n).combinations(errors as usize) {
        for part in (0..set.len()).combinations(partial as usize) {
            y.iter_mut().for_each(|v| *v = 0.0);
            for &i in &set {
                y[i] = xs[i];
            }
            for &j in &part {
                y[set[j]] = q * xs[set[j]];
            }
            vars.push(variance(&y));
        }
    }
    Ok(mean(&vars))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GOracle {
    pub subsets: u128,
    /// Mean over error sets of Ūₑ, U = x² − kx.
    pub mean: f64,
    /// Variance over error sets of Ūₑ.
    pub variance: f64,
    /// Share of error sets with Ūₑ > 0.
    pub prob_positive: f64,
}

/// Distribution of the ratio-versus-expansion criterion over all error sets.
pub fn oracle_enumerate_g(pop: &ClaimPopulation, errors: u64) -> Result<GOracle> {
    let xs = expanded_dollars(pop);
    let n = xs.len();
    if errors == 0 || errors as usize > n {
        return Err(Error::domain("oracle", format!("need 1 ≤ Ne ≤ N = {n}, got {errors}")));
    }
    let subsets = guard(binomial(n as u64, errors))?;
    let mu = mean(&xs);
    let k = mu + variance(&xs) / (2.0 * mu);
    let u: Vec<f64> = xs.iter().map(|x| x * x - k * x).collect();
    let g: Vec<f64> = (0..n)
        .combinations(errors as usize)
        .map(|set| set.iter().map(|&i| u[i]).sum::<f64>() / errors as f64)
        .collect();
    Ok(GOracle {
        subsets,
        mean: mean(&g),
        variance: variance(&g),
        prob_positive: g.iter().filter(|&&v| v > 0.0).count() as f64 / g.len() as f64,
    })
}
