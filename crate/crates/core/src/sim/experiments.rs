use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::generate::{expanded_dollars, realize_into, ErrorModel, PartialProportion, RealizedAudit, Rounding, ScenarioSpec, STANDARD_PARTIAL};
use super::{derive_seed, replicate_rng};
use crate::error::{Error, Result};
use crate::planner::{z_for_confidence, EstimatorKind};
use crate::population::ClaimPopulation;
use crate::scalar::CompensatedSum;

fn sum(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().collect::<CompensatedSum<f64>>().value()
}

pub(crate) fn sigma_r(xs: &[f64], y: &[f64]) -> f64 {
    let r = sum(y.iter().copied()) / sum(xs.iter().copied());
    sum(xs.iter().zip(y).map(|(x, y)| (y - r * x).powi(2))) / xs.len() as f64
}

/// σR² = (1/N)Σ(yᵢ − R xᵢ)² with R = τy/τx.
pub fn realized_sigma_r(audit: &RealizedAudit<'_>) -> f64 {
    sigma_r(&expanded_dollars(audit.pop), &audit.y)
}

/// A scenario without its error rate, for sweeping over rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedScenario {
    pub name: String,
    pub full_fraction: f64,
    pub partial_q: PartialProportion,
}

impl NamedScenario {
    pub fn numbered(number: u8) -> Result<Self> {
        let s = ScenarioSpec::numbered(number, 0.0)?;
        Ok(Self { name: format!("scenario{number}"), full_fraction: s.full_fraction, partial_q: s.partial_q })
    }

    pub fn at_rate(&self, rate: f64) -> Result<ScenarioSpec> {
        ScenarioSpec::new(self.full_fraction, self.partial_q, rate)
    }
}

impl Default for NamedScenario {
    fn default() -> Self {
        Self { name: "scenario1".into(), full_fraction: 1.0, partial_q: STANDARD_PARTIAL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub scenario: String,
    pub rate: f64,
    pub mean: f64,
    pub p05: f64,
    pub p95: f64,
    pub replicates: u64,
}

/// Linear-interpolation percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and 5th/95th percentiles of realized σR² per (scenario, rate) cell.
pub fn mc_sigma_r_bands(
    pop: &ClaimPopulation,
    scenarios: &[NamedScenario],
    rates: &[f64],
    replicates: u64,
    rounding: Rounding,
    seed: u64,
) -> Result<Vec<BandRow>> {
    if replicates == 0 {
        return Err(Error::domain("mc_sigma_r_bands", "need at least one replicate"));
    }
    let xs = expanded_dollars(pop);
    let mut rows = Vec::with_capacity(scenarios.len() * rates.len());
    for (si, sc) in scenarios.iter().enumerate() {
        for (ri, &rate) in rates.iter().enumerate() {
            let model = ErrorModel::Scenario(sc.at_rate(rate)?);
            let cell_seed = derive_seed(seed, (si * rates.len() + ri) as u64);
            let mut values = (0..replicates)
                .into_par_iter()
                .map_init(Vec::new, |y, i| {
                    realize_into(&xs, &model, rounding, &mut replicate_rng(cell_seed, i), y)?;
                    Ok(sigma_r(&xs, y))
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = sum(values.iter().copied()) / replicates as f64;
            values.sort_by(f64::total_cmp);
            rows.push(BandRow {
                scenario: sc.name.clone(),
                rate,
                mean,
                p05: percentile(&values, 0.05),
                p95: percentile(&values, 0.95),
                replicates,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageResult {
    pub coverage: f64,
    pub mean_halfwidth: f64,
    pub covered: u64,
    pub replicates: u64,
    pub n: u64,
    pub estimator: EstimatorKind,
    pub confidence: f64,
}

/// Relative tolerance for counting a zero-width interval as covering.
const EXACT_TOLERANCE: f64 = 1e-9;

struct Interval {
    estimate: f64,
    halfwidth: f64,
}

fn interval(xs: &[f64], y: &[f64], tau_x: f64, sample: &[usize], kind: EstimatorKind, z: f64) -> Result<Interval> {
    let big_n = xs.len() as f64;
    let n = sample.len() as f64;
    let ybar = sum(sample.iter().map(|&i| y[i])) / n;
    let (estimate, s2) = match kind {
        EstimatorKind::SimpleExpansion => {
            let s2 = sum(sample.iter().map(|&i| (y[i] - ybar).powi(2))) / (n - 1.0);
            (big_n * ybar, s2)
        }
        EstimatorKind::Ratio => {
            let xbar = sum(sample.iter().map(|&i| xs[i])) / n;
            if xbar == 0.0 {
                return Err(Error::domain("coverage_experiment", "sampled claim amounts sum to zero"));
            }
            let r = ybar / xbar;
            let s2 = sum(sample.iter().map(|&i| (y[i] - r * xs[i]).powi(2))) / (n - 1.0);
            (r * tau_x, s2)
        }
    };
    let var = big_n * big_n * (1.0 - n / big_n) * s2 / n;
    Ok(Interval { estimate, halfwidth: z * var.max(0.0).sqrt() })
}

/// Share of simulated audits whose large-sample confidence interval, from an
/// SRSWOR of `n` claims, covers the true disallowed total.
pub fn coverage_experiment(
    pop: &ClaimPopulation,
    model: &ErrorModel,
    n: u64,
    estimator: EstimatorKind,
    confidence: f64,
    replicates: u64,
    rounding: Rounding,
    seed: u64,
) -> Result<CoverageResult> {
    let big_n = pop.len();
    if n < 2 || n > big_n {
        return Err(Error::domain("coverage_experiment", format!("need 2 ≤ n ≤ N = {big_n}, got n = {n}")));
    }
    if replicates == 0 {
        return Err(Error::domain("coverage_experiment", "need at least one replicate"));
    }
    let z = z_for_confidence(confidence)?;
    let xs = expanded_dollars(pop);
    let tau_x = sum(xs.iter().copied());
    let outcomes = (0..replicates)
        .into_par_iter()
        .map_init(Vec::new, |y, i| {
            let mut rng = replicate_rng(seed, i);
            realize_into(&xs, model, rounding, &mut rng, y)?;
            let tau_y = sum(y.iter().copied());
            let sample = index::sample(&mut rng, xs.len(), n as usize).into_vec();
            let ci = interval(&xs, y, tau_x, &sample, estimator, z)?;
            let miss = (ci.estimate - tau_y).abs();
            let covered = if ci.halfwidth > 0.0 {
                miss <= ci.halfwidth
            } else {
                miss <= EXACT_TOLERANCE * tau_y.abs().max(1.0)
            };
            Ok((covered, ci.halfwidth))
        })
        .collect::<Result<Vec<(bool, f64)>>>()?;
    let covered = outcomes.iter().filter(|o| o.0).count() as u64;
    Ok(CoverageResult {
        coverage: covered as f64 / replicates as f64,
        mean_halfwidth: sum(outcomes.iter().map(|o| o.1)) / replicates as f64,
        covered,
        replicates,
        n,
        estimator,
        confidence,
    })
}
