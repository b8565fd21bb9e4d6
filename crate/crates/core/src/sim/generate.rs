use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use super::replicate_rng;
use crate::error::{Error, Result};
use crate::population::ClaimPopulation;

/// How the disallowed fraction q of a partially erroneous claim is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialProportion {
    Fixed(f64),
    /// Drawn independently per claim.
    Uniform { lo: f64, hi: f64 },
}

impl PartialProportion {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PartialProportion::Fixed(q) => q > 0.0 && q < 1.0,
            PartialProportion::Uniform { lo, hi } => lo > 0.0 && lo <= hi && hi < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("partial proportion", format!("{self:?} must lie in (0, 1)")))
        }
    }
}

/// Error scenario: a share of the error claims are full errors, the rest
/// partial with q from `partial_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub full_fraction: f64,
    pub partial_q: PartialProportion,
    pub overall_rate: f64,
}

impl ScenarioSpec {
    pub fn new(full_fraction: f64, partial_q: PartialProportion, overall_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&full_fraction) {
            return Err(Error::domain("scenario", format!("full fraction {full_fraction} is outside [0, 1]")));
        }
        if !(0.0..=1.0).contains(&overall_rate) {
            return Err(Error::domain("scenario", format!("error rate {overall_rate} is outside [0, 1]")));
        }
        partial_q.validate()?;
        Ok(Self { full_fraction, partial_q, overall_rate })
    }

    /// The four standard scenarios: all errors full (1), or 20% (2), 50% (3)
    /// and 80% (4) full with the rest disallowed at q ~ uniform(0.2, 0.8).
    pub fn numbered(number: u8, overall_rate: f64) -> Result<Self> {
        let full_fraction = match number {
            1 => 1.0,
            2 => 0.2,
            3 => 0.5,
            4 => 0.8,
            _ => return Err(Error::domain("scenario", format!("no scenario {number}; use 1 to 4"))),
        };
        Self::new(full_fraction, STANDARD_PARTIAL, overall_rate)
    }
}

pub(crate) const STANDARD_PARTIAL: PartialProportion = PartialProportion::Uniform { lo: 0.2, hi: 0.8 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// `errors` claims chosen at random are disallowed in full.
    AllOrNothing { errors: u64 },
    /// `errors` claims in error, `partial` of them disallowed at fraction q.
    Partial { errors: u64, partial: u64, q: f64 },
    Scenario(ScenarioSpec),
}

impl ErrorModel {
    /// Error-claim count and full-error count for a population of `n`.
    fn counts(&self, n: u64) -> Result<(u64, u64, PartialProportion)> {
        let (errors, full, q) = match *self {
            ErrorModel::AllOrNothing { errors } => (errors, errors, PartialProportion::Fixed(0.5)),
            ErrorModel::Partial { errors, partial, q } => {
                if partial > errors {
                    return Err(Error::domain("error model", format!("{partial} partial of {errors} errors")));
                }
                let q = PartialProportion::Fixed(q);
                q.validate()?;
                (errors, errors - partial, q)
            }
            ErrorModel::Scenario(s) => {
                let s = ScenarioSpec::new(s.full_fraction, s.partial_q, s.overall_rate)?;
                let errors = (s.overall_rate * n as f64).round() as u64;
                let full = (s.full_fraction * errors as f64).round() as u64;
                (errors, full, s.partial_q)
            }
        };
        if errors > n {
            return Err(Error::domain("error model", format!("{errors} errors in {n} claims")));
        }
        Ok((errors, full, q))
    }
}

/// Whether simulated partial amounts are rounded to whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Exact,
    Cents,
}

/// Disallowed amounts for one simulated audit.
#[derive(Debug, Clone)]
pub struct RealizedAudit<'a> {
    pub pop: &'a ClaimPopulation,
    /// Disallowed amount per claim in dollars, in expanded population order.
    pub y: Vec<f64>,
    pub model: ErrorModel,
    pub seed: u64,
}

impl RealizedAudit<'_> {
    /// Share of claims with a positive disallowed amount.
    pub fn error_rate_realized(&self) -> f64 {
        self.y.iter().filter(|&&y| y > 0.0).count() as f64 / self.y.len() as f64
    }
}

pub(crate) fn expanded_dollars(pop: &ClaimPopulation) -> Vec<f64> {
    pop.expanded().map(|c| c.dollars()).collect()
}

pub(crate) fn realize_into<R: Rng + ?Sized>(
    xs: &[f64],
    model: &ErrorModel,
    rounding: Rounding,
    rng: &mut R,
    y: &mut Vec<f64>,
) -> Result<()> {
    let n = xs.len();
    let (errors, full, q) = model.counts(n as u64)?;
    y.clear();
    y.resize(n, 0.0);
    if errors == 0 {
        return Ok(());
    }
    let chosen = index::sample(rng, n, errors as usize).into_vec();
    let mut is_full = vec![false; chosen.len()];
    for j in index::sample(rng, chosen.len(), full as usize) {
        is_full[j] = true;
    }
    let uniform = match q {
        PartialProportion::Uniform { lo, hi } => Some(Uniform::new_inclusive(lo, hi).expect("valid bounds")),
        PartialProportion::Fixed(_) => None,
    };
    for (&i, &f) in chosen.iter().zip(&is_full) {
        let x = xs[i];
        y[i] = if f {
            x
        } else {
            let q = match (q, &uniform) {
                (PartialProportion::Fixed(q), _) => q,
                (_, Some(u)) => u.sample(rng),
                _ => unreachable!(),
            };
            match rounding {
                Rounding::Exact => q * x,
                Rounding::Cents => (q * (x * 100.0).round()).round_ties_even() / 100.0,
            }
        };
    }
    Ok(())
}

/// Simulates one audit under `model`.
pub fn realize<'a>(pop: &'a ClaimPopulation, model: &ErrorModel, rounding: Rounding, seed: u64) -> Result<RealizedAudit<'a>> {
    let xs = expanded_dollars(pop);
    let mut y = Vec::new();
    realize_into(&xs, model, rounding, &mut replicate_rng(seed, 0), &mut y)?;
    Ok(RealizedAudit { pop, y, model: *model, seed })
}

/// Exactly `errors` claims, chosen uniformly, disallowed in full.
pub fn gen_all_or_nothing(pop: &ClaimPopulation, errors: u64, seed: u64) -> Result<RealizedAudit<'_>> {
    realize(pop, &ErrorModel::AllOrNothing { errors }, Rounding::Exact, seed)
}

/// One audit under a scenario, partial amounts rounded to cents.
pub fn gen_scenario(pop: &ClaimPopulation, spec: ScenarioSpec, seed: u64) -> Result<RealizedAudit<'_>> {
    realize(pop, &ErrorModel::Scenario(spec), Rounding::Cents, seed)
}
