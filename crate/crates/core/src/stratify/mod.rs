//! Two-strata designs ordered by claim amount.
//!
//! The search minimizes Σ N_h σ_yh, which under optimal allocation is
//! √n times the standard error of the stratified estimator. All candidate
//! boundaries between distinct amounts are scanned with exact prefix totals.
//! Within a run of repeated amounts, the simple-expansion objective is only
//! evaluated at the endpoints and at the integer neighbours of the roots of a
//! quadratic; the ratio objective is evaluated at every split.

mod allocation;
mod cum_sqrt_f;
mod run_search;

pub use allocation::{optimal_allocation, stratified_variance, Allocation, StratumSpec};
pub use cum_sqrt_f::cum_sqrt_f;
pub use run_search::{
    quadratic_coefficients, ratio_term, real_roots, run_candidates, simple_term, split_objective, Segment, Totals,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::planner::{z_for_confidence, EstimatorKind};
use crate::population::{Cents, ClaimPopulation};
use crate::variance::ErrorRate;

/// Stratum 1 is every run before `run` plus the first `split` claims of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Boundary {
    pub run: usize,
    pub split: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumStats {
    pub count: u64,
    pub sum_cents: i128,
    pub sum_sq_cents: i128,
    /// Modeled standard deviation of the disallowed amounts, dollars.
    pub sigma_y: f64,
}

impl StratumStats {
    pub fn spec(&self) -> StratumSpec {
        StratumSpec { size: self.count, sigma: self.sigma_y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratification {
    pub kind: EstimatorKind,
    pub pi: f64,
    pub boundary: Boundary,
    /// Largest claim amount in stratum 1.
    pub upper_amount: Cents,
    pub strata: [StratumStats; 2],
    /// Σ N_h σ_yh, dollars.
    pub objective: f64,
    /// The population has a single distinct amount.
    pub degenerate: bool,
    pub candidates_evaluated: u64,
}

impl Stratification {
    pub fn specs(&self) -> [StratumSpec; 2] {
        [self.strata[0].spec(), self.strata[1].spec()]
    }

    /// Standard error of the estimated total for an optimally allocated
    /// sample of `n` claims, with finite population correction.
    pub fn stderr(&self, n: u64) -> Result<f64> {
        let alloc = optimal_allocation(&self.specs(), n)?;
        Ok(stratified_variance(&self.specs(), &alloc.sizes)?.sqrt())
    }
}

struct Search<'a> {
    pop: &'a ClaimPopulation,
    prefix: Vec<Totals>,
    kind: EstimatorKind,
    pi: f64,
}

impl<'a> Search<'a> {
    fn new(pop: &'a ClaimPopulation, pi: &ErrorRate<f64>, kind: EstimatorKind) -> Result<Self> {
        if pop.len() < 2 {
            return Err(Error::domain("stratify", "need at least 2 claims"));
        }
        let mut prefix = vec![Totals { sum_cube: Some(0), ..Totals::default() }];
        for run in pop.runs() {
            let next = prefix.last().expect("seeded").plus(&Totals::of_run(run, run.count)?)?;
            prefix.push(next);
        }
        Ok(Self { pop, prefix, kind, pi: pi.pi() })
    }

    fn total(&self) -> &Totals {
        self.prefix.last().expect("seeded")
    }

    fn lower(&self, b: Boundary) -> Result<Totals> {
        self.prefix[b.run].plus(&Totals::of_run(&self.pop.runs()[b.run.min(self.pop.runs().len() - 1)], b.split)?)
    }

    /// Per-stratum Σ terms; π-free for the ratio kind.
    fn terms(&self, lower: &Totals) -> Result<[f64; 2]> {
        let upper = self.total().minus(lower)?;
        Ok(match self.kind {
            EstimatorKind::SimpleExpansion => [simple_term(lower, self.pi), simple_term(&upper, self.pi)],
            EstimatorKind::Ratio => [ratio_term(lower)?, ratio_term(&upper)?],
        })
    }

    fn ratio_factor(&self) -> f64 {
        (self.pi * (1.0 - self.pi)).sqrt()
    }

    fn build(&self, b: Boundary, candidates_evaluated: u64) -> Result<Stratification> {
        let runs = self.pop.runs();
        let lower = self.lower(b)?;
        let upper = self.total().minus(&lower)?;
        if lower.count == 0 || upper.count == 0 {
            return Err(Error::domain("stratify", "both strata must contain claims"));
        }
        let mut terms = self.terms(&lower)?;
        if self.kind == EstimatorKind::Ratio {
            let f = self.ratio_factor();
            terms.iter_mut().for_each(|t| *t *= f);
        }
        let stats = |t: &Totals, term: f64| StratumStats {
            count: t.count,
            sum_cents: t.sum,
            sum_sq_cents: t.sum_sq,
            sigma_y: term / t.count as f64,
        };
        let upper_amount = if b.split > 0 { runs[b.run].amount } else { runs[b.run - 1].amount };
        Ok(Stratification {
            kind: self.kind,
            pi: self.pi,
            boundary: b,
            upper_amount,
            strata: [stats(&lower, terms[0]), stats(&upper, terms[1])],
            objective: terms[0] + terms[1],
            degenerate: runs.len() == 1,
            candidates_evaluated,
        })
    }
}

/// Exact optimal two-strata design for the given estimator.
pub fn optimal_two_strata(
    pop: &ClaimPopulation,
    pi: &ErrorRate<f64>,
    kind: EstimatorKind,
    allow_run_split: bool,
) -> Result<Stratification> {
    let s = Search::new(pop, pi, kind)?;
    let runs = pop.runs();
    let last = runs.len() - 1;
    let mut best: Option<(f64, Boundary)> = None;
    let mut evaluated = 0u64;
    let mut consider = |b: Boundary, lower: &Totals| -> Result<()> {
        let [a, c] = s.terms(lower)?;
        let v = a + c;
        evaluated += 1;
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, b));
        }
        Ok(())
    };
    for (j, run) in runs.iter().enumerate() {
        if j > 0 {
            consider(Boundary { run: j, split: 0 }, &s.prefix[j])?;
        }
        if !allow_run_split || run.count < 2 {
            continue;
        }
        let splits: Vec<u64> = match kind {
            EstimatorKind::Ratio => (1..run.count).collect(),
            EstimatorKind::SimpleExpansion => {
                let suffix = s.total().minus(&s.prefix[j + 1])?;
                let mut ks = run_candidates(&s.prefix[j], run, &suffix, s.pi);
                if j == 0 {
                    ks.push(1);
                }
                if j == last {
                    ks.push(run.count - 1);
                }
                ks.retain(|&k| k > 0 && k < run.count);
                ks.sort_unstable();
                ks.dedup();
                ks
            }
        };
        for k in splits {
            let b = Boundary { run: j, split: k };
            consider(b, &s.lower(b)?)?;
        }
    }
    let boundary = best.map(|(_, b)| b).unwrap_or(Boundary { run: 0, split: 1 });
    s.build(boundary, evaluated)
}

/// The design with stratum 1 holding every claim of at most `breakpoint`.
pub fn stratification_at(
    pop: &ClaimPopulation,
    pi: &ErrorRate<f64>,
    kind: EstimatorKind,
    breakpoint: Cents,
) -> Result<Stratification> {
    let s = Search::new(pop, pi, kind)?;
    let j = pop.runs().partition_point(|r| r.amount <= breakpoint);
    s.build(Boundary { run: j, split: 0 }, 1)
}

/// N σ_y of the unstratified design under the same variance model.
pub fn srs_objective(pop: &ClaimPopulation, pi: &ErrorRate<f64>, kind: EstimatorKind) -> Result<f64> {
    let s = Search::new(pop, pi, kind)?;
    Ok(match kind {
        EstimatorKind::SimpleExpansion => simple_term(s.total(), s.pi),
        EstimatorKind::Ratio => ratio_term(s.total())? * s.ratio_factor(),
    })
}

/// Smallest stratum sample kept when allocating, so that each stratum's
/// variance can be estimated from its sample.
pub const MIN_STRATUM_SAMPLE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedPlan {
    /// ⌈z² (Σ N_h σ_yh)² / E²⌉.
    pub n_formula: u64,
    /// Total sample after allocation adjustments. Usually below `n_formula`,
    /// which ignores the finite population correction.
    pub n: u64,
    pub allocation: Allocation,
    pub requested_margin: f64,
    /// z (Σ N_h σ_yh)/√n_formula.
    pub formula_margin: f64,
    /// z √Var with finite population correction at the final allocation.
    pub achieved_margin: f64,
    pub confidence: f64,
    pub z: f64,
    /// Some stratum was raised to the minimum sample.
    pub minimum_applied: bool,
}

/// Smallest total sample whose optimally allocated stratified design, with
/// finite population correction, meets the margin.
pub fn stratified_sample_size(strat: &Stratification, margin: f64, confidence: f64) -> Result<StratifiedPlan> {
    if !(margin > 0.0) {
        return Err(Error::domain("stratified_sample_size", format!("margin {margin} must be positive")));
    }
    let z = z_for_confidence(confidence)?;
    let specs = strat.specs();
    let big_n: u64 = specs.iter().map(|s| s.size).sum();
    let zero = StratifiedPlan {
        n_formula: 0,
        n: 0,
        allocation: Allocation { sizes: vec![0; specs.len()], proportional_fallback: false },
        requested_margin: margin,
        formula_margin: 0.0,
        achieved_margin: 0.0,
        confidence,
        z,
        minimum_applied: false,
    };
    if strat.objective == 0.0 {
        return Ok(zero);
    }
    let n_formula = ((z * strat.objective / margin).powi(2).ceil() as u64).clamp(1, big_n);
    let evaluate = |n: u64| -> Result<(Allocation, bool, f64)> {
        let mut allocation = optimal_allocation(&specs, n)?;
        let mut minimum_applied = false;
        for (size, s) in allocation.sizes.iter_mut().zip(&specs) {
            let floor = MIN_STRATUM_SAMPLE.min(s.size);
            if *size < floor {
                *size = floor;
                minimum_applied = true;
            }
        }
        let achieved = z * stratified_variance(&specs, &allocation.sizes)?.sqrt();
        Ok((allocation, minimum_applied, achieved))
    };
    let meets = |n: u64| -> Result<bool> {
        let (a, _, achieved) = evaluate(n)?;
        Ok(achieved <= margin || a.sizes.iter().sum::<u64>() >= big_n)
    };
    // The census always meets the margin; bisect for the first n that does.
    let (mut lo, mut hi) = (1, big_n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if meets(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let (allocation, minimum_applied, achieved) = evaluate(lo)?;
    Ok(StratifiedPlan {
        n_formula,
        n: allocation.sizes.iter().sum(),
        allocation,
        formula_margin: z * strat.objective / (n_formula as f64).sqrt(),
        achieved_margin: achieved,
        minimum_applied,
        ..zero
    })
}
