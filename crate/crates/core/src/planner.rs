//! Sample sizes from variance estimates, and achieved margins back from
//! sample sizes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::population::ClaimPopulation;
use crate::scalar::Real;
use crate::variance::{
    conservative_partial, conservative_pi, var_conditional_expected, var_partial_bound,
    var_partial_expected, var_ratio_expected, ErrorRate, PartialErrorSpec, VarianceEstimate,
};

/// Plans below this size get a small-sample warning.
pub const SMALL_SAMPLE_WARNING: u64 = 30;
/// Plans expecting fewer sampled errors than this get a warning.
pub const FEW_ERRORS_WARNING: f64 = 10.0;

// Acklam's rational approximation to Φ⁻¹, relative error about 1e-9 before
// refinement.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const ACKLAM_LOW: f64 = 0.024_25;

fn acklam(p: f64) -> f64 {
    let (a, b, c, d) = (ACKLAM_A, ACKLAM_B, ACKLAM_C, ACKLAM_D);
    let tail = |q: f64| {
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    if p < ACKLAM_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - ACKLAM_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Φ⁻¹(p), accurate to about 1e-15 after one Halley step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("normal_quantile", format!("p = {p} is outside (0, 1)")));
    }
    let x = acklam(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided quantile z_{1−α/2} for a confidence level 1−α.
pub fn z_for_confidence(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(
            "confidence",
            format!("confidence {confidence} is outside (0, 1)"),
        ));
    }
    normal_quantile(0.5 + confidence / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// N·ȳ
    SimpleExpansion,
    /// (ȳ/x̄)·τx
    Ratio,
}

/// Where the planning variance comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSource<T> {
    Rate(ErrorRate<T>),
    /// Worst case over all error rates.
    Conservative,
    /// Partial-payment model; `exact` selects the expectation over the bound.
    Partial { spec: PartialErrorSpec<T>, exact: bool },
    /// Worst case over all partial-payment models.
    PartialConservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanRequest<T> {
    pub margin: T,
    pub confidence: T,
    pub estimator: EstimatorKind,
    pub source: VarianceSource<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlanWarning {
    /// The large-sample interval may not reach nominal coverage.
    SmallSample { n: u64 },
    /// Too few errors are expected in the sample for normality.
    FewExpectedErrors { expected: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan<T> {
    pub estimator: EstimatorKind,
    pub population: u64,
    /// Required sample size (smallest n meeting the margin, at most N).
    pub n: u64,
    /// Unrounded closed-form sample size.
    pub n_formula: T,
    pub variance_used: VarianceEstimate<T>,
    pub requested_margin: T,
    /// Margin of error at `n`, with finite population correction.
    pub achieved_margin: T,
    pub confidence: T,
    pub z: T,
    pub conservative: bool,
    pub warnings: Vec<PlanWarning>,
}

/// z·N·√(σ²/n · (N−n)/(N−1)).
pub fn margin_of_error<T: Real>(population: u64, n: u64, variance: T, confidence: T) -> Result<T> {
    if n == 0 || n > population {
        return Err(Error::domain(
            "margin_of_error",
            format!("need 1 ≤ n ≤ N, got n = {n}, N = {population}"),
        ));
    }
    let z = T::lit(z_for_confidence(confidence.as_f64())?);
    Ok(margin_with_z(population, n, variance, z))
}

fn margin_with_z<T: Real>(population: u64, n: u64, variance: T, z: T) -> T {
    if n >= population {
        return T::zero();
    }
    let big_n = T::count(population);
    let fpc = (big_n - T::count(n)) / (big_n - T::one());
    z * big_n * (variance / T::count(n) * fpc).sqrt()
}

/// Smallest n whose margin of error is at most `margin`.
pub fn sample_size<T: Real>(
    population: u64,
    variance: &VarianceEstimate<T>,
    margin: T,
    confidence: T,
) -> Result<SamplePlan<T>> {
    if !(margin > T::zero()) {
        return Err(Error::domain("sample_size", format!("margin {margin} must be positive")));
    }
    if population == 0 {
        return Err(Error::domain("sample_size", "empty population"));
    }
    let z = T::lit(z_for_confidence(confidence.as_f64())?);
    let sigma2 = variance.value;
    let base = SamplePlan {
        estimator: EstimatorKind::SimpleExpansion,
        population,
        n: 0,
        n_formula: T::zero(),
        variance_used: *variance,
        requested_margin: margin,
        achieved_margin: T::zero(),
        confidence,
        z,
        conservative: false,
        warnings: Vec::new(),
    };
    if sigma2 <= T::zero() {
        return Ok(base);
    }
    let big_n = T::count(population);
    let z2 = z * z;
    let n_formula = z2 * big_n.powi(3) * sigma2
        / (margin * margin * (big_n - T::one()) + z2 * big_n * big_n * sigma2);

    let mut n = n_formula.ceil().to_u64().unwrap_or(population).clamp(1, population);
    while n > 1 && margin_with_z(population, n - 1, sigma2, z) <= margin {
        n -= 1;
    }
    while n < population && margin_with_z(population, n, sigma2, z) > margin {
        n += 1;
    }
    Ok(SamplePlan {
        n,
        n_formula,
        achieved_margin: margin_with_z(population, n, sigma2, z),
        ..base
    })
}

/// Picks the variance estimate for the request and sizes the sample.
pub fn plan<T: Real>(pop: &ClaimPopulation, req: &PlanRequest<T>) -> Result<SamplePlan<T>> {
    let m = pop.moments::<T>();
    let (variance, pi_for_warning, conservative) = match (req.estimator, req.source) {
        (EstimatorKind::SimpleExpansion, VarianceSource::Rate(r)) => {
            (var_conditional_expected(&m, &r)?, r.pi(), false)
        }
        (EstimatorKind::SimpleExpansion, VarianceSource::Conservative) => {
            let c = conservative_pi(&m)?;
            (c.h_max, c.pi_crit.pi(), true)
        }
        (EstimatorKind::SimpleExpansion, VarianceSource::Partial { spec, exact }) => {
            let v = if exact { var_partial_expected(&m, &spec)? } else { var_partial_bound(&m, &spec)? };
            (v, spec.pi_total(), false)
        }
        (EstimatorKind::SimpleExpansion, VarianceSource::PartialConservative) => {
            let v = conservative_partial(&m)?;
            let pi = match v.input {
                crate::variance::VarianceInput::Rate { pi } => pi,
                _ => T::one(),
            };
            (v, pi, true)
        }
        (EstimatorKind::Ratio, VarianceSource::Rate(r)) => (var_ratio_expected(&m, &r)?, r.pi(), false),
        (EstimatorKind::Ratio, VarianceSource::Conservative) => {
            let half = ErrorRate::new(T::lit(0.5))?;
            (var_ratio_expected(&m, &half)?, half.pi(), true)
        }
        (EstimatorKind::Ratio, VarianceSource::Partial { .. } | VarianceSource::PartialConservative) => {
            return Err(Error::Unsupported(
                "no closed-form ratio variance under partial errors; use the simulation lab \
                 (mc_sigma_r_bands) instead"
                    .into(),
            ));
        }
    };
    let mut plan = sample_size(pop.len(), &variance, req.margin, req.confidence)?;
    plan.estimator = req.estimator;
    plan.conservative = conservative;
    if plan.n > 0 {
        if plan.n < SMALL_SAMPLE_WARNING {
            plan.warnings.push(PlanWarning::SmallSample { n: plan.n });
        }
        let expected = plan.n as f64 * pi_for_warning.as_f64();
        if expected < FEW_ERRORS_WARNING {
            plan.warnings.push(PlanWarning::FewExpectedErrors { expected });
        }
    }
    Ok(plan)
}
