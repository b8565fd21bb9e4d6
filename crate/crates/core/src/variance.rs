//! Estimators of the disallowed-amount variance σy² and the ratio residual
//! variance σR², with the error rates that maximize them.
//!
//! Everything here is a closed form over [`PopulationMoments`]; nothing
//! re-expands the claim multiset.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::population::PopulationMoments;
use crate::scalar::Real;

/// Relative slack, against μx^(2), below which a negative closed form is
/// treated as rounding and clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Error counts behind an exact rate Ne/N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExactRate {
    pub errors: u64,
    pub population: u64,
}

/// Fraction of claims in error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRate<T> {
    pi: T,
    exact: Option<ExactRate>,
}

/// Result of snapping a real rate onto the grid {0, 1/N, …, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateAdjustment<T> {
    pub requested: T,
    pub adjusted: T,
    pub errors: u64,
}

impl<T: Real> ErrorRate<T> {
    pub fn new(pi: T) -> Result<Self> {
        if !(pi >= T::zero() && pi <= T::one()) {
            return Err(Error::domain("error rate", format!("π = {pi} is outside [0, 1]")));
        }
        Ok(Self { pi, exact: None })
    }

    pub fn exact(errors: u64, population: u64) -> Result<Self> {
        if population == 0 || errors > population {
            return Err(Error::domain(
                "error rate",
                format!("need 0 ≤ Ne ≤ N with N ≥ 1, got Ne = {errors}, N = {population}"),
            ));
        }
        Ok(Self {
            pi: T::count(errors) / T::count(population),
            exact: Some(ExactRate { errors, population }),
        })
    }

    pub fn pi(&self) -> T {
        self.pi
    }

    pub fn exact_counts(&self) -> Option<ExactRate> {
        self.exact
    }

    /// Rounds Ne = round(πN) and returns the rate Ne/N.
    pub fn snapped(&self, population: u64) -> Result<(Self, RateAdjustment<T>)> {
        let errors = match self.exact {
            Some(e) if e.population == population => e.errors,
            _ => (self.pi * T::count(population)).round().to_u64().unwrap_or(0).min(population),
        };
        let rate = Self::exact(errors, population)?;
        Ok((rate, RateAdjustment { requested: self.pi, adjusted: rate.pi, errors }))
    }
}

/// Partial-payment model: T claims in error, p of them disallowed at fraction q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialErrorSpec<T> {
    pub population: u64,
    pub errors: u64,
    pub partial: u64,
    /// Disallowed fraction of a partially erroneous claim.
    pub q: T,
}

impl<T: Real> PartialErrorSpec<T> {
    pub fn from_counts(population: u64, errors: u64, partial: u64, q: T) -> Result<Self> {
        if population == 0 || errors > population || partial > errors {
            return Err(Error::domain(
                "partial error spec",
                format!("need p ≤ T ≤ N, got p = {partial}, T = {errors}, N = {population}"),
            ));
        }
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::domain("partial error spec", format!("q = {q} is outside (0, 1)")));
        }
        Ok(Self { population, errors, partial, q })
    }

    /// Rounds T = π_T·N and p = π_p·N to counts.
    pub fn from_rates(population: u64, pi_total: T, pi_partial: T, q: T) -> Result<Self> {
        if !(T::zero() <= pi_partial && pi_partial <= pi_total && pi_total <= T::one()) {
            return Err(Error::domain(
                "partial error spec",
                format!("need 0 ≤ π_p ≤ π_T ≤ 1, got π_p = {pi_partial}, π_T = {pi_total}"),
            ));
        }
        let n = T::count(population);
        let errors = (pi_total * n).round().to_u64().unwrap_or(0);
        let partial = (pi_partial * n).round().to_u64().unwrap_or(0).min(errors);
        Self::from_counts(population, errors, partial, q)
    }

    pub fn pi_total(&self) -> T {
        T::count(self.errors) / T::count(self.population)
    }

    pub fn pi_partial(&self) -> T {
        T::count(self.partial) / T::count(self.population)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    ConditionalExpected,
    Roberts,
    Total,
    PartialExpected,
    PartialBound,
    PartialConservative,
    RatioExpected,
    RatioPublished,
    RatioRoberts,
    RatioLargeN,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceInput<T> {
    Rate { pi: T },
    Partial(PartialErrorSpec<T>),
}

/// A variance (currency²) together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate<T> {
    pub value: T,
    pub method: VarianceMethod,
    pub input: VarianceInput<T>,
    /// Set when a slightly negative rounding result was clamped to zero.
    pub clamped: bool,
}

fn finish<T: Real>(
    op: &'static str,
    value: T,
    scale: T,
    method: VarianceMethod,
    input: VarianceInput<T>,
) -> Result<VarianceEstimate<T>> {
    if value >= T::zero() {
        return Ok(VarianceEstimate { value, method, input, clamped: false });
    }
    if value >= -T::lit(NEGATIVE_TOLERANCE) * scale.abs() {
        return Ok(VarianceEstimate { value: T::zero(), method, input, clamped: true });
    }
    Err(Error::NegativeVariance { op, value: value.as_f64() })
}

fn rate_input<T: Real>(pi: &ErrorRate<T>) -> VarianceInput<T> {
    VarianceInput::Rate { pi: pi.pi() }
}

/// σx²/(N−1); zero for a single-claim population (σx² is then zero too).
fn sigma2_over_n_minus_1<T: Real>(m: &PopulationMoments<T>) -> T {
    if m.n < 2 {
        T::zero()
    } else {
        m.sigma2_x / (m.n_real() - T::one())
    }
}

// The forms below are written as πσx² + π(1−π)(…) rather than
// πμx^(2) − (πμx)² − …; the two agree algebraically but the second cancels
// badly when σx² ≪ μx².

fn h_conditional<T: Real>(m: &PopulationMoments<T>, pi: T) -> T {
    pi * m.sigma2_x + pi * (T::one() - pi) * (m.mu_x * m.mu_x - sigma2_over_n_minus_1(m))
}

/// E(Var(Y | Xs)) under the hypergeometric all-or-nothing model:
/// πμx^(2) − (πμx)² − π(1−π)σx²/(N−1).
pub fn var_conditional_expected<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    let p = pi.pi();
    if m.n < 2 && p > T::zero() && p < T::one() {
        return Err(Error::domain(
            "var_conditional_expected",
            "a fractional error rate needs N ≥ 2",
        ));
    }
    finish(
        "var_conditional_expected",
        h_conditional(m, p),
        m.mu_x2,
        VarianceMethod::ConditionalExpected,
        rate_input(pi),
    )
}

/// Roberts' Bernoulli-model estimator:
/// πμx^(2) − (πμx)² − π(1−π)(σx² + μx²)/N.
pub fn var_roberts<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    let p = pi.pi();
    let v = p * m.sigma2_x + p * (T::one() - p) * (m.mu_x * m.mu_x - m.mu_x2 / m.n_real());
    finish("var_roberts", v, m.mu_x2, VarianceMethod::Roberts, rate_input(pi))
}

/// Total variance Var(Y) = πμx^(2) − (πμx)².
pub fn var_total<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    let p = pi.pi();
    let v = p * m.sigma2_x + p * (T::one() - p) * m.mu_x * m.mu_x;
    finish("var_total", v, m.mu_x2, VarianceMethod::Total, rate_input(pi))
}

/// Where the conservative maximum of h(π) was attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxAt {
    Zero,
    One,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservativePi<T> {
    /// Maximizing rate, clamped to [0, 1].
    pub pi_crit: ErrorRate<T>,
    /// Exact stationary point before clamping; `None` when the denominator
    /// vanished and only the endpoints were compared.
    pub unclamped: Option<T>,
    /// μx^(2) / (2μx²)
    pub approx: T,
    pub h_max: VarianceEstimate<T>,
    pub attained_at: MaxAt,
    pub endpoint_fallback: bool,
}

/// Maximizes the conditional-expected variance over π ∈ [0, 1].
pub fn conservative_pi<T: Real>(m: &PopulationMoments<T>) -> Result<ConservativePi<T>> {
    if m.n < 2 {
        return Err(Error::domain("conservative_pi", "needs N ≥ 2"));
    }
    let s = sigma2_over_n_minus_1(m);
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let approx = m.mu_x2 / (two * m.mu_x * m.mu_x);
    let denom = m.mu_x * m.mu_x - s;
    let unclamped = if denom != T::zero() { Some(half * (m.mu_x2 - s) / denom) } else { None };

    let h1 = h_conditional(m, T::one());
    let (mut best_pi, mut best_h, mut at) = (T::one(), h1, MaxAt::One);
    if T::zero() > best_h {
        (best_pi, best_h, at) = (T::zero(), T::zero(), MaxAt::Zero);
    }
    if let Some(c) = unclamped {
        if c > T::zero() && c < T::one() {
            let hc = h_conditional(m, c);
            if hc >= best_h {
                (best_pi, best_h, at) = (c, hc, MaxAt::Critical);
            }
        }
    }
    let pi_crit = ErrorRate::new(best_pi)?;
    let h_max = finish(
        "conservative_pi",
        best_h,
        m.mu_x2,
        VarianceMethod::ConditionalExpected,
        rate_input(&pi_crit),
    )?;
    Ok(ConservativePi {
        pi_crit,
        unclamped,
        approx,
        h_max,
        attained_at: at,
        endpoint_fallback: unclamped.is_none(),
    })
}

/// E(w²) − E(w)² for w = 1 on full errors, q on partial ones, 0 elsewhere.
fn partial_spread<T: Real>(pi_t: T, pi_p: T, q: T) -> T {
    let one = T::one();
    let full = pi_t - pi_p;
    full * (one - full) + pi_p * q * q * (one - pi_p) - T::lit(2.0) * full * pi_p * q
}

/// E(Var(Y | X_T, X_p)) under the fixed-proportion partial-payment model.
pub fn var_partial_expected<T: Real>(
    m: &PopulationMoments<T>,
    spec: &PartialErrorSpec<T>,
) -> Result<VarianceEstimate<T>> {
    let input = VarianceInput::Partial(*spec);
    if spec.errors == 0 {
        return Ok(VarianceEstimate {
            value: T::zero(),
            method: VarianceMethod::PartialExpected,
            input,
            clamped: false,
        });
    }
    if m.n < 2 {
        return Err(Error::domain("var_partial_expected", "needs N ≥ 2"));
    }
    let one = T::one();
    let n = m.n_real();
    let t = T::count(spec.errors);
    let p = T::count(spec.partial);
    let (pi_t, pi_p, q) = (spec.pi_total(), spec.pi_partial(), spec.q);

    // a = E(w²), b = E(w) for the disallowed fraction w ∈ {0, q, 1}.
    let a = pi_t - pi_p * (one - q * q);
    let b = pi_t - pi_p * (one - q);
    let spread = partial_spread(pi_t, pi_p, q);
    // Var of the partial-subset mean within the error set, averaged over error sets.
    let within = if spec.partial == 0 {
        T::zero()
    } else {
        (pi_p * (one - q)).powi(2) * (one - p / t) / p * (n / (n - one)) * m.sigma2_x
    };
    let error_set_mean = b * b * m.sigma2_x / t * ((n - t) / (n - one));
    finish(
        "var_partial_expected",
        a * m.sigma2_x + spread * m.mu_x * m.mu_x - within - error_set_mean,
        m.mu_x2,
        VarianceMethod::PartialExpected,
        input,
    )
}

/// Upper bound on the partial-model variance that drops the σx²/(N−1) term:
/// [π_T − π_p(1−q²)]μx^(2) − [π_T − π_p(1−q)]²μx².
pub fn var_partial_bound<T: Real>(
    m: &PopulationMoments<T>,
    spec: &PartialErrorSpec<T>,
) -> Result<VarianceEstimate<T>> {
    let (pi_t, pi_p, q) = (spec.pi_total(), spec.pi_partial(), spec.q);
    let a = pi_t - pi_p * (T::one() - q * q);
    let v = a * m.sigma2_x + partial_spread(pi_t, pi_p, q) * m.mu_x * m.mu_x;
    finish(
        "var_partial_bound",
        v,
        m.mu_x2,
        VarianceMethod::PartialBound,
        VarianceInput::Partial(*spec),
    )
}

/// Worst case over every (π_T, π_p, q): π*μx^(2) − (π*)²μx² at
/// π* = min(μx^(2)/(2μx²), 1).
pub fn conservative_partial<T: Real>(m: &PopulationMoments<T>) -> Result<VarianceEstimate<T>> {
    let pi_star = (m.mu_x2 / (T::lit(2.0) * m.mu_x * m.mu_x)).min(T::one());
    let v = pi_star * m.sigma2_x + pi_star * (T::one() - pi_star) * m.mu_x * m.mu_x;
    finish(
        "conservative_partial",
        v,
        m.mu_x2,
        VarianceMethod::PartialConservative,
        VarianceInput::Rate { pi: pi_star },
    )
}

/// π-free factor K of the ratio residual variance, E(σR² | Xs) = π(1−π)K:
/// K = μx^(2) + N/(N−1)·(τx^(2)σx²/τx² − 2μ′₁₂/τx).
pub fn ratio_kernel<T: Real>(m: &PopulationMoments<T>) -> T {
    if m.n < 2 {
        return m.mu_x2;
    }
    let n = m.n_real();
    let correction = m.tau_x2 / (m.tau_x * m.tau_x) * m.sigma2_x - T::lit(2.0) * m.mu12 / m.tau_x;
    m.mu_x2 + n / (n - T::one()) * correction
}

fn ratio_guard<T: Real>(op: &'static str, m: &PopulationMoments<T>) -> Result<()> {
    if m.tau_x > T::zero() {
        Ok(())
    } else {
        Err(Error::domain(op, "needs τx > 0"))
    }
}

/// E(σR² | Xs), the exact expectation of the realized ratio residual variance
/// over all error subsets of size Ne = πN.
pub fn var_ratio_expected<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    ratio_guard("var_ratio_expected", m)?;
    let p = pi.pi();
    let v = p * (T::one() - p) * ratio_kernel(m);
    finish("var_ratio_expected", v, m.mu_x2, VarianceMethod::RatioExpected, rate_input(pi))
}

/// The published form of the ratio estimator, without the N/(N−1) factor on
/// the correction terms. Agrees with [`var_ratio_expected`] to O(1/N).
pub fn var_ratio_published<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    ratio_guard("var_ratio_published", m)?;
    let p = pi.pi();
    let kernel = m.mu_x2 + m.tau_x2 / (m.tau_x * m.tau_x) * m.sigma2_x
        - T::lit(2.0) * m.mu12 / m.tau_x;
    let v = p * (T::one() - p) * kernel;
    finish("var_ratio_published", v, m.mu_x2, VarianceMethod::RatioPublished, rate_input(pi))
}

/// Roberts' binomial-model analog, written in terms of the coefficient of
/// variation and the skewness G₁.
pub fn var_ratio_roberts<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    if m.sigma2_x <= T::zero() {
        return Err(Error::domain(
            "var_ratio_roberts",
            "σx² = 0 makes G₁ undefined; use var_ratio_expected",
        ));
    }
    let one = T::one();
    let p = pi.pi();
    let cv2 = m.sigma2_x / (m.mu_x * m.mu_x);
    let inv_cv = m.mu_x / m.sigma2_x.sqrt();
    let bracket = cv2 + T::lit(4.0) / (one + cv2) - m.g1 / (inv_cv * (one + inv_cv * inv_cv))
        - T::lit(5.0);
    let v = p * (one - p) * m.mu_x2 * (one + bracket / m.n_real());
    finish("var_ratio_roberts", v, m.mu_x2, VarianceMethod::RatioRoberts, rate_input(pi))
}

/// Large-population approximation π(1−π)μx^(2).
pub fn var_ratio_large_n<T: Real>(
    m: &PopulationMoments<T>,
    pi: &ErrorRate<T>,
) -> Result<VarianceEstimate<T>> {
    let p = pi.pi();
    finish(
        "var_ratio_large_n",
        p * (T::one() - p) * m.mu_x2,
        m.mu_x2,
        VarianceMethod::RatioLargeN,
        rate_input(pi),
    )
}
