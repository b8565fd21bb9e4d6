//! Per-stratum objective terms and the quadratic that locates the best split
//! inside a run of repeated amounts.
//!
//! Two strata are a prefix block (count N, totals τx, τx^(2)), k copies of a
//! repeated amount y, then n′ − k copies of y followed by a suffix block
//! (M, τz, τz^(2)). With the simple-expansion objective
//! √(π(Nτ2 − πτ²)) summed over strata, setting the derivative in k to zero
//! and squaring twice leaves a quadratic in k.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::population::Run;

/// Exact integer totals of a block of claims, in cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub count: u64,
    pub sum: i128,
    pub sum_sq: i128,
    /// Sum of cubes; `None` if it overflows.
    pub sum_cube: Option<i128>,
}

fn overflow() -> Error {
    Error::Unsupported("claim totals overflow 128-bit arithmetic".into())
}

impl Totals {
    pub fn of_run(run: &Run, count: u64) -> Result<Self> {
        let a = run.amount.0 as i128;
        let c = count as i128;
        let sum = a.checked_mul(c).ok_or_else(overflow)?;
        let sum_sq = a.checked_mul(a).and_then(|s| s.checked_mul(c)).ok_or_else(overflow)?;
        let sum_cube = a.checked_mul(a).and_then(|s| s.checked_mul(a)).and_then(|s| s.checked_mul(c));
        Ok(Self { count, sum, sum_sq, sum_cube })
    }

    pub fn plus(&self, o: &Self) -> Result<Self> {
        Ok(Self {
            count: self.count.checked_add(o.count).ok_or_else(overflow)?,
            sum: self.sum.checked_add(o.sum).ok_or_else(overflow)?,
            sum_sq: self.sum_sq.checked_add(o.sum_sq).ok_or_else(overflow)?,
            sum_cube: self.sum_cube.zip(o.sum_cube).and_then(|(a, b)| a.checked_add(b)),
        })
    }

    pub fn minus(&self, o: &Self) -> Result<Self> {
        Ok(Self {
            count: self.count.checked_sub(o.count).ok_or_else(overflow)?,
            sum: self.sum.checked_sub(o.sum).ok_or_else(overflow)?,
            sum_sq: self.sum_sq.checked_sub(o.sum_sq).ok_or_else(overflow)?,
            sum_cube: self.sum_cube.zip(o.sum_cube).and_then(|(a, b)| a.checked_sub(b)),
        })
    }

    /// N·τ2 − τ² = N²σ², exactly when it fits.
    fn spread(&self) -> f64 {
        let n = self.count as i128;
        n.checked_mul(self.sum_sq)
            .zip(self.sum.checked_mul(self.sum))
            .and_then(|(a, b)| a.checked_sub(b))
            .map(|d| d as f64)
            .unwrap_or_else(|| self.count as f64 * self.sum_sq as f64 - (self.sum as f64).powi(2))
    }
}

/// N_h σ_yh in dollars for the simple-expansion model:
/// √(π(N τ2 − π τ²)) with totals in cents.
pub fn simple_term(t: &Totals, pi: f64) -> f64 {
    if t.count == 0 {
        return 0.0;
    }
    let tau = t.sum as f64;
    (pi * (t.spread() + (1.0 - pi) * tau * tau)).max(0.0).sqrt() / 100.0
}

/// N_h √K_h in dollars, where π(1−π)K_h is the expected ratio residual
/// variance of the stratum; the π factor is left out.
pub fn ratio_term(t: &Totals) -> Result<f64> {
    // A lone claim is fitted exactly by R = y/x.
    if t.count < 2 {
        return Ok(0.0);
    }
    let n = t.count as f64;
    let cube = t.sum_cube.ok_or_else(overflow)?;
    // N τ3 − τ τ2 = N² μ12.
    let skew = (t.count as i128)
        .checked_mul(cube)
        .zip(t.sum.checked_mul(t.sum_sq))
        .and_then(|(a, b)| a.checked_sub(b))
        .map(|d| d as f64)
        .unwrap_or_else(|| n * cube as f64 - t.sum as f64 * t.sum_sq as f64);
    let (tau, tau2) = (t.sum as f64, t.sum_sq as f64);
    let k = tau2 / n + n / (n - 1.0) * (tau2 * t.spread() / (tau * tau) - 2.0 * skew / tau) / (n * n);
    Ok(n * k.max(0.0).sqrt() / 100.0)
}

/// Block totals in any number type.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub count: T,
    pub sum: T,
    pub sum_sq: T,
}

impl Segment<BigRational> {
    fn exact(t: &Totals) -> Self {
        let r = |v: i128| BigRational::from_integer(BigInt::from(v));
        Self { count: r(t.count as i128), sum: r(t.sum), sum_sq: r(t.sum_sq) }
    }
}

/// The five constants c₁…c₅ and the quadratic a k² + b k + c whose roots
/// are the stationary points of the two-strata objective in k.
pub fn quadratic_coefficients<T: Num + Clone>(
    prefix: &Segment<T>,
    y: &T,
    run: &T,
    suffix: &Segment<T>,
    pi: &T,
) -> [T; 3] {
    let one = T::one();
    let two = one.clone() + one.clone();
    let y2 = y.clone() * y.clone();
    let (n, tx, tx2) = (&prefix.count, &prefix.sum, &prefix.sum_sq);
    let (m, tz, tz2) = (&suffix.count, &suffix.sum, &suffix.sum_sq);

    let c1 = tx2.clone() + n.clone() * y2.clone() - two.clone() * pi.clone() * tx.clone() * y.clone();
    let tz_run = tz.clone() + run.clone() * y.clone();
    let c2 = tz2.clone() + m.clone() * y2.clone() + two.clone() * run.clone() * y2.clone()
        - two.clone() * pi.clone() * y.clone() * tz_run.clone();
    let c3 = two.clone() * y2.clone() * (one.clone() - pi.clone());
    let c4 = (m.clone() + run.clone()) * (tz2.clone() + run.clone() * y2.clone())
        - pi.clone() * tz_run.clone() * tz_run;
    let c5 = n.clone() * tx2.clone() - pi.clone() * tx.clone() * tx.clone();

    let sq = |v: &T| v.clone() * v.clone();
    let a = c3.clone() / two.clone()
        * (sq(&c1) - sq(&c2) + two.clone() * c3.clone() * (c4.clone() - c5.clone()));
    let b = T::zero() - c1.clone() * c2.clone() * (c1.clone() + c2.clone())
        + two * c3 * (c1.clone() * c4.clone() + c2.clone() * c5.clone());
    let c = sq(&c1) * c4 - sq(&c2) * c5;
    [a, b, c]
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Real roots of a k² + b k + c with exact coefficients, found with the
/// cancellation-free pair −(b + sign(b)√disc)/2a and c/q.
pub fn real_roots(coef: &[BigRational; 3]) -> Vec<f64> {
    let [a, b, c] = coef;
    if a.is_zero() {
        return if b.is_zero() { vec![] } else { vec![to_f64(&(-(c / b)))] };
    }
    let disc = b * b - BigRational::from_integer(4.into()) * a * c;
    if disc.is_negative() {
        return vec![];
    }
    let scale = [a.abs(), b.abs(), c.abs()].into_iter().max().expect("three values");
    let (af, bf, cf) = (to_f64(&(a / &scale)), to_f64(&(b / &scale)), to_f64(&(c / &scale)));
    let root_disc = to_f64(&(disc / (&scale * &scale))).sqrt();
    let q = -0.5 * (bf + if bf < 0.0 { -root_disc } else { root_disc });
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / af, cf / q]
}

/// Integer splits k of the run worth evaluating besides 0 and n′: the floor
/// and ceiling of every stationary point strictly inside (0, n′).
pub fn run_candidates(prefix: &Totals, run: &Run, suffix: &Totals, pi: f64) -> Vec<u64> {
    let len = run.count;
    if len == 0 || !(pi > 0.0 && pi <= 1.0) {
        return vec![];
    }
    let big = |v: i128| BigRational::from_integer(BigInt::from(v));
    let pi = BigRational::from_float(pi).expect("finite rate");
    let coef = quadratic_coefficients(
        &Segment::exact(prefix),
        &big(run.amount.0 as i128),
        &big(len as i128),
        &Segment::exact(suffix),
        &pi,
    );
    let mut out: Vec<u64> = real_roots(&coef)
        .into_iter()
        .filter(|r| r.is_finite() && *r > 0.0 && *r < len as f64)
        .flat_map(|r| [r.floor() as u64, r.ceil() as u64])
        .map(|k| k.min(len))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Simple-expansion objective when the first k copies of the run join the
/// prefix stratum.
pub fn split_objective(prefix: &Totals, run: &Run, k: u64, suffix: &Totals, pi: f64) -> Result<f64> {
    let lower = prefix.plus(&Totals::of_run(run, k)?)?;
    let upper = suffix.plus(&Totals::of_run(run, run.count - k)?)?;
    Ok(simple_term(&lower, pi) + simple_term(&upper, pi))
}
