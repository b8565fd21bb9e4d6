//! Claim populations in run-length form and the population constants the
//! variance formulas consume.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

/// A currency amount in integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cents(pub i64);

impl Cents {
    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    /// Nearest cent to a dollar value, ties to even.
    pub fn from_dollars(v: f64) -> Cents {
        Cents((v * 100.0).round_ties_even() as i64)
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", a / 100, a % 100)
    }
}

/// Parses a plain decimal with at most two fractional digits.
///
/// No sign, exponent or thousands separators are accepted; the digits left of
/// the point are mandatory.
impl FromStr for Cents {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty amount".into());
        }
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, Some(f)),
            None => (s, None),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("malformed decimal amount {s:?}"));
        }
        let frac_cents = match frac {
            None => 0,
            Some(f) if f.is_empty() || f.len() > 2 || !f.bytes().all(|b| b.is_ascii_digit()) => {
                return Err(format!("malformed decimal amount {s:?} (at most two decimal places)"));
            }
            Some(f) => {
                let v: i64 = f.parse().map_err(|_| format!("malformed decimal amount {s:?}"))?;
                if f.len() == 1 { v * 10 } else { v }
            }
        };
        let whole: i64 = whole.parse().map_err(|_| format!("amount {s:?} out of range"))?;
        whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac_cents))
            .map(Cents)
            .ok_or_else(|| format!("amount {s:?} out of range"))
    }
}

/// One run of identical claim amounts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub amount: Cents,
    pub count: u64,
}

/// Known claim amounts, canonical run-length form.
///
/// Amounts are strictly increasing and positive, counts are at least one, and
/// the totals are exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClaimPopulation {
    runs: Vec<Run>,
    len: u64,
    total: i128,
    total_squares: i128,
}

/// Input layout for [`ClaimPopulation::load`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// One amount per line, optional header `amount`.
    Plain,
    /// `amount,count` per line, optional header `amount,count`.
    RunLength,
}

impl ClaimPopulation {
    /// Builds the canonical form from arbitrary (amount, count) pairs:
    /// sorted, merged, validated.
    pub fn from_runs<I: IntoIterator<Item = (Cents, u64)>>(runs: I) -> Result<Self> {
        let mut raw: Vec<(Cents, u64)> = runs.into_iter().collect();
        if raw.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        for &(a, c) in &raw {
            if a.0 <= 0 {
                return Err(Error::InvalidPopulation(format!("non-positive amount {a}")));
            }
            if c == 0 {
                return Err(Error::InvalidPopulation(format!("count < 1 for amount {a}")));
            }
        }
        raw.sort_unstable_by_key(|&(a, _)| a);
        let mut merged: Vec<Run> = Vec::with_capacity(raw.len());
        for (amount, count) in raw {
            match merged.last_mut() {
                Some(last) if last.amount == amount => {
                    last.count = last.count.checked_add(count).ok_or_else(overflow)?;
                }
                _ => merged.push(Run { amount, count }),
            }
        }
        Self::from_canonical(merged)
    }

    pub fn from_amounts<I: IntoIterator<Item = Cents>>(amounts: I) -> Result<Self> {
        Self::from_runs(amounts.into_iter().map(|a| (a, 1)))
    }

    /// Convenience constructor rounding dollar values to cents.
    pub fn from_dollars(values: &[f64]) -> Result<Self> {
        Self::from_amounts(values.iter().map(|&v| Cents::from_dollars(v)))
    }

    fn from_canonical(runs: Vec<Run>) -> Result<Self> {
        let mut len: u64 = 0;
        let mut total: i128 = 0;
        let mut total_squares: i128 = 0;
        for r in &runs {
            let a = r.amount.0 as i128;
            let c = r.count as i128;
            len = len.checked_add(r.count).ok_or_else(overflow)?;
            total = a.checked_mul(c).and_then(|v| v.checked_add(total)).ok_or_else(overflow)?;
            total_squares = a
                .checked_mul(a)
                .and_then(|v| v.checked_mul(c))
                .and_then(|v| v.checked_add(total_squares))
                .ok_or_else(overflow)?;
        }
        Ok(Self { runs, len, total, total_squares })
    }

    /// Reads a population from delimited text. Errors carry the 1-based line.
    pub fn load<R: BufRead>(reader: R, format: InputFormat) -> Result<Self> {
        let mut raw = Vec::new();
        let mut seen_record = false;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse { line: lineno, message: e.to_string() })?;
            let line = line.trim_start_matches('\u{feff}').trim();
            if line.is_empty() {
                continue;
            }
            if !seen_record {
                seen_record = true;
                let header = line.to_ascii_lowercase();
                let is_header = match format {
                    InputFormat::Plain => header == "amount",
                    InputFormat::RunLength => {
                        header.split(',').map(str::trim).eq(["amount", "count"])
                    }
                };
                if is_header {
                    continue;
                }
            }
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            let (amount, count) = match format {
                InputFormat::Plain => {
                    if line.contains(',') {
                        return Err(parse_err(format!(
                            "unexpected ',' in {line:?} (thousands separators are not accepted)"
                        )));
                    }
                    (line.parse::<Cents>().map_err(parse_err)?, 1u64)
                }
                InputFormat::RunLength => {
                    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                    if fields.len() != 2 {
                        return Err(parse_err(format!(
                            "expected amount,count but found {} fields in {line:?}",
                            fields.len()
                        )));
                    }
                    let amount = fields[0].parse::<Cents>().map_err(parse_err)?;
                    let count: i128 = fields[1]
                        .parse()
                        .map_err(|_| parse_err(format!("malformed count {:?}", fields[1])))?;
                    if count < 1 {
                        return Err(parse_err(format!("count {count} < 1")));
                    }
                    let count = u64::try_from(count)
                        .map_err(|_| parse_err(format!("count {count} out of range")))?;
                    (amount, count)
                }
            };
            if amount.0 <= 0 {
                return Err(parse_err(format!("non-positive amount {amount}")));
            }
            raw.push((amount, count));
        }
        if raw.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        Self::from_runs(raw)
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    /// Population size N.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn unique_count(&self) -> usize {
        self.runs.len()
    }

    /// Σ x in cents, exact.
    pub fn total_cents(&self) -> i128 {
        self.total
    }

    /// Σ x² in cents², exact.
    pub fn total_squares_cents(&self) -> i128 {
        self.total_squares
    }

    pub fn min_amount(&self) -> Cents {
        self.runs[0].amount
    }

    pub fn max_amount(&self) -> Cents {
        self.runs[self.runs.len() - 1].amount
    }

    /// Every claim in ascending order, one item per claim.
    pub fn expanded(&self) -> impl Iterator<Item = Cents> + '_ {
        self.runs.iter().flat_map(|r| std::iter::repeat_n(r.amount, r.count as usize))
    }

    /// The same multiset with every count multiplied by `k`.
    pub fn with_counts_scaled(&self, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidPopulation("count scale must be positive".into()));
        }
        let runs = self
            .runs
            .iter()
            .map(|r| r.count.checked_mul(k).map(|count| Run { amount: r.amount, count }))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(overflow)?;
        Self::from_canonical(runs)
    }

    /// All population constants, in dollars.
    pub fn moments<T: Real>(&self) -> PopulationMoments<T> {
        let n = T::count(self.len);
        let tau_x = T::lit(self.total as f64 / 100.0);
        let tau_x2 = T::lit(self.total_squares as f64 / 1.0e4);
        let mu_x = tau_x / n;
        let mu_x2 = tau_x2 / n;

        let mut s2 = CompensatedSum::new();
        let mut s3 = CompensatedSum::new();
        let mut s12 = CompensatedSum::new();
        let mut s22 = CompensatedSum::new();
        for r in &self.runs {
            let x = T::lit(r.amount.dollars());
            let c = T::count(r.count);
            let d = x - mu_x;
            let d2 = x * x - mu_x2;
            s2.add(c * d * d);
            s3.add(c * d * d * d);
            s12.add(c * d * d2);
            s22.add(c * d2 * d2);
        }
        let sigma2_x = (s2.value() / n).max(T::zero());
        let sigma2_x2 = (s22.value() / n).max(T::zero());
        let mu12 = s12.value() / n;
        let g1 = if sigma2_x > T::zero() {
            s3.value() / (n * sigma2_x * sigma2_x.sqrt())
        } else {
            T::zero()
        };
        PopulationMoments { n: self.len, mu_x, sigma2_x, mu_x2, tau_x, tau_x2, mu12, sigma2_x2, g1 }
    }
}

fn overflow() -> Error {
    Error::InvalidPopulation("population totals overflow".into())
}

/// Population constants, all variances with the divide-by-N convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationMoments<T> {
    pub n: u64,
    /// μx
    pub mu_x: T,
    /// σx²
    pub sigma2_x: T,
    /// μx^(2), mean of squares
    pub mu_x2: T,
    /// τx
    pub tau_x: T,
    /// τx^(2), total of squares
    pub tau_x2: T,
    /// μ′₁₂ = (1/N) Σ (x − μx)(x² − μx^(2))
    pub mu12: T,
    /// σx^(2)², variance of the squared amounts
    pub sigma2_x2: T,
    /// Skewness G₁; zero for a constant population.
    pub g1: T,
}

impl<T: Real> PopulationMoments<T> {
    pub fn n_real(&self) -> T {
        T::count(self.n)
    }

    /// Coefficient of variation σx/μx.
    pub fn cv(&self) -> T {
        self.sigma2_x.sqrt() / self.mu_x
    }
}
