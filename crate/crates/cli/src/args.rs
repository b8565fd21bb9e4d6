use std::path::PathBuf;
use std::str::FromStr;

use audit_design::sim::{NamedScenario, PartialProportion};
use audit_design::EstimatorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::report::OutFormat;

#[derive(Debug, Parser)]
#[command(name = "audit-design", version, about = "Sample size, estimator choice and stratification for claim audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Population size, totals and moments.
    Summarize(SummarizeArgs),
    /// Sample sizes for a margin of error, one row per error rate.
    Plan(PlanArgs),
    /// Confidence that the ratio estimator beats simple expansion.
    Choose(ChooseArgs),
    /// Optimal two-strata designs against cum √f and unstratified sampling.
    Stratify(StratifyArgs),
    /// Monte Carlo bands of the ratio residual variance, and interval coverage.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    RunLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    SimpleExpansion,
    Ratio,
}

impl From<Estimator> for EstimatorKind {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::SimpleExpansion => EstimatorKind::SimpleExpansion,
            Estimator::Ratio => EstimatorKind::Ratio,
        }
    }
}

/// A built-in synthetic population, `name[:seed]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Synthetic {
    pub neter: bool,
    pub seed: u64,
}

impl FromStr for Synthetic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, seed) = match s.split_once(':') {
            Some((n, seed)) => (n, seed.parse().map_err(|_| format!("bad seed {seed:?}"))?),
            None => (s, 1),
        };
        match name {
            "edwards-like" => Ok(Self { neter: false, seed }),
            "neter-like" => Ok(Self { neter: true, seed }),
            _ => Err(format!("unknown population {name:?}; use edwards-like or neter-like")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Claim amounts file.
    #[arg(long, value_name = "PATH", required_unless_present = "synthetic")]
    pub input: Option<PathBuf>,
    /// Built-in population instead of a file: edwards-like or neter-like, optionally `:SEED`.
    #[arg(long, value_name = "NAME[:SEED]", conflicts_with = "input")]
    pub synthetic: Option<Synthetic>,
    /// Layout of the input file.
    #[arg(long, value_enum, default_value = "plain")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to a file instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    pub out_format: OutFormat,
}

/// Error rates: a single value or an inclusive `lo:hi:step` grid.
#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct RateArgs {
    #[arg(long)]
    pub pi: Option<Rate>,
    #[arg(long, value_name = "LO:HI:STEP")]
    pub pi_grid: Option<Grid>,
}

impl RateArgs {
    pub fn values(&self) -> Vec<f64> {
        match (&self.pi, &self.pi_grid) {
            (Some(p), _) => vec![p.0],
            (_, Some(g)) => g.0.clone(),
            _ => Vec::new(),
        }
    }

    pub fn is_given(&self) -> bool {
        self.pi.is_some() || self.pi_grid.is_some()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Rate(pub f64);

impl FromStr for Rate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("bad rate {s:?}"))?;
        if (0.0..=1.0).contains(&v) {
            Ok(Rate(v))
        } else {
            Err(format!("rate {v} is outside [0, 1]"))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts.as_slice() else {
            return Err(format!("expected lo:hi:step, got {s:?}"));
        };
        let (lo, hi) = (lo.parse::<Rate>()?.0, hi.parse::<Rate>()?.0);
        let step: f64 = step.parse().map_err(|_| format!("bad step {step:?}"))?;
        if !(step > 0.0) || lo > hi {
            return Err(format!("need lo ≤ hi and step > 0 in {s:?}"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as u64 + 1;
        // Rounded so that 0.05 + 5·0.05 prints as 0.3.
        Ok(Grid((0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Margin {
    Dollars(f64),
    /// Percent of the total claimed.
    Percent(f64),
}

impl Margin {
    pub fn dollars(self, tau_x: f64) -> f64 {
        match self {
            Margin::Dollars(d) => d,
            Margin::Percent(p) => p / 100.0 * tau_x,
        }
    }
}

impl FromStr for Margin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (body, pct) = match s.strip_suffix('%') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let v: f64 = body.trim().parse().map_err(|_| format!("bad margin {s:?}"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("margin {s:?} must be positive"));
        }
        Ok(if pct { Margin::Percent(v) } else { Margin::Dollars(v) })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Confidence(pub f64);

impl FromStr for Confidence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("bad confidence {s:?}"))?;
        if v > 0.0 && v < 1.0 {
            Ok(Confidence(v))
        } else {
            Err(format!("confidence {v} must be a level in (0, 1), e.g. 0.90"))
        }
    }
}

/// `pT,pP,q`: overall error rate, partial error rate, disallowed fraction.
#[derive(Debug, Clone, Copy)]
pub struct PartialArg {
    pub pi_total: f64,
    pub pi_partial: f64,
    pub q: f64,
}

impl FromStr for PartialArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in {s:?}")))
            .collect::<Result<_, _>>()?;
        let [pi_total, pi_partial, q] = v.as_slice() else {
            return Err(format!("expected pT,pP,q, got {s:?}"));
        };
        if !(0.0..=1.0).contains(pi_total) || !(0.0..=*pi_total).contains(pi_partial) || !(*q > 0.0 && *q < 1.0) {
            return Err(format!("need 0 ≤ pP ≤ pT ≤ 1 and 0 < q < 1 in {s:?}"));
        }
        Ok(Self { pi_total: *pi_total, pi_partial: *pi_partial, q: *q })
    }
}

/// `1` to `4`, or `FULL/Q` or `FULL/LO-HI` for a custom share of full errors
/// with the rest disallowed at a fixed or uniform fraction.
#[derive(Debug, Clone)]
pub struct ScenarioArg(pub NamedScenario);

impl FromStr for ScenarioArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Ok(n) = s.parse::<u8>() {
            return NamedScenario::numbered(n).map(ScenarioArg).map_err(|e| e.to_string());
        }
        let (full, q) = s.split_once('/').ok_or_else(|| format!("bad scenario {s:?}; use 1-4 or FULL/Q or FULL/LO-HI"))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number {v:?} in scenario {s:?}"));
        let full_fraction = num(full)?;
        let partial_q = match q.split_once('-') {
            Some((lo, hi)) => PartialProportion::Uniform { lo: num(lo)?, hi: num(hi)? },
            None => PartialProportion::Fixed(num(q)?),
        };
        let named = NamedScenario { name: s.to_string(), full_fraction, partial_q };
        // Validates the fraction and q range.
        named.at_rate(0.0).map_err(|e| e.to_string())?;
        Ok(ScenarioArg(named))
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Margin of error in dollars, or a percent of the total claimed such as `2%`.
    #[arg(long)]
    pub margin: Margin,
    #[arg(long, default_value = "0.90")]
    pub confidence: Confidence,
    #[arg(long, value_enum, default_value = "simple-expansion")]
    pub estimator: Estimator,
    #[command(flatten)]
    pub rates: RateArgs,
    /// Partial-payment model `pT,pP,q`.
    #[arg(long, value_name = "pT,pP,q", conflicts_with_all = ["pi", "pi_grid"])]
    pub partial: Option<PartialArg>,
    /// With --partial, plan from the upper bound instead of the exact expectation.
    #[arg(long, requires = "partial")]
    pub bound: bool,
}

#[derive(Debug, Args)]
pub struct ChooseArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub rates: RateArgs,
    /// Add a Monte Carlo column with this many error sets per rate.
    #[arg(long, requires = "seed")]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub rates: RateArgs,
    /// Estimator to design for; both when omitted.
    #[arg(long, value_enum)]
    pub estimator: Option<Estimator>,
    /// Also size the stratified samples for this margin.
    #[arg(long)]
    pub margin: Option<Margin>,
    #[arg(long, default_value = "0.90")]
    pub confidence: Confidence,
    /// Histogram bins for the cum √f rule.
    #[arg(long, default_value_t = 100)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Bands,
    Coverage,
    Both,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub rates: RateArgs,
    /// Comma-separated error scenarios.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub scenario: Vec<ScenarioArg>,
    #[arg(long, default_value_t = 500)]
    pub replicates: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "bands")]
    pub experiment: Experiment,
    /// Estimator whose intervals are checked for coverage.
    #[arg(long, value_enum, default_value = "simple-expansion")]
    pub estimator: Estimator,
    /// Sample size for coverage runs.
    #[arg(long, conflicts_with = "margin")]
    pub sample_size: Option<u64>,
    /// Plan the coverage sample for this margin at each rate instead.
    #[arg(long)]
    pub margin: Option<Margin>,
    #[arg(long, default_value = "0.90")]
    pub confidence: Confidence,
    /// Keep simulated partial amounts unrounded instead of whole cents.
    #[arg(long)]
    pub exact_amounts: bool,
}
