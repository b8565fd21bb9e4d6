use std::fs::File;
use std::io::BufReader;

use audit_design::planner::{plan, sample_size};
use audit_design::selector::{select, MonteCarlo, SelectorOptions};
use audit_design::sim::{
    coverage_experiment, derive_seed, make_edwards_like, make_neter_like, mc_sigma_r_bands, ErrorModel, Rounding,
};
use audit_design::stratify::{
    cum_sqrt_f, optimal_two_strata, srs_objective, stratification_at, stratified_sample_size, Stratification,
};
use audit_design::variance::{var_ratio_expected, VarianceInput};
use audit_design::{
    ClaimPopulation, ErrorRate, EstimatorKind, InputFormat, PartialErrorSpec, PlanRequest, VarianceEstimate,
    VarianceMethod, VarianceSource,
};

use crate::args::{ChooseArgs, Experiment, Format, PlanArgs, SimulateArgs, SourceArgs, StratifyArgs, SummarizeArgs};
use crate::report::{Cell, Table};
use crate::CliError;

fn data(e: audit_design::Error) -> CliError {
    CliError::Data(e.to_string())
}

pub fn load(source: &SourceArgs) -> Result<ClaimPopulation, CliError> {
    if let Some(s) = source.synthetic {
        return Ok(if s.neter { make_neter_like(s.seed) } else { make_edwards_like(s.seed) });
    }
    let path = source.input.as_ref().ok_or_else(|| CliError::Usage("--input or --synthetic is required".into()))?;
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let format = match source.format {
        Format::Plain => InputFormat::Plain,
        Format::RunLength => InputFormat::RunLength,
    };
    ClaimPopulation::load(BufReader::new(file), format).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn kind_name(k: EstimatorKind) -> &'static str {
    match k {
        EstimatorKind::SimpleExpansion => "simple-expansion",
        EstimatorKind::Ratio => "ratio",
    }
}

/// Exact dollar rendering of a cent total that may exceed i64.
fn money(cents: i128) -> Cell {
    let sign = if cents < 0 { "-" } else { "" };
    let a = cents.unsigned_abs();
    Cell::Text(format!("{sign}{}.{:02}", a / 100, a % 100))
}

fn rate(pi: f64) -> Result<ErrorRate<f64>, CliError> {
    ErrorRate::new(pi).map_err(data)
}

fn require_rates(rates: &crate::args::RateArgs) -> Result<Vec<f64>, CliError> {
    if rates.is_given() {
        Ok(rates.values())
    } else {
        Err(CliError::Usage("--pi or --pi-grid is required".into()))
    }
}

pub fn summarize(a: &SummarizeArgs) -> Result<Vec<Table>, CliError> {
    let pop = load(&a.source)?;
    let m = pop.moments::<f64>();
    let mut t = Table::new(
        "population",
        &[
            "N", "unique", "total", "min", "max", "mu_x", "sigma2_x", "sigma_x", "cv", "mu_x2", "tau_x", "tau_x2",
            "mu12", "sigma2_x2", "g1",
        ],
    );
    t.push(vec![
        pop.len().into(),
        pop.unique_count().into(),
        money(pop.total_cents()),
        pop.min_amount().into(),
        pop.max_amount().into(),
        m.mu_x.into(),
        m.sigma2_x.into(),
        m.sigma2_x.sqrt().into(),
        m.cv().into(),
        m.mu_x2.into(),
        m.tau_x.into(),
        m.tau_x2.into(),
        m.mu12.into(),
        m.sigma2_x2.into(),
        m.g1.into(),
    ]);
    Ok(vec![t])
}

fn rate_of(v: &VarianceEstimate<f64>) -> f64 {
    match v.input {
        VarianceInput::Rate { pi } => pi,
        VarianceInput::Partial(spec) => spec.pi_total(),
    }
}

pub fn plan_cmd(a: &PlanArgs) -> Result<Vec<Table>, CliError> {
    let kind: EstimatorKind = a.estimator.into();
    if kind == EstimatorKind::Ratio && a.partial.is_some() {
        return Err(CliError::Usage(
            "--partial has no closed form for the ratio estimator; use `simulate` instead".into(),
        ));
    }
    let pop = load(&a.source)?;
    let m = pop.moments::<f64>();
    let margin = a.margin.dollars(m.tau_x);
    let mut sources = Vec::new();
    if let Some(p) = a.partial {
        let spec = PartialErrorSpec::from_rates(pop.len(), p.pi_total, p.pi_partial, p.q).map_err(data)?;
        let label = if a.bound { "partial-bound" } else { "partial-expected" };
        sources.push((label, VarianceSource::Partial { spec, exact: !a.bound }));
        sources.push(("partial-conservative", VarianceSource::PartialConservative));
    } else {
        for pi in a.rates.values() {
            sources.push(("rate", VarianceSource::Rate(rate(pi)?)));
        }
        if a.rates.pi.is_none() {
            sources.push(("conservative", VarianceSource::Conservative));
        }
    }
    let mut t = Table::new(
        "plan",
        &[
            "source",
            "pi",
            "estimator",
            "n",
            "n_formula",
            "variance",
            "requested_margin",
            "achieved_margin",
            "confidence",
            "z",
            "warnings",
        ],
    );
    let mut largest: Option<(u64, usize)> = None;
    for (i, (label, source)) in sources.into_iter().enumerate() {
        let req = PlanRequest { margin, confidence: a.confidence.0, estimator: kind, source };
        let p = plan(&pop, &req).map_err(data)?;
        if largest.is_none_or(|(n, _)| p.n > n) {
            largest = Some((p.n, i));
        }
        let warnings: Vec<String> = p.warnings.iter().map(|w| format!("{w:?}")).collect();
        t.push(vec![
            label.into(),
            rate_of(&p.variance_used).into(),
            kind_name(kind).into(),
            p.n.into(),
            p.n_formula.into(),
            p.variance_used.value.into(),
            p.requested_margin.into(),
            p.achieved_margin.into(),
            p.confidence.into(),
            p.z.into(),
            warnings.join("; ").into(),
        ]);
    }
    let mut out = vec![t];
    if out[0].rows.len() > 1 {
        let (n, i) = largest.expect("rows exist");
        let row = &out[0].rows[i];
        let mut l = Table::new("largest", &["source", "pi", "n"]);
        l.push(vec![row[0].clone(), row[1].clone(), n.into()]);
        out.push(l);
    }
    Ok(out)
}

pub fn choose(a: &ChooseArgs) -> Result<Vec<Table>, CliError> {
    let rates = require_rates(&a.rates)?;
    if a.replicates == Some(0) {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let pop = load(&a.source)?;
    let mut t = Table::new(
        "choose",
        &["pi", "errors", "mean_g", "var_g", "prob_normal", "degenerate", "prob_mc", "mc_replicates", "recommendation"],
    );
    for (i, &pi) in rates.iter().enumerate() {
        let errors = (pi * pop.len() as f64).round() as u64;
        if pi == 0.0 {
            let mut row = vec![pi.into(), 0u64.into()];
            row.extend(std::iter::repeat_n(Cell::Missing, 6));
            row.push("undefined".into());
            t.push(row);
            continue;
        }
        let monte_carlo = match (a.replicates, a.seed) {
            (Some(replicates), Some(seed)) if errors > 0 => Some(MonteCarlo { replicates, seed: derive_seed(seed, i as u64) }),
            _ => None,
        };
        let options = SelectorOptions { monte_carlo, ..Default::default() };
        let r = select(&pop, &rate(pi)?, &options).map_err(data)?;
        t.push(vec![
            pi.into(),
            r.errors.into(),
            r.mean_g.into(),
            r.var_g.into(),
            r.prob_normal.into(),
            r.degenerate.into(),
            r.prob_mc.map(|m| m.probability).into(),
            r.prob_mc.map(|m| m.replicates).into(),
            format!("{:?}", r.recommendation).to_lowercase().into(),
        ]);
    }
    Ok(vec![t])
}

struct SizedDesign {
    n: Option<u64>,
    sizes: [Option<u64>; 2],
    achieved: Option<f64>,
}

const NO_SIZE: SizedDesign = SizedDesign { n: None, sizes: [None, None], achieved: None };

fn size_design(s: &Stratification, margin: Option<f64>, confidence: f64) -> Result<SizedDesign, CliError> {
    let Some(margin) = margin else { return Ok(NO_SIZE) };
    let p = stratified_sample_size(s, margin, confidence).map_err(data)?;
    Ok(SizedDesign {
        n: Some(p.n),
        sizes: [Some(p.allocation.sizes[0]), Some(p.allocation.sizes[1])],
        achieved: Some(p.achieved_margin),
    })
}

pub fn stratify(a: &StratifyArgs) -> Result<Vec<Table>, CliError> {
    let rates = require_rates(&a.rates)?;
    let pop = load(&a.source)?;
    let margin = a.margin.map(|m| m.dollars(pop.moments::<f64>().tau_x));
    let kinds = match a.estimator {
        Some(e) => vec![e.into()],
        None => vec![EstimatorKind::SimpleExpansion, EstimatorKind::Ratio],
    };
    let cut = cum_sqrt_f(&pop, 2, a.bins).map(|b| b[0]);
    let mut t = Table::new(
        "stratify",
        &[
            "pi",
            "estimator",
            "design",
            "boundary_run",
            "boundary_split",
            "upper_amount",
            "n1",
            "n2",
            "objective",
            "relative_to_srs",
            "degenerate",
            "n",
            "sample1",
            "sample2",
            "achieved_margin",
            "note",
        ],
    );
    for &pi in &rates {
        let r = rate(pi)?;
        for &kind in &kinds {
            let srs = srs_objective(&pop, &r, kind).map_err(data)?;
            let relative = |v: f64| if srs > 0.0 { Cell::Num(v / srs) } else { Cell::Missing };
            let mut design_row = |name: &str, s: &Stratification, note: &str| -> Result<(), CliError> {
                let sized = size_design(s, margin, a.confidence.0)?;
                t.push(vec![
                    pi.into(),
                    kind_name(kind).into(),
                    name.into(),
                    s.boundary.run.into(),
                    s.boundary.split.into(),
                    s.upper_amount.into(),
                    s.strata[0].count.into(),
                    s.strata[1].count.into(),
                    s.objective.into(),
                    relative(s.objective),
                    s.degenerate.into(),
                    sized.n.into(),
                    sized.sizes[0].into(),
                    sized.sizes[1].into(),
                    sized.achieved.into(),
                    note.into(),
                ]);
                Ok(())
            };
            let best = optimal_two_strata(&pop, &r, kind, true).map_err(data)?;
            let note = if best.degenerate { "single distinct amount" } else { "" };
            design_row("optimal", &best, note)?;
            match &cut {
                Ok(c) => design_row("cum_sqrt_f", &stratification_at(&pop, &r, kind, *c).map_err(data)?, "")?,
                Err(e) => {
                    let mut row = vec![pi.into(), kind_name(kind).into(), "cum_sqrt_f".into()];
                    row.extend(std::iter::repeat_n(Cell::Missing, 12));
                    row.push(e.to_string().into());
                    t.push(row);
                }
            }
            let srs_n = match margin {
                Some(margin) => {
                    let big_n = pop.len() as f64;
                    let method = match kind {
                        EstimatorKind::SimpleExpansion => VarianceMethod::Total,
                        EstimatorKind::Ratio => VarianceMethod::RatioExpected,
                    };
                    let v = VarianceEstimate {
                        value: (srs / big_n).powi(2),
                        method,
                        input: VarianceInput::Rate { pi },
                        clamped: false,
                    };
                    Some(sample_size(pop.len(), &v, margin, a.confidence.0).map_err(data)?)
                }
                None => None,
            };
            let mut row = vec![pi.into(), kind_name(kind).into(), "srs".into()];
            row.extend(std::iter::repeat_n(Cell::Missing, 5));
            row.extend([
                srs.into(),
                relative(srs),
                Cell::Missing,
                srs_n.as_ref().map(|p| p.n).into(),
                Cell::Missing,
                Cell::Missing,
                srs_n.as_ref().map(|p| p.achieved_margin).into(),
                "".into(),
            ]);
            t.push(row);
        }
    }
    Ok(vec![t])
}

pub fn simulate(a: &SimulateArgs) -> Result<Vec<Table>, CliError> {
    let rates = require_rates(&a.rates)?;
    if a.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let coverage = matches!(a.experiment, Experiment::Coverage | Experiment::Both);
    if coverage && a.sample_size.is_none() && a.margin.is_none() {
        return Err(CliError::Usage("coverage needs --sample-size or --margin".into()));
    }
    let pop = load(&a.source)?;
    let m = pop.moments::<f64>();
    let rounding = if a.exact_amounts { Rounding::Exact } else { Rounding::Cents };
    let scenarios: Vec<_> = a.scenario.iter().map(|s| s.0.clone()).collect();
    let mut out = Vec::new();
    if matches!(a.experiment, Experiment::Bands | Experiment::Both) {
        let rows =
            mc_sigma_r_bands(&pop, &scenarios, &rates, a.replicates, rounding, derive_seed(a.seed, 0)).map_err(data)?;
        let mut t =
            Table::new("bands", &["scenario", "rate", "mean", "p05", "p95", "replicates", "full_error_expectation"]);
        for r in rows {
            let expected = var_ratio_expected(&m, &rate(r.rate)?).map_err(data)?.value;
            t.push(vec![
                r.scenario.into(),
                r.rate.into(),
                r.mean.into(),
                r.p05.into(),
                r.p95.into(),
                r.replicates.into(),
                expected.into(),
            ]);
        }
        out.push(t);
    }
    if coverage {
        let kind: EstimatorKind = a.estimator.into();
        let mut t = Table::new(
            "coverage",
            &["scenario", "rate", "estimator", "n", "confidence", "coverage", "covered", "replicates", "mean_halfwidth", "note"],
        );
        let mut cell = 0u64;
        for sc in &scenarios {
            for &pi in &rates {
                cell += 1;
                let n = match (a.sample_size, a.margin) {
                    (Some(n), _) => n,
                    (None, Some(margin)) => {
                        let req = PlanRequest {
                            margin: margin.dollars(m.tau_x),
                            confidence: a.confidence.0,
                            estimator: kind,
                            source: VarianceSource::Rate(rate(pi)?),
                        };
                        plan(&pop, &req).map_err(data)?.n
                    }
                    (None, None) => unreachable!("checked above"),
                };
                let mut row = vec![sc.name.clone().into(), pi.into(), kind_name(kind).into(), n.into(), a.confidence.0.into()];
                if n < 2 {
                    row.extend(std::iter::repeat_n(Cell::Missing, 4));
                    row.push("sample of fewer than 2 claims".into());
                    t.push(row);
                    continue;
                }
                let model = ErrorModel::Scenario(sc.at_rate(pi).map_err(data)?);
                let r = coverage_experiment(
                    &pop,
                    &model,
                    n,
                    kind,
                    a.confidence.0,
                    a.replicates,
                    rounding,
                    derive_seed(a.seed, cell),
                )
                .map_err(data)?;
                row.extend([r.coverage.into(), r.covered.into(), r.replicates.into(), r.mean_halfwidth.into(), "".into()]);
                t.push(row);
            }
        }
        out.push(t);
    }
    Ok(out)
}
