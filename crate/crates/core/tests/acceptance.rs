//! Exit criteria. Each test prints one line, `criterion N: PASS|FAIL ...`.
//! Run with `cargo test -p audit-design --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use audit_design::planner::{plan, sample_size, margin_of_error};
use audit_design::selector::{g_mean_variance, prob_ratio_beats};
use audit_design::sim::{
    coverage_experiment, make_edwards_like, make_neter_like, mc_sigma_r_bands, oracle_enumerate_conditional,
    oracle_enumerate_g, oracle_enumerate_partial, ErrorModel, NamedScenario, Rounding,
};
use audit_design::stratify::{
    cum_sqrt_f, optimal_two_strata, run_candidates, split_objective, srs_objective, stratification_at, Totals,
};
use audit_design::variance::{
    conservative_partial, conservative_pi, var_conditional_expected, var_partial_bound, var_partial_expected,
    var_ratio_expected, var_roberts, var_total, VarianceEstimate, VarianceInput, VarianceMethod,
};
use audit_design::{
    Cents, EstimatorKind, ErrorRate, PartialErrorSpec, PlanRequest, Run, VarianceSource,
};
use common::{random_population, rng};
use rand::Rng;

const ORACLE_REL_TOL: f64 = 1e-9;
const ORDERING_SLACK: f64 = 1e-12;
const MAX_ORACLE_N: usize = 8;
const MAX_PARTIAL_N: usize = 6;
const ORACLE_POPULATIONS: usize = 50;
const RANDOM_PAIRS: usize = 1000;
const RUN_INSTANCES: usize = 500;
const BAND_REPLICATES: u64 = 500;
const COVERAGE_REPLICATES: u64 = 10_000;
const COVERAGE_BAND: (f64, f64) = (0.86, 0.94);
const NOMINAL: f64 = 0.90;
const PI_CRIT_WINDOW: f64 = 0.10;
const POP_SEED: u64 = 20_240_611;
// Floor for relative comparisons against an exact zero, as a multiple of μx^(2).
const ZERO_FLOOR: f64 = 1e-12;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn grid(lo: u32, hi: u32, step: u32) -> Vec<f64> {
    (lo..=hi).step_by(step as usize).map(|i| i as f64 / 100.0).collect()
}

#[test]
fn criterion_01_conditional_variance_matches_enumeration() {
    let start = Instant::now();
    let mut r = rng(1);
    let (mut checked, mut worst) = (0, 0.0f64);
    for n in 1..=MAX_ORACLE_N {
        for _ in 0..ORACLE_POPULATIONS {
            let pop = random_population(&mut r, n);
            let m = pop.moments::<f64>();
            for ne in 0..=n as u64 {
                let got = var_conditional_expected(&m, &ErrorRate::exact(ne, n as u64).unwrap()).unwrap().value;
                let want = oracle_enumerate_conditional(&pop, ne).unwrap().mean_conditional_variance;
                let err = (got - want).abs() / want.abs().max(ZERO_FLOOR * m.mu_x2);
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= ORACLE_REL_TOL && elapsed < Duration::from_secs(10),
        format!("{checked} cases, worst relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_estimator_ordering() {
    let mut r = rng(2);
    let mut violations = 0;
    for _ in 0..RANDOM_PAIRS {
        let n = r.random_range(2..=200);
        let pop = random_population(&mut r, n);
        let m = pop.moments::<f64>();
        let pi = ErrorRate::new(r.random_range(0.0..=1.0)).unwrap();
        let rob = var_roberts(&m, &pi).unwrap().value;
        let cond = var_conditional_expected(&m, &pi).unwrap().value;
        let tot = var_total(&m, &pi).unwrap().value;
        let slack = ORDERING_SLACK * m.mu_x2;
        if rob > cond + slack || cond > tot + slack {
            violations += 1;
        }
    }
    report(2, violations == 0, format!("{violations} violations in {RANDOM_PAIRS} pairs"));
}

#[test]
fn criterion_03_ratio_variance_matches_enumeration() {
    let mut r = rng(3);
    let (mut checked, mut worst) = (0, 0.0f64);
    for n in 2..=MAX_ORACLE_N {
        for _ in 0..ORACLE_POPULATIONS {
            let pop = random_population(&mut r, n);
            let m = pop.moments::<f64>();
            for ne in 1..n as u64 {
                let got = var_ratio_expected(&m, &ErrorRate::exact(ne, n as u64).unwrap()).unwrap().value;
                let want = oracle_enumerate_conditional(&pop, ne).unwrap().mean_sigma_r2;
                worst = worst.max((got - want).abs() / want.abs().max(ZERO_FLOOR * m.mu_x2));
                checked += 1;
            }
        }
    }
    let m = make_edwards_like(POP_SEED).moments::<f64>();
    let argmax = grid(0, 100, 1)
        .into_iter()
        .map(|p| (p, var_ratio_expected(&m, &ErrorRate::new(p).unwrap()).unwrap().value))
        .fold((0.0, f64::MIN), |best, c| if c.1 > best.1 { c } else { best })
        .0;
    report(
        3,
        worst <= ORACLE_REL_TOL && argmax == 0.50,
        format!("{checked} cases, worst relative error {worst:.2e}, argmax π = {argmax:.2}"),
    );
}

#[test]
fn criterion_04_partial_error_model() {
    let mut r = rng(4);
    let (mut checked, mut worst) = (0, 0.0f64);
    for n in 2..=MAX_PARTIAL_N {
        for _ in 0..10 {
            let pop = random_population(&mut r, n);
            let m = pop.moments::<f64>();
            for t in 0..=n as u64 {
                for p in 0..=t {
                    for q in [0.1, 0.5, 0.85] {
                        let spec = PartialErrorSpec::from_counts(n as u64, t, p, q).unwrap();
                        let got = var_partial_expected(&m, &spec).unwrap().value;
                        let want = oracle_enumerate_partial(&pop, t, p, q).unwrap();
                        worst = worst.max((got - want).abs() / want.abs().max(ZERO_FLOOR * m.mu_x2));
                        checked += 1;
                    }
                }
            }
        }
    }
    let mut bound_violations = 0;
    for _ in 0..RANDOM_PAIRS {
        let n = r.random_range(2..=300u64);
        let pop = random_population(&mut r, n as usize);
        let m = pop.moments::<f64>();
        let t = r.random_range(0..=n);
        let p = r.random_range(0..=t);
        let spec = PartialErrorSpec::from_counts(n, t, p, r.random_range(0.01..0.99)).unwrap();
        let exp = var_partial_expected(&m, &spec).unwrap().value;
        let bound = var_partial_bound(&m, &spec).unwrap().value;
        if bound < exp - ORDERING_SLACK * m.mu_x2 {
            bound_violations += 1;
        }
    }
    let pop = make_edwards_like(POP_SEED);
    let m = pop.moments::<f64>();
    let cons = conservative_partial(&m).unwrap().value;
    let mut grid_violations = 0;
    for pi_t in grid(5, 100, 5) {
        for pi_p in grid(0, 100, 5).into_iter().filter(|&p| p <= pi_t) {
            for q in grid(5, 95, 5) {
                let spec = PartialErrorSpec::from_rates(pop.len(), pi_t, pi_p, q).unwrap();
                if cons < var_partial_bound(&m, &spec).unwrap().value - ORDERING_SLACK * m.mu_x2 {
                    grid_violations += 1;
                }
            }
        }
    }
    report(
        4,
        worst <= ORACLE_REL_TOL && bound_violations == 0 && grid_violations == 0,
        format!(
            "{checked} oracle cases, worst relative error {worst:.2e}; bound below expectation {bound_violations}×; \
             conservative below bound {grid_violations}×"
        ),
    );
}

fn block(r: &mut impl Rng, len: u64, lo: i64, hi: i64) -> Totals {
    let mut t = Totals { sum_cube: Some(0), ..Totals::default() };
    for _ in 0..len {
        let run = Run { amount: Cents(r.random_range(lo..=hi)), count: 1 };
        t = t.plus(&Totals::of_run(&run, 1).unwrap()).unwrap();
    }
    t
}

#[test]
fn criterion_05_run_split_shortcut_is_exact() {
    let start = Instant::now();
    let mut r = rng(5);
    let mut mismatches = 0;
    let mut interior_wins = 0;
    for _ in 0..RUN_INSTANCES {
        let y = r.random_range(200..=50_000i64);
        let (lo_len, hi_len) = (r.random_range(1..=20), r.random_range(1..=20));
        let prefix = block(&mut r, lo_len, 1, y - 1);
        let suffix = block(&mut r, hi_len, y + 1, 200_000);
        let run = Run { amount: Cents(y), count: r.random_range(1..=50) };
        let pi = r.random_range(0.01..=1.0);
        let f = |k: u64| split_objective(&prefix, &run, k, &suffix, pi).unwrap();
        let exhaustive = (0..=run.count).map(f).fold(f64::INFINITY, f64::min);
        let mut ks = run_candidates(&prefix, &run, &suffix, pi);
        ks.extend([0, run.count]);
        let shortcut = ks.iter().map(|&k| f(k)).fold(f64::INFINITY, f64::min);
        if shortcut != exhaustive {
            mismatches += 1;
        }
        if exhaustive < f(0).min(f(run.count)) {
            interior_wins += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        5,
        mismatches == 0 && elapsed < Duration::from_secs(30),
        format!("{mismatches} mismatches in {RUN_INSTANCES} instances ({interior_wins} with interior optimum), {elapsed:.2?}"),
    );
}

#[test]
fn criterion_06_criterion_variance_matches_enumeration() {
    let mut r = rng(6);
    let (mut checked, mut worst, mut not_favored) = (0, 0.0f64, 0);
    for n in 2..=MAX_ORACLE_N {
        for _ in 0..ORACLE_POPULATIONS {
            let pop = random_population(&mut r, n);
            let m = pop.moments::<f64>();
            for ne in 1..=n as u64 {
                let rate = ErrorRate::exact(ne, n as u64).unwrap();
                let got = g_mean_variance(&m, &rate).unwrap();
                let want = oracle_enumerate_g(&pop, ne).unwrap();
                let scale = m.sigma2_x2.max(f64::MIN_POSITIVE);
                worst = worst.max((got.variance - want.variance).abs() / want.variance.abs().max(ZERO_FLOOR * scale));
                worst = worst.max((got.mean - want.mean).abs() / want.mean.abs().max(ZERO_FLOOR * m.sigma2_x));
                let p = prob_ratio_beats(&m, &rate).unwrap();
                if !p.degenerate && p.probability <= 0.5 {
                    not_favored += 1;
                }
                checked += 1;
            }
        }
    }
    report(
        6,
        worst <= ORACLE_REL_TOL && not_favored == 0,
        format!("{checked} cases, worst relative error {worst:.2e}, {not_favored} probabilities ≤ 0.5"),
    );
}

#[test]
fn criterion_07_sample_size_back_substitution() {
    let mut r = rng(7);
    let mut failures = 0;
    for _ in 0..RANDOM_PAIRS {
        let big_n = r.random_range(2..=1_000_000u64);
        let variance = 10f64.powf(r.random_range(-2.0..8.0));
        let total_sd = big_n as f64 * variance.sqrt();
        let margin = total_sd * 10f64.powf(r.random_range(-3.0..1.0));
        let confidence = r.random_range(0.5..0.999);
        let est = VarianceEstimate {
            value: variance,
            method: VarianceMethod::Total,
            input: VarianceInput::Rate { pi: 0.5 },
            clamped: false,
        };
        let n = sample_size(big_n, &est, margin, confidence).unwrap().n;
        let at_n = margin_of_error(big_n, n, variance, confidence).unwrap();
        let ok_at_n = at_n <= margin;
        let ok_below = n <= 1 || margin_of_error(big_n, n - 1, variance, confidence).unwrap() > margin;
        if !(ok_at_n && ok_below) {
            failures += 1;
        }
    }
    report(7, failures == 0, format!("{failures} failures in {RANDOM_PAIRS} random plans"));
}

/// π maximizing the planned n, ties broken by the unrounded size.
fn argmax_n(pop: &audit_design::ClaimPopulation, kind: EstimatorKind, pis: &[f64], margin: f64) -> f64 {
    pis.iter()
        .map(|&p| {
            let req = PlanRequest {
                margin,
                confidence: 0.9,
                estimator: kind,
                source: VarianceSource::Rate(ErrorRate::new(p).unwrap()),
            };
            let plan = plan(pop, &req).unwrap();
            (p, plan.n, plan.n_formula)
        })
        .fold((0.0, 0u64, f64::MIN), |best, c| if (c.1, c.2) > (best.1, best.2) { c } else { best })
        .0
}

#[test]
fn criterion_08_sample_size_curve_shape() {
    let pop = make_edwards_like(POP_SEED);
    let m = pop.moments::<f64>();
    let margin = 0.02 * m.tau_x;
    let pis = grid(1, 99, 1);
    let ratio_peak = argmax_n(&pop, EstimatorKind::Ratio, &pis, margin);
    let se_peak = argmax_n(&pop, EstimatorKind::SimpleExpansion, &pis, margin);
    let crit = conservative_pi(&m).unwrap().pi_crit.pi();
    let neter = conservative_pi(&make_neter_like(POP_SEED).moments::<f64>()).unwrap();
    let neter_unclamped = neter.unclamped.unwrap_or(f64::NAN);
    let pass = ratio_peak == 0.50
        && (se_peak - crit).abs() <= PI_CRIT_WINDOW
        && neter_unclamped > 1.0
        && neter.pi_crit.pi() == 1.0;
    report(
        8,
        pass,
        format!(
            "ratio peak π = {ratio_peak:.2}; simple-expansion peak π = {se_peak:.2} vs critical {crit:.3}; \
             second population unclamped critical {neter_unclamped:.3} → plans at π = {}",
            neter.pi_crit.pi()
        ),
    );
}

#[test]
fn criterion_09_partial_scenarios_below_all_or_nothing() {
    let start = Instant::now();
    let pop = make_edwards_like(POP_SEED);
    let scenarios: Vec<NamedScenario> = (1..=4).map(|i| NamedScenario::numbered(i).unwrap()).collect();
    let rates = grid(10, 80, 10);
    let rows = mc_sigma_r_bands(&pop, &scenarios, &rates, BAND_REPLICATES, Rounding::Cents, 9).unwrap();
    let baseline: Vec<f64> = rows.iter().filter(|r| r.scenario == "scenario1").map(|r| r.mean).collect();
    let mut above = Vec::new();
    for row in rows.iter().filter(|r| r.scenario != "scenario1") {
        let i = rates.iter().position(|&p| p == row.rate).unwrap();
        if row.mean >= baseline[i] {
            above.push(format!("{}@{:.1} ({:+.2}%)", row.scenario, row.rate, 100.0 * (row.mean / baseline[i] - 1.0)));
        }
    }
    let elapsed = start.elapsed();
    report(
        9,
        above.is_empty() && elapsed < Duration::from_secs(120),
        format!("cells not below the all-or-nothing mean: [{}], {elapsed:.2?}", above.join(", ")),
    );
}

#[test]
fn criterion_10_optimal_strata_beat_baselines() {
    let pop = make_edwards_like(POP_SEED);
    let cut = cum_sqrt_f(&pop, 2, 100).unwrap()[0];
    let mut failures = Vec::new();
    let mut ratio_boundaries = Vec::new();
    for p in grid(5, 95, 5) {
        let pi = ErrorRate::new(p).unwrap();
        for kind in [EstimatorKind::SimpleExpansion, EstimatorKind::Ratio] {
            let best = optimal_two_strata(&pop, &pi, kind, true).unwrap();
            let dalenius = stratification_at(&pop, &pi, kind, cut).unwrap().objective;
            let srs = srs_objective(&pop, &pi, kind).unwrap();
            if best.objective > dalenius || best.objective > srs {
                failures.push(format!("{kind:?}@{p:.2}"));
            }
            if kind == EstimatorKind::Ratio {
                ratio_boundaries.push(best.boundary);
            }
        }
    }
    let invariant = ratio_boundaries.windows(2).all(|w| w[0] == w[1]);
    report(
        10,
        failures.is_empty() && invariant,
        format!(
            "baseline beaten everywhere except [{}]; ratio boundary constant across π: {invariant} ({:?})",
            failures.join(", "),
            ratio_boundaries[0]
        ),
    );
}

#[test]
fn criterion_11_coverage() {
    let start = Instant::now();
    let pop = make_edwards_like(POP_SEED);
    let m = pop.moments::<f64>();
    let pi = 0.3;
    let margin = 0.10 * pi * m.tau_x;
    let req = PlanRequest {
        margin,
        confidence: NOMINAL,
        estimator: EstimatorKind::SimpleExpansion,
        source: VarianceSource::Rate(ErrorRate::new(pi).unwrap()),
    };
    let n = plan(&pop, &req).unwrap().n;
    let model = ErrorModel::AllOrNothing { errors: (pi * pop.len() as f64).round() as u64 };
    let run = |n| {
        coverage_experiment(&pop, &model, n, EstimatorKind::SimpleExpansion, NOMINAL, COVERAGE_REPLICATES, Rounding::Exact, 11)
            .unwrap()
    };
    let first = run(n);
    let deterministic = run(n) == first;
    let elapsed = start.elapsed();
    let in_band = (COVERAGE_BAND.0..=COVERAGE_BAND.1).contains(&first.coverage);
    let mut detail = format!("n = {n}, coverage {:.4}", first.coverage);
    let pass = if in_band {
        true
    } else {
        let doubled = run((2 * n).min(pop.len()));
        detail += &format!(", doubled n coverage {:.4}", doubled.coverage);
        (doubled.coverage - NOMINAL).abs() < (first.coverage - NOMINAL).abs()
    };
    report(
        11,
        pass && deterministic && elapsed < Duration::from_secs(120),
        format!("{detail}, deterministic {deterministic}, {elapsed:.2?}"),
    );
}
