mod common;

use audit_design::selector::{g_mean_variance, prob_ratio_beats, prob_ratio_beats_mc};
use audit_design::sim::{oracle_enumerate_conditional, oracle_enumerate_g, oracle_enumerate_partial};
use audit_design::stratify::{run_candidates, split_objective, Totals};
use audit_design::variance::{var_conditional_expected, var_partial_expected, var_ratio_expected, var_total};
use audit_design::{Cents, ClaimPopulation, ErrorRate, PartialErrorSpec, Run};
use common::{close, random_population, rng};

fn pop(v: &[f64]) -> ClaimPopulation {
    ClaimPopulation::from_dollars(v).unwrap()
}

#[test]
fn one_to_four_reference_values() {
    let p = pop(&[1.0, 2.0, 3.0, 4.0]);
    let m = p.moments::<f64>();
    let half = ErrorRate::exact(2, 4).unwrap();
    let o = oracle_enumerate_conditional(&p, 2).unwrap();
    assert!(close(var_conditional_expected(&m, &half).unwrap().value, o.mean_conditional_variance, 1e-12, 1.0));
    assert!(close(var_ratio_expected(&m, &half).unwrap().value, o.mean_sigma_r2, 1e-12, 1.0));
    let g = oracle_enumerate_g(&p, 2).unwrap();
    let closed = g_mean_variance(&m, &half).unwrap();
    assert!(close(closed.variance, g.variance, 1e-12, 1.0));
    assert!(close(closed.mean, g.mean, 1e-12, 1.0));
    let spec = PartialErrorSpec::from_counts(4, 2, 1, 0.5).unwrap();
    let part = oracle_enumerate_partial(&p, 2, 1, 0.5).unwrap();
    assert!(close(var_partial_expected(&m, &spec).unwrap().value, part, 1e-12, 1.0));
}

#[test]
fn law_of_total_variance() {
    // E(Var(Y|s)) + Var(E(Y|s)) over error sets equals πμx^(2) − (πμx)².
    let mut r = rng(21);
    for n in 2..=8 {
        let p = random_population(&mut r, n);
        let m = p.moments::<f64>();
        for ne in 0..=n as u64 {
            let o = oracle_enumerate_conditional(&p, ne).unwrap();
            let total = var_total(&m, &ErrorRate::exact(ne, n as u64).unwrap()).unwrap().value;
            let sum = o.mean_conditional_variance + o.variance_of_conditional_mean;
            assert!(close(sum, total, 1e-9, 1e-12 * m.mu_x2), "n={n} ne={ne}: {sum} vs {total}");
        }
    }
}

#[test]
fn error_set_mean_product_identity() {
    // E(X̄ₑ X̄ₑ^(2)) = (1−π)·N/(N−1)·μ12/Nₑ + μx μx^(2).
    let mut r = rng(22);
    for n in 2..=8 {
        let p = random_population(&mut r, n);
        let m = p.moments::<f64>();
        let big_n = n as f64;
        for ne in 1..=n as u64 {
            let pi = ne as f64 / big_n;
            let closed = (1.0 - pi) * big_n / (big_n - 1.0) * m.mu12 / ne as f64 + m.mu_x * m.mu_x2;
            let o = oracle_enumerate_conditional(&p, ne).unwrap().mean_xbar_x2bar.unwrap();
            assert!(close(closed, o, 1e-9, 1.0), "n={n} ne={ne}: {closed} vs {o}");
        }
    }
}

#[test]
fn partial_model_continuity_in_q() {
    let p = pop(&[1.0, 4.0, 2.5, 9.0, 3.0]);
    let full = oracle_enumerate_conditional(&p, 3).unwrap().mean_conditional_variance;
    let near = oracle_enumerate_partial(&p, 3, 2, 0.999_999).unwrap();
    assert!((near - full).abs() < 1e-4 * full);
}

#[test]
fn mc_selector_agrees_with_enumeration() {
    let mut r = rng(23);
    for (i, n) in [5usize, 6, 7].into_iter().enumerate() {
        let p = random_population(&mut r, n);
        let ne = (n / 2) as u64;
        let exact = oracle_enumerate_g(&p, ne).unwrap().prob_positive;
        let reps = 20_000u64;
        let mc = prob_ratio_beats_mc(&p, &ErrorRate::exact(ne, n as u64).unwrap(), reps, 100 + i as u64).unwrap();
        // 99% binomial interval.
        let half_width = 2.576 * (exact * (1.0 - exact) / reps as f64).sqrt() + 1e-12;
        assert!((mc.probability - exact).abs() <= half_width, "n={n}: {} vs {exact}", mc.probability);
    }
}

#[test]
fn normal_probability_on_one_to_four() {
    let m = pop(&[1.0, 2.0, 3.0, 4.0]).moments::<f64>();
    let p = prob_ratio_beats(&m, &ErrorRate::new(0.5).unwrap()).unwrap();
    assert!((p.probability - 0.655_382_474_330_617_6).abs() < 1e-9);
}

fn block(amounts: &[i64]) -> Totals {
    amounts.iter().fold(Totals { sum_cube: Some(0), ..Totals::default() }, |t, &a| {
        t.plus(&Totals::of_run(&Run { amount: Cents(a), count: 1 }, 1).unwrap()).unwrap()
    })
}

#[test]
fn run_without_interior_candidates_still_matches_exhaustive() {
    let (prefix, suffix) = (block(&[100, 150]), block(&[90_000, 120_000, 150_000]));
    let run = Run { amount: Cents(400), count: 30 };
    let pi = 0.35;
    let ks = run_candidates(&prefix, &run, &suffix, pi);
    assert!(ks.is_empty(), "{ks:?}");
    let f = |k| split_objective(&prefix, &run, k, &suffix, pi).unwrap();
    let exhaustive = (0..=run.count).map(f).fold(f64::INFINITY, f64::min);
    assert_eq!(f(0).min(f(run.count)), exhaustive);
}

#[test]
fn run_candidates_include_interior_stationary_points() {
    // The stationary point sits inside the run; it is a maximum of the
    // objective, so the endpoints still win.
    let mut found = false;
    let mut r = rng(24);
    use rand::Rng;
    for _ in 0..200 {
        let y = r.random_range(1_000..5_000i64);
        let prefix = block(&(0..5).map(|_| r.random_range(1..y)).collect::<Vec<_>>());
        let suffix = block(&(0..5).map(|_| r.random_range(y + 1..100_000)).collect::<Vec<_>>());
        let run = Run { amount: Cents(y), count: 40 };
        let ks = run_candidates(&prefix, &run, &suffix, 0.5);
        if let Some(&k) = ks.first() {
            let f = |k| split_objective(&prefix, &run, k, &suffix, 0.5).unwrap();
            assert!(f(k) >= f(0).min(f(run.count)));
            found = true;
        }
    }
    assert!(found);
}
