use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};

use crate::population::ClaimPopulation;

/// Draws a uniform k-subset of the expanded population and returns how many
/// of its members fall in each run.
///
/// Small subsets sample indices directly; otherwise runs are visited in order
/// with one hypergeometric draw each.
pub fn draw_run_counts<R: Rng + ?Sized>(pop: &ClaimPopulation, k: u64, rng: &mut R) -> Vec<u64> {
    let runs = pop.runs();
    let n = pop.len();
    assert!(k <= n, "subset of {k} from {n} claims");
    let mut counts = vec![0u64; runs.len()];
    if k == 0 {
        return counts;
    }
    if (k as usize) < runs.len() && n <= usize::MAX as u64 {
        let mut ends = Vec::with_capacity(runs.len());
        let mut acc = 0u64;
        for r in runs {
            acc += r.count;
            ends.push(acc);
        }
        for i in index::sample(rng, n as usize, k as usize) {
            let run = ends.partition_point(|&e| e <= i as u64);
            counts[run] += 1;
        }
        return counts;
    }
    let mut remaining_pop = n;
    let mut remaining = k;
    for (c, r) in counts.iter_mut().zip(runs) {
        if remaining == 0 {
            break;
        }
        if remaining == remaining_pop {
            *c = r.count;
        } else {
            let h = Hypergeometric::new(remaining_pop, r.count, remaining).expect("valid hypergeometric");
            *c = h.sample(rng);
        }
        remaining -= *c;
        remaining_pop -= r.count;
    }
    counts
}
