use crate::error::{Error, Result};
use crate::population::{Cents, ClaimPopulation};

/// Cum √f breakpoints for `strata` strata from an equal-width histogram with
/// `bins` bins. Each breakpoint is the largest claim amount at or below the
/// chosen cut, and stratum h holds amounts in (b_{h−1}, b_h].
pub fn cum_sqrt_f(pop: &ClaimPopulation, strata: usize, bins: usize) -> Result<Vec<Cents>> {
    if strata < 2 || bins < strata {
        return Err(Error::domain("cum_sqrt_f", format!("need 2 ≤ L ≤ bins, got L = {strata}, bins = {bins}")));
    }
    let (lo, hi) = (pop.min_amount().0, pop.max_amount().0);
    if lo == hi {
        return Err(Error::domain("cum_sqrt_f", "a single distinct amount cannot be stratified"));
    }
    let width = (hi - lo) as f64 / bins as f64;
    let bin_of = |a: Cents| (((a.0 - lo) as f64 / width).floor() as usize).min(bins - 1);
    let mut freq = vec![0u64; bins];
    // Largest amount falling in each bin.
    let mut top = vec![None; bins];
    for run in pop.runs() {
        let b = bin_of(run.amount);
        freq[b] += run.count;
        top[b] = Some(run.amount);
    }
    if freq.iter().filter(|&&f| f > 0).count() < strata {
        return Err(Error::domain("cum_sqrt_f", format!("fewer than {strata} nonempty bins")));
    }
    let mut cum = Vec::with_capacity(bins);
    let mut acc = 0.0;
    for &f in &freq {
        acc += (f as f64).sqrt();
        cum.push(acc);
    }
    let last_nonempty = freq.iter().rposition(|&f| f > 0).expect("nonempty");
    let mut out = Vec::with_capacity(strata - 1);
    let mut start = 0;
    for j in 1..strata {
        let target = j as f64 * acc / strata as f64;
        // A cut after bin b needs a claim at or below it, above the previous
        // cut, and leaves at least one nonempty bin per remaining stratum.
        let remaining = strata - j;
        let choice = (start..bins)
            .filter(|&b| freq[start..=b].iter().any(|&f| f > 0))
            .filter(|&b| freq[b + 1..].iter().filter(|&&f| f > 0).count() >= remaining && b < last_nonempty)
            .min_by(|&a, &b| (cum[a] - target).abs().total_cmp(&(cum[b] - target).abs()).then(a.cmp(&b)));
        let b = choice.ok_or_else(|| Error::domain("cum_sqrt_f", "no feasible cut"))?;
        out.push(top[..=b].iter().rev().flatten().next().copied().expect("nonempty prefix"));
        start = b + 1;
    }
    Ok(out)
}
