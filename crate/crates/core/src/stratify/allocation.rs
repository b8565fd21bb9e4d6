use serde::Serialize;

use crate::error::{Error, Result};

/// Size and modeled standard deviation of a stratum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StratumSpec {
    pub size: u64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub sizes: Vec<u64>,
    /// Every σ_h was zero, so sizes are proportional to N_h.
    pub proportional_fallback: bool,
}

/// Neyman allocation n_h ∝ N_h σ_h, capped at N_h with the excess
/// redistributed, rounded by largest remainder so that Σ n_h = n.
pub fn optimal_allocation(strata: &[StratumSpec], n: u64) -> Result<Allocation> {
    let capacity: u64 = strata.iter().map(|s| s.size).sum();
    if n > capacity {
        return Err(Error::domain("optimal_allocation", format!("n = {n} exceeds the {capacity} claims")));
    }
    if strata.iter().any(|s| !(s.sigma >= 0.0)) {
        return Err(Error::domain("optimal_allocation", "stratum σ must be nonnegative"));
    }
    let mut weights: Vec<f64> = strata.iter().map(|s| s.size as f64 * s.sigma).collect();
    let proportional_fallback = weights.iter().all(|&w| w == 0.0);
    if proportional_fallback {
        weights = strata.iter().map(|s| s.size as f64).collect();
    }
    let mut sizes = vec![0u64; strata.len()];
    let mut fixed = vec![false; strata.len()];
    let mut remaining = n;
    // Fix strata whose share exceeds their size, then re-share the rest.
    let shares = loop {
        let total: f64 = (0..strata.len()).filter(|&h| !fixed[h]).map(|h| weights[h]).sum();
        let shares: Vec<f64> = (0..strata.len())
            .map(|h| if fixed[h] || total == 0.0 { 0.0 } else { remaining as f64 * weights[h] / total })
            .collect();
        let over: Vec<usize> =
            (0..strata.len()).filter(|&h| !fixed[h] && shares[h] > strata[h].size as f64).collect();
        if over.is_empty() {
            break shares;
        }
        for h in over {
            fixed[h] = true;
            sizes[h] = strata[h].size;
            remaining -= strata[h].size;
        }
    };
    let mut assigned = 0;
    let mut fractions = Vec::new();
    for h in (0..strata.len()).filter(|&h| !fixed[h]) {
        sizes[h] = (shares[h].floor() as u64).min(strata[h].size);
        assigned += sizes[h];
        fractions.push((shares[h] - sizes[h] as f64, h));
    }
    // Largest remainder first; ties go to the earlier stratum.
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = remaining - assigned;
    while left > 0 {
        let before = left;
        for &(_, h) in &fractions {
            if left == 0 {
                break;
            }
            if sizes[h] < strata[h].size {
                sizes[h] += 1;
                left -= 1;
            }
        }
        if left == before {
            return Err(Error::domain("optimal_allocation", "no room left to place the remainder"));
        }
    }
    Ok(Allocation { sizes, proportional_fallback })
}

/// Σ N_h² (σ_h²/n_h) (N_h − n_h)/(N_h − 1).
pub fn stratified_variance(strata: &[StratumSpec], sizes: &[u64]) -> Result<f64> {
    if strata.len() != sizes.len() {
        return Err(Error::domain("stratified_variance", "one sample size per stratum"));
    }
    let mut v = 0.0;
    for (s, &n) in strata.iter().zip(sizes) {
        if n > s.size {
            return Err(Error::domain("stratified_variance", format!("n_h = {n} exceeds N_h = {}", s.size)));
        }
        if s.sigma == 0.0 || n == s.size {
            continue;
        }
        if n == 0 {
            return Err(Error::domain("stratified_variance", "a stratum with spread has no sample"));
        }
        let (big, n) = (s.size as f64, n as f64);
        v += big * big * s.sigma * s.sigma / n * (big - n) / (big - 1.0);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[(u64, f64)]) -> Vec<StratumSpec> {
        v.iter().map(|&(size, sigma)| StratumSpec { size, sigma }).collect()
    }

    #[test]
    fn neyman_shares() {
        let a = optimal_allocation(&spec(&[(100, 2.0), (300, 1.0)]), 50).unwrap();
        assert_eq!(a.sizes, vec![20, 30]);
        let a = optimal_allocation(&spec(&[(50, 3.0), (50, 3.0)]), 31).unwrap();
        assert_eq!(a.sizes, vec![16, 15]);
        let a = optimal_allocation(&spec(&[(40, 0.0), (60, 5.0)]), 10).unwrap();
        assert_eq!(a.sizes, vec![0, 10]);
    }

    #[test]
    fn caps_redistribute() {
        let a = optimal_allocation(&spec(&[(5, 100.0), (200, 1.0), (100, 1.0)]), 60).unwrap();
        assert_eq!(a.sizes[0], 5);
        assert_eq!(a.sizes.iter().sum::<u64>(), 60);
        assert!(a.sizes.iter().zip([5, 200, 100]).all(|(&n, c)| n <= c));
    }

    #[test]
    fn zero_spread_falls_back_to_proportional() {
        let a = optimal_allocation(&spec(&[(10, 0.0), (30, 0.0)]), 8).unwrap();
        assert!(a.proportional_fallback);
        assert_eq!(a.sizes, vec![2, 6]);
        assert!(optimal_allocation(&spec(&[(10, 0.0)]), 11).is_err());
    }

    #[test]
    fn variance_edges() {
        let s = spec(&[(10, 2.0), (20, 1.0)]);
        assert_eq!(stratified_variance(&s, &[10, 20]).unwrap(), 0.0);
        assert!(stratified_variance(&s, &[0, 5]).is_err());
        // One stratum: N²σ²/n·(N−n)/(N−1).
        let one = stratified_variance(&spec(&[(10, 2.0)]), &[4]).unwrap();
        assert!((one - 100.0 * 4.0 / 4.0 * 6.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn neyman_without_fpc_matches_squared_objective() {
        let s = spec(&[(100, 2.0), (300, 1.0)]);
        let a = optimal_allocation(&s, 50).unwrap();
        let no_fpc: f64 =
            s.iter().zip(&a.sizes).map(|(s, &n)| (s.size as f64 * s.sigma).powi(2) / n as f64).sum();
        assert!((no_fpc - (200.0f64 + 300.0).powi(2) / 50.0).abs() < 1e-9);
    }
}
