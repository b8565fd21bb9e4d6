//! Simulation lab: error generators, realized-variance and coverage
//! experiments, synthetic populations, and brute-force enumeration oracles.
//!
//! Every stochastic routine takes a root seed. Replicate `i` draws from
//! ChaCha8 seeded with the root and switched to stream `i`, so results do not
//! depend on how replicates are spread across threads.

mod experiments;
mod generate;
mod oracle;
mod sampling;
mod synth;

pub use experiments::{
    coverage_experiment, mc_sigma_r_bands, realized_sigma_r, BandRow, CoverageResult, NamedScenario,
};
pub use generate::{
    gen_all_or_nothing, gen_scenario, realize, ErrorModel, PartialProportion, RealizedAudit, Rounding, ScenarioSpec,
};
pub use oracle::{
    binomial, oracle_enumerate_conditional, oracle_enumerate_g, oracle_enumerate_partial, ConditionalOracle,
    GOracle, ENUMERATION_LIMIT,
};
pub use sampling::draw_run_counts;
pub use synth::{make_edwards_like, make_neter_like, EDWARDS_SPIKE_WEIGHT};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for replicate `index` under `root`.
pub fn replicate_rng(root: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(index);
    rng
}

/// Mixes a tag into a root seed (SplitMix64 finalizer).
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
