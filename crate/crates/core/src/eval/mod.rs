//! Synthetic targets, reference integrals and the quantitative experiments.

mod experiments;
mod metrics;
mod mixture;
mod reference;

pub use experiments::{
    convergence_slope, fit_log_log, hellinger_sweep, rect_error_sweep, ErrorRow, ExperimentConfig,
    LogLogFit, SweepReport,
};
pub use metrics::{
    hellinger_distance, integration_error, integral_against, rect_probability_error,
    sample_from_estimate, HellingerEstimate, RectErrorReport,
};
pub use mixture::{draw_samples, sample_mixture, Component, Covariance, MixtureSpec, TargetDensity};
pub use reference::{mc_expectation, McEstimate, ReferenceFunction};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draws per chunk when Monte Carlo work is split into independent streams.
pub(crate) const CHUNK: usize = 1 << 14;

/// Generator for one chunk of a seeded computation; streams never overlap.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer; derives independent seeds from structured keys.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
