//! Shared fixtures for the sampler benchmarks.

use rippler_core::rng;
use rippler_core::synthetic::{recovery_truth, simulate_study, SimulatedStudy};
use rippler_core::{FixedModel, ModelParams};

/// The recovery-study dataset simulated from a fixed seed.
pub fn study_fixture(seed: u64) -> (SimulatedStudy, ModelParams, FixedModel) {
    let (theta, fixed) = recovery_truth();
    let study = simulate_study(&theta, &fixed, &mut rng::stream(seed, 0)).expect("valid study");
    (study, theta, fixed)
}
