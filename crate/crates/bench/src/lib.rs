//! Shared fixtures for the benchmarks.

use sparsebeam::channel::{AngularTransform, ChannelSet};
use sparsebeam::experiment::problem_for;
use sparsebeam::{ExperimentConfig, ProblemSpec, Scheme};

/// Channel set of the default 4×8 array, four users.
pub fn default_channels(seed: u64, epsilon: f64) -> ChannelSet {
    let config = ExperimentConfig {
        seed,
        ..Default::default()
    };
    let transform = AngularTransform::new(&config.system).expect("default system is valid");
    config
        .channel_draw(epsilon)
        .draw(&transform, config.draw_stream(0, 0))
        .expect("default channel model is valid")
}

pub fn default_problem(scheme: Scheme, seed: u64, epsilon: f64) -> ProblemSpec {
    let config = ExperimentConfig::default();
    problem_for(
        scheme,
        &default_channels(seed, epsilon),
        epsilon,
        config.gamma_db,
        config.noise_factor,
        config.bound,
    )
}
