//! Seeded experiments: scenario generation, the two-phase pipeline
//! (channel allocation, then per-user power planning) and figure sweeps.
//!
//! All randomness flows from one master seed through [`seeds::derive_seed`],
//! and every parallel reduction collects results in index order before
//! summing, so outputs are identical for any worker count.

pub mod figures;
pub mod pipeline;
pub mod scenario;
pub mod seeds;

pub use crate::chain::sample_chain;
pub use figures::{
    allocation_sweep, figure_experiments, horizon_sweep, threshold_sweep, AllocationSample, FigureId, HorizonPoint,
    ThresholdTrace,
};
pub use pipeline::{
    run_episode, run_full_pipeline, sample_initial, EpisodeResult, ExperimentResult, MdpSettings, UserRun,
};
pub use scenario::{generate_scenario, generate_scenario_with, sample_radius, Scenario};
