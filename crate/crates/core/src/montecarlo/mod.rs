//! Seeded synthetic streams and Monte Carlo estimators.

mod estimate;
mod generator;
mod report;

pub use estimate::{
    estimate_arl, estimate_correlation, estimate_cross_moment, estimate_edd, sample_scan_pairs,
    simulate_arl_thresholds, ThresholdEstimate,
};
pub use generator::{generate, replicate_seed, GeneratorSpec, ObservationStream, Regime};
pub use report::{Metric, RunningStats, SimulationReport};
