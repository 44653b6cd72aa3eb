//! Sequential detection of covariance change-points with sliding-window
//! extreme-eigenvalue scan statistics.
//!
//! Two procedures are provided: the largest eigenvalue of the windowed
//! sample covariance (for a spike appearing on top of white noise) and the
//! inverse of the smallest eigenvalue (for white noise collapsing onto a
//! rank-one subspace). Thresholds are calibrated from the Tracy-Widom law,
//! optionally corrected for the temporal correlation between overlapping
//! windows, and the calibration can be checked with the Monte Carlo
//! estimators in [`montecarlo`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod detector;
mod error;
pub mod linalg;
pub mod montecarlo;
pub mod tracy_widom;
pub mod window;

pub use calibration::{CalibrationMethod, CalibrationResult, EdgeConstants};
pub use detector::{Detector, DetectorConfig, ProcedureKind, RunOutcome, StepEvent};
pub use error::{Error, Result};
pub use linalg::SymmetricMatrix;
pub use tracy_widom::{tw1_cdf, tw1_moments, tw1_upper_quantile, TracyWidomTable};
pub use window::SlidingCovariance;
