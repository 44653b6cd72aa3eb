//! Streaming stopping-time procedures on the windowed sample covariance.
//!
//! * [`ProcedureKind::MaxEig`]: alarm at the first `t` with
//!   `lambda_max(S_t) >= b`.
//! * [`ProcedureKind::MinEigInverse`]: alarm at the first `t` with
//!   `1 / lambda_min(S_t) >= b`.
//!
//! Time is counted in observations, starting at 1. The statistic is
//! undefined until `w` observations have been seen, so no alarm can occur
//! before `t = w`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationMethod;
use crate::error::{invalid, Error, Result};
use crate::linalg::extreme_eigenvalues;
use crate::window::SlidingCovariance;

/// Below this, the smallest eigenvalue is treated as an exact zero.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcedureKind {
    MaxEig,
    MinEigInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: ProcedureKind,
    pub p: usize,
    pub w: usize,
    pub threshold_b: f64,
    pub calibration_method: CalibrationMethod,
}

impl DetectorConfig {
    pub fn new(kind: ProcedureKind, p: usize, w: usize, threshold_b: f64) -> Result<Self> {
        let cfg = Self { kind, p, w, threshold_b, calibration_method: CalibrationMethod::Manual };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_method(mut self, method: CalibrationMethod) -> Self {
        self.calibration_method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(invalid("dimension p must be >= 1"));
        }
        if self.w < 2 {
            return Err(invalid(format!("window length must be >= 2, got {}", self.w)));
        }
        if self.kind == ProcedureKind::MinEigInverse && self.w <= self.p {
            return Err(invalid(format!("min-eigenvalue procedure needs w > p (w = {}, p = {})", self.w, self.p)));
        }
        if !(self.threshold_b > 0.0) {
            return Err(invalid(format!("threshold must be > 0, got {}", self.threshold_b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub time: u64,
    pub statistic: f64,
    /// The window was numerically singular (min-eig procedure only).
    pub singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEvent {
    /// Window not yet full.
    NotReady,
    Statistic(f64),
    Alarm(Alarm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum RunOutcome {
    Alarm { time: u64, singular: bool },
    Exhausted { steps: u64 },
}

impl RunOutcome {
    pub fn stopping_time(&self) -> Option<u64> {
        match *self {
            RunOutcome::Alarm { time, .. } => Some(time),
            RunOutcome::Exhausted { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    t: u64,
    cov: SlidingCovariance,
    last_statistic: Option<f64>,
    alarmed_at: Option<u64>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let cov = SlidingCovariance::new(config.p, config.w)?;
        Ok(Self { config, t: 0, cov, last_statistic: None, alarmed_at: None })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    /// Number of observations consumed.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn last_statistic(&self) -> Option<f64> {
        self.last_statistic
    }

    pub fn alarmed_at(&self) -> Option<u64> {
        self.alarmed_at
    }

    pub fn reset(&mut self) {
        self.t = 0;
        self.cov.clear();
        self.last_statistic = None;
        self.alarmed_at = None;
    }

    /// Push `x` and evaluate the statistic without the alarm bookkeeping,
    /// so it keeps working after an alarm. Returns `(statistic, singular)`
    /// once the window is full.
    pub fn observe(&mut self, x: &[f64]) -> Result<Option<(f64, bool)>> {
        if x.len() != self.config.p {
            return Err(invalid(format!("observation has dimension {}, expected {}", x.len(), self.config.p)));
        }
        self.cov.push(x)?;
        self.t += 1;
        if !self.cov.is_ready() {
            self.last_statistic = None;
            return Ok(None);
        }
        let (lo, hi) = extreme_eigenvalues(&self.cov.matrix())?;
        let out = match self.config.kind {
            ProcedureKind::MaxEig => (hi, false),
            ProcedureKind::MinEigInverse => {
                if lo < SINGULAR_EIGENVALUE {
                    (f64::INFINITY, true)
                } else {
                    (1.0 / lo, false)
                }
            }
        };
        self.last_statistic = Some(out.0);
        Ok(Some(out))
    }

    pub fn step(&mut self, x: &[f64]) -> Result<StepEvent> {
        if let Some(t) = self.alarmed_at {
            return Err(Error::AlreadyAlarmed(t));
        }
        match self.observe(x)? {
            None => Ok(StepEvent::NotReady),
            Some((stat, singular)) => {
                if singular || stat >= self.config.threshold_b {
                    self.alarmed_at = Some(self.t);
                    Ok(StepEvent::Alarm(Alarm { time: self.t, statistic: stat, singular }))
                } else {
                    Ok(StepEvent::Statistic(stat))
                }
            }
        }
    }
}

/// Feed `source` to a fresh detector until the first alarm.
pub fn run_to_alarm<I, X>(config: &DetectorConfig, source: I) -> Result<RunOutcome>
where
    I: IntoIterator<Item = X>,
    X: AsRef<[f64]>,
{
    let mut det = Detector::new(config.clone())?;
    for x in source {
        if let StepEvent::Alarm(a) = det.step(x.as_ref())? {
            return Ok(RunOutcome::Alarm { time: a.time, singular: a.singular });
        }
    }
    Ok(RunOutcome::Exhausted { steps: det.t() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub statistic: f64,
    pub threshold: f64,
    /// Whether the procedure has alarmed at or before `t`.
    pub alarmed: bool,
}

/// Statistic at every ready step over the whole source, not stopping at
/// the alarm.
pub fn trajectory<I, X>(config: &DetectorConfig, source: I) -> Result<Vec<TrajectoryPoint>>
where
    I: IntoIterator<Item = X>,
    X: AsRef<[f64]>,
{
    let mut det = Detector::new(config.clone())?;
    let mut alarmed = false;
    let mut out = Vec::new();
    for x in source {
        if let Some((stat, singular)) = det.observe(x.as_ref())? {
            alarmed |= singular || stat >= config.threshold_b;
            out.push(TrajectoryPoint { t: det.t(), statistic: stat, threshold: config.threshold_b, alarmed });
        }
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: Write>(points: &[TrajectoryPoint], out: W) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "statistic", "threshold", "alarmed"])?;
    for pt in points {
        wtr.write_record(&[
            pt.t.to_string(),
            pt.statistic.to_string(),
            pt.threshold.to_string(),
            u8::from(pt.alarmed).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
