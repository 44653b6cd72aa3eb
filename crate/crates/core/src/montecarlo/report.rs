use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Arl,
    Edd,
    Correlation,
    CrossMoment,
}

/// Monte Carlo estimate with its standard error and censoring count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub metric: Metric,
    pub point_estimate: f64,
    pub std_error: f64,
    pub replicates: u64,
    /// Runs that hit the step cap; they enter the mean at the cap.
    pub censored: u64,
    pub settings: serde_json::Value,
}

impl SimulationReport {
    pub const CSV_HEADER: [&'static str; 6] = ["metric", "estimate", "std_error", "replicates", "censored", "settings"];

    pub fn csv_record(&self) -> [String; 6] {
        [
            serde_json::to_value(self.metric).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
            self.point_estimate.to_string(),
            self.std_error.to_string(),
            self.replicates.to_string(),
            self.censored.to_string(),
            self.settings.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[SimulationReport], out: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(Self::CSV_HEADER)?;
        for r in reports {
            wtr.write_record(r.csv_record())?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Streaming mean and variance (Welford), mergeable across partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}
