//! Command-line frontend: calibration, streaming detection over CSV input,
//! Monte Carlo studies and table reproduction.
//!
//! Exit codes: 0 success (an alarm is not an error), 1 usage, 2 data,
//! 3 calibration infeasible.

mod commands;
mod input;
mod manifest;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detector::ProcedureKind;
use crate::montecarlo::Regime;
use crate::Error;

pub use manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            Error::TailResolution { .. } | Error::CalibrationInfeasible(_) => CliError::Infeasible(e.to_string()),
            Error::Data(_) | Error::Numeric(_) | Error::AlreadyAlarmed(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(format!("csv: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "eigenscan", version, about = "Covariance change-point detection with eigenvalue scan statistics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Threshold for a target average run length.
    Calibrate(CalibrateArgs),
    /// Run a detector over CSV rows (one observation per row).
    Detect(DetectArgs),
    /// Monte Carlo ARL / EDD estimates, or synthetic data with --emit-data.
    Simulate(SimulateArgs),
    /// Correlation and cross-moment of overlapping scan statistics.
    CorrStudy(CorrStudyArgs),
    /// Reproduce the cross-moment (1) or threshold (2) comparison table.
    Table(TableArgs),
    /// Export the embedded Tracy-Widom F1 table.
    TwTable(TwTableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Procedure {
    /// Largest eigenvalue.
    Max,
    /// Inverse of the smallest eigenvalue.
    Min,
}

impl std::fmt::Display for Procedure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Procedure::Max => "max",
            Procedure::Min => "min",
        })
    }
}

impl From<Procedure> for ProcedureKind {
    fn from(p: Procedure) -> Self {
        match p {
            Procedure::Max => ProcedureKind::MaxEig,
            Procedure::Min => ProcedureKind::MinEigInverse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Tracy-Widom tail, windows treated as independent.
    Tw,
    /// Tracy-Widom with the temporal-correlation correction (max only).
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Arl,
    Edd,
}

/// Inclusive grid `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for Sweep {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("expected start:stop:step, got '{s}'"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("'{x}' is not a number"));
        let sw = Sweep { start: num(a)?, stop: num(b)?, step: num(c)? };
        if !(sw.step > 0.0) || !(sw.stop >= sw.start) || !sw.start.is_finite() || !sw.stop.is_finite() {
            return Err(format!("need step > 0 and stop >= start, got '{s}'"));
        }
        if (sw.stop - sw.start) / sw.step > 1e6 {
            return Err(format!("grid '{s}' has too many points"));
        }
        Ok(sw)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub p: usize,
    /// Target average run length (> 1).
    #[arg(long)]
    pub arl: f64,
    #[arg(long, value_enum, default_value_t = Procedure::Max)]
    pub procedure: Procedure,
    /// Defaults to corrected for max and tw for min.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("threshold").required(true).args(["b", "arl"]))]
pub struct DetectArgs {
    /// Input CSV; standard input if absent or '-'.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Skip the first line of the input.
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub w: usize,
    /// Expected number of columns; taken from the first row if absent.
    #[arg(long)]
    pub p: Option<usize>,
    /// Raw threshold.
    #[arg(long)]
    pub b: Option<f64>,
    /// Calibrate the threshold for this ARL instead of giving --b.
    #[arg(long)]
    pub arl: Option<f64>,
    #[arg(long, value_enum, default_value_t = Procedure::Max)]
    pub procedure: Procedure,
    #[arg(long, value_enum, requires = "arl")]
    pub method: Option<Method>,
    /// Write (t, statistic, threshold, alarmed) for every ready step.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, required_unless_present = "emit_data")]
    pub metric: Option<MetricArg>,
    /// null, spiked or rank1.
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, required_unless_present = "emit_data")]
    pub w: Option<usize>,
    #[arg(long)]
    pub p: usize,
    #[arg(long, conflicts_with = "sweep_b")]
    pub b: Option<f64>,
    #[arg(long, value_enum, default_value_t = Procedure::Max)]
    pub procedure: Procedure,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub replicates: u64,
    /// Per-replicate step cap (post-change steps for EDD).
    #[arg(long, default_value_t = 250_000)]
    pub step_cap: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "EIGENSCAN_THREADS")]
    pub threads: Option<usize>,
    /// Threshold grid start:stop:step, one row per point.
    #[arg(long)]
    pub sweep_b: Option<Sweep>,
    /// Spike-strength grid start:stop:step (EDD only).
    #[arg(long, conflicts_with = "theta")]
    pub sweep_theta: Option<Sweep>,
    /// Write a synthetic stream to this CSV ('-' for stdout) instead of simulating.
    #[arg(long, conflicts_with_all = ["metric", "sweep_b", "sweep_theta"])]
    pub emit_data: Option<PathBuf>,
    /// Observations before the change (--emit-data).
    #[arg(long, default_value_t = 0)]
    pub change_at: u64,
    /// Rows to emit (--emit-data).
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrStudyArgs {
    #[arg(long, default_value_t = 200)]
    pub w: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,6,10,15,20")]
    pub deltas: Vec<usize>,
    /// Window pairs per lag.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub replicates: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "EIGENSCAN_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TableArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub which: u8,
    /// Replicates for the simulation row (default 10000 pairs for table 1,
    /// 200 record paths for table 2).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub replicates: Option<u64>,
    /// Leave out the simulation row.
    #[arg(long)]
    pub skip_simulation: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "EIGENSCAN_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TwTableArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Calibrate(a) => commands::calibrate(a, stdout),
        Command::Detect(a) => commands::detect(a, stdin, stdout),
        Command::Simulate(a) => commands::simulate(a, stdout),
        Command::CorrStudy(a) => commands::corr_study(a, stdout),
        Command::Table(a) => commands::table(a, stdout),
        Command::TwTable(a) => commands::tw_table(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "1.5:3.0:0.1".parse().unwrap();
        let v = s.values();
        assert_eq!(v.len(), 16);
        assert!((v[15] - 3.0).abs() < 1e-12);
        assert_eq!("2:2:1".parse::<Sweep>().unwrap().values(), vec![2.0]);
        assert!("3:1:1".parse::<Sweep>().is_err());
        assert!("1:2:0".parse::<Sweep>().is_err());
        assert!("1:2".parse::<Sweep>().is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::InvalidArgument("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(Error::Data("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::TailResolution { alpha: 1e-9 }).exit_code(), 3);
        assert_eq!(CliError::from(Error::CalibrationInfeasible("x".into())).exit_code(), 3);
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
