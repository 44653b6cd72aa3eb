//! Monte Carlo estimators for run length, detection delay and the
//! dependence between overlapping scan statistics.
//!
//! Replicates run in parallel on the current rayon pool; results are
//! aggregated in replicate order so every report is bit-reproducible for a
//! given seed regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::generator::{replicate_seed, GeneratorSpec, ObservationStream, Regime};
use super::report::{Metric, RunningStats, SimulationReport};
use crate::detector::{Detector, DetectorConfig, ProcedureKind, StepEvent};
use crate::error::{invalid, Result};
use crate::linalg::lambda_max;
use crate::window::SlidingCovariance;

/// Outcome of one replicate: stopping time (or the cap) and whether it was
/// censored.
fn run_replicate(config: &DetectorConfig, spec: &GeneratorSpec, step_cap: u64) -> Result<(u64, bool)> {
    let mut det = Detector::new(config.clone())?;
    let mut stream = ObservationStream::new(spec)?;
    let mut x = vec![0.0; config.p];
    for _ in 0..step_cap {
        stream.next_into(&mut x);
        if let StepEvent::Alarm(a) = det.step(&x)? {
            return Ok((a.time, false));
        }
    }
    Ok((step_cap, true))
}

fn summarise(metric: Metric, runs: &[(f64, bool)], settings: serde_json::Value) -> SimulationReport {
    let stats: RunningStats = runs.iter().map(|r| r.0).collect();
    SimulationReport {
        metric,
        point_estimate: stats.mean(),
        std_error: stats.std_error(),
        replicates: runs.len() as u64,
        censored: runs.iter().filter(|r| r.1).count() as u64,
        settings,
    }
}

/// Average run length under the null: mean stopping time over independent
/// `N(0, I)` streams, each capped at `step_cap` steps.
pub fn estimate_arl(config: &DetectorConfig, replicates: u64, step_cap: u64, seed: u64) -> Result<SimulationReport> {
    config.validate()?;
    if replicates < 1 {
        return Err(invalid("replicates must be >= 1"));
    }
    if step_cap < 10 * config.w as u64 {
        return Err(invalid(format!("step cap {step_cap} must be at least 10 * w = {}", 10 * config.w)));
    }
    let runs: Vec<(f64, bool)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let spec = GeneratorSpec::null(config.p, replicate_seed(seed, r));
            run_replicate(config, &spec, step_cap).map(|(t, c)| (t as f64, c))
        })
        .collect::<Result<_>>()?;
    Ok(summarise(
        Metric::Arl,
        &runs,
        json!({
            "procedure": config.kind,
            "w": config.w,
            "p": config.p,
            "b": config.threshold_b,
            "step_cap": step_cap,
            "seed": seed,
        }),
    ))
}

/// Expected detection delay with the change active from the first
/// monitored observation.
///
/// Each replicate first fills the window with `w - 1` pre-change samples;
/// the change hits observation `w`, the first one at which the statistic
/// is evaluated. The delay is the number of post-change observations
/// consumed up to and including the alarm, so it is at least 1. Runs that
/// see no alarm within `step_cap` post-change observations are censored.
pub fn estimate_edd(
    config: &DetectorConfig,
    gen: &GeneratorSpec,
    replicates: u64,
    step_cap: u64,
    seed: u64,
) -> Result<SimulationReport> {
    config.validate()?;
    gen.validate()?;
    if gen.regime == Regime::Null {
        return Err(invalid("EDD needs a spiked or rank1 regime"));
    }
    if gen.change_at != 0 {
        return Err(invalid("EDD is measured with the change at the first monitored sample (change_at = 0)"));
    }
    if gen.p != config.p {
        return Err(invalid(format!("generator dimension {} != detector dimension {}", gen.p, config.p)));
    }
    if replicates < 1 || step_cap < 1 {
        return Err(invalid("replicates and step cap must be >= 1"));
    }
    let warm = config.w as u64 - 1;
    let runs: Vec<(f64, bool)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut spec = gen.clone();
            spec.change_at = warm;
            spec.seed = replicate_seed(seed, r);
            run_replicate(config, &spec, warm + step_cap).map(|(t, c)| ((t - warm) as f64, c))
        })
        .collect::<Result<_>>()?;
    Ok(summarise(
        Metric::Edd,
        &runs,
        json!({
            "procedure": config.kind,
            "regime": gen.regime,
            "theta": gen.theta,
            "w": config.w,
            "p": config.p,
            "b": config.threshold_b,
            "step_cap": step_cap,
            "seed": seed,
        }),
    ))
}

/// Pairs `(Z_t, Z_{t+delta})` of largest-eigenvalue scan statistics, one
/// independent null stream per replicate with both windows sliding on it.
pub fn sample_scan_pairs(w: usize, p: usize, delta: usize, replicates: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if delta < 1 || delta > w {
        return Err(invalid(format!("need 1 <= delta <= w (delta = {delta}, w = {w})")));
    }
    if replicates < 2 {
        return Err(invalid("need at least two replicates"));
    }
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut stream = ObservationStream::new(&GeneratorSpec::null(p, replicate_seed(seed, r)))?;
            let mut cov = SlidingCovariance::new(p, w)?;
            let mut x = vec![0.0; p];
            for _ in 0..w {
                stream.next_into(&mut x);
                cov.push(&x)?;
            }
            let z0 = lambda_max(&cov.matrix())?;
            for _ in 0..delta {
                stream.next_into(&mut x);
                cov.push(&x)?;
            }
            let z1 = lambda_max(&cov.matrix())?;
            Ok((z0, z1))
        })
        .collect()
}

fn pair_settings(w: usize, p: usize, delta: usize, seed: u64) -> serde_json::Value {
    json!({ "w": w, "p": p, "delta": delta, "seed": seed })
}

/// Sample correlation of `(Z_t, Z_{t+delta})` under the null.
pub fn estimate_correlation(w: usize, p: usize, delta: usize, replicates: u64, seed: u64) -> Result<SimulationReport> {
    let pairs = sample_scan_pairs(w, p, delta, replicates, seed)?;
    let r = pearson(&pairs);
    let n = pairs.len() as f64;
    Ok(SimulationReport {
        metric: Metric::Correlation,
        point_estimate: r,
        std_error: (1.0 - r * r).max(0.0) / (n - 1.0).sqrt(),
        replicates,
        censored: 0,
        settings: pair_settings(w, p, delta, seed),
    })
}

/// Sample mean of `Z_t * Z_{t+delta}` under the null.
pub fn estimate_cross_moment(w: usize, p: usize, delta: usize, replicates: u64, seed: u64) -> Result<SimulationReport> {
    let pairs = sample_scan_pairs(w, p, delta, replicates, seed)?;
    let stats: RunningStats = pairs.iter().map(|(a, b)| a * b).collect();
    Ok(SimulationReport {
        metric: Metric::CrossMoment,
        point_estimate: stats.mean(),
        std_error: stats.std_error(),
        replicates,
        censored: 0,
        settings: pair_settings(w, p, delta, seed),
    })
}

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Simulated threshold achieving a target ARL for the maximum-eigenvalue
/// procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub target_arl: f64,
    pub threshold_b: f64,
    /// Replicates whose record path stopped before resolving the threshold.
    pub censored: u64,
}

/// Running-maximum record path `(t, new max)` of the null max-eig
/// statistic, stopped once the maximum reaches `b_stop` or at `step_cap`.
fn record_path(w: usize, p: usize, b_stop: f64, step_cap: u64, seed: u64) -> Result<(Vec<(u64, f64)>, bool)> {
    let mut stream = ObservationStream::new(&GeneratorSpec::null(p, seed))?;
    let mut cov = SlidingCovariance::new(p, w)?;
    let mut x = vec![0.0; p];
    let mut records = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for t in 1..=step_cap {
        stream.next_into(&mut x);
        cov.push(&x)?;
        if !cov.is_ready() {
            continue;
        }
        let z = lambda_max(&cov.matrix())?;
        if z > best {
            best = z;
            records.push((t, z));
            if z >= b_stop {
                return Ok((records, false));
            }
        }
    }
    Ok((records, true))
}

/// Thresholds `b` such that the simulated mean stopping time of the
/// max-eig procedure equals each target, using common random numbers
/// across thresholds.
///
/// Every replicate's stopping time as a function of `b` is read off its
/// running-maximum record path, which is followed until it reaches
/// `b_stop` (or `step_cap`). Thresholds above `b_stop` cannot be resolved.
pub fn simulate_arl_thresholds(
    w: usize,
    p: usize,
    targets: &[f64],
    b_stop: f64,
    replicates: u64,
    step_cap: u64,
    seed: u64,
) -> Result<Vec<ThresholdEstimate>> {
    DetectorConfig::new(ProcedureKind::MaxEig, p, w, b_stop)?;
    if replicates < 1 {
        return Err(invalid("replicates must be >= 1"));
    }
    let paths: Vec<(Vec<(u64, f64)>, bool)> = (0..replicates)
        .into_par_iter()
        .map(|r| record_path(w, p, b_stop, step_cap, replicate_seed(seed, r)))
        .collect::<Result<_>>()?;

    let stopping_time = |path: &(Vec<(u64, f64)>, bool), b: f64| -> (u64, bool) {
        match path.0.iter().find(|(_, z)| *z >= b) {
            Some(&(t, _)) => (t, false),
            None => (step_cap, true),
        }
    };
    let mean_arl =
        |b: f64| -> f64 { paths.iter().map(|pth| stopping_time(pth, b).0 as f64).sum::<f64>() / paths.len() as f64 };

    let lo_b = paths.iter().filter_map(|(rec, _)| rec.first().map(|r| r.1)).fold(f64::INFINITY, f64::min);
    let mut out = Vec::with_capacity(targets.len());
    for &target in targets {
        let (mut lo, mut hi) = (lo_b, b_stop);
        if mean_arl(hi) < target {
            return Err(crate::Error::CalibrationInfeasible(format!(
                "target ARL {target} needs a threshold above the simulated range (b_stop = {b_stop})"
            )));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mean_arl(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let censored = paths.iter().filter(|pth| stopping_time(pth, hi).1).count() as u64;
        out.push(ThresholdEstimate { target_arl: target, threshold_b: hi, censored });
    }
    Ok(out)
}
