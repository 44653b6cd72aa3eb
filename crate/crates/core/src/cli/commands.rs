use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::input::RowReader;
use super::{
    CalibrateArgs, CliError, CorrStudyArgs, DetectArgs, Method, MetricArg, Procedure, RunManifest, SimulateArgs,
    TableArgs, TwTableArgs,
};
use crate::calibration::{
    cross_moment_upper_bound, edd_lower_bound, local_correlation, threshold_corrected, threshold_tw_max,
    threshold_tw_min, CalibrationMethod, CalibrationResult,
};
use crate::detector::{write_trajectory_csv, Alarm, Detector, DetectorConfig, RunOutcome, TrajectoryPoint};
use crate::montecarlo::{
    estimate_arl, estimate_correlation, estimate_cross_moment, estimate_edd, simulate_arl_thresholds, GeneratorSpec,
    ObservationStream, Regime, SimulationReport,
};
use crate::tracy_widom::TracyWidomTable;

type CliResult<T = ()> = Result<T, CliError>;

const TABLE1_DELTAS: [usize; 5] = [2, 6, 10, 15, 20];
const TABLE2_ARLS: [f64; 6] = [5e3, 1e4, 2e4, 3e4, 4e4, 5e4];
const TABLE_W: usize = 200;
const TABLE_P: usize = 10;

fn default_method(procedure: Procedure) -> Method {
    match procedure {
        Procedure::Max => Method::Corrected,
        Procedure::Min => Method::Tw,
    }
}

fn calibrate_threshold(
    procedure: Procedure,
    method: Option<Method>,
    w: usize,
    p: usize,
    arl: f64,
) -> CliResult<CalibrationResult> {
    if !(arl > 1.0) || !arl.is_finite() {
        return Err(CliError::Usage(format!("--arl must be a finite value > 1, got {arl}")));
    }
    let res = match (procedure, method.unwrap_or_else(|| default_method(procedure))) {
        (Procedure::Max, Method::Tw) => threshold_tw_max(w, p, arl)?,
        (Procedure::Max, Method::Corrected) => threshold_corrected(w, p, arl)?,
        (Procedure::Min, Method::Tw) => threshold_tw_min(w, p, arl)?,
        (Procedure::Min, Method::Corrected) => {
            return Err(CliError::Usage("the corrected calibration is only defined for --procedure max".into()))
        }
    };
    Ok(res)
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Data(format!("json: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Sends `body` to `path` (with a manifest sidecar) or to stdout.
fn emit(path: Option<&Path>, manifest: &RunManifest, stdout: &mut dyn Write, body: &[u8]) -> CliResult {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, body).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            manifest.write_sidecar(p)?;
        }
        _ => stdout.write_all(body)?,
    }
    Ok(())
}

pub(crate) fn calibrate(args: &CalibrateArgs, stdout: &mut dyn Write) -> CliResult {
    let res = calibrate_threshold(args.procedure, args.method, args.w, args.p, args.arl)?;
    if args.json {
        let manifest = RunManifest::new("calibrate", args, None);
        return write_json(stdout, &json!({ "manifest": manifest, "procedure": args.procedure, "calibration": res }));
    }
    writeln!(stdout, "b = {:.6}", res.threshold_b)?;
    writeln!(stdout, "standardized quantile = {:.6}", res.standardized)?;
    writeln!(stdout, "method = {}", res.method)?;
    writeln!(stdout, "procedure = {}", args.procedure)?;
    writeln!(stdout, "w = {}, p = {}, target ARL = {}", res.w, res.p, res.target_arl)?;
    Ok(())
}

pub(crate) fn detect(args: &DetectArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> CliResult {
    let source: Box<dyn Read + '_> = match &args.input {
        Some(p) if p != Path::new("-") => {
            Box::new(BufReader::new(File::open(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?))
        }
        _ => Box::new(stdin),
    };
    let mut rows = RowReader::new(source, args.header, args.p);
    let mut x = Vec::new();
    let mut line = rows.next_row(&mut x)?;
    let p =
        rows.width().ok_or_else(|| CliError::Data("input has no rows; pass --p to run on an empty stream".into()))?;

    let (b, method) = match (args.b, args.arl) {
        (Some(b), _) => (b, CalibrationMethod::Manual),
        (None, Some(arl)) => {
            let c = calibrate_threshold(args.procedure, args.method, args.w, p, arl)?;
            (c.threshold_b, c.method)
        }
        (None, None) => return Err(CliError::Usage("one of --b or --arl is required".into())),
    };
    let config = DetectorConfig::new(args.procedure.into(), p, args.w, b)?.with_method(method);
    let mut det = Detector::new(config.clone())?;
    let keep_trajectory = args.trajectory.is_some();
    let mut alarm: Option<Alarm> = None;
    let mut points = Vec::new();

    while let Some(ln) = line {
        let obs = det.observe(&x).map_err(|e| CliError::Data(format!("line {ln}: {e}")))?;
        if let Some((stat, singular)) = obs {
            if alarm.is_none() && (singular || stat >= b) {
                alarm = Some(Alarm { time: det.t(), statistic: stat, singular });
            }
            if keep_trajectory {
                points.push(TrajectoryPoint { t: det.t(), statistic: stat, threshold: b, alarmed: alarm.is_some() });
            }
        }
        if alarm.is_some() && !keep_trajectory {
            break;
        }
        line = rows.next_row(&mut x)?;
    }

    let manifest = RunManifest::new("detect", args, None);
    if let Some(path) = &args.trajectory {
        let mut buf = Vec::new();
        write_trajectory_csv(&points, &mut buf)?;
        emit(Some(path), &manifest, stdout, &buf)?;
    }
    let outcome = match alarm {
        Some(a) => RunOutcome::Alarm { time: a.time, singular: a.singular },
        None => RunOutcome::Exhausted { steps: det.t() },
    };
    if args.json {
        return write_json(
            stdout,
            &json!({
                "manifest": manifest,
                "config": config,
                "outcome": outcome,
                "alarm": alarm,
                "observations": det.t(),
            }),
        );
    }
    match alarm {
        Some(a) => writeln!(
            stdout,
            "alarm at t = {} (statistic = {:.6}, threshold = {:.6}{})",
            a.time,
            a.statistic,
            b,
            if a.singular { ", singular window" } else { "" }
        )?,
        None => writeln!(stdout, "no alarm in {} observations (threshold = {b:.6})", det.t())?,
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SimulateRow {
    b: f64,
    theta: Option<f64>,
    /// Closed-form EDD lower bound (max procedure, spiked regime).
    lower_bound: Option<f64>,
    report: SimulationReport,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run_in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub(crate) fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> CliResult {
    if let Some(path) = &args.emit_data {
        return emit_data(args, path, stdout);
    }
    let metric = args.metric.ok_or_else(|| CliError::Usage("--metric is required".into()))?;
    let w = args.w.ok_or_else(|| CliError::Usage("--w is required".into()))?;
    let regime = args.regime.unwrap_or(match metric {
        MetricArg::Arl => Regime::Null,
        MetricArg::Edd => Regime::Spiked,
    });
    let b_grid = match (args.b, args.sweep_b) {
        (Some(b), None) => vec![b],
        (None, Some(s)) => s.values(),
        _ => return Err(CliError::Usage("give exactly one of --b or --sweep-b".into())),
    };
    let theta_grid: Vec<Option<f64>> = match metric {
        MetricArg::Arl => {
            if regime != Regime::Null {
                return Err(CliError::Usage("ARL is a null-regime metric; use --regime null or --metric edd".into()));
            }
            if args.theta.is_some() || args.sweep_theta.is_some() {
                return Err(CliError::Usage("--theta and --sweep-theta apply to --metric edd only".into()));
            }
            vec![None]
        }
        MetricArg::Edd => {
            if regime == Regime::Null {
                return Err(CliError::Usage("EDD needs --regime spiked or rank1".into()));
            }
            match (args.theta, args.sweep_theta) {
                (Some(t), None) => vec![Some(t)],
                (None, Some(s)) => s.values().into_iter().map(Some).collect(),
                _ => return Err(CliError::Usage("--metric edd needs --theta or --sweep-theta".into())),
            }
        }
    };

    let mut rows = Vec::with_capacity(b_grid.len() * theta_grid.len());
    for &theta in &theta_grid {
        for &b in &b_grid {
            let config = DetectorConfig::new(args.procedure.into(), args.p, w, b)?;
            let report = match theta {
                None => {
                    run_in_pool(args.threads, || estimate_arl(&config, args.replicates, args.step_cap, args.seed))??
                }
                Some(th) => {
                    let gen = GeneratorSpec { regime, theta: th, ..GeneratorSpec::null(args.p, args.seed) };
                    run_in_pool(args.threads, || {
                        estimate_edd(&config, &gen, args.replicates, args.step_cap, args.seed)
                    })??
                }
            };
            let lower_bound = match (theta, regime, args.procedure) {
                (Some(th), Regime::Spiked, Procedure::Max) if th > 0.0 => Some(edd_lower_bound(b, w, th)?.value),
                _ => None,
            };
            rows.push(SimulateRow { b, theta, lower_bound, report });
        }
    }

    let manifest = RunManifest::new("simulate", args, Some(args.seed));
    if args.json {
        let mut buf = Vec::new();
        write_json(&mut buf, &json!({ "manifest": manifest, "rows": rows }))?;
        return emit(args.output.as_deref(), &manifest, stdout, &buf);
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "metric",
        "procedure",
        "w",
        "p",
        "b",
        "theta",
        "estimate",
        "std_error",
        "replicates",
        "censored",
        "lower_bound",
    ])?;
    for r in &rows {
        wtr.write_record([
            format!("{metric:?}").to_lowercase(),
            args.procedure.to_string(),
            w.to_string(),
            args.p.to_string(),
            r.b.to_string(),
            opt_cell(r.theta),
            r.report.point_estimate.to_string(),
            r.report.std_error.to_string(),
            r.report.replicates.to_string(),
            r.report.censored.to_string(),
            opt_cell(r.lower_bound),
        ])?;
    }
    let buf = wtr.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    emit(args.output.as_deref(), &manifest, stdout, &buf)
}

fn emit_data(args: &SimulateArgs, path: &Path, stdout: &mut dyn Write) -> CliResult {
    let regime = args.regime.unwrap_or(Regime::Null);
    let theta = match regime {
        Regime::Null => 0.0,
        _ => args
            .theta
            .ok_or_else(|| CliError::Usage("--emit-data with a spiked or rank1 regime needs --theta".into()))?,
    };
    let spec = GeneratorSpec { regime, theta, change_at: args.change_at, ..GeneratorSpec::null(args.p, args.seed) };
    let mut stream = ObservationStream::new(&spec)?;
    let manifest = RunManifest::new("simulate", args, Some(args.seed));
    let to_file = path != Path::new("-");
    let sink: Box<dyn Write + '_> = if to_file {
        Box::new(BufWriter::new(File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?))
    } else {
        Box::new(&mut *stdout)
    };
    let mut wtr = csv::Writer::from_writer(sink);
    let mut x = vec![0.0; args.p];
    for _ in 0..args.steps {
        stream.next_into(&mut x);
        wtr.write_record(x.iter().map(|v| v.to_string()))?;
    }
    wtr.flush()?;
    drop(wtr);
    if to_file {
        manifest.write_sidecar(path)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CorrRow {
    delta: usize,
    correlation: f64,
    correlation_se: f64,
    /// `1 - beta * delta`.
    local_approximation: f64,
    cross_moment: f64,
    cross_moment_se: f64,
    upper_bound: Option<f64>,
}

pub(crate) fn corr_study(args: &CorrStudyArgs, stdout: &mut dyn Write) -> CliResult {
    let mut rows = Vec::with_capacity(args.deltas.len());
    for &delta in &args.deltas {
        if delta < 1 || delta > args.w {
            return Err(CliError::Usage(format!("every delta must lie in 1..={} (got {delta})", args.w)));
        }
        let (corr, cross) = run_in_pool(args.threads, || {
            (
                estimate_correlation(args.w, args.p, delta, args.replicates, args.seed),
                estimate_cross_moment(args.w, args.p, delta, args.replicates, args.seed),
            )
        })?;
        let (corr, cross) = (corr?, cross?);
        let upper_bound =
            if delta < args.w { Some(cross_moment_upper_bound(args.w, args.p, delta)?.value) } else { None };
        rows.push(CorrRow {
            delta,
            correlation: corr.point_estimate,
            correlation_se: corr.std_error,
            local_approximation: local_correlation(args.w, args.p, delta),
            cross_moment: cross.point_estimate,
            cross_moment_se: cross.std_error,
            upper_bound,
        });
    }
    let manifest = RunManifest::new("corr-study", args, Some(args.seed));
    let mut buf = Vec::new();
    if args.json {
        write_json(&mut buf, &json!({ "manifest": manifest, "w": args.w, "p": args.p, "rows": rows }))?;
    } else {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        wtr.write_record([
            "delta",
            "correlation",
            "correlation_se",
            "local_approximation",
            "cross_moment",
            "cross_moment_se",
            "upper_bound",
        ])?;
        for r in &rows {
            wtr.write_record([
                r.delta.to_string(),
                r.correlation.to_string(),
                r.correlation_se.to_string(),
                r.local_approximation.to_string(),
                r.cross_moment.to_string(),
                r.cross_moment_se.to_string(),
                opt_cell(r.upper_bound),
            ])?;
        }
        wtr.flush()?;
    }
    emit(args.output.as_deref(), &manifest, stdout, &buf)
}

#[derive(Debug, Serialize)]
struct TableRow {
    method: &'static str,
    values: Vec<f64>,
}

fn table1(args: &TableArgs) -> CliResult<Vec<TableRow>> {
    let mut rows = Vec::new();
    if !args.skip_simulation {
        let n = args.replicates.unwrap_or(10_000);
        let values = run_in_pool(args.threads, || {
            TABLE1_DELTAS
                .iter()
                .map(|&d| estimate_cross_moment(TABLE_W, TABLE_P, d, n, args.seed).map(|r| r.point_estimate))
                .collect::<crate::Result<Vec<f64>>>()
        })??;
        rows.push(TableRow { method: "simulation", values });
    }
    let values = TABLE1_DELTAS
        .iter()
        .map(|&d| cross_moment_upper_bound(TABLE_W, TABLE_P, d).map(|c| c.value))
        .collect::<crate::Result<Vec<f64>>>()?;
    rows.push(TableRow { method: "upper-bound", values });
    Ok(rows)
}

fn table2(args: &TableArgs) -> CliResult<Vec<TableRow>> {
    let tw = TABLE2_ARLS
        .iter()
        .map(|&a| threshold_tw_max(TABLE_W, TABLE_P, a).map(|c| c.threshold_b))
        .collect::<crate::Result<Vec<f64>>>()?;
    let corrected = TABLE2_ARLS
        .iter()
        .map(|&a| threshold_corrected(TABLE_W, TABLE_P, a).map(|c| c.threshold_b))
        .collect::<crate::Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    if !args.skip_simulation {
        let n = args.replicates.unwrap_or(200);
        // record paths only need to climb past the largest simulated threshold,
        // which sits below the corrected and TW values
        let last = TABLE2_ARLS.len() - 1;
        let b_stop = 0.5 * (tw[last] + corrected[last]);
        let est = run_in_pool(args.threads, || {
            simulate_arl_thresholds(TABLE_W, TABLE_P, &TABLE2_ARLS, b_stop, n, 5_000_000, args.seed)
        })??;
        rows.push(TableRow { method: "simulation", values: est.iter().map(|e| e.threshold_b).collect() });
    }
    rows.push(TableRow { method: "tw-approx", values: tw });
    rows.push(TableRow { method: "corrected", values: corrected });
    Ok(rows)
}

pub(crate) fn table(args: &TableArgs, stdout: &mut dyn Write) -> CliResult {
    let (columns, rows): (Vec<String>, _) = match args.which {
        1 => (TABLE1_DELTAS.iter().map(|d| d.to_string()).collect(), table1(args)?),
        2 => (TABLE2_ARLS.iter().map(|a| a.to_string()).collect(), table2(args)?),
        n => return Err(CliError::Usage(format!("--which must be 1 or 2, got {n}"))),
    };
    let manifest = RunManifest::new("table", args, Some(args.seed));
    let mut buf = Vec::new();
    if args.json {
        write_json(&mut buf, &json!({ "manifest": manifest, "which": args.which, "columns": columns, "rows": rows }))?;
    } else {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        let key = if args.which == 1 { "delta" } else { "arl" };
        wtr.write_record(std::iter::once(key.to_owned()).chain(columns))?;
        for r in &rows {
            wtr.write_record(std::iter::once(r.method.to_owned()).chain(r.values.iter().map(|v| format!("{v:.4}"))))?;
        }
        wtr.flush()?;
    }
    emit(args.output.as_deref(), &manifest, stdout, &buf)
}

pub(crate) fn tw_table(args: &TwTableArgs, stdout: &mut dyn Write) -> CliResult {
    let mut buf = Vec::new();
    TracyWidomTable::embedded().write_csv(&mut buf)?;
    emit(args.output.as_deref(), &RunManifest::new("tw-table", args, None), stdout, &buf)
}
