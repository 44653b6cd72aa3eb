use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use eigenscan_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { es_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn step(det: *mut EsDetector, x: &[f64]) -> (EsStatus, EsStepResult) {
    let mut out = EsStepResult { state: EsStepState::NotReady, statistic: 0.0, time: 0, singular: false };
    let s = unsafe { es_detector_step(det, x.as_ptr(), x.len(), &mut out) };
    (s, out)
}

#[test]
fn detector_lifecycle() {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { es_detector_new(EsProcedure::MaxEig, 2, 3, 5.0, &mut det) }, EsStatus::Ok);
    assert!(!det.is_null());

    let (s, r) = step(det, &[1.0, 0.0]);
    assert_eq!((s, r.state, r.time), (EsStatus::Ok, EsStepState::NotReady, 1));
    assert!(r.statistic.is_nan());
    step(det, &[0.0, 1.0]);
    let (_, r) = step(det, &[1.0, 1.0]);
    assert_eq!(r.state, EsStepState::Statistic);
    // S = [[2,1],[1,2]] / 3, top eigenvalue 1
    assert!((r.statistic - 1.0).abs() < 1e-12);

    let (_, r) = step(det, &[4.0, 0.0]);
    assert_eq!((r.state, r.time), (EsStepState::Alarm, 4));
    let (mut alarmed, mut t) = (false, 0u64);
    assert_eq!(unsafe { es_detector_alarm_time(det, &mut alarmed, &mut t) }, EsStatus::Ok);
    assert!(alarmed && t == 4);

    let (s, _) = step(det, &[0.0, 0.0]);
    assert_eq!(s, EsStatus::AlreadyAlarmed);
    assert!(last_error().contains("already alarmed"));

    assert_eq!(unsafe { es_detector_reset(det) }, EsStatus::Ok);
    unsafe { es_detector_alarm_time(det, &mut alarmed, &mut t) };
    assert!(!alarmed && t == 0);
    assert_eq!(step(det, &[0.0, 0.0]).1.time, 1);
    unsafe { es_detector_free(det) };
}

#[test]
fn argument_errors_map_to_status_codes() {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { es_detector_new(EsProcedure::MinEigInverse, 5, 5, 2.0, &mut det) }, EsStatus::InvalidArgument);
    assert!(det.is_null());
    assert!(last_error().contains("w > p"));
    assert_eq!(unsafe { es_detector_new(EsProcedure::MaxEig, 2, 4, 1.0, ptr::null_mut()) }, EsStatus::NullPointer);

    unsafe { es_detector_new(EsProcedure::MaxEig, 2, 4, 1.0, &mut det) };
    assert_eq!(step(det, &[1.0, 2.0, 3.0]).0, EsStatus::InvalidArgument);
    assert_eq!(step(det, &[1.0, f64::NAN]).0, EsStatus::DataError);
    assert_eq!(step(ptr::null_mut(), &[1.0, 2.0]).0, EsStatus::NullPointer);
    unsafe { es_detector_free(det) };
    unsafe { es_detector_free(ptr::null_mut()) };
}

#[test]
fn calibration_and_tracy_widom() {
    let mut c = EsCalibration { threshold_b: 0.0, standardized: 0.0 };
    assert_eq!(unsafe { es_calibrate_tw_max(200, 10, 5000.0, &mut c) }, EsStatus::Ok);
    assert_eq!(c.threshold_b, eigenscan::calibration::threshold_tw_max(200, 10, 5000.0).unwrap().threshold_b);
    assert_eq!(unsafe { es_calibrate_corrected(200, 10, 5000.0, &mut c) }, EsStatus::Ok);
    assert!((c.threshold_b - 1.715).abs() < 1e-3);
    assert_eq!(unsafe { es_calibrate_tw_min(100, 10, 1e4, &mut c) }, EsStatus::Ok);
    assert!(c.threshold_b > 1.0);
    assert_eq!(unsafe { es_calibrate_tw_max(200, 10, 0.5, &mut c) }, EsStatus::InvalidArgument);
    assert_eq!(unsafe { es_calibrate_tw_max(200, 10, 1e9, &mut c) }, EsStatus::TailResolution);
    assert_eq!(unsafe { es_calibrate_tw_min(12, 10, 1e6, &mut c) }, EsStatus::CalibrationInfeasible);

    let mut v = 0.0;
    assert_eq!(unsafe { es_tw1_cdf(0.0, &mut v) }, EsStatus::Ok);
    assert!((v - 0.831_908_066_202_95).abs() < 1e-10);
    assert_eq!(unsafe { es_tw1_cdf(f64::INFINITY, &mut v) }, EsStatus::InvalidArgument);
    assert_eq!(unsafe { es_tw1_upper_quantile(0.05, &mut v) }, EsStatus::Ok);
    assert!((v - 0.9793).abs() < 1e-3);
    assert_eq!(unsafe { es_tw1_cdf(0.0, ptr::null_mut()) }, EsStatus::NullPointer);
}

#[test]
fn error_message_truncates_and_reports_length() {
    let mut c = EsCalibration { threshold_b: 0.0, standardized: 0.0 };
    unsafe { es_calibrate_tw_max(200, 10, 0.5, &mut c) };
    let full = unsafe { es_last_error_message(ptr::null_mut(), 0) };
    let mut small = [1 as std::ffi::c_char; 8];
    assert_eq!(unsafe { es_last_error_message(small.as_mut_ptr(), small.len()) }, full);
    assert_eq!(small[7], 0);
    assert!(full > 8);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(es_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Directory holding this build's libraries (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_static_library() {
    let lib = artifact_dir().join("libeigenscan_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C smoke test: no C compiler or static library at {}", lib.display());
        return;
    }
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke test failed to compile");
    let run = Command::new(&exe).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("alarm at 4"), "{stdout}");
}
