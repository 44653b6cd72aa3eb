//! C ABI over the eigenscan detectors and calibration routines.
//!
//! Every fallible function returns an [`EsStatus`]; on failure the message
//! is kept per thread and can be read with [`es_last_error_message`].
//! Detectors are opaque handles created by [`es_detector_new`] and released
//! with [`es_detector_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eigenscan::calibration::{threshold_corrected, threshold_tw_max, threshold_tw_min, CalibrationResult};
use eigenscan::{Detector, DetectorConfig, Error, ProcedureKind, StepEvent};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NumericError = 3,
    TailResolution = 4,
    CalibrationInfeasible = 5,
    AlreadyAlarmed = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsProcedure {
    /// Largest eigenvalue of the windowed covariance.
    MaxEig = 0,
    /// Inverse of the smallest eigenvalue.
    MinEigInverse = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStepState {
    /// Window not full yet; `statistic` is NaN.
    NotReady = 0,
    Statistic = 1,
    Alarm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsStepResult {
    pub state: EsStepState,
    pub statistic: f64,
    /// Observations consumed so far, counting from 1.
    pub time: u64,
    /// Set on alarms caused by a numerically singular window.
    pub singular: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsCalibration {
    pub threshold_b: f64,
    /// Standardized quantile the threshold corresponds to.
    pub standardized: f64,
}

/// Opaque detector handle.
pub struct EsDetector {
    inner: Detector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EsStatus {
    match e {
        Error::InvalidArgument(_) => EsStatus::InvalidArgument,
        Error::Data(_) => EsStatus::DataError,
        Error::Numeric(_) => EsStatus::NumericError,
        Error::TailResolution { .. } => EsStatus::TailResolution,
        Error::CalibrationInfeasible(_) => EsStatus::CalibrationInfeasible,
        Error::AlreadyAlarmed(_) => EsStatus::AlreadyAlarmed,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (EsStatus, String)>) -> EsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EsStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (EsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (EsStatus, String) {
    (EsStatus::NullPointer, format!("{what} is null"))
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// without the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn es_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn es_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a detector. `threshold_b` may be `INFINITY` to monitor without
/// alarming.
///
/// # Safety
/// `out` must be null or a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn es_detector_new(
    procedure: EsProcedure,
    p: usize,
    w: usize,
    threshold_b: f64,
    out: *mut *mut EsDetector,
) -> EsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let kind = match procedure {
            EsProcedure::MaxEig => ProcedureKind::MaxEig,
            EsProcedure::MinEigInverse => ProcedureKind::MinEigInverse,
        };
        let det = DetectorConfig::new(kind, p, w, threshold_b).and_then(Detector::new).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(EsDetector { inner: det }));
        Ok(())
    })
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `det` must be null or a handle from [`es_detector_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn es_detector_free(det: *mut EsDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Feeds one observation of `len` values (must equal `p`). After an alarm
/// the detector refuses further input with `ALREADY_ALARMED` until reset.
///
/// # Safety
/// `det` must be a live handle, `x` must point to `len` readable doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_detector_step(
    det: *mut EsDetector,
    x: *const f64,
    len: usize,
    out: *mut EsStepResult,
) -> EsStatus {
    guard(|| {
        let det = det.as_mut().ok_or_else(|| null_err("detector"))?;
        if x.is_null() {
            return Err(null_err("x"));
        }
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        let obs = std::slice::from_raw_parts(x, len);
        let ev = det.inner.step(obs).map_err(lib_err)?;
        let time = det.inner.t();
        *out = match ev {
            StepEvent::NotReady => {
                EsStepResult { state: EsStepState::NotReady, statistic: f64::NAN, time, singular: false }
            }
            StepEvent::Statistic(s) => {
                EsStepResult { state: EsStepState::Statistic, statistic: s, time, singular: false }
            }
            StepEvent::Alarm(a) => {
                EsStepResult { state: EsStepState::Alarm, statistic: a.statistic, time: a.time, singular: a.singular }
            }
        };
        Ok(())
    })
}

/// Clears the window, time counter and alarm state.
///
/// # Safety
/// `det` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_detector_reset(det: *mut EsDetector) -> EsStatus {
    guard(|| {
        det.as_mut().ok_or_else(|| null_err("detector"))?.inner.reset();
        Ok(())
    })
}

/// Writes the alarm time to `time` and sets `alarmed`; `time` is 0 when the
/// detector has not alarmed.
///
/// # Safety
/// `det` must be a live handle; `alarmed` and `time` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_detector_alarm_time(
    det: *const EsDetector,
    alarmed: *mut bool,
    time: *mut u64,
) -> EsStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null_err("detector"))?;
        if alarmed.is_null() || time.is_null() {
            return Err(null_err("output"));
        }
        let t = det.inner.alarmed_at();
        *alarmed = t.is_some();
        *time = t.unwrap_or(0);
        Ok(())
    })
}

unsafe fn calibrate(out: *mut EsCalibration, f: impl FnOnce() -> eigenscan::Result<CalibrationResult>) -> EsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        let c = f().map_err(lib_err)?;
        *out = EsCalibration { threshold_b: c.threshold_b, standardized: c.standardized };
        Ok(())
    })
}

/// Tracy-Widom threshold for the largest-eigenvalue procedure.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_calibrate_tw_max(w: usize, p: usize, target_arl: f64, out: *mut EsCalibration) -> EsStatus {
    calibrate(out, || threshold_tw_max(w, p, target_arl))
}

/// Tracy-Widom threshold for the inverse smallest-eigenvalue procedure.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_calibrate_tw_min(w: usize, p: usize, target_arl: f64, out: *mut EsCalibration) -> EsStatus {
    calibrate(out, || threshold_tw_min(w, p, target_arl))
}

/// Largest-eigenvalue threshold corrected for temporal correlation.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_calibrate_corrected(
    w: usize,
    p: usize,
    target_arl: f64,
    out: *mut EsCalibration,
) -> EsStatus {
    calibrate(out, || threshold_corrected(w, p, target_arl))
}

/// Tracy-Widom (order one) distribution function.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_tw1_cdf(x: f64, out: *mut f64) -> EsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = eigenscan::tw1_cdf(x).map_err(lib_err)?;
        Ok(())
    })
}

/// Upper `alpha` point of the Tracy-Widom (order one) law.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_tw1_upper_quantile(alpha: f64, out: *mut f64) -> EsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null_err("out"))?;
        *out = eigenscan::tw1_upper_quantile(alpha).map_err(lib_err)?;
        Ok(())
    })
}
