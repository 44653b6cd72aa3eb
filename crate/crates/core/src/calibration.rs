//! Closed-form threshold calibration for the eigenvalue scan procedures.
//!
//! All formulas assume unit-variance Gaussian noise before the change.
//! Raw thresholds `b` live on the eigenvalue scale of the windowed sample
//! covariance `(1/w) * sum x x^T`; standardized values are measured in units
//! of the edge scaling `sigma / w` away from the edge centre `mu / w`.

use log::warn;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{invalid, Error, Result};
use crate::tracy_widom::{TracyWidomTable, TW1_MEAN, TW1_SD};

/// Which spectral edge a pair of centering/scaling constants describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    MaxEdge,
    MinEdge,
}

/// Centering and scaling constants for an extreme eigenvalue of a white
/// Wishart matrix, on the raw (unnormalised) scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeConstants {
    pub mu: f64,
    pub sigma: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMethod {
    TwIndependent,
    TwCorrected,
    Manual,
}

impl std::fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CalibrationMethod::TwIndependent => "tw-independent",
            CalibrationMethod::TwCorrected => "tw-corrected",
            CalibrationMethod::Manual => "manual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub threshold_b: f64,
    pub method: CalibrationMethod,
    pub target_arl: f64,
    pub w: usize,
    pub p: usize,
    /// Standardized quantile the threshold corresponds to.
    pub standardized: f64,
}

/// Upper bound on `E[Z_t Z_{t+delta}]` together with a flag raised when a
/// block was too small for the Tracy-Widom moment approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossMomentBound {
    pub value: f64,
    pub degenerate_block: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EddBound {
    pub value: f64,
    /// CUSUM-equivalent threshold.
    pub b_prime: f64,
    /// Set when the threshold sits below the post-change drift (`b' <= 0`).
    pub below_detectability: bool,
}

pub fn edge_constants_max(n: usize, p: usize) -> Result<EdgeConstants> {
    if n < 2 || p < 1 {
        return Err(invalid(format!("max-edge constants need n >= 2 and p >= 1 (n = {n}, p = {p})")));
    }
    let a = ((n - 1) as f64).sqrt();
    let b = (p as f64).sqrt();
    let s = a + b;
    Ok(EdgeConstants { mu: s * s, sigma: s * (1.0 / a + 1.0 / b).cbrt(), kind: EdgeKind::MaxEdge })
}

/// Constants for the smallest eigenvalue. `sigma` is reported as a positive
/// magnitude `(sqrt(n) - sqrt(p)) * (1/sqrt(p) - 1/sqrt(n))^(1/3)`.
pub fn edge_constants_min(n: usize, p: usize) -> Result<EdgeConstants> {
    if p < 1 || n <= p {
        return Err(invalid(format!("min-edge constants need n > p >= 1 (n = {n}, p = {p})")));
    }
    let rn = (n as f64).sqrt();
    let rp = (p as f64).sqrt();
    let d = rp - rn;
    Ok(EdgeConstants { mu: d * d, sigma: (rn - rp) * (1.0 / rp - 1.0 / rn).cbrt(), kind: EdgeKind::MinEdge })
}

fn check_arl(target_arl: f64) -> Result<f64> {
    if !(target_arl.is_finite() && target_arl > 1.0) {
        return Err(invalid(format!("target ARL must be a finite value > 1, got {target_arl}")));
    }
    Ok(1.0 / target_arl)
}

/// Threshold for the maximum-eigenvalue procedure ignoring temporal
/// correlation: the scan statistic's marginal tail mass equals `1/ARL`.
pub fn threshold_tw_max(w: usize, p: usize, target_arl: f64) -> Result<CalibrationResult> {
    let alpha = check_arl(target_arl)?;
    if w < 2 {
        return Err(invalid(format!("window length must be >= 2, got {w}")));
    }
    let edge = edge_constants_max(w, p)?;
    let t_alpha = TracyWidomTable::embedded().upper_quantile(alpha)?;
    let wf = w as f64;
    Ok(CalibrationResult {
        threshold_b: edge.sigma / wf * t_alpha + edge.mu / wf,
        method: CalibrationMethod::TwIndependent,
        target_arl,
        w,
        p,
        standardized: t_alpha,
    })
}

/// Threshold for the inverse-minimum-eigenvalue procedure ignoring temporal
/// correlation. Uses the lower `alpha` quantile of F1 below the min-edge
/// centre.
pub fn threshold_tw_min(w: usize, p: usize, target_arl: f64) -> Result<CalibrationResult> {
    let alpha = check_arl(target_arl)?;
    if w <= p {
        return Err(invalid(format!("min-eigenvalue procedure needs w > p (w = {w}, p = {p})")));
    }
    let edge = edge_constants_min(w, p)?;
    // upper (1 - alpha) point == lower alpha point
    let t_low = TracyWidomTable::embedded().lower_quantile(alpha)?;
    let wf = w as f64;
    let denom = edge.sigma / wf * t_low + edge.mu / wf;
    if !(denom > 0.0) {
        return Err(Error::CalibrationInfeasible(format!(
            "window w = {w} is too small for ARL {target_arl} at p = {p}: \
             the calibrated eigenvalue level {denom:.4} is not positive"
        )));
    }
    Ok(CalibrationResult {
        threshold_b: 1.0 / denom,
        method: CalibrationMethod::TwIndependent,
        target_arl,
        w,
        p,
        standardized: t_low,
    })
}

/// Local slope `beta` with `corr(Z_t, Z_{t+delta}) ~ 1 - beta * delta`.
pub fn corr_slope_beta(w: usize, p: usize) -> f64 {
    if w < 4 * p {
        warn!("corr_slope_beta: w = {w} is not much larger than p = {p}; the approximation assumes w >> p");
    }
    let (c1, c2) = (TW1_MEAN, TW1_SD);
    let pf = p as f64;
    let wf = w as f64;
    1.0 + (2.0 * pf.cbrt() + 3.0 * pf.powf(1.0 / 6.0) * c1 / wf.sqrt() + c1 * c1 / wf) / (c2 * c2)
}

/// Linearised local correlation `1 - beta * delta / w`, with the lag
/// measured as a fraction of the window (one minus the overlap ratio).
pub fn local_correlation(w: usize, p: usize, delta: usize) -> f64 {
    let frac = delta as f64 / w as f64;
    if frac > 0.1 {
        warn!("local_correlation: delta / w = {frac:.3} > 0.1, outside the local regime");
    }
    1.0 - corr_slope_beta(w, p) * frac
}

/// `(E[lambda_max], E[lambda_max^2])` for the raw Wishart sum of `m` white
/// samples in dimension `p`; `None` flags the degenerate single-sample case.
fn block_moments(m: usize, p: usize) -> (f64, f64, bool) {
    if m < 2 {
        // m = 1: lambda_max = |x|^2 ~ chi^2_p exactly; m = 0: empty block
        let pf = p as f64;
        let mf = m as f64;
        return (mf * pf, mf * (pf * pf + 2.0 * pf), true);
    }
    let e = edge_constants_max(m, p).expect("m >= 2 and p >= 1");
    let mean = e.mu + TW1_MEAN * e.sigma;
    (mean, mean * mean + TW1_SD * TW1_SD * e.sigma * e.sigma, false)
}

/// Upper bound on `E[Z_t Z_{t+delta}]` from splitting the two overlapping
/// windows into the shared block Q (`w - delta` samples) and the private
/// blocks P and W (`delta` samples each).
pub fn cross_moment_upper_bound(w: usize, p: usize, delta: usize) -> Result<CrossMomentBound> {
    if delta < 1 || delta >= w {
        return Err(invalid(format!("need 1 <= delta < w (delta = {delta}, w = {w})")));
    }
    if p < 1 {
        return Err(invalid("p must be >= 1"));
    }
    let (eq, eq2, dq) = block_moments(w - delta, p);
    let (ep, _, dp) = block_moments(delta, p);
    let wf = w as f64;
    let value = (eq2 + eq * (ep + ep) + ep * ep) / (wf * wf);
    Ok(CrossMomentBound { value, degenerate_block: dq || dp })
}

pub(crate) fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Overshoot correction `v(x)`.
pub fn nu_overshoot(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid(format!("nu_overshoot needs x > 0, got {x}")));
    }
    let h = 0.5 * x;
    // Phi(h) - 1/2 without cancellation
    let centred = 0.5 * erf(h / std::f64::consts::SQRT_2);
    Ok((2.0 / x * centred) / (h * std_normal_cdf(h) + std_normal_pdf(h)))
}

/// ARL of the maximum-eigenvalue procedure accounting for the temporal
/// correlation of the scan statistic. `b_raw` is standardized with the
/// max-edge constants before the Gaussian-field approximation is applied.
pub fn arl_corrected(b_raw: f64, w: usize, p: usize) -> Result<f64> {
    if !b_raw.is_finite() {
        return Err(invalid(format!("threshold must be finite, got {b_raw}")));
    }
    let edge = edge_constants_max(w, p)?;
    let wf = w as f64;
    let b_std = (b_raw - edge.mu / wf) / (edge.sigma / wf);
    if !(b_std > 0.0) {
        return Err(invalid(format!("threshold {b_raw} is not above the bulk edge centre {:.4}", edge.mu / wf)));
    }
    Ok(arl_corrected_standardized(b_std, corr_slope_beta(w, p)))
}

fn arl_corrected_standardized(b_std: f64, beta: f64) -> f64 {
    let v = nu_overshoot(b_std * (2.0 * beta).sqrt()).expect("positive argument");
    1.0 / (beta * b_std * std_normal_pdf(b_std) * v)
}

/// Inverts [`arl_corrected`] by bisection over
/// `[mu/w + 0.1 sigma/w, mu/w + 20 sigma/w]`.
pub fn threshold_corrected(w: usize, p: usize, target_arl: f64) -> Result<CalibrationResult> {
    check_arl(target_arl)?;
    let edge = edge_constants_max(w, p)?;
    let wf = w as f64;
    let centre = edge.mu / wf;
    let scale = edge.sigma / wf;
    let beta = corr_slope_beta(w, p);
    let f = |b_std: f64| arl_corrected_standardized(b_std, beta) - target_arl;

    let (mut lo, mut hi) = (0.1, 20.0);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::CalibrationInfeasible(format!(
            "target ARL {target_arl} is not bracketed by the corrected ARL on [0.1, 20] standardized units"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm / target_arl).abs() <= 1e-6 {
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CalibrationResult {
        threshold_b: centre + scale * mid,
        method: CalibrationMethod::TwCorrected,
        target_arl,
        w,
        p,
        standardized: mid,
    })
}

/// Expected delay of the CUSUM procedure with threshold `b_prime` for a
/// variance jump `1 -> 1 + theta` along a known direction.
pub fn cusum_delay(b_prime: f64, theta: f64) -> f64 {
    let drift = 0.5 * theta - 0.5 * theta.ln_1p();
    (b_prime + (-b_prime).exp() - 1.0) / drift
}

/// Lower bound on the expected detection delay of the maximum-eigenvalue
/// procedure, via comparison with a CUSUM on the projection onto the spike.
pub fn edd_lower_bound(b_raw: f64, w: usize, theta: f64) -> Result<EddBound> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be > 0, got {theta}")));
    }
    if !b_raw.is_finite() || w < 1 {
        return Err(invalid("threshold must be finite and w >= 1"));
    }
    let k = 1.0 - 1.0 / (1.0 + theta);
    let b_prime = 0.5 * k * (b_raw - theta.ln_1p() / k) * w as f64;
    if b_prime <= 0.0 {
        return Ok(EddBound { value: 0.0, b_prime, below_detectability: true });
    }
    Ok(EddBound { value: cusum_delay(b_prime, theta), b_prime, below_detectability: false })
}

/// KL divergence between `N(0, I)` and `N(0, I + theta u u^T)`; independent
/// of the dimension.
pub fn kl_divergence_spiked(theta: f64) -> Result<f64> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be >= 0, got {theta}")));
    }
    Ok(0.5 * (theta.ln_1p() - theta / (1.0 + theta)))
}

/// Information bound on detection delay at a given false-alarm budget.
pub fn kl_delay_bound(target_arl: f64, theta: f64) -> Result<f64> {
    check_arl(target_arl)?;
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(invalid(format!("theta must be > 0, got {theta}")));
    }
    Ok(2.0 * target_arl.ln() / (theta.ln_1p() - theta / (1.0 + theta)))
}

/// Minimum window length `ceil(p / (theta^2 / sigma^2))` for the spike to
/// separate from the noise bulk.
pub fn min_window(p: usize, theta: f64, sigma_noise: f64) -> Result<usize> {
    if p < 1 || !(theta > 0.0) || !(sigma_noise > 0.0) {
        return Err(invalid("min_window needs p >= 1, theta > 0 and sigma > 0"));
    }
    let snr = (theta / sigma_noise).powi(2);
    let w = (p as f64 / snr).ceil();
    // guard against 10.000000000000002-style rounding
    let w_round = (p as f64 / snr).round();
    let w = if (p as f64 / snr - w_round).abs() < 1e-9 { w_round } else { w };
    Ok(w.max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracy_widom::tw1_cdf;

    #[test]
    fn edge_max_examples() {
        let e = edge_constants_max(200, 10).unwrap();
        assert!((e.mu / 200.0 - 1.4908).abs() < 5e-4);
        assert!((e.sigma / 200.0 - 0.0629).abs() < 1e-4);
        assert_eq!(edge_constants_max(2, 1).unwrap().mu, 4.0);
        let e = edge_constants_max(1_000_000, 10_000).unwrap();
        assert!((e.mu / 1e6 - 1.21).abs() < 1e-3);
        assert!(edge_constants_max(1, 3).is_err());
        assert!(edge_constants_max(5, 0).is_err());
    }

    #[test]
    fn edge_min_examples() {
        let e = edge_constants_min(200, 10).unwrap();
        assert!((e.mu / 200.0 - 0.602_786_404_500_042).abs() < 1e-12);
        assert!(e.sigma > 0.0);
        assert!((edge_constants_min(100, 25).unwrap().mu / 100.0 - 0.25).abs() < 1e-15);
        let e = edge_constants_min(1000, 999).unwrap();
        assert!(e.mu > 0.0 && e.mu / 1000.0 < 1e-3);
        assert!(edge_constants_min(10, 10).is_err());
        assert!(edge_constants_min(5, 10).is_err());
    }

    #[test]
    fn tw_max_thresholds() {
        let b5 = threshold_tw_max(200, 10, 5000.0).unwrap();
        let b10 = threshold_tw_max(200, 10, 10_000.0).unwrap();
        assert_eq!(b5.method, CalibrationMethod::TwIndependent);
        assert!(b10.threshold_b > b5.threshold_b);
        let e = edge_constants_max(200, 10).unwrap();
        assert!(b5.threshold_b > e.mu / 200.0);
        assert!(threshold_tw_max(200, 10, 0.5).is_err());
        assert!(matches!(threshold_tw_max(200, 10, 1e9), Err(Error::TailResolution { .. })));
    }

    #[test]
    fn tw_min_thresholds() {
        let e = edge_constants_min(200, 10).unwrap();
        let r = threshold_tw_min(200, 10, 5000.0).unwrap();
        assert!(r.threshold_b.is_finite());
        assert!(r.threshold_b > 1.0 / (e.mu / 200.0));
        // inverse consistency
        let z = (1.0 / r.threshold_b - e.mu / 200.0) / (e.sigma / 200.0);
        assert!((tw1_cdf(z).unwrap() - 1.0 / 5000.0).abs() <= 1e-6);
        let r2 = threshold_tw_min(200, 10, 50_000.0).unwrap();
        assert!(r2.threshold_b > r.threshold_b);
        assert!(matches!(threshold_tw_min(10, 10, 5000.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn tw_min_infeasible_for_tiny_window() {
        // w = 12, p = 10: the lower tail reaches below zero
        assert!(matches!(threshold_tw_min(12, 10, 1e6), Err(Error::CalibrationInfeasible(_))));
    }

    #[test]
    fn beta_examples() {
        assert!((corr_slope_beta(200, 10) - 3.44).abs() < 0.01);
        let limit = 1.0 + 2.0 / (1.27f64 * 1.27);
        assert!((corr_slope_beta(100_000_000, 1) - limit).abs() < 1e-3);
        let mut prev = 0.0;
        for p in 1..=50 {
            let b = corr_slope_beta(1000, p);
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn local_correlation_is_linear_in_overlap() {
        let beta = corr_slope_beta(200, 10);
        assert!((local_correlation(200, 10, 2) - (1.0 - beta * 0.01)).abs() < 1e-15);
        assert!(local_correlation(200, 10, 6) < local_correlation(200, 10, 2));
    }

    #[test]
    fn cross_moment_bound_table_row() {
        let expect = [(2, 2.144), (6, 2.241), (10, 2.294), (15, 2.342), (20, 2.379)];
        let mut prev = 0.0;
        for (delta, v) in expect {
            let b = cross_moment_upper_bound(200, 10, delta).unwrap();
            assert!((b.value - v).abs() < 0.01, "delta = {delta}: {}", b.value);
            assert!(!b.degenerate_block);
            assert!(b.value > prev);
            prev = b.value;
        }
        assert!(cross_moment_upper_bound(200, 10, 200).is_err());
        assert!(cross_moment_upper_bound(200, 10, 0).is_err());
        assert!(cross_moment_upper_bound(200, 10, 1).unwrap().degenerate_block);
    }

    #[test]
    fn nu_examples() {
        assert!((nu_overshoot(1e-8).unwrap() - 1.0).abs() < 1e-6);
        assert!((nu_overshoot(2.0).unwrap() - 0.315).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let v = nu_overshoot(i as f64 * 0.01).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(nu_overshoot(0.0).is_err());
        assert!(nu_overshoot(-1.0).is_err());
    }

    #[test]
    fn arl_corrected_reference_value() {
        // frozen from an independent scipy evaluation of the same formula
        let arl = arl_corrected(1.699, 200, 10).unwrap();
        assert!((arl / 1941.3 - 1.0).abs() < 2e-3, "arl = {arl}");
    }

    #[test]
    fn arl_corrected_monotone_above_one_sd() {
        let e = edge_constants_max(200, 10).unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let b = e.mu / 200.0 + e.sigma / 200.0 * (1.0 + i as f64 * 0.02);
            let a = arl_corrected(b, 200, 10).unwrap();
            assert!(a > prev);
            prev = a;
        }
        assert!(arl_corrected(1.0, 200, 10).is_err());
    }

    #[test]
    fn corrected_thresholds() {
        let r = threshold_corrected(200, 10, 5000.0).unwrap();
        assert_eq!(r.method, CalibrationMethod::TwCorrected);
        let a = arl_corrected(r.threshold_b, 200, 10).unwrap();
        assert!((a - 5000.0).abs() <= 1e-4 * 5000.0);
        let r2 = threshold_corrected(200, 10, 10_000.0).unwrap();
        assert!(r2.threshold_b > r.threshold_b);
        assert!(matches!(threshold_corrected(200, 10, 1.5), Err(Error::CalibrationInfeasible(_))));
    }

    #[test]
    fn edd_examples() {
        let b = edd_lower_bound(3.0, 20, 10.0).unwrap();
        assert!((b.b_prime - 3.294).abs() < 1e-3);
        assert!((b.value - 0.613).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for i in 0..=98 {
            let theta = 1.0 + i as f64 * 0.5;
            let v = edd_lower_bound(8.0, 20, theta).unwrap().value;
            assert!(v < prev, "theta = {theta}");
            prev = v;
        }
        let below = edd_lower_bound(1.0, 20, 10.0).unwrap();
        assert!(below.below_detectability);
        assert_eq!(below.value, 0.0);
        assert!(cusum_delay(2.0, 1e-6) > 1e9);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence_spiked(0.0).unwrap(), 0.0);
        assert!((kl_divergence_spiked(1.0).unwrap() - 0.0966).abs() < 1e-4);
        let mut prev = 0.0;
        for i in 1..200 {
            let k = kl_divergence_spiked(i as f64 * 0.1).unwrap();
            assert!(k > prev);
            prev = k;
        }
        assert!((kl_delay_bound(5000.0, 10.0).unwrap() - 11.441_655_329_658_6).abs() < 1e-9);
        assert!(kl_delay_bound(10_000.0, 10.0).unwrap() > kl_delay_bound(5000.0, 10.0).unwrap());
        assert!(kl_delay_bound(5000.0, 20.0).unwrap() < kl_delay_bound(5000.0, 10.0).unwrap());
    }

    #[test]
    fn min_window_examples() {
        assert_eq!(min_window(10, 1.0, 1.0).unwrap(), 10);
        assert_eq!(min_window(10, 10.0, 1.0).unwrap(), 1);
        assert_eq!(min_window(10, 3.0, 2.0).unwrap(), min_window(10, 1.5, 1.0).unwrap());
        assert_eq!(min_window(37, 0.7, 0.3).unwrap(), min_window(37, 7.0, 3.0).unwrap());
    }
}
