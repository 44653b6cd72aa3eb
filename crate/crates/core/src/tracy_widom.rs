//! Tracy-Widom law of order one (F1).
//!
//! The CDF is tabulated on a uniform grid over `[-10, 8]` with step `0.01`.
//! The table was produced offline from the Fredholm determinant
//! `F1(s) = det(I - K_s)`, `K_s(x, y) = Ai((x + y) / 2) / 2` on `L2(s, inf)`,
//! discretised with Gauss-Legendre quadrature (see `tools/gen_tw1_table.py`).
//! Between grid points the CDF is a monotone piecewise-cubic Hermite
//! interpolant (Fritsch-Carlson slopes), so it is continuous and
//! nondecreasing everywhere.

use std::io::Write;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};

const TABLE_CSV: &str = include_str!("../data/tw1_table.csv");

/// Mean of F1 as used by the calibration formulas.
pub const TW1_MEAN: f64 = -1.21;
/// Standard deviation of F1 as used by the calibration formulas.
pub const TW1_SD: f64 = 1.27;

/// Smallest tail mass a quantile query may ask for.
pub const MIN_TAIL_PROBABILITY: f64 = 1e-7;

/// Tabulated CDF of the order-one Tracy-Widom law.
#[derive(Debug, Clone)]
pub struct TracyWidomTable {
    grid_x: Vec<f64>,
    grid_f: Vec<f64>,
    slopes: Vec<f64>,
    mean_c1: f64,
    sd_c2: f64,
}

impl TracyWidomTable {
    /// Build a table from raw grid data. `grid_x` must be strictly increasing
    /// and `grid_f` nondecreasing in `[0, 1]`.
    pub fn from_grid(grid_x: Vec<f64>, grid_f: Vec<f64>, mean_c1: f64, sd_c2: f64) -> Result<Self> {
        if grid_x.len() != grid_f.len() || grid_x.len() < 2 {
            return Err(invalid("grid_x and grid_F must have equal length >= 2"));
        }
        if grid_x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid_x must be strictly increasing"));
        }
        if grid_f.windows(2).any(|w| w[1] < w[0]) || grid_f.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("grid_F must be nondecreasing in [0, 1]"));
        }
        let slopes = pchip_slopes(&grid_x, &grid_f);
        Ok(Self { grid_x, grid_f, slopes, mean_c1, sd_c2 })
    }

    /// The table compiled into the crate.
    pub fn embedded() -> &'static TracyWidomTable {
        static TABLE: OnceLock<TracyWidomTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let mut xs = Vec::with_capacity(1801);
            let mut fs = Vec::with_capacity(1801);
            for line in TABLE_CSV.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                let (x, f) = line.split_once(',').expect("embedded table row has two columns");
                xs.push(x.trim().parse::<f64>().expect("embedded abscissa parses"));
                fs.push(f.trim().parse::<f64>().expect("embedded CDF value parses"));
            }
            TracyWidomTable::from_grid(xs, fs, TW1_MEAN, TW1_SD).expect("embedded table is valid")
        })
    }

    pub fn grid_x(&self) -> &[f64] {
        &self.grid_x
    }

    pub fn grid_f(&self) -> &[f64] {
        &self.grid_f
    }

    pub fn mean_c1(&self) -> f64 {
        self.mean_c1
    }

    pub fn sd_c2(&self) -> f64 {
        self.sd_c2
    }

    /// CDF at `x`, clamped to 0 below the grid and 1 above it.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(invalid(format!("tw1_cdf needs a finite argument, got {x}")));
        }
        let n = self.grid_x.len();
        if x <= self.grid_x[0] {
            return Ok(if x == self.grid_x[0] { self.grid_f[0] } else { 0.0 });
        }
        if x >= self.grid_x[n - 1] {
            return Ok(if x == self.grid_x[n - 1] { self.grid_f[n - 1] } else { 1.0 });
        }
        // first index with grid_x[k] > x, so x lies in [k-1, k)
        let k = self.grid_x.partition_point(|&g| g <= x);
        let i = k - 1;
        let h = self.grid_x[k] - self.grid_x[i];
        let s = (x - self.grid_x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * self.grid_f[i] + h10 * h * self.slopes[i] + h01 * self.grid_f[k] + h11 * h * self.slopes[k];
        Ok(v.clamp(self.grid_f[i], self.grid_f[k]))
    }

    /// Point `x` with `cdf(x) = prob`, by bisection.
    pub fn lower_quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(invalid(format!("probability must lie in (0, 1), got {prob}")));
        }
        if prob < MIN_TAIL_PROBABILITY || 1.0 - prob < MIN_TAIL_PROBABILITY {
            return Err(Error::TailResolution { alpha: prob.min(1.0 - prob) });
        }
        let n = self.grid_x.len();
        if prob <= self.grid_f[0] || prob >= self.grid_f[n - 1] {
            return Err(Error::TailResolution { alpha: prob.min(1.0 - prob) });
        }
        let mut lo = self.grid_x[0];
        let mut hi = self.grid_x[n - 1];
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid)? < prob {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Upper `alpha` percentage point: `cdf(T) = 1 - alpha`.
    pub fn upper_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if alpha < MIN_TAIL_PROBABILITY || 1.0 - alpha < MIN_TAIL_PROBABILITY {
            return Err(Error::TailResolution { alpha });
        }
        self.lower_quantile(1.0 - alpha)
    }

    /// `(mean, variance)` used by the calibration formulas.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean_c1, self.sd_c2 * self.sd_c2)
    }

    /// Two-column `x,F1` CSV dump of the grid.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,F1")?;
        for (x, f) in self.grid_x.iter().zip(&self.grid_f) {
            writeln!(out, "{x:.2},{f:.17e}")?;
        }
        Ok(())
    }
}

/// Fritsch-Carlson slopes for a monotone cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// CDF of F1 at `x` using the embedded table.
pub fn tw1_cdf(x: f64) -> Result<f64> {
    TracyWidomTable::embedded().cdf(x)
}

/// Upper `alpha` percentage point of F1.
pub fn tw1_upper_quantile(alpha: f64) -> Result<f64> {
    TracyWidomTable::embedded().upper_quantile(alpha)
}

/// `(mean, variance)` of F1.
pub fn tw1_moments() -> (f64, f64) {
    TracyWidomTable::embedded().moments()
}
