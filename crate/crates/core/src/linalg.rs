//! Packed symmetric matrices and a cyclic Jacobi eigenvalue solver.

use crate::error::{Error, Result};

/// Symmetric `p x p` matrix stored as its packed lower triangle
/// (row-major: `(0,0), (1,0), (1,1), (2,0), ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    p: usize,
    entries: Vec<f64>,
}

#[inline]
pub(crate) fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymmetricMatrix {
    pub fn zeros(p: usize) -> Self {
        Self { p, entries: vec![0.0; p * (p + 1) / 2] }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p);
        for i in 0..p {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Build from packed lower-triangular entries.
    pub fn from_packed(p: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != p * (p + 1) / 2 {
            return Err(Error::InvalidArgument(format!(
                "packed storage for p = {p} needs {} entries, got {}",
                p * (p + 1) / 2,
                entries.len()
            )));
        }
        Ok(Self { p, entries })
    }

    /// Build from a dense row-major matrix, reading the lower triangle.
    pub fn from_dense_lower(p: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != p * p {
            return Err(Error::InvalidArgument(format!("expected {} entries, got {}", p * p, dense.len())));
        }
        let mut m = Self::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                m.set(i, j, dense[i * p + j]);
            }
        }
        Ok(m)
    }

    /// `scale * v v^T`.
    pub fn outer(v: &[f64], scale: f64) -> Self {
        let mut m = Self::zeros(v.len());
        m.add_outer(v, scale);
        m
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn packed(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[packed_index(i, j)] = v;
    }

    /// `self += scale * v v^T`.
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        debug_assert_eq!(v.len(), self.p);
        let mut k = 0;
        for i in 0..self.p {
            let vi = scale * v[i];
            for &vj in &v[..=i] {
                self.entries[k] += vi * vj;
                k += 1;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { p: self.p, entries: self.entries.iter().map(|e| e * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let p = self.p;
        let mut a = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let v = self.get(i, j);
                a[i * p + j] = v;
                a[j * p + i] = v;
            }
        }
        a
    }

    pub fn max_abs_diff(&self, other: &SymmetricMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

const MAX_SWEEPS: usize = 100;

/// All eigenvalues in ascending order, via cyclic Jacobi rotations.
pub fn eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    if m.entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let p = m.p;
    if p == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.to_dense();
    let frob2: f64 = a.iter().map(|v| v * v).sum();
    if frob2 == 0.0 {
        return Ok(vec![0.0; p]);
    }

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..p {
            for j in 0..i {
                off += a[i * p + j] * a[i * p + j];
            }
        }
        if off <= f64::EPSILON * f64::EPSILON * frob2 * 1e-2 {
            break;
        }
        for q in 1..p {
            for r in 0..q {
                let apq = a[r * p + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[r * p + r];
                let aqq = a[q * p + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[r * p + r] = app - t * apq;
                a[q * p + q] = aqq + t * apq;
                a[r * p + q] = 0.0;
                a[q * p + r] = 0.0;
                for k in 0..p {
                    if k == r || k == q {
                        continue;
                    }
                    let akr = a[k * p + r];
                    let akq = a[k * p + q];
                    let nr = akr - s * (akq + tau * akr);
                    let nq = akq + s * (akr - tau * akq);
                    a[k * p + r] = nr;
                    a[r * p + k] = nr;
                    a[k * p + q] = nq;
                    a[q * p + k] = nq;
                }
            }
        }
    }

    let mut ev: Vec<f64> = (0..p).map(|i| a[i * p + i]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    Ok(ev)
}

/// `(lambda_min, lambda_max)`.
pub fn extreme_eigenvalues(m: &SymmetricMatrix) -> Result<(f64, f64)> {
    let ev = eigenvalues(m)?;
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::InvalidArgument("empty matrix has no eigenvalues".into())),
    }
}

pub fn lambda_max(m: &SymmetricMatrix) -> Result<f64> {
    extreme_eigenvalues(m).map(|(_, hi)| hi)
}

pub fn lambda_min(m: &SymmetricMatrix) -> Result<f64> {
    extreme_eigenvalues(m).map(|(lo, _)| lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    /// Real roots of the characteristic polynomial of a symmetric 3x3
    /// matrix by the trigonometric cubic formula.
    fn cubic_eigenvalues(m: &SymmetricMatrix) -> [f64; 3] {
        let (a, b, c) = (m.get(0, 0), m.get(1, 1), m.get(2, 2));
        let (d, e, f) = (m.get(0, 1), m.get(1, 2), m.get(0, 2));
        let q = (a + b + c) / 3.0;
        let p1 = d * d + e * e + f * f;
        let p2 = (a - q).powi(2) + (b - q).powi(2) + (c - q).powi(2) + 2.0 * p1;
        let pp = (p2 / 6.0).sqrt();
        let (ba, bb, bc) = ((a - q) / pp, (b - q) / pp, (c - q) / pp);
        let (bd, be, bf) = (d / pp, e / pp, f / pp);
        let det = ba * (bb * bc - be * be) - bd * (bd * bc - be * bf) + bf * (bd * be - bb * bf);
        let r = (det / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let l1 = q + 2.0 * pp * phi.cos();
        let l3 = q + 2.0 * pp * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let l2 = 3.0 * q - l1 - l3;
        let mut out = [l1, l2, l3];
        out.sort_by(|x, y| x.total_cmp(y));
        out
    }

    #[test]
    fn identity_and_diagonal() {
        for p in [1, 2, 5, 10] {
            let (lo, hi) = extreme_eigenvalues(&SymmetricMatrix::identity(p)).unwrap();
            assert_eq!((lo, hi), (1.0, 1.0));
        }
        let d = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 0.5]);
        assert_eq!(lambda_max(&d).unwrap(), 3.0);
        assert_eq!(lambda_min(&d).unwrap(), 0.5);
    }

    #[test]
    fn rank_one_has_zero_min() {
        let u = [0.3, -1.2, 0.7, 2.0];
        let m = SymmetricMatrix::outer(&u, 1.0);
        let (lo, hi) = extreme_eigenvalues(&m).unwrap();
        let norm2: f64 = u.iter().map(|v| v * v).sum();
        assert!(lo.abs() < 1e-10 * norm2);
        assert!((hi - norm2).abs() < 1e-12 * norm2);
    }

    #[test]
    fn matches_cubic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let m = random_symmetric(3, &mut rng);
            let ev = eigenvalues(&m).unwrap();
            let oracle = cubic_eigenvalues(&m);
            for (a, b) in ev.iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-8, "{ev:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn matches_quadratic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let m = random_symmetric(2, &mut rng);
            let (a, b, c) = (m.get(0, 0), m.get(1, 1), m.get(0, 1));
            let disc = ((a - b) * (a - b) / 4.0 + c * c).sqrt();
            let (lo, hi) = extreme_eigenvalues(&m).unwrap();
            assert!((hi - ((a + b) / 2.0 + disc)).abs() < 1e-12);
            assert!((lo - ((a + b) / 2.0 - disc)).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in [2, 5, 10, 50] {
            let m = random_symmetric(p, &mut rng);
            let sum: f64 = eigenvalues(&m).unwrap().iter().sum();
            assert!((sum - m.trace()).abs() < 1e-8, "p = {p}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = SymmetricMatrix::identity(3);
        m.set(2, 1, f64::NAN);
        assert!(matches!(lambda_max(&m), Err(Error::Numeric(_))));
    }

    #[test]
    fn packed_round_trip() {
        let dense = [4.0, 1.0, 2.0, 1.0, 5.0, 3.0, 2.0, 3.0, 6.0];
        let m = SymmetricMatrix::from_dense_lower(3, &dense).unwrap();
        assert_eq!(m.to_dense(), dense.to_vec());
        assert_eq!(m.packed(), &[4.0, 1.0, 5.0, 2.0, 3.0, 6.0]);
        assert!(SymmetricMatrix::from_packed(3, vec![0.0; 5]).is_err());
    }
}
