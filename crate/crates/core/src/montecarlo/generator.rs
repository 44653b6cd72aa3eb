use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Post-change covariance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `N(0, I)` throughout.
    Null,
    /// `N(0, I + theta u u^T)` after the change.
    Spiked,
    /// `N(0, theta u u^T)` after the change.
    Rank1,
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "null" => Ok(Regime::Null),
            "spiked" => Ok(Regime::Spiked),
            "rank1" => Ok(Regime::Rank1),
            _ => Err(format!("unknown regime '{s}' (expected null, spiked or rank1)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub regime: Regime,
    pub p: usize,
    pub theta: f64,
    /// Spike direction; drawn uniformly on the sphere from the seed if unset.
    pub u: Option<Vec<f64>>,
    /// Observations `1..=change_at` are pre-change.
    pub change_at: u64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn null(p: usize, seed: u64) -> Self {
        Self { regime: Regime::Null, p, theta: 0.0, u: None, change_at: 0, seed }
    }

    pub fn spiked(p: usize, theta: f64, change_at: u64, seed: u64) -> Self {
        Self { regime: Regime::Spiked, p, theta, u: None, change_at, seed }
    }

    pub fn rank1(p: usize, theta: f64, change_at: u64, seed: u64) -> Self {
        Self { regime: Regime::Rank1, p, theta, u: None, change_at, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1 {
            return Err(invalid("dimension p must be >= 1"));
        }
        match self.regime {
            Regime::Null => {}
            // theta = 0 is allowed for the spiked model, where it is the null
            Regime::Spiked if self.theta >= 0.0 && self.theta.is_finite() => {}
            Regime::Rank1 if self.theta > 0.0 && self.theta.is_finite() => {}
            _ => return Err(invalid(format!("invalid theta {} for regime {:?}", self.theta, self.regime))),
        }
        if let Some(u) = &self.u {
            if u.len() != self.p {
                return Err(invalid(format!("direction has length {}, expected {}", u.len(), self.p)));
            }
            let n: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(n > 0.0) {
                return Err(invalid("direction must be nonzero"));
            }
        }
        Ok(())
    }

    /// Unit spike direction: the given `u` normalised, or a uniform draw on
    /// the sphere keyed by the seed.
    pub fn direction(&self) -> Vec<f64> {
        let raw = match &self.u {
            Some(u) => u.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(1);
                let mut g = vec![0.0; self.p];
                fill_normals(&mut rng, &mut g);
                g
            }
        };
        let n: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.into_iter().map(|v| v / n).collect()
    }

    /// 32-bit words of ChaCha output consumed per observation.
    fn words_per_step(&self) -> u128 {
        // p + 1 normals, Box-Muller pairs, two u64 (four words) per pair
        4 * ((self.p as u128 + 2) / 2)
    }
}

/// Box-Muller transform; each pair consumes exactly two `u64`s.
fn fill_normals<R: RngCore>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_mut(2);
    for pair in &mut chunks {
        // u1 in (0, 1] so that ln(u1) is finite
        let u1 = 1.0 - rng.gen::<f64>();
        let u2 = rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        pair[0] = r * c;
        if pair.len() > 1 {
            pair[1] = r * s;
        }
    }
}

/// Sequential observation source for a [`GeneratorSpec`]. Observation `t`
/// (1-based) depends only on `(seed, t)`.
#[derive(Debug, Clone)]
pub struct ObservationStream {
    spec: GeneratorSpec,
    direction: Vec<f64>,
    rng: ChaCha8Rng,
    t: u64,
    scratch: Vec<f64>,
}

impl ObservationStream {
    pub fn new(spec: &GeneratorSpec) -> Result<Self> {
        spec.validate()?;
        let direction = match spec.regime {
            Regime::Null => Vec::new(),
            _ => spec.direction(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        Ok(Self { spec: spec.clone(), direction, rng, t: 0, scratch: vec![0.0; spec.p + 1] })
    }

    /// Position the stream so that the next observation is `t` (1-based).
    pub fn seek(&mut self, t: u64) {
        let t = t.max(1);
        self.rng.set_word_pos((t as u128 - 1) * self.spec.words_per_step());
        self.t = t - 1;
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    /// Index of the last observation produced.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Write the next observation into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        let p = self.spec.p;
        debug_assert_eq!(out.len(), p);
        fill_normals(&mut self.rng, &mut self.scratch);
        self.t += 1;
        let post = self.t > self.spec.change_at;
        let g = self.scratch[p];
        match (self.spec.regime, post) {
            (Regime::Null, _) | (_, false) => out.copy_from_slice(&self.scratch[..p]),
            (Regime::Spiked, true) => {
                let a = self.spec.theta.sqrt() * g;
                for ((o, z), u) in out.iter_mut().zip(&self.scratch[..p]).zip(&self.direction) {
                    *o = z + a * u;
                }
            }
            (Regime::Rank1, true) => {
                let a = self.spec.theta.sqrt() * g;
                for (o, u) in out.iter_mut().zip(&self.direction) {
                    *o = a * u;
                }
            }
        }
    }
}

impl Iterator for ObservationStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut x = vec![0.0; self.spec.p];
        self.next_into(&mut x);
        Some(x)
    }
}

/// Observation `t` (1-based) of the stream described by `spec`.
pub fn generate(spec: &GeneratorSpec, t: u64) -> Result<Vec<f64>> {
    let mut s = ObservationStream::new(spec)?;
    s.seek(t);
    Ok(s.next().expect("stream is infinite"))
}

/// Independent per-replicate seed (SplitMix64 finaliser over seed and index).
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    let mut z = seed ^ replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_cov(spec: &GeneratorSpec, n: usize) -> Vec<Vec<f64>> {
        let p = spec.p;
        let mut s = vec![vec![0.0; p]; p];
        for x in ObservationStream::new(spec).unwrap().take(n) {
            for i in 0..p {
                for j in 0..p {
                    s[i][j] += x[i] * x[j] / n as f64;
                }
            }
        }
        s
    }

    #[test]
    fn random_access_matches_sequential() {
        let spec = GeneratorSpec::spiked(5, 3.0, 10, 42);
        let seq: Vec<Vec<f64>> = ObservationStream::new(&spec).unwrap().take(30).collect();
        for t in [1u64, 2, 10, 11, 30] {
            assert_eq!(generate(&spec, t).unwrap(), seq[t as usize - 1]);
        }
        let spec = GeneratorSpec::null(4, 42);
        let seq: Vec<Vec<f64>> = ObservationStream::new(&spec).unwrap().take(5).collect();
        assert_eq!(generate(&spec, 5).unwrap(), seq[4]);
    }

    #[test]
    fn null_covariance_is_identity() {
        let s = empirical_cov(&GeneratorSpec::null(4, 1), 100_000);
        for (i, row) in s.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 0.03);
            assert!(row[..i].iter().all(|v| v.abs() < 0.02));
        }
    }

    #[test]
    fn spiked_variance_along_direction() {
        let mut spec = GeneratorSpec::spiked(3, 10.0, 0, 2);
        spec.u = Some(vec![1.0, 0.0, 0.0]);
        let s = empirical_cov(&spec, 100_000);
        assert!((s[0][0] - 11.0).abs() < 0.3);
        assert!((s[1][1] - 1.0).abs() < 0.03);
        assert!((s[2][2] - 1.0).abs() < 0.03);
    }

    #[test]
    fn rank1_support() {
        let mut spec = GeneratorSpec::rank1(4, 4.0, 0, 3);
        spec.u = Some(vec![0.0, 1.0, 0.0, 0.0]);
        for x in ObservationStream::new(&spec).unwrap().take(100) {
            assert_eq!(x[0], 0.0);
            assert_eq!(x[2], 0.0);
            assert_eq!(x[3], 0.0);
        }
    }

    #[test]
    fn default_direction_is_unit() {
        for seed in 0..20 {
            let u = GeneratorSpec::spiked(7, 1.0, 0, seed).direction();
            let n: f64 = u.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pre_change_segment_is_null() {
        let spec = GeneratorSpec::rank1(3, 5.0, 50, 9);
        let null = GeneratorSpec::null(3, 9);
        let a: Vec<Vec<f64>> = ObservationStream::new(&spec).unwrap().take(50).collect();
        let b: Vec<Vec<f64>> = ObservationStream::new(&null).unwrap().take(50).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn validation() {
        assert!(GeneratorSpec::rank1(3, 0.0, 0, 1).validate().is_err());
        assert!(GeneratorSpec::spiked(3, -1.0, 0, 1).validate().is_err());
        assert!(GeneratorSpec::spiked(3, 0.0, 0, 1).validate().is_ok());
        let mut s = GeneratorSpec::spiked(3, 1.0, 0, 1);
        s.u = Some(vec![1.0, 0.0]);
        assert!(s.validate().is_err());
    }
}
