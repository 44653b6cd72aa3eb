//! Sliding-window sample covariance `(1/w) * sum_{i=t-w+1}^{t} x_i x_i^T`.

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;

/// Second-moment matrix over the last `w` observations, maintained by
/// rank-one updates and downdates.
///
/// The accumulated sum is rebuilt from the buffer every `w` pushes so that
/// rounding drift from downdates never accumulates past one window.
#[derive(Debug, Clone)]
pub struct SlidingCovariance {
    p: usize,
    w: usize,
    // ring buffer, w rows of p values
    buffer: Vec<f64>,
    head: usize,
    count: usize,
    sum_outer: SymmetricMatrix,
    since_rebuild: usize,
}

impl SlidingCovariance {
    pub fn new(p: usize, w: usize) -> Result<Self> {
        if p < 1 || w < 1 {
            return Err(Error::InvalidArgument(format!("need p >= 1 and w >= 1 (p = {p}, w = {w})")));
        }
        Ok(Self {
            p,
            w,
            buffer: vec![0.0; p * w],
            head: 0,
            count: 0,
            sum_outer: SymmetricMatrix::zeros(p),
            since_rebuild: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn window(&self) -> usize {
        self.w
    }

    /// Observations currently held (at most `w`).
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_ready(&self) -> bool {
        self.count == self.w
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::InvalidArgument(format!("observation has dimension {}, expected {}", x.len(), self.p)));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("observation entry {i} is not finite ({})", x[i])));
        }
        let slot = self.head * self.p;
        if self.count == self.w {
            let old = &self.buffer[slot..slot + self.p];
            self.sum_outer.add_outer(old, -1.0);
        } else {
            self.count += 1;
        }
        self.buffer[slot..slot + self.p].copy_from_slice(x);
        self.sum_outer.add_outer(x, 1.0);
        self.head = (self.head + 1) % self.w;

        self.since_rebuild += 1;
        if self.since_rebuild >= self.w {
            self.rebuild();
        }
        Ok(())
    }

    /// Recompute the accumulated sum from the buffered observations.
    pub fn rebuild(&mut self) {
        self.sum_outer = self.batch_sum();
        self.since_rebuild = 0;
    }

    fn batch_sum(&self) -> SymmetricMatrix {
        let mut s = SymmetricMatrix::zeros(self.p);
        for x in self.observations() {
            s.add_outer(x, 1.0);
        }
        s
    }

    /// Buffered observations, oldest first.
    pub fn observations(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let start = if self.count == self.w { self.head } else { 0 };
        (0..self.count).map(move |k| {
            let slot = (start + k) % self.w;
            &self.buffer[slot * self.p..(slot + 1) * self.p]
        })
    }

    /// Sample covariance over the held observations. Before the window is
    /// full this averages over `count` samples; callers should check
    /// [`is_ready`](Self::is_ready).
    pub fn matrix(&self) -> SymmetricMatrix {
        let n = self.count.max(1) as f64;
        self.sum_outer.scaled(1.0 / n)
    }

    /// Covariance recomputed from scratch from the buffer.
    pub fn batch_matrix(&self) -> SymmetricMatrix {
        let n = self.count.max(1) as f64;
        self.batch_sum().scaled(1.0 / n)
    }

    pub fn clear(&mut self) {
        self.head = 0;
        self.count = 0;
        self.since_rebuild = 0;
        self.sum_outer = SymmetricMatrix::zeros(self.p);
        self.buffer.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_vectors_give_zero_matrix() {
        let mut c = SlidingCovariance::new(4, 10).unwrap();
        for _ in 0..10 {
            c.push(&[0.0; 4]).unwrap();
        }
        assert!(c.is_ready());
        assert_eq!(c.matrix(), SymmetricMatrix::zeros(4));
    }

    #[test]
    fn basis_vector_copies() {
        let mut c = SlidingCovariance::new(3, 7).unwrap();
        for _ in 0..7 {
            c.push(&[1.0, 0.0, 0.0]).unwrap();
        }
        assert_eq!(c.matrix(), SymmetricMatrix::from_diagonal(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn incremental_matches_batch_on_random_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = SlidingCovariance::new(5, 50).unwrap();
        let mut history: Vec<Vec<f64>> = Vec::new();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            c.push(&x).unwrap();
            history.push(x);
            // oracle straight from the definition over the last w samples
            let tail = &history[history.len().saturating_sub(50)..];
            let mut s = SymmetricMatrix::zeros(5);
            for v in tail {
                s.add_outer(v, 1.0 / tail.len() as f64);
            }
            assert!(c.matrix().max_abs_diff(&s) < 1e-9);
        }
    }

    #[test]
    fn rebuild_restores_exact_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut c = SlidingCovariance::new(3, 8).unwrap();
        for _ in 0..80 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1e3..1e3)).collect();
            c.push(&x).unwrap();
        }
        // 80 pushes is a multiple of w, so a rebuild just happened
        assert_eq!(c.matrix(), c.batch_matrix());
    }

    #[test]
    fn warm_up_averages_over_available_samples() {
        let mut c = SlidingCovariance::new(2, 4).unwrap();
        c.push(&[2.0, 0.0]).unwrap();
        assert!(!c.is_ready());
        assert_eq!(c.matrix().get(0, 0), 4.0);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = SlidingCovariance::new(3, 4).unwrap();
        assert!(matches!(c.push(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(c.push(&[1.0, f64::NAN, 0.0]), Err(Error::Data(_))));
        assert!(matches!(c.push(&[1.0, f64::INFINITY, 0.0]), Err(Error::Data(_))));
        assert_eq!(c.count(), 0);
        assert!(SlidingCovariance::new(0, 4).is_err());
    }

    proptest! {
        #[test]
        fn incremental_state_tracks_batch(
            w in 1usize..20,
            rows in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..120),
        ) {
            let mut c = SlidingCovariance::new(3, w).unwrap();
            for r in &rows {
                c.push(r).unwrap();
                prop_assert!(c.matrix().max_abs_diff(&c.batch_matrix()) < 1e-9 * 1e4);
            }
            prop_assert_eq!(c.count(), rows.len().min(w));
        }
    }
}
