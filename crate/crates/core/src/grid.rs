//! Uniform time grids starting at t = 0.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A uniform grid `t_k = k·step`, `k = 0..len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub step: T,
    /// Number of grid points, including t = 0.
    pub len: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(step: T, len: usize) -> Self {
        assert!(step > T::zero(), "grid step must be positive");
        assert!(len >= 1, "grid needs at least one point");
        Self { step, len }
    }

    /// Grid covering `[0, t_end]` with the given step; the last point is the
    /// first multiple of `step` at or beyond `t_end - step/2`.
    pub fn span(step: T, t_end: T) -> Self {
        let n = (t_end / step).to_f64_lossy().round() as usize;
        Self::new(step, n + 1)
    }

    pub fn t(&self, k: usize) -> T {
        T::of(k as f64) * self.step
    }

    pub fn t_end(&self) -> T {
        self.t(self.len - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len).map(move |k| self.t(k))
    }

    /// Index of the grid point closest to `t`, if `t` lies on the grid to
    /// within a small tolerance.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let x = (t / self.step).to_f64_lossy();
        let k = x.round();
        if (x - k).abs() < 1e-6 && k >= 0.0 && (k as usize) < self.len {
            Some(k as usize)
        } else {
            None
        }
    }
}
