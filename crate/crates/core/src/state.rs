//! Points of the product space `H = ℝ × L²([-T, 0])`.

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;

/// A state `η = (η₀, η₁(·))`: the present value and uniform samples of the past on
/// `[-T, 0]`. `eta1[0]` sits at `-T`, `eta1[n]` at `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HState<T> {
    pub eta0: T,
    pub eta1: Vec<T>,
    pub dxi: T,
}

impl<T: Real> HState<T> {
    pub fn new(eta0: T, eta1: Vec<T>, delay: T) -> Result<Self> {
        if eta1.len() < 2 {
            return Err(Error::InvalidParameter(
                "the past needs at least two samples".into(),
            ));
        }
        if !(delay > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "delay must be positive, got {delay}"
            )));
        }
        let dxi = delay / T::from_usize_lossy(eta1.len() - 1);
        Ok(Self { eta0, eta1, dxi })
    }

    /// Samples `past(ξ)` on the `n`-interval grid over `[-delay, 0]`.
    pub fn from_fn(eta0: T, delay: T, n: usize, past: impl Fn(T) -> T) -> Self {
        let dxi = delay / T::from_usize_lossy(n);
        let eta1 = (0..=n)
            .map(|j| past(-delay + dxi * T::from_usize_lossy(j)))
            .collect();
        Self { eta0, eta1, dxi }
    }

    pub fn constant(eta0: T, past: T, delay: T, n: usize) -> Self {
        Self::from_fn(eta0, delay, n, |_| past)
    }

    pub fn zero(delay: T, n: usize) -> Self {
        Self::constant(T::zero(), T::zero(), delay, n)
    }

    /// Number of grid intervals.
    pub fn n(&self) -> usize {
        self.eta1.len() - 1
    }

    /// Delay length `T = n · dxi`.
    pub fn delay(&self) -> T {
        self.dxi * T::from_usize_lossy(self.n())
    }

    pub fn node(&self, j: usize) -> T {
        -self.delay() + self.dxi * T::from_usize_lossy(j)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.n()).map(|j| self.node(j)).collect()
    }

    /// `η ∈ H₊` iff `η₀ > 0`.
    pub fn in_h_plus(&self) -> bool {
        self.eta0 > T::zero()
    }

    /// `η ∈ H₊₊` iff `η₀ > 0` and the past is nonnegative.
    pub fn in_h_plus_plus(&self) -> bool {
        self.in_h_plus() && self.min_past() >= T::zero()
    }

    pub fn min_past(&self) -> T {
        self.eta1.iter().copied().fold(T::infinity(), T::min)
    }

    /// `max(1, |η₀|, max|η₁|)`, the scale used by relative tolerances.
    pub fn scale(&self) -> T {
        self.eta1
            .iter()
            .fold(T::one().max(self.eta0.abs()), |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n() == other.n() && (self.dxi - other.dxi).abs() <= T::roundoff() * self.dxi.abs()
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.n(),
                found: other.n(),
                expected_dxi: self.dxi.as_f64(),
                found_dxi: other.dxi.as_f64(),
            })
        }
    }

    /// Linear interpolation of the past at `s ∈ [-T, 0]`.
    pub fn past_at(&self, s: T) -> T {
        quadrature::interpolate(&self.eta1, -self.delay(), self.dxi, s)
    }

    /// Resamples the past onto an `n`-interval grid by linear interpolation.
    pub fn resample(&self, n: usize) -> Self {
        if n == self.n() {
            return self.clone();
        }
        let delay = self.delay();
        Self::from_fn(self.eta0, delay, n, |s| self.past_at(s))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            eta0: f(self.eta0),
            eta1: self.eta1.iter().map(|&v| f(v)).collect(),
            dxi: self.dxi,
        }
    }

    pub fn scaled(&self, lambda: T) -> Self {
        self.map(|v| lambda * v)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Self {
        debug_assert!(self.same_grid(other));
        Self {
            eta0: self.eta0 + alpha * other.eta0,
            eta1: self
                .eta1
                .iter()
                .zip(&other.eta1)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
            dxi: self.dxi,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-T::one(), other)
    }

    /// `λ self + (1 - λ) other`.
    pub fn blend(&self, lambda: T, other: &Self) -> Self {
        other.axpy(lambda, &self.sub(other))
    }

    /// Componentwise order `self ≤ other` (present and every past sample).
    pub fn le(&self, other: &Self) -> bool {
        self.eta0 <= other.eta0 && self.eta1.iter().zip(&other.eta1).all(|(a, b)| a <= b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_flags() {
        let s = HState::constant(1.0, 0.5, 1.0, 10);
        assert!(s.in_h_plus() && s.in_h_plus_plus());
        let mut t = s.clone();
        t.eta1[3] = -0.1;
        assert!(t.in_h_plus() && !t.in_h_plus_plus());
        t.eta0 = 0.0;
        assert!(!t.in_h_plus());
    }

    #[test]
    fn grid_spacing_times_n_is_delay() {
        let s = HState::<f64>::zero(2.5, 7);
        assert!((s.dxi * 7.0 - 2.5).abs() < 1e-12);
        assert!((s.delay() - 2.5).abs() < 1e-12);
        assert_eq!(s.node(0), -2.5);
        assert!(s.node(7).abs() < 1e-12);
    }

    #[test]
    fn resample_preserves_linear_pasts() {
        let s = HState::from_fn(1.0, 1.0, 8, |x: f64| 3.0 * x + 1.0);
        let r = s.resample(20);
        for (x, v) in r.nodes().iter().zip(&r.eta1) {
            assert!((v - (3.0 * x + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_endpoints() {
        let a = HState::constant(1.0, 2.0, 1.0, 4);
        let b = HState::constant(3.0, -1.0, 1.0, 4);
        assert_eq!(a.blend(1.0, &b), a);
        assert_eq!(a.blend(0.0, &b), b);
        let m = a.blend(0.5, &b);
        assert_eq!(m.eta0, 2.0);
        assert_eq!(m.eta1[2], 0.5);
    }
}
