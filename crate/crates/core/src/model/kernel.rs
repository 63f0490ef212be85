//! The delay weight `a(·)` on `[-T, 0]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `a(ξ) = slope · (ξ + T)`; params `[slope]`.
    LinearRamp,
    /// Tent of the given height peaking at `center` (default `-T/2`); params `[height, center?]`.
    Hat,
    /// `a(ξ) = coeff · (ξ + T)^power`; params `[coeff?, power?]`, defaults `1, 2`.
    Poly,
    /// `a ≡ value`. Violates `a(-T) = 0` unless `value = 0`.
    Constant,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::LinearRamp => "linear_ramp",
            KernelFamily::Hat => "hat",
            KernelFamily::Poly => "poly",
            KernelFamily::Constant => "constant",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_ramp" | "ramp" => Ok(KernelFamily::LinearRamp),
            "hat" => Ok(KernelFamily::Hat),
            "poly" => Ok(KernelFamily::Poly),
            "constant" => Ok(KernelFamily::Constant),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Samples of `a` and `a'` on the uniform grid over `[-T, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    pub samples: Vec<T>,
    pub deriv_samples: Vec<T>,
    pub dxi: T,
    family: KernelFamily,
    params: Vec<T>,
}

/// Builds a kernel from an analytic family, rejecting shapes with `a(-T) ≠ 0` or
/// negative values.
pub fn make_kernel<T: Real>(
    family: KernelFamily,
    params: &[T],
    delay: T,
    n: usize,
) -> Result<Kernel<T>> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!("kernel grid needs N >= 8, got {n}")));
    }
    let kernel = Kernel::build(family, params, delay, n)?;
    if kernel.samples[0] != T::zero() {
        return Err(Error::Hypothesis(format!(
            "kernel {family} has a(-T) = {} != 0",
            kernel.samples[0]
        )));
    }
    if let Some((j, v)) = kernel
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| **v < T::zero())
    {
        return Err(Error::Hypothesis(format!(
            "kernel {family} is negative at node {j}: a = {v}"
        )));
    }
    Ok(kernel)
}

impl<T: Real> Kernel<T> {
    /// The constant kernel `a ≡ value`, built without the `a(-T) = 0` check. Used to
    /// exhibit the failure of the `‖·‖₋₁` Lipschitz bound.
    pub fn constant(value: T, delay: T, n: usize) -> Self {
        Self::build(KernelFamily::Constant, &[value], delay, n).expect("constant kernel")
    }

    /// Like [`make_kernel`] but without the sign and endpoint checks; failures are left
    /// to hypothesis validation.
    pub fn build_unchecked(family: KernelFamily, params: &[T], delay: T, n: usize) -> Result<Self> {
        Self::build(family, params, delay, n)
    }

    fn build(family: KernelFamily, params: &[T], delay: T, n: usize) -> Result<Self> {
        if !(delay > T::zero()) || n == 0 {
            return Err(Error::InvalidParameter("kernel needs T > 0 and N > 0".into()));
        }
        let p = |i: usize, default: T| params.get(i).copied().unwrap_or(default);
        let dxi = delay / T::from_usize_lossy(n);
        let node = |j: usize| -delay + dxi * T::from_usize_lossy(j);
        let (samples, deriv_samples): (Vec<T>, Vec<T>) = match family {
            KernelFamily::LinearRamp => {
                let slope = p(0, T::one());
                (0..=n)
                    .map(|j| {
                        // (ξ + T) = j dxi exactly at the nodes
                        (slope * dxi * T::from_usize_lossy(j), slope)
                    })
                    .unzip()
            }
            KernelFamily::Hat => {
                let height = p(0, T::one());
                let center = p(1, -delay * T::lit(0.5));
                if !(center > -delay && center < T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "hat center must lie in (-T, 0), got {center}"
                    )));
                }
                let half_width = (center + delay).min(-center);
                (0..=n)
                    .map(|j| {
                        let x = node(j);
                        let d = x - center;
                        if d.abs() >= half_width {
                            (T::zero(), T::zero())
                        } else {
                            let slope = height / half_width;
                            let deriv = if d.abs() <= T::roundoff() * delay {
                                T::zero()
                            } else if d < T::zero() {
                                slope
                            } else {
                                -slope
                            };
                            (height * (T::one() - d.abs() / half_width), deriv)
                        }
                    })
                    .unzip()
            }
            KernelFamily::Poly => {
                let coeff = p(0, T::one());
                let power = p(1, T::lit(2.0));
                if power < T::one() {
                    return Err(Error::InvalidParameter(format!(
                        "poly kernel needs power >= 1, got {power}"
                    )));
                }
                (0..=n)
                    .map(|j| {
                        let u = dxi * T::from_usize_lossy(j);
                        (coeff * u.powf(power), coeff * power * u.powf(power - T::one()))
                    })
                    .unzip()
            }
            KernelFamily::Constant => {
                let value = p(0, T::one());
                (vec![value; n + 1], vec![T::zero(); n + 1])
            }
        };
        Ok(Self {
            samples,
            deriv_samples,
            dxi,
            family,
            params: params.to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn delay(&self) -> T {
        self.dxi * T::from_usize_lossy(self.n())
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// The same analytic shape sampled on an `n`-interval grid.
    pub fn at_resolution(&self, n: usize) -> Result<Self> {
        if n == self.n() {
            return Ok(self.clone());
        }
        Self::build(self.family, &self.params, self.delay(), n)
    }

    /// Linear interpolation of `a` at `s ∈ [-T, 0]`.
    pub fn value_at(&self, s: T) -> T {
        quadrature::interpolate(&self.samples, -self.delay(), self.dxi, s)
    }

    /// `∫ a`, trapezoid rule.
    pub fn mass(&self) -> T {
        quadrature::trapezoid(&self.samples, self.dxi)
    }

    pub fn max(&self) -> T {
        self.samples.iter().copied().fold(T::zero(), T::max)
    }

    /// Largest mismatch between the stored derivative and centered differences of the
    /// samples over interior nodes.
    pub fn derivative_residual(&self) -> T {
        let n = self.n();
        let two = T::lit(2.0) * self.dxi;
        (1..n)
            .map(|j| ((self.samples[j + 1] - self.samples[j - 1]) / two - self.deriv_samples[j]).abs())
            .fold(T::zero(), T::max)
    }

    /// Tolerance for [`Kernel::derivative_residual`].
    pub fn derivative_tolerance(&self) -> T {
        let scale = self
            .deriv_samples
            .iter()
            .fold(T::one(), |m, v| m.max(v.abs()));
        T::lit(10.0) * self.dxi * scale.max(self.max() / self.delay())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ramp_endpoints_and_slope() {
        let k = make_kernel(KernelFamily::LinearRamp, &[1.0], 1.0, 100).unwrap();
        assert_eq!(k.samples[0], 0.0);
        assert_relative_eq!(k.samples[100], 1.0, epsilon = 1e-14);
        assert!(k.deriv_samples.iter().all(|&d| d == 1.0));
        assert!(k.derivative_residual() < 1e-12);
    }

    #[test]
    fn hat_is_symmetric_with_peak_at_midpoint() {
        let k = make_kernel(KernelFamily::Hat, &[2.5], 1.0, 100).unwrap();
        assert_eq!(k.samples[0], 0.0);
        assert_eq!(k.samples[100], 0.0);
        let (imax, vmax) = k
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(imax, 50);
        assert_relative_eq!(vmax, 2.5, epsilon = 1e-12);
        assert!(k.derivative_residual() <= k.derivative_tolerance());
    }

    #[test]
    fn poly_values_and_mass() {
        let k = make_kernel(KernelFamily::Poly, &[1.0, 2.0], 1.0, 100).unwrap();
        assert_relative_eq!(k.samples[100], 1.0, epsilon = 1e-14);
        assert_relative_eq!(k.deriv_samples[100], 2.0, epsilon = 1e-14);
        // exact antiderivative (ξ+T)³/3 gives 1/3
        assert!((k.mass() - 1.0_f64 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_hypothesis_violations() {
        assert!(matches!(
            make_kernel(KernelFamily::Constant, &[1.0], 1.0, 50),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            make_kernel(KernelFamily::LinearRamp, &[-1.0], 1.0, 50),
            Err(Error::Hypothesis(_))
        ));
        assert!(make_kernel(KernelFamily::LinearRamp, &[1.0], 1.0, 4).is_err());
        let c = Kernel::constant(1.0, 1.0, 50);
        assert_eq!(c.samples[0], 1.0);
    }

    #[test]
    fn resolution_change_keeps_shape() {
        let k = make_kernel(KernelFamily::Poly, &[1.0, 2.0], 2.0, 40).unwrap();
        let k2 = k.at_resolution(80).unwrap();
        assert_eq!(k2.n(), 80);
        assert_relative_eq!(k2.samples[80], 4.0, epsilon = 1e-12);
        assert_eq!(k2.family(), KernelFamily::Poly);
    }
}
