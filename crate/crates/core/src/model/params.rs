use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar problem data.
///
/// `delay` is the delay length `T`; `c_f0` the Lipschitz constant of the drift
/// nonlinearity; `u1_sup` and `u2_sup` the suprema `Ū₁`, `Ū₂` of the utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub r: T,
    pub delay: T,
    pub rho: T,
    pub c_f0: T,
    pub u1_sup: T,
    pub u2_sup: T,
}

impl<T: Real> ModelParams<T> {
    /// Rejects `r ≤ 0`, `T ≤ 0`, `ρ ≤ 0` and a negative Lipschitz constant.
    pub fn new(r: T, delay: T, rho: T, c_f0: T, u1_sup: T, u2_sup: T) -> Result<Self> {
        let p = Self {
            r,
            delay,
            rho,
            c_f0,
            u1_sup,
            u2_sup,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("r", self.r)?;
        positive("T", self.delay)?;
        positive("rho", self.rho)?;
        if !(self.c_f0 >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant must be nonnegative, got {}",
                self.c_f0
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_rates() {
        assert!(ModelParams::new(0.0, 1.0, 0.5, 0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(-0.1, 1.0, 0.5, 0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 0.0, 0.5, 0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.0, 0.1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.5, -1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(0.1_f32, 1.0, 0.5, 0.1, 1.0, 0.0).is_ok());
    }
}
