//! Consumption and state utilities.

use crate::scalar::Real;

/// Utility of consumption `U₁(c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsumptionUtility<T> {
    /// `(c / (1 + c))^γ`, `0 < γ < 1`: bounded by 1 with infinite slope at `0⁺`.
    BoundedPower { gamma: T },
    /// `1 - exp(-k c)`. Finite slope `k` at zero, so it fails the Inada condition;
    /// kept as a negative case for hypothesis validation.
    Exponential { k: T },
}

impl<T: Real> Default for ConsumptionUtility<T> {
    fn default() -> Self {
        ConsumptionUtility::BoundedPower { gamma: T::lit(0.5) }
    }
}

impl<T: Real> ConsumptionUtility<T> {
    pub fn value(&self, c: T) -> T {
        let c = c.max(T::zero());
        match *self {
            ConsumptionUtility::BoundedPower { gamma } => (c / (T::one() + c)).powf(gamma),
            ConsumptionUtility::Exponential { k } => T::one() - (-k * c).exp(),
        }
    }

    /// `U₁'(c)` for `c > 0` (`+∞` at `c = 0` for the power family).
    pub fn deriv(&self, c: T) -> T {
        match *self {
            ConsumptionUtility::BoundedPower { gamma } => {
                if c <= T::zero() {
                    return T::infinity();
                }
                gamma * c.powf(gamma - T::one()) * (T::one() + c).powf(-gamma - T::one())
            }
            ConsumptionUtility::Exponential { k } => k * (-k * c.max(T::zero())).exp(),
        }
    }

    pub fn second_deriv(&self, c: T) -> T {
        match *self {
            ConsumptionUtility::BoundedPower { gamma } => {
                if c <= T::zero() {
                    return T::neg_infinity();
                }
                let log_slope = (gamma - T::one()) / c - (gamma + T::one()) / (T::one() + c);
                self.deriv(c) * log_slope
            }
            ConsumptionUtility::Exponential { k } => -k * k * (-k * c.max(T::zero())).exp(),
        }
    }

    /// `Ū₁ = lim_{c→∞} U₁(c)`.
    pub fn sup(&self) -> T {
        T::one()
    }
}

/// Utility of the state `U₂(x)`, evaluated on `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateUtility<T> {
    Zero,
    /// `log x`. Satisfies the discounted integrability condition but is unbounded
    /// above, so validation flags it.
    Log,
    /// `-weight · x^(-beta)`: increasing, concave, bounded above by 0.
    NegPower { weight: T, beta: T },
}

impl<T: Real> Default for StateUtility<T> {
    fn default() -> Self {
        StateUtility::Zero
    }
}

impl<T: Real> StateUtility<T> {
    pub fn is_zero(&self) -> bool {
        matches!(self, StateUtility::Zero)
    }

    pub fn value(&self, x: T) -> T {
        match *self {
            StateUtility::Zero => T::zero(),
            StateUtility::Log => {
                if x > T::zero() {
                    x.ln()
                } else {
                    T::neg_infinity()
                }
            }
            StateUtility::NegPower { weight, beta } => {
                if x > T::zero() {
                    -weight * x.powf(-beta)
                } else {
                    T::neg_infinity()
                }
            }
        }
    }

    pub fn deriv(&self, x: T) -> T {
        match *self {
            StateUtility::Zero => T::zero(),
            StateUtility::Log => T::one() / x,
            StateUtility::NegPower { weight, beta } => weight * beta * x.powf(-beta - T::one()),
        }
    }

    /// `Ū₂ = lim_{x→∞} U₂(x)`.
    pub fn sup(&self) -> T {
        match self {
            StateUtility::Zero | StateUtility::NegPower { .. } => T::zero(),
            StateUtility::Log => T::infinity(),
        }
    }

    /// `∫₀^∞ e^{-ρ s} U₂(ξ e^{-C s}) ds` in closed form; `-∞` when it diverges.
    pub fn decay_tail_integral(&self, xi: T, rho: T, decay: T) -> T {
        match *self {
            StateUtility::Zero => T::zero(),
            StateUtility::Log => xi.ln() / rho - decay / (rho * rho),
            StateUtility::NegPower { weight, beta } => {
                let rate = rho - beta * decay;
                if rate > T::zero() {
                    -weight * xi.powf(-beta) / rate
                } else {
                    T::neg_infinity()
                }
            }
        }
    }
}

/// The pair `(U₁, U₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityPair<T> {
    pub u1: ConsumptionUtility<T>,
    pub u2: StateUtility<T>,
}

impl<T: Real> Default for UtilityPair<T> {
    fn default() -> Self {
        Self::new(ConsumptionUtility::default(), StateUtility::default())
    }
}

impl<T: Real> UtilityPair<T> {
    pub fn new(u1: ConsumptionUtility<T>, u2: StateUtility<T>) -> Self {
        Self { u1, u2 }
    }

    /// `Ū₁ + Ū₂`.
    pub fn sup(&self) -> T {
        self.u1.sup() + self.u2.sup()
    }
}
