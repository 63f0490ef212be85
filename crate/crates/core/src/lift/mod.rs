//! The product space `H = ℝ × L²([-T, 0])`: norms, the generator `A`, its inverse and
//! adjoint, the shift semigroup and its adjoint.
//!
//! Pointwise delays `x(t - T)` in the drift are not representable here: their lifted
//! generator would need `F` to evaluate `η₁` at a single point, which is not continuous
//! on `L²`. Only distributed delays are supported.

pub mod checks;
pub mod mild;

use crate::error::{Error, Result};
use crate::model::kernel::Kernel;
use crate::quadrature;
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;

pub use mild::{
    equivalence_error, equivalence_profile, gronwall_constant, gronwall_stability, integrate_mild, EquivalenceProfile,
    GronwallResult, LiftedTrajectory,
};

/// A state together with its (numerical) domain memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState<T> {
    pub state: HState<T>,
    /// `η₁ ∈ W^{1,2}` proxy and `η₁(0) = η₀`.
    pub in_domain_a: bool,
    /// `η₁ ∈ W^{1,2}` proxy and `η₁(-T) = 0`.
    pub in_domain_astar: bool,
}

impl<T: Real> LiftedState<T> {
    pub fn new(state: HState<T>) -> Self {
        Self {
            in_domain_a: in_domain_a(&state),
            in_domain_astar: in_domain_astar(&state),
            state,
        }
    }
}

/// `10 · dxi · scale(η)`.
pub fn dom_tol<T: Real>(eta: &HState<T>) -> T {
    T::lit(10.0) * eta.dxi * eta.scale()
}

/// Sobolev proxy: a `W^{1,2}` function satisfies `|η₁(s+h) - η₁(s)| ≤ √h ‖η₁'‖`, so
/// single-cell jumps must scale like `√dxi`.
pub fn w12_proxy<T: Real>(eta: &HState<T>) -> bool {
    let limit = T::lit(10.0) * eta.dxi.sqrt() * eta.scale();
    eta.eta1.windows(2).all(|w| (w[1] - w[0]).abs() <= limit)
}

pub fn in_domain_a<T: Real>(eta: &HState<T>) -> bool {
    w12_proxy(eta) && (eta.eta1[eta.n()] - eta.eta0).abs() <= dom_tol(eta)
}

pub fn in_domain_astar<T: Real>(eta: &HState<T>) -> bool {
    w12_proxy(eta) && eta.eta1[0].abs() <= dom_tol(eta)
}

/// `⟨η, ζ⟩ = η₀ζ₀ + ∫ η₁ζ₁`.
pub fn inner<T: Real>(a: &HState<T>, b: &HState<T>) -> T {
    a.eta0 * b.eta0 + quadrature::trapezoid_product(&a.eta1, &b.eta1, a.dxi)
}

/// `‖η‖ = √(η₀² + ∫ η₁²)`.
pub fn h_norm<T: Real>(eta: &HState<T>) -> T {
    inner(eta, eta).sqrt()
}

/// `A⁻¹η = (η₀/r, s ↦ η₀/r - ∫_s^0 η₁)`.
pub fn apply_ainv<T: Real>(r: T, eta: &HState<T>) -> LiftedState<T> {
    let head = eta.eta0 / r;
    let tail = quadrature::cumulative_from_right(&eta.eta1, eta.dxi);
    LiftedState::new(HState {
        eta0: head,
        eta1: tail.into_iter().map(|v| head - v).collect(),
        dxi: eta.dxi,
    })
}

/// `‖η‖₋₁ = ‖A⁻¹η‖`.
pub fn norm_minus1<T: Real>(r: T, eta: &HState<T>) -> T {
    h_norm(&apply_ainv(r, eta).state)
}

/// `Aη = (rη₀, η₁')` on `D(A)`.
pub fn apply_a<T: Real>(r: T, eta: &HState<T>) -> Result<LiftedState<T>> {
    let gap = (eta.eta1[eta.n()] - eta.eta0).abs();
    let tol = dom_tol(eta);
    if gap > tol || !w12_proxy(eta) {
        return Err(Error::OutsideDomainA {
            gap: gap.as_f64(),
            tol: tol.as_f64(),
        });
    }
    Ok(LiftedState::new(HState {
        eta0: r * eta.eta0,
        eta1: quadrature::derivative(&eta.eta1, eta.dxi),
        dxi: eta.dxi,
    }))
}

/// `A*η = (rη₀ + η₁(0), -η₁')` on `D(A*) = {η₁ ∈ W^{1,2}, η₁(-T) = 0}`.
pub fn apply_astar<T: Real>(r: T, eta: &HState<T>) -> Result<LiftedState<T>> {
    let value = eta.eta1[0].abs();
    let tol = dom_tol(eta);
    if value > tol || !w12_proxy(eta) {
        return Err(Error::OutsideDomainAstar {
            value: value.as_f64(),
            tol: tol.as_f64(),
        });
    }
    Ok(LiftedState::new(HState {
        eta0: r * eta.eta0 + eta.eta1[eta.n()],
        eta1: quadrature::derivative(&eta.eta1, eta.dxi)
            .into_iter()
            .map(|d| -d)
            .collect(),
        dxi: eta.dxi,
    }))
}

/// `S(t)η = (η₀e^{rt}, ζ ↦ η₁(t+ζ) if t+ζ < 0, else η₀e^{r(t+ζ)})`.
///
/// Grid-aligned `t` shifts samples exactly; otherwise the history is interpolated
/// linearly.
pub fn apply_semigroup<T: Real>(r: T, t: T, eta: &HState<T>) -> Result<LiftedState<T>> {
    if t < T::zero() {
        return Err(Error::TimeOutOfRange {
            t: t.as_f64(),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    if t == T::zero() {
        return Ok(LiftedState::new(eta.clone()));
    }
    let n = eta.n();
    let eta1 = match integer_ratio(t, eta.dxi, 1e-9) {
        Some(m) => (0..=n)
            .map(|j| {
                if j + m < n {
                    eta.eta1[j + m]
                } else {
                    eta.eta0 * (r * eta.dxi * T::from_usize_lossy(j + m - n)).exp()
                }
            })
            .collect(),
        None => (0..=n)
            .map(|j| {
                let s = t + eta.node(j);
                if s < T::zero() {
                    eta.past_at(s)
                } else {
                    eta.eta0 * (r * s).exp()
                }
            })
            .collect(),
    };
    Ok(LiftedState::new(HState {
        eta0: eta.eta0 * (r * t).exp(),
        eta1,
        dxi: eta.dxi,
    }))
}

/// `S*(t)η = (e^{rt}(η₀ + ∫_{-t}^0 η₁(ξ)e^{rξ}dξ), ζ ↦ η₁(ζ - t) I_{[-T,0]}(ζ - t))` for
/// `0 ≤ t ≤ T`.
pub fn apply_adjoint_semigroup<T: Real>(r: T, t: T, eta: &HState<T>) -> Result<LiftedState<T>> {
    let delay = eta.delay();
    if t < T::zero() || t > delay * (T::one() + T::lit(1e-12)) {
        return Err(Error::TimeOutOfRange {
            t: t.as_f64(),
            lo: 0.0,
            hi: delay.as_f64(),
        });
    }
    let t = t.min(delay);
    let integral = quadrature::integrate_piecewise_linear(&eta.eta1, -delay, eta.dxi, -t, T::zero(), |xi| {
        (r * xi).exp()
    });
    let n = eta.n();
    let eta1 = match integer_ratio(t, eta.dxi, 1e-9) {
        Some(m) => (0..=n).map(|j| if j >= m { eta.eta1[j - m] } else { T::zero() }).collect(),
        None => (0..=n)
            .map(|j| {
                let s = eta.node(j) - t;
                if s >= -delay {
                    eta.past_at(s)
                } else {
                    T::zero()
                }
            })
            .collect(),
    };
    Ok(LiftedState::new(HState {
        eta0: (r * t).exp() * (eta.eta0 + integral),
        eta1,
        dxi: eta.dxi,
    }))
}

/// `C_a = r + ‖A*(0, a)‖`, the constant in `|η₀| + |∫aη₁| ≤ C_a ‖η‖₋₁`.
///
/// Uses the kernel's analytic derivative. Fails for `a(-T) ≠ 0`, where `(0, a)` is
/// outside `D(A*)` and no such constant exists.
pub fn lip_a_constant<T: Real>(r: T, kernel: &Kernel<T>) -> Result<T> {
    let a0 = kernel.samples[0];
    if a0 != T::zero() {
        return Err(Error::OutsideDomainAstar {
            value: a0.abs().as_f64(),
            tol: 0.0,
        });
    }
    Ok(r + h_norm(&astar_of_kernel(kernel)))
}

/// `A*(0, a) = (a(0), -a')`.
pub fn astar_of_kernel<T: Real>(kernel: &Kernel<T>) -> HState<T> {
    HState {
        eta0: kernel.samples[kernel.n()],
        eta1: kernel.deriv_samples.iter().map(|&d| -d).collect(),
        dxi: kernel.dxi,
    }
}

/// The pairing `|∫ a η₁ⁿ|` and `‖ηⁿ‖₋₁` for `ηⁿ = (0, n · I_{[-T, -T+1/n]})`.
///
/// Both are computed exactly: the kernel is integrated as a piecewise-linear function
/// over the support, and `A⁻¹ηⁿ = (0, s ↦ -n(-T + 1/n - s)⁺)` is integrated in closed
/// form by Simpson's rule, exact for its square.
pub fn counterexample_sequence<T: Real>(kernel: &Kernel<T>, n: usize) -> Result<(T, T)> {
    if n == 0 {
        return Err(Error::InvalidParameter("sequence index starts at 1".into()));
    }
    let width = T::one() / T::from_usize_lossy(n);
    let delay = kernel.delay();
    if width < kernel.dxi * (T::one() - T::lit(1e-9)) || width > delay {
        return Err(Error::Resolution(format!(
            "support width 1/{n} is not resolved by dxi = {} on [-{}, 0]",
            kernel.dxi, delay
        )));
    }
    let height = T::from_usize_lossy(n);
    let lo = -delay;
    let hi = lo + width;
    let mass = height
        * quadrature::integrate_piecewise_linear(&kernel.samples, lo, kernel.dxi, lo, hi, |_| T::one());
    let antiderivative = |s: T| -height * (hi - s).max(T::zero());
    let sq = |s: T| antiderivative(s).powi(2);
    let mid = T::lit(0.5) * (lo + hi);
    let l2 = width / T::lit(6.0) * (sq(lo) + T::lit(4.0) * sq(mid) + sq(hi));
    Ok((mass.abs(), l2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::{make_kernel, KernelFamily};
    use approx::assert_relative_eq;

    #[test]
    fn norm_examples() {
        assert_relative_eq!(h_norm(&HState::constant(1.0, 0.0, 1.0, 50)), 1.0);
        assert_relative_eq!(h_norm(&HState::constant(0.0, 1.0, 1.0, 50)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(h_norm(&HState::constant(3.0, 4.0, 1.0, 50)), 5.0, epsilon = 1e-13);
    }

    #[test]
    fn inverse_examples() {
        let r = 0.3;
        let ai = apply_ainv(r, &HState::constant(r, 0.0, 1.0, 40));
        assert_relative_eq!(ai.state.eta0, 1.0, epsilon = 1e-15);
        assert!(ai.state.eta1.iter().all(|&v: &f64| (v - 1.0).abs() < 1e-15));
        assert!(ai.in_domain_a);
        let ramp = apply_ainv(r, &HState::constant(0.0, 1.0, 1.0, 40));
        for (v, s) in ramp.state.eta1.iter().zip(ramp.state.nodes()) {
            assert_relative_eq!(*v, s, epsilon = 1e-13);
        }
        assert_relative_eq!(norm_minus1(r, &HState::constant(r, 0.0, 1.0, 40)), 2f64.sqrt(), epsilon = 1e-13);
        assert_eq!(norm_minus1(r, &HState::zero(1.0, 40)), 0.0);
    }

    #[test]
    fn adjoint_examples() {
        let k = make_kernel(KernelFamily::LinearRamp, &[1.0], 1.0, 100).unwrap();
        let eta = HState {
            eta0: 0.0,
            eta1: k.samples.clone(),
            dxi: k.dxi,
        };
        let a = apply_astar(0.5, &eta).unwrap().state;
        assert_relative_eq!(a.eta0, 1.0, epsilon = 1e-12);
        assert!(a.eta1.iter().all(|&d: &f64| (d + 1.0).abs() < 1e-10));
        let p = apply_astar(0.5, &HState::constant(1.0, 0.0, 1.0, 100)).unwrap().state;
        assert_relative_eq!(p.eta0, 0.5);
        assert!(apply_astar(0.5, &HState::constant(1.0, 1.0, 1.0, 100)).is_err());
        assert_relative_eq!(lip_a_constant(0.5, &k).unwrap(), 0.5 + 2f64.sqrt(), epsilon = 1e-12);
        assert!(lip_a_constant(0.5, &Kernel::constant(1.0, 1.0, 100)).is_err());
    }

    #[test]
    fn semigroup_formula() {
        let eta = HState::from_fn(2.0, 1.0, 20, |s: f64| 1.0 + s * s);
        assert_eq!(apply_semigroup(0.1, 0.0, &eta).unwrap().state, eta);
        let late = apply_semigroup(0.1, 1.5, &eta).unwrap().state;
        for (v, s) in late.eta1.iter().zip(eta.nodes()) {
            assert_relative_eq!(*v, 2.0 * (0.1 * (1.5 + s)).exp(), epsilon = 1e-12);
        }
        let star = apply_adjoint_semigroup(0.1, 0.4, &HState::constant(1.0, 0.0, 1.0, 20)).unwrap().state;
        assert_relative_eq!(star.eta0, (0.04f64).exp(), epsilon = 1e-14);
        assert!(apply_adjoint_semigroup(0.1, 1.5, &eta).is_err());
    }

    #[test]
    fn counterexample_values() {
        let ones = Kernel::constant(1.0, 1.0, 64);
        let (m1, n1) = counterexample_sequence(&ones, 1).unwrap();
        let (m8, n8) = counterexample_sequence(&ones, 8).unwrap();
        assert_relative_eq!(m1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m8, 1.0, epsilon = 1e-12);
        assert_relative_eq!(n8, 1.0 / 24f64.sqrt(), epsilon = 1e-12);
        assert!((m8 / n8) / (m1 / n1) > 2.0);
        assert!(counterexample_sequence(&ones, 100).is_err());
    }
}
