//! Problem data: parameters, delay kernel, drift nonlinearity and utilities.

pub mod hypotheses;
pub mod kernel;
pub mod nonlinearity;
pub mod params;
pub mod utility;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state::HState;

use hypotheses::{validate_hypotheses, HypothesisReport};
use kernel::{make_kernel, Kernel, KernelFamily};
use nonlinearity::{eval_drift, Nonlinearity};
use params::ModelParams;
use utility::UtilityPair;

/// Everything the solvers need about one scenario.
///
/// `test_mode` marks bundles built without hypothesis validation (for analytic
/// oracles such as `f₀ ≡ 0` or `r = 0`); production entry points refuse them.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub params: ModelParams<T>,
    pub kernel: Kernel<T>,
    pub nl: Nonlinearity<T>,
    pub utilities: UtilityPair<T>,
    pub test_mode: bool,
}

impl<T: Real> Model<T> {
    /// Builds a model and rejects it unless every hypothesis check passes.
    pub fn new(
        params: ModelParams<T>,
        kernel: Kernel<T>,
        nl: Nonlinearity<T>,
        utilities: UtilityPair<T>,
    ) -> Result<Self> {
        params.check()?;
        let model = Self::new_unchecked(params, kernel, nl, utilities);
        let report = model.hypotheses();
        if !report.all_pass() {
            let names: Vec<_> = report.failures().map(|c| c.name).collect();
            return Err(Error::Hypothesis(names.join(", ")));
        }
        Ok(Self {
            test_mode: false,
            ..model
        })
    }

    /// Skips validation entirely and sets `test_mode`.
    pub fn new_unchecked(
        params: ModelParams<T>,
        kernel: Kernel<T>,
        nl: Nonlinearity<T>,
        utilities: UtilityPair<T>,
    ) -> Self {
        Self {
            params,
            kernel,
            nl,
            utilities,
            test_mode: true,
        }
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        validate_hypotheses(&self.params, &self.nl, &self.kernel, &self.utilities)
    }

    /// The scenario used when nothing else is configured: `r = 0.05`, `T = 1`,
    /// `ρ = 0.5`, ramp kernel with `N = 200`, `f₀ = 0.1 min(x,10) + 0.4 min(y,10) + 0.05`,
    /// `U₁ = (c/(1+c))^½`, `U₂ ≡ 0`.
    pub fn default_scenario() -> Self {
        Self::default_with_resolution(200)
    }

    pub fn default_with_resolution(n: usize) -> Self {
        let one = T::one();
        let params =
            ModelParams::new(T::lit(0.05), one, T::lit(0.5), T::lit(0.4), one, T::zero()).expect("defaults");
        let kernel = make_kernel(KernelFamily::LinearRamp, &[one], one, n).expect("default kernel");
        let nl = Nonlinearity::affine(T::lit(0.1), T::lit(0.4), T::lit(10.0), T::lit(0.05));
        Self::new(params, kernel, nl, UtilityPair::default()).expect("defaults satisfy hypotheses")
    }

    /// The same model with the kernel resampled on an `n`-interval grid.
    pub fn at_resolution(&self, n: usize) -> Result<Self> {
        Ok(Self {
            kernel: self.kernel.at_resolution(n)?,
            ..self.clone()
        })
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    pub fn dxi(&self) -> T {
        self.kernel.dxi
    }

    pub fn delay(&self) -> T {
        self.params.delay
    }

    /// `f(η) = f₀(η₀, ∫ a η₁)`.
    pub fn drift(&self, eta: &HState<T>) -> Result<T> {
        eval_drift(&self.nl, &self.kernel, eta)
    }

    /// Rejects test-mode bundles on production paths.
    pub fn require_validated(&self) -> Result<()> {
        if self.test_mode {
            Err(Error::Hypothesis(
                "model was built in test mode without hypothesis validation".into(),
            ))
        } else {
            Ok(())
        }
    }

    /// Checks that `eta` lives on the kernel grid.
    pub fn check_state(&self, eta: &HState<T>) -> Result<()> {
        let n = self.kernel.n();
        if eta.n() != n || (eta.dxi - self.kernel.dxi).abs() > T::roundoff() * self.kernel.dxi {
            return Err(Error::GridMismatch {
                expected: n,
                found: eta.n(),
                expected_dxi: self.kernel.dxi.as_f64(),
                found_dxi: eta.dxi.as_f64(),
            });
        }
        Ok(())
    }
}
