//! Sampling-based certification of the standing assumptions on `a`, `f₀`, `U₁`, `U₂`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::kernel::Kernel;
use crate::model::nonlinearity::{eval_f0, Nonlinearity};
use crate::model::params::ModelParams;
use crate::model::utility::UtilityPair;
use crate::scalar::Real;

const SEED: u64 = 0x5eed_2011;
const PAIRS: usize = 1000;
/// Half-width of the `(x, y)` sampling box for `f₀` checks.
const BOX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub pass: bool,
    /// The sample that broke the check, if any.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, witness: Option<String>) {
        self.checks.push(HypothesisCheck {
            name,
            pass: witness.is_none(),
            witness,
        });
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:<32} {}", c.name, if c.pass { "pass" } else { "FAIL" })?;
            if let Some(w) = &c.witness {
                write!(f, "  ({w})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Checks every hypothesis on a deterministic random sample and reports each one with
/// a witness on failure.
pub fn validate_hypotheses<T: Real>(
    params: &ModelParams<T>,
    nl: &Nonlinearity<T>,
    kernel: &Kernel<T>,
    utilities: &UtilityPair<T>,
) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    check_params(&mut report, params, kernel);
    check_kernel(&mut report, kernel);
    check_f0(&mut report, params, nl);
    check_u1(&mut report, params, utilities);
    check_u2(&mut report, params, utilities);
    report
}

fn check_params<T: Real>(report: &mut HypothesisReport, p: &ModelParams<T>, kernel: &Kernel<T>) {
    let positive = |v: T, what: &str| (!(v > T::zero())).then(|| format!("{what} = {v}"));
    report.push("model.r_positive", positive(p.r, "r"));
    report.push("model.delay_positive", positive(p.delay, "T"));
    report.push("model.rho_positive", positive(p.rho, "rho"));
    let gap = (kernel.delay() - p.delay).abs();
    report.push(
        "model.kernel_delay_matches",
        (gap > T::lit(1e-9) * p.delay).then(|| format!("kernel T = {}, model T = {}", kernel.delay(), p.delay)),
    );
}

fn check_kernel<T: Real>(report: &mut HypothesisReport, kernel: &Kernel<T>) {
    let negative = kernel
        .samples
        .iter()
        .enumerate()
        .find(|(_, v)| **v < T::zero())
        .map(|(j, v)| format!("a(node {j}) = {v}"));
    report.push("kernel.nonnegative", negative);
    let a0 = kernel.samples[0];
    report.push(
        "kernel.vanishes_at_minus_T",
        (a0 != T::zero()).then(|| format!("a(-T) = {a0}")),
    );
    let res = kernel.derivative_residual();
    let tol = kernel.derivative_tolerance();
    report.push(
        "kernel.derivative_consistent",
        (res > tol).then(|| format!("finite-difference residual {res:e} > {tol:e}")),
    );
}

fn check_f0<T: Real>(report: &mut HypothesisReport, p: &ModelParams<T>, nl: &Nonlinearity<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let point = |rng: &mut ChaCha8Rng| {
        (
            T::lit(rng.gen_range(0.0..2.0 * BOX)),
            T::lit(rng.gen_range(-BOX..BOX)),
        )
    };
    let f = |x: T, y: T| eval_f0(nl, x, y);
    let tol = |v: T| (T::lit(1e-9) + T::roundoff()) * T::one().max(v.abs());

    let mut concave = None;
    let mut monotone = None;
    let mut lipschitz = None;
    for _ in 0..PAIRS {
        let (x1, y1) = point(&mut rng);
        let (x2, y2) = point(&mut rng);
        let half = T::lit(0.5);
        let mid = f(half * (x1 + x2), half * (y1 + y2));
        let avg = half * (f(x1, y1) + f(x2, y2));
        if concave.is_none() && mid < avg - tol(avg) {
            concave = Some(format!(
                "f0(mid) = {mid} < {avg} for ({x1}, {y1}), ({x2}, {y2})"
            ));
        }
        let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        if monotone.is_none() && f(x1, hi) < f(x1, lo) - tol(f(x1, lo)) {
            monotone = Some(format!("f0({x1}, {hi}) < f0({x1}, {lo})"));
        }
        let diff = (f(x1, y1) - f(x2, y2)).abs();
        let bound = p.c_f0 * ((x1 - x2).abs() + (y1 - y2).abs());
        if lipschitz.is_none() && diff > bound * (T::one() + T::lit(1e-9)) + tol(diff) {
            lipschitz = Some(format!(
                "|df| = {diff} > C_f0 * dist = {bound} for ({x1}, {y1}), ({x2}, {y2})"
            ));
        }
    }
    report.push("f0.jointly_concave", concave);
    report.push("f0.nondecreasing_in_y", monotone);
    report.push("f0.lipschitz", lipschitz);

    let positive = (1..=200)
        .map(|i| T::lit(BOX * i as f64 / 200.0))
        .chain([T::lit(1e-6), T::lit(1e-3)])
        .find(|&y| !(f(T::zero(), y) > T::zero()))
        .map(|y| format!("f0(0, {y}) = {}", f(T::zero(), y)));
    report.push("f0.positive_at_zero", positive);
}

fn log_grid<T: Real>(lo_exp: i32, hi_exp: i32, per_decade: usize) -> Vec<T> {
    let steps = (hi_exp - lo_exp) as usize * per_decade;
    (0..=steps)
        .map(|i| T::lit(10f64.powf(lo_exp as f64 + i as f64 / per_decade as f64)))
        .collect()
}

fn check_u1<T: Real>(report: &mut HypothesisReport, p: &ModelParams<T>, u: &UtilityPair<T>) {
    let u1 = &u.u1;
    // derivative checks stop at c = 10 so thin exponential tails do not underflow
    let grid: Vec<T> = log_grid(-8, 1, 8);
    report.push(
        "u1.increasing",
        grid.iter()
            .find(|&&c| !(u1.deriv(c) > T::zero()))
            .map(|c| format!("U1'({c}) = {}", u1.deriv(*c))),
    );
    report.push(
        "u1.strictly_concave",
        grid.iter()
            .find(|&&c| !(u1.second_deriv(c) < T::zero()))
            .map(|c| format!("U1''({c}) = {}", u1.second_deriv(*c))),
    );
    // slope must keep growing as c ↓ 0 and exceed any fixed bound
    let small: Vec<T> = (1..=12).map(|k| T::lit(10f64.powi(-k))).collect();
    let growing = small.windows(2).all(|w| u1.deriv(w[1]) > u1.deriv(w[0]));
    let steep = u1.deriv(small[small.len() - 1]) > T::lit(1e4);
    report.push(
        "u1.infinite_slope_at_zero",
        (!(growing && steep)).then(|| {
            format!("U1'(1e-12) = {}", u1.deriv(small[small.len() - 1]))
        }),
    );
    let tiny = T::lit(1e-14);
    let cont_gap = (u1.value(tiny) - u1.value(T::zero())).abs();
    report.push(
        "u1.continuous_at_zero",
        (cont_gap > T::lit(1e-4)).then(|| format!("|U1(1e-14) - U1(0)| = {cont_gap}")),
    );
    let grid: Vec<T> = log_grid(-8, 8, 8);
    let sampled_max = grid.iter().map(|&c| u1.value(c)).fold(T::neg_infinity(), T::max);
    let far = u1.value(T::lit(1e12));
    let bounded = sampled_max <= p.u1_sup + T::roundoff() && (p.u1_sup - far).abs() <= T::lit(1e-3);
    report.push(
        "u1.bounded_with_declared_sup",
        (!bounded).then(|| format!("declared sup {}, U1(1e12) = {far}, sampled max {sampled_max}", p.u1_sup)),
    );
}

fn check_u2<T: Real>(report: &mut HypothesisReport, p: &ModelParams<T>, u: &UtilityPair<T>) {
    let u2 = &u.u2;
    let grid: Vec<T> = log_grid(-6, 6, 8);
    let vals: Vec<T> = grid.iter().map(|&x| u2.value(x)).collect();
    let strict = !u2.is_zero();
    report.push(
        "u2.increasing",
        vals.windows(2)
            .zip(&grid)
            .find(|(w, _)| if strict { w[1] <= w[0] } else { w[1] < w[0] })
            .map(|(w, x)| format!("U2 not increasing after x = {x}: {} -> {}", w[0], w[1])),
    );
    report.push(
        "u2.concave",
        grid.windows(2)
            .find(|w| {
                let m = T::lit(0.5) * (w[0] + w[1]);
                let avg = T::lit(0.5) * (u2.value(w[0]) + u2.value(w[1]));
                u2.value(m) < avg - T::lit(1e-12) * T::one().max(avg.abs())
            })
            .map(|w| format!("midpoint inequality fails on [{}, {}]", w[0], w[1])),
    );
    let sup = u2.sup();
    let bounded = sup.is_finite() && vals.iter().all(|&v| v <= sup + T::roundoff());
    report.push(
        "u2.bounded_above",
        (!bounded).then(|| format!("sup U2 = {sup}")),
    );
    report.push(
        "model.u2_sup_matches",
        (sup.is_finite() && (sup - p.u2_sup).abs() > T::lit(1e-9))
            .then(|| format!("declared {} vs {sup}", p.u2_sup)),
    );
    // ∫ e^{-ρt} U₂(e^{-C t}) dt, the lower tail used by the value brackets
    let tail = u2.decay_tail_integral(T::one(), p.rho, p.c_f0);
    report.push(
        "u2.discounted_integrability",
        (!tail.is_finite()).then(|| format!("tail integral = {tail}")),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::{make_kernel, KernelFamily};
    use crate::model::utility::{ConsumptionUtility, StateUtility};

    fn defaults() -> (ModelParams<f64>, Nonlinearity<f64>, Kernel<f64>, UtilityPair<f64>) {
        let p = ModelParams::new(0.05, 1.0, 0.5, 0.4, 1.0, 0.0).unwrap();
        let nl = Nonlinearity::affine(0.1, 0.4, 10.0, 0.05);
        let k = make_kernel(KernelFamily::LinearRamp, &[1.0], 1.0, 100).unwrap();
        (p, nl, k, UtilityPair::default())
    }

    #[test]
    fn defaults_pass() {
        let (p, nl, k, u) = defaults();
        let r = validate_hypotheses(&p, &nl, &k, &u);
        assert!(r.all_pass(), "{r}");
    }

    #[test]
    fn convex_f0_fails_concavity_with_witness() {
        let (p, _, k, u) = defaults();
        let nl = Nonlinearity::custom(|x: f64, _y| x * x);
        let r = validate_hypotheses(&p, &nl, &k, &u);
        let c = r.get("f0.jointly_concave").unwrap();
        assert!(!c.pass);
        assert!(c.witness.as_deref().unwrap().contains("f0(mid)"));
    }

    #[test]
    fn constant_kernel_fails_endpoint_condition() {
        let (p, nl, _, u) = defaults();
        let k = Kernel::constant(1.0, 1.0, 100);
        let r = validate_hypotheses(&p, &nl, &k, &u);
        assert!(!r.get("kernel.vanishes_at_minus_T").unwrap().pass);
        assert!(r.get("kernel.nonnegative").unwrap().pass);
    }

    #[test]
    fn finite_slope_utility_fails_inada() {
        let (p, nl, k, _) = defaults();
        let u = UtilityPair::new(ConsumptionUtility::Exponential { k: 2.0 }, StateUtility::Zero);
        let r = validate_hypotheses(&p, &nl, &k, &u);
        assert!(!r.get("u1.infinite_slope_at_zero").unwrap().pass);
        assert!(r.get("u1.increasing").unwrap().pass);
    }

    #[test]
    fn state_utility_checks() {
        let (p, nl, k, _) = defaults();
        let ok = UtilityPair::new(
            ConsumptionUtility::default(),
            StateUtility::NegPower { weight: 0.1, beta: 1.0 },
        );
        assert!(validate_hypotheses(&p, &nl, &k, &ok).all_pass());
        // β C_f0 = 0.8 > ρ = 0.5 breaks integrability
        let bad = UtilityPair::new(
            ConsumptionUtility::default(),
            StateUtility::NegPower { weight: 0.1, beta: 2.0 },
        );
        let r = validate_hypotheses(&p, &nl, &k, &bad);
        assert!(!r.get("u2.discounted_integrability").unwrap().pass);
        let log = UtilityPair::new(ConsumptionUtility::default(), StateUtility::Log);
        let r = validate_hypotheses(&p, &nl, &k, &log);
        assert!(!r.get("u2.bounded_above").unwrap().pass);
        assert!(r.get("u2.discounted_integrability").unwrap().pass);
    }

    #[test]
    fn understated_lipschitz_constant_fails() {
        let (mut p, nl, k, u) = defaults();
        p.c_f0 = 0.1;
        let r = validate_hypotheses(&p, &nl, &k, &u);
        assert!(!r.get("f0.lipschitz").unwrap().pass);
    }
}
