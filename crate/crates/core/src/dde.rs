//! Heun integration of the delay state equation
//! `x'(t) = r x(t) + f₀(x(t), ∫ a(ξ) x(t+ξ) dξ) - c(t)` with initial history `η`.

use crate::error::{Error, Result};
use crate::model::nonlinearity::eval_f0;
use crate::model::params::ModelParams;
use crate::model::Model;
use crate::quadrature;
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;

/// First path value at or below this counts as a positivity violation.
pub const POS_EPS: f64 = 1e-12;
/// Default simulation step.
pub const DEFAULT_DT: f64 = 1e-3;

const ALIGN_TOL: f64 = 1e-9;

/// Piecewise-constant consumption: `values[i]` on `[i·dt, (i+1)·dt)`, zero afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath<T> {
    pub dt: T,
    pub values: Vec<T>,
}

impl<T: Real> ControlPath<T> {
    pub fn new(dt: T, values: Vec<T>) -> Result<Self> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidParameter(format!("control segment length must be positive, got {dt}")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("consumption must be finite and nonnegative, got {v}")));
        }
        Ok(Self { dt, values })
    }

    /// `c ≡ 0`.
    pub fn zero() -> Self {
        Self {
            dt: T::one(),
            values: Vec::new(),
        }
    }

    pub fn constant(value: T, dt: T, segments: usize) -> Result<Self> {
        Self::new(dt, vec![value; segments])
    }

    pub fn horizon(&self) -> T {
        self.dt * T::from_usize_lossy(self.values.len())
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        let i = (t / self.dt).floor().to_usize().unwrap_or(usize::MAX);
        self.values.get(i).copied().unwrap_or_else(T::zero)
    }

    /// Whether `c` vanishes on `[t, ∞)`.
    pub fn is_zero_after(&self, t: T) -> bool {
        let first = (t / self.dt).floor().to_usize().unwrap_or(0);
        self.values.iter().skip(first).all(|v| *v == T::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// The path restricted to `[0, horizon)` and zero afterwards.
    pub fn truncated(&self, horizon: T) -> Self {
        let keep = integer_ratio(horizon, self.dt, ALIGN_TOL)
            .unwrap_or_else(|| (horizon / self.dt).ceil().to_usize().unwrap_or(0));
        Self {
            dt: self.dt,
            values: self.values.iter().copied().take(keep).collect(),
        }
    }

    /// `c + δ` on the stored segments.
    pub fn shifted(&self, delta: T) -> Result<Self> {
        Self::new(self.dt, self.values.iter().map(|&v| v + delta).collect())
    }

    /// `λ self + (1 - λ) other` on a common segment grid.
    pub fn blend(&self, lambda: T, other: &Self) -> Result<Self> {
        if (self.dt - other.dt).abs() > T::roundoff() * self.dt {
            return Err(Error::StepMismatch {
                dt: self.dt.as_f64(),
                what: "other control segment",
                other: other.dt.as_f64(),
            });
        }
        let m = self.values.len().max(other.values.len());
        let at = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero);
        Self::new(
            self.dt,
            (0..m)
                .map(|i| (lambda * at(&self.values, i) + (T::one() - lambda) * at(&other.values, i)).max(T::zero()))
                .collect(),
        )
    }

    /// Number of simulation steps per control segment.
    fn steps_per_segment(&self, dt: T) -> Result<usize> {
        if self.values.is_empty() {
            return Ok(usize::MAX);
        }
        match integer_ratio(self.dt, dt, ALIGN_TOL) {
            Some(m) if m >= 1 => Ok(m),
            _ => Err(Error::StepMismatch {
                dt: dt.as_f64(),
                what: "control segment length",
                other: self.dt.as_f64(),
            }),
        }
    }
}

/// A simulated path. Rows `0..history_len` hold the initial history at negative
/// times; the path proper starts at row `history_len` with `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub x: Vec<T>,
    /// Consumption applied on `[t_i, t_{i+1})`; zero on history rows and the last row.
    pub c: Vec<T>,
    /// First time with `x ≤ POS_EPS`; `None` stands for `+∞` on the computed horizon.
    pub admissible_until: Option<T>,
    /// `∫₀^{min(h, admissible_until)} e^{-ρt}(U₁(c) + U₂(x)) dt`.
    pub j_partial: T,
    pub dt: T,
    pub dxi: T,
    pub history_len: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn path(&self) -> &[T] {
        &self.x[self.history_len..]
    }

    pub fn path_times(&self) -> &[T] {
        &self.times[self.history_len..]
    }

    pub fn horizon(&self) -> T {
        *self.times.last().expect("nonempty trajectory")
    }

    pub fn steps(&self) -> usize {
        self.x.len() - self.history_len - 1
    }

    pub fn is_admissible(&self) -> bool {
        self.admissible_until.is_none()
    }

    /// `10 (dt + dxi) max(1, max |x|)`.
    pub fn grid_tol(&self) -> T {
        let scale = self.x.iter().fold(T::one(), |m, v| m.max(v.abs()));
        T::lit(10.0) * (self.dt + self.dxi) * scale
    }

    /// Linear interpolation of the path (history included) at `t ∈ [-T, h]`.
    pub fn x_at(&self, t: T) -> T {
        quadrature::interpolate(&self.x, self.times[0], self.dt, t)
    }

    /// The segment `ξ ↦ x(t + ξ)` sampled on an `n`-interval grid over `[-T, 0]`, with
    /// present `x(t)`.
    pub fn segment_at(&self, t: T, n: usize) -> HState<T> {
        let delay = -self.times[0];
        HState::from_fn(self.x_at(t), delay, n, |s| self.x_at(t + s))
    }

    /// Minimum of `x` over the trailing window `[h - T, h]`.
    pub fn trailing_min(&self) -> T {
        self.x[self.x.len() - self.history_len - 1..]
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }
}

/// Resumable integrator. Control is applied step by step; [`Stepper::truncate`] rolls
/// back so a changed control tail can be re-simulated without redoing the prefix.
#[derive(Debug, Clone)]
pub struct Stepper<'m, T> {
    model: &'m Model<T>,
    dt: T,
    /// `dxi / dt`.
    k: usize,
    hist: usize,
    /// Trapezoid weight times kernel sample, `w_j a_j`.
    weights: Vec<T>,
    xs: Vec<T>,
    cs: Vec<T>,
    jcum: Vec<T>,
    violation: Option<usize>,
    disc_step: T,
}

impl<'m, T: Real> Stepper<'m, T> {
    pub fn new(model: &'m Model<T>, eta: &HState<T>, dt: T) -> Result<Self> {
        model.check_state(eta)?;
        if !eta.in_h_plus() {
            return Err(Error::NotInHPlus(eta.eta0.as_f64()));
        }
        let dxi = model.dxi();
        if !(dt > T::zero()) || dt > dxi * (T::one() + T::lit(ALIGN_TOL)) {
            return Err(Error::StepMismatch {
                dt: dt.as_f64(),
                what: "delay grid spacing (need 0 < dt <= dxi)",
                other: dxi.as_f64(),
            });
        }
        let k = integer_ratio(dxi, dt, ALIGN_TOL).ok_or(Error::StepMismatch {
            dt: dt.as_f64(),
            what: "delay grid spacing (need dxi / dt integer)",
            other: dxi.as_f64(),
        })?;
        let n = model.n();
        let hist = n * k;
        let kf = T::from_usize_lossy(k);
        let mut xs = Vec::with_capacity(hist + 1);
        for i in 0..hist {
            let (j, rem) = (i / k, i % k);
            let frac = T::from_usize_lossy(rem) / kf;
            xs.push(eta.eta1[j] + frac * (eta.eta1[j + 1] - eta.eta1[j]));
        }
        xs.push(eta.eta0);
        let weights = quadrature::trapezoid_weights(n + 1, dxi)
            .into_iter()
            .zip(&model.kernel.samples)
            .map(|(w, &a)| w * a)
            .collect();
        let rho = model.params.rho;
        let violation = (eta.eta0 <= T::lit(POS_EPS)).then_some(0);
        Ok(Self {
            model,
            dt,
            k,
            hist,
            weights,
            xs,
            cs: Vec::new(),
            jcum: vec![T::zero()],
            violation,
            disc_step: (T::one() - (-rho * dt).exp()) / rho,
        })
    }

    pub fn steps(&self) -> usize {
        self.xs.len() - self.hist - 1
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn current(&self) -> T {
        *self.xs.last().expect("nonempty")
    }

    pub fn violation_step(&self) -> Option<usize> {
        self.violation
    }

    /// Running payoff up to the current step.
    pub fn payoff(&self) -> T {
        *self.jcum.last().expect("nonempty")
    }

    /// Minimum of the path and its history over the last `T` time units.
    pub fn trailing_min(&self) -> T {
        self.xs[self.xs.len() - self.hist - 1..]
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }

    /// `Σ_{j<N} w_j a_j x(t + ξ_j)` for the time at buffer index `p`.
    fn history_sum(&self, p: usize) -> T {
        let n = self.weights.len() - 1;
        (0..n)
            .map(|j| self.weights[j] * self.xs[p - (n - j) * self.k])
            .sum()
    }

    /// One Heun step with consumption `c` held constant over it.
    pub fn step(&mut self, c: T) {
        let params = &self.model.params;
        let nl = &self.model.nl;
        let w_last = *self.weights.last().expect("kernel weights");
        let n = self.steps();
        let p = self.hist + n;
        let x = self.xs[p];
        let drift = |x: T, q: T| params.r * x + eval_f0(nl, x, q) - c;

        let g0 = drift(x, self.history_sum(p) + w_last * x);
        let pred = x + self.dt * g0;
        // the window one step ahead reaches back only to already computed values
        self.xs.push(pred);
        let g1 = drift(pred, self.history_sum(p + 1) + w_last * pred);
        let next = x + self.dt * T::lit(0.5) * (g0 + g1);
        self.xs[p + 1] = next;
        self.cs.push(c);

        let u = &self.model.utilities;
        let mut flow = u.u1.value(c);
        if !u.u2.is_zero() {
            flow = flow + T::lit(0.5) * (u.u2.value(x) + u.u2.value(next));
        }
        let disc = (-params.rho * self.dt * T::from_usize_lossy(n)).exp() * self.disc_step;
        let j = self.payoff() + disc * flow;
        self.jcum.push(j);
        if self.violation.is_none() && next <= T::lit(POS_EPS) {
            self.violation = Some(n + 1);
        }
    }

    /// Advances to `until` steps under `control`.
    pub fn advance(&mut self, control: &ControlPath<T>, until: usize) -> Result<()> {
        let m = control.steps_per_segment(self.dt)?;
        for n in self.steps()..until {
            let c = control.values.get(n / m).copied().unwrap_or_else(T::zero);
            self.step(c);
        }
        Ok(())
    }

    /// Rolls back to the state after `steps` steps.
    pub fn truncate(&mut self, steps: usize) {
        if steps >= self.steps() {
            return;
        }
        self.xs.truncate(self.hist + steps + 1);
        self.cs.truncate(steps);
        self.jcum.truncate(steps + 1);
        if self.violation.is_some_and(|v| v > steps) {
            self.violation = None;
        }
    }

    /// The current lifted state `(x(t), x(t+·))` on the kernel grid.
    pub fn lifted_state(&self) -> HState<T> {
        let end = self.xs.len() - 1;
        let n = self.model.n();
        let eta1 = (0..=n).map(|j| self.xs[end - (n - j) * self.k]).collect();
        HState {
            eta0: self.xs[end],
            eta1,
            dxi: self.model.dxi(),
        }
    }

    pub fn to_trajectory(&self) -> Trajectory<T> {
        let dt = self.dt;
        let hist = self.hist as isize;
        let times = (0..self.xs.len())
            .map(|i| {
                let off = i as isize - hist;
                let t = dt * T::from_usize_lossy(off.unsigned_abs());
                if off < 0 {
                    -t
                } else {
                    t
                }
            })
            .collect();
        let mut c = vec![T::zero(); self.xs.len()];
        c[self.hist..self.hist + self.cs.len()].copy_from_slice(&self.cs);
        Trajectory {
            times,
            x: self.xs.clone(),
            c,
            admissible_until: self.violation.map(|v| dt * T::from_usize_lossy(v)),
            j_partial: self.payoff(),
            dt,
            dxi: self.model.dxi(),
            history_len: self.hist,
        }
    }
}

/// Number of `dt` steps in `horizon`, which must be a positive multiple of `dt`.
pub fn step_count<T: Real>(horizon: T, dt: T) -> Result<usize> {
    if !(horizon > T::zero()) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    match integer_ratio(horizon, dt, ALIGN_TOL) {
        Some(s) if s > 0 => Ok(s),
        _ => Err(Error::StepMismatch {
            dt: dt.as_f64(),
            what: "horizon",
            other: horizon.as_f64(),
        }),
    }
}

/// Integrates the state equation on `[0, horizon]` with step `dt`.
///
/// `dt` must divide both the delay grid spacing and the control segment length. The
/// run continues past a positivity violation (using the `x < 0` extension of `f₀`) so
/// the full path is available; the violation time is recorded.
pub fn integrate<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    let steps = step_count(horizon, dt)?;
    let mut stepper = Stepper::new(model, eta, dt)?;
    stepper.advance(control, steps)?;
    Ok(stepper.to_trajectory())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict<T> {
    /// `None` for no violation on the computed horizon.
    pub admissible_until: Option<T>,
    /// Positivity holds for all `t ≥ 0`: no violation on `[0, h]`, consumption vanishes
    /// after `h`, and the state at `h` lies in `H₊₊`, so the null continuation stays
    /// above `x(h) e^{-C_f0 (t-h)}`.
    pub certified_forever: bool,
}

pub fn check_admissible<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<Verdict<T>> {
    let traj = integrate(model, eta, control, horizon, dt)?;
    Ok(verdict_of(&traj, control))
}

pub fn verdict_of<T: Real>(traj: &Trajectory<T>, control: &ControlPath<T>) -> Verdict<T> {
    let end = *traj.x.last().expect("nonempty");
    let certified_forever = traj.is_admissible()
        && end > T::lit(POS_EPS)
        && traj.trailing_min() >= T::zero()
        && control.is_zero_after(traj.horizon());
    Verdict {
        admissible_until: traj.admissible_until,
        certified_forever,
    }
}

/// Null-control verdict over `[0, T]`; `η ∈ D(V)` iff it is admissible there.
pub fn domain_verdict<T: Real>(model: &Model<T>, eta: &HState<T>, dt: T) -> Result<Verdict<T>> {
    check_admissible(model, eta, &ControlPath::zero(), model.delay(), dt)
}

/// `η ∈ D(V)`: the null-control path stays positive on `[0, T]`, after which its
/// segment lies in `H₊₊` and positivity persists.
pub fn domain_membership<T: Real>(model: &Model<T>, eta: &HState<T>, dt: T) -> Result<bool> {
    Ok(domain_verdict(model, eta, dt)?.certified_forever)
}

/// Largest excess `sub - x(·; η, c)` over all rows, and the tolerance it is judged
/// against.
pub fn comparison_gap<T: Real>(
    model: &Model<T>,
    sub: &Trajectory<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
) -> Result<(T, T)> {
    let reference = integrate(model, eta, control, sub.horizon(), sub.dt)?;
    if reference.x.len() != sub.x.len() || reference.history_len != sub.history_len {
        return Err(Error::GridMismatch {
            expected: reference.x.len(),
            found: sub.x.len(),
            expected_dxi: reference.dt.as_f64(),
            found_dxi: sub.dt.as_f64(),
        });
    }
    let gap = sub
        .x
        .iter()
        .zip(&reference.x)
        .map(|(&s, &x)| s - x)
        .fold(T::neg_infinity(), T::max);
    Ok((gap, reference.grid_tol().max(sub.grid_tol())))
}

/// `sub ≤ x(·; η, c)` pointwise within `grid_tol`.
pub fn comparison_check<T: Real>(
    model: &Model<T>,
    sub: &Trajectory<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
) -> Result<bool> {
    let (gap, tol) = comparison_gap(model, sub, eta, control)?;
    Ok(gap <= tol)
}

/// `η₀ e^{-C_f0 t}`, the null-control lower bound on `H₊₊`.
pub fn hpp_lower_bound<T: Real>(params: &ModelParams<T>, eta: &HState<T>, t: T) -> Result<T> {
    if !eta.in_h_plus_plus() {
        return Err(Error::NotInHPlusPlus {
            eta0: eta.eta0.as_f64(),
            min_past: eta.min_past().as_f64(),
        });
    }
    if t < T::zero() {
        return Err(Error::TimeOutOfRange {
            t: t.as_f64(),
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(eta.eta0 * (-params.c_f0 * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kernel::{make_kernel, KernelFamily};
    use crate::model::nonlinearity::Nonlinearity;
    use crate::model::utility::UtilityPair;
    use approx::assert_relative_eq;

    fn linear_model(r: f64, nl: Nonlinearity<f64>, n: usize) -> Model<f64> {
        let params = ModelParams {
            r,
            delay: 1.0,
            rho: 0.5,
            c_f0: 1.0,
            u1_sup: 1.0,
            u2_sup: 0.0,
        };
        let k = make_kernel(KernelFamily::LinearRamp, &[1.0], 1.0, n).unwrap();
        Model::new_unchecked(params, k, nl, UtilityPair::default())
    }

    #[test]
    fn zero_drift_keeps_state() {
        let m = linear_model(0.0, Nonlinearity::zero(), 20);
        let eta = HState::constant(2.0, 2.0, 1.0, 20);
        let tr = integrate(&m, &eta, &ControlPath::zero(), 1.0, 0.01).unwrap();
        assert!(tr.path().iter().all(|&x| x == 2.0));
        assert!(tr.is_admissible());
    }

    #[test]
    fn linear_growth_matches_exponential() {
        let m = linear_model(0.1, Nonlinearity::zero(), 100);
        let eta = HState::constant(1.0, 1.0, 1.0, 100);
        let tr = integrate(&m, &eta, &ControlPath::zero(), 1.0, 1e-3).unwrap();
        for (t, x) in tr.path_times().iter().zip(tr.path()) {
            assert!((x - (0.1 * t).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn history_rows_and_times() {
        let m = linear_model(0.1, Nonlinearity::zero(), 10);
        let eta = HState::from_fn(1.0, 1.0, 10, |s| 1.0 + s);
        let tr = integrate(&m, &eta, &ControlPath::zero(), 0.5, 0.05).unwrap();
        assert_eq!(tr.history_len, 20);
        assert_relative_eq!(tr.times[0], -1.0);
        assert_eq!(tr.times[20], 0.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        // interpolated history at -0.95 lies on the line 1 + s
        assert_relative_eq!(tr.x[1], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn rejects_misaligned_steps() {
        let m = linear_model(0.1, Nonlinearity::zero(), 10);
        let eta = HState::constant(1.0, 1.0, 1.0, 10);
        assert!(integrate(&m, &eta, &ControlPath::zero(), 1.0, 0.03).is_err());
        assert!(integrate(&m, &eta, &ControlPath::zero(), 1.0, 0.2).is_err());
        assert!(integrate(&m, &eta, &ControlPath::zero(), 0.0, 0.05).is_err());
        let c = ControlPath::constant(1.0, 0.125, 4).unwrap();
        assert!(integrate(&m, &eta, &c, 0.5, 0.05).is_err());
        let neg = HState::constant(-1.0, 1.0, 1.0, 10);
        assert!(matches!(
            integrate(&m, &neg, &ControlPath::zero(), 1.0, 0.05),
            Err(Error::NotInHPlus(_))
        ));
    }

    #[test]
    fn truncate_and_resume_reproduces_run() {
        let m = Model::<f64>::default_with_resolution(20);
        let eta = HState::constant(1.0, 0.5, 1.0, 20);
        let a = ControlPath::new(0.5, vec![0.2, 0.4, 0.1, 0.0]).unwrap();
        let b = ControlPath::new(0.5, vec![0.2, 0.4, 0.3, 0.6]).unwrap();
        let mut s = Stepper::new(&m, &eta, 0.05).unwrap();
        s.advance(&a, 40).unwrap();
        s.truncate(20);
        s.advance(&b, 40).unwrap();
        let direct = integrate(&m, &eta, &b, 2.0, 0.05).unwrap();
        assert_eq!(s.to_trajectory(), direct);
    }

    #[test]
    fn constant_consumption_payoff_is_exact() {
        let m = Model::<f64>::default_with_resolution(20);
        let eta = HState::constant(5.0, 5.0, 1.0, 20);
        let k = 0.3;
        let c = ControlPath::constant(k, 0.5, 8).unwrap();
        let tr = integrate(&m, &eta, &c, 4.0, 0.05).unwrap();
        let expect = m.utilities.u1.value(k) * (1.0 - (-0.5f64 * 4.0).exp()) / 0.5;
        assert_relative_eq!(tr.j_partial, expect, max_relative = 1e-12);
    }

    #[test]
    fn lower_bound_formula() {
        let p = ModelParams::new(0.1, 1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        let eta = HState::constant(1.0, 0.0, 1.0, 10);
        assert_eq!(hpp_lower_bound(&p, &eta, 0.0).unwrap(), 1.0);
        assert_relative_eq!(hpp_lower_bound(&p, &eta, 2.0).unwrap(), 0.367879441171, epsilon = 1e-12);
        let p0 = ModelParams { c_f0: 0.0, ..p };
        assert_eq!(hpp_lower_bound(&p0, &eta, 7.0).unwrap(), 1.0);
        let bad = HState::constant(1.0, -0.1, 1.0, 10);
        assert!(hpp_lower_bound(&p, &bad, 1.0).is_err());
    }
}
