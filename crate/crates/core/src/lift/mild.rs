//! Variation-of-constants stepping of `X' = AX + F(X) - c n̂` in `H`.

use crate::dde::{integrate, step_count, ControlPath, Trajectory, POS_EPS};
use crate::error::{Error, Result};
use crate::lift::{h_norm, lip_a_constant, norm_minus1};
use crate::model::Model;
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;

/// The lifted path `t ↦ X(t)` on the kernel grid, one state per step.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<HState<T>>,
    pub admissible_until: Option<T>,
    pub dt: T,
}

impl<T: Real> LiftedTrajectory<T> {
    pub fn present(&self) -> Vec<T> {
        self.states.iter().map(|s| s.eta0).collect()
    }
}

/// `[S(t)η]₁` at the node `back` fine steps behind `ζ = 0` when `t + ζ < 0`: the
/// initial history, interpolated once on the `dt` grid.
fn initial_past<T: Real>(eta: &HState<T>, k: usize, back: usize) -> T {
    let i = eta.n() * k - back;
    let (j, rem) = (i / k, i % k);
    if rem == 0 {
        return eta.eta1[j];
    }
    let frac = T::from_usize_lossy(rem) / T::from_usize_lossy(k);
    eta.eta1[j] + frac * (eta.eta1[j + 1] - eta.eta1[j])
}

/// `X(t) = S(t)η + ∫₀ᵗ S(t - τ)[F(X(τ)) - c n̂] dτ` on a `dt` grid.
///
/// The past of `S(t)η` is read from `η` directly, never from the previous step, so
/// interpolation does not compound. For `t + ζ ≥ 0` both terms together reduce to the
/// present at time `t + ζ`, which is already on the record. The present advances by
/// `e^{r dt}` with the forcing integrated by the trapezoid rule after one predictor pass.
pub fn integrate_mild<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<LiftedTrajectory<T>> {
    model.check_state(eta)?;
    if !eta.in_h_plus() {
        return Err(Error::NotInHPlus(eta.eta0.as_f64()));
    }
    let steps = step_count(horizon, dt)?;
    let dxi = model.dxi();
    let k = match integer_ratio(dxi, dt, 1e-9) {
        Some(k) if k > 0 => k,
        _ => {
            return Err(Error::StepMismatch {
                dt: dt.as_f64(),
                what: "delay grid spacing (need dxi / dt integer)",
                other: dxi.as_f64(),
            })
        }
    };
    if !control.values.is_empty() && integer_ratio(control.dt, dt, 1e-9).is_none() {
        return Err(Error::StepMismatch {
            dt: dt.as_f64(),
            what: "control segment length",
            other: control.dt.as_f64(),
        });
    }
    let r = model.params.r;
    let growth = (r * dt).exp();
    let half = T::lit(0.5);
    let n = model.n();

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut present = Vec::with_capacity(steps + 1);
    let mut admissible_until = None;
    times.push(T::zero());
    states.push(eta.clone());
    present.push(eta.eta0);
    for step in 0..steps {
        let t = dt * T::from_usize_lossy(step);
        // sample mid-step so segment boundaries never round the wrong way
        let c = control.value_at(t + half * dt);
        let x = &states[step];
        let g0 = model.drift(x)? - c;
        let next = step + 1;
        let eta1 = (0..=n)
            .map(|j| {
                let back = (n - j) * k;
                if back <= next {
                    // node n is overwritten below
                    present[(next - back).min(step)]
                } else {
                    initial_past(eta, k, back - next)
                }
            })
            .collect();
        let mut y = HState { eta0: T::zero(), eta1, dxi };
        let base = x.eta0 * growth;
        y.eta0 = base + dt * growth * g0;
        y.eta1[n] = y.eta0;
        let g1 = model.drift(&y)? - c;
        y.eta0 = base + half * dt * (growth * g0 + g1);
        y.eta1[n] = y.eta0;
        if admissible_until.is_none() && y.eta0 <= T::lit(POS_EPS) {
            admissible_until = Some(t + dt);
        }
        present.push(y.eta0);
        times.push(t + dt);
        states.push(y);
    }
    Ok(LiftedTrajectory {
        times,
        states,
        admissible_until,
        dt,
    })
}

/// Lifted and delay-equation runs on the same steps, with the `H`-distance between
/// `X(t)` and `(x(t), x(t+·))` at every step.
#[derive(Debug, Clone)]
pub struct EquivalenceProfile<T> {
    pub lifted: LiftedTrajectory<T>,
    pub path: Trajectory<T>,
    pub distance: Vec<T>,
}

impl<T: Real> EquivalenceProfile<T> {
    pub fn sup(&self) -> T {
        self.distance.iter().copied().fold(T::zero(), T::max)
    }

    /// `x(t)` of the delay-equation run at lifted step `step`.
    pub fn dde_present(&self, step: usize) -> T {
        self.path.x[self.path.history_len + step]
    }
}

pub fn equivalence_profile<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<EquivalenceProfile<T>> {
    let lifted = integrate_mild(model, eta, control, horizon, dt)?;
    let path = integrate(model, eta, control, horizon, dt)?;
    let k = integer_ratio(model.dxi(), dt, 1e-9).expect("checked by integrate");
    let n = model.n();
    let distance = lifted
        .states
        .iter()
        .enumerate()
        .map(|(step, state)| {
            if step == 0 {
                // the segment at t = 0 is η itself; reading the node ξ = 0 off the path
                // would put η₀ there, a point of measure zero that trapezoid weights count
                return T::zero();
            }
            let end = path.history_len + step;
            let segment = HState {
                eta0: path.x[end],
                eta1: (0..=n).map(|j| path.x[end - (n - j) * k]).collect(),
                dxi: model.dxi(),
            };
            h_norm(&state.sub(&segment))
        })
        .collect();
    Ok(EquivalenceProfile { lifted, path, distance })
}

/// `sup_t ‖X(t) - (x(t), x(t+·))‖` together with the delay-equation trajectory.
pub fn equivalence_error<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<(T, Trajectory<T>)> {
    let p = equivalence_profile(model, eta, control, horizon, dt)?;
    Ok((p.sup(), p.path))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallResult<T> {
    /// `max_{t ≤ T} ‖X(t) - X̄(t)‖₋₁ / ‖η - η̄‖₋₁`.
    pub ratio: T,
    /// `max_{t ≤ T} |X₀(t) - X̄₀(t)| / (r ‖η - η̄‖₋₁)`, bounded by the same constant.
    pub present_ratio: T,
    /// `K e^{KT}`.
    pub bound: T,
}

/// `K = √(3+2T) e^{rT} max(1, C_f0 C_a √(1+T) / r)`.
///
/// On `[0,T]`, `‖S(t)‖ ≤ √(3+2T) e^{rT}`, `‖A⁻¹(δ, 0)‖ = |δ|√(1+T)/r` and
/// `|f(η) - f(η̄)| ≤ C_f0 C_a ‖η - η̄‖₋₁`; Gronwall then gives `K e^{Kt}`.
pub fn gronwall_constant<T: Real>(model: &Model<T>) -> Result<T> {
    let p = &model.params;
    let ca = lip_a_constant(p.r, &model.kernel)?;
    let semigroup = (T::lit(3.0) + T::lit(2.0) * p.delay).sqrt() * (p.r * p.delay).exp();
    let forcing = p.c_f0 * ca * (T::one() + p.delay).sqrt() / p.r;
    Ok(semigroup * forcing.max(T::one()))
}

/// Runs both null-control lifted trajectories on `[0, T]` and measures the growth of
/// their `‖·‖₋₁` distance.
pub fn gronwall_stability<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    eta_bar: &HState<T>,
    dt: T,
) -> Result<GronwallResult<T>> {
    let r = model.params.r;
    let d0 = norm_minus1(r, &eta.sub(eta_bar));
    if !(d0 > T::zero()) {
        return Err(Error::Degenerate("initial states coincide in the -1 norm".into()));
    }
    let zero = ControlPath::zero();
    let delay = model.delay();
    let a = integrate_mild(model, eta, &zero, delay, dt)?;
    let b = integrate_mild(model, eta_bar, &zero, delay, dt)?;
    let mut ratio = T::zero();
    let mut present_ratio = T::zero();
    for (x, y) in a.states.iter().zip(&b.states) {
        ratio = ratio.max(norm_minus1(r, &x.sub(y)) / d0);
        present_ratio = present_ratio.max((x.eta0 - y.eta0).abs() / (r * d0));
    }
    let k = gronwall_constant(model)?;
    Ok(GronwallResult {
        ratio,
        present_ratio,
        bound: k * (k * delay).exp(),
    })
}
