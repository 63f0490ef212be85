//! Dynamic-programming and HJB residuals, and probes of the qualitative properties of
//! `V` (concavity, monotonicity, continuity of `V_η₀`).
//!
//! Probes talk to a [`ValueOracle`] so that planted fakes can check that each probe
//! is able to fail.

use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;

use crate::dde::{ControlPath, Stepper};
use crate::error::{Error, Result};
use crate::lift::{apply_astar, inner, norm_minus1};
use crate::report::{CheckRow, ProbeReport};
use crate::sampling::{random_hpp_state, seeded_rng, SmoothFn};
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;
use crate::value::{brent_max, default_stencil, hamiltonian, partial_v_eta0, GradientEstimate, ValueEstimate, ValueProblem};

/// Tolerances and sample counts of the probes, in one place.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOpts {
    pub seed: u64,
    /// Pairs for the concavity and monotonicity probes.
    pub pairs: usize,
    /// Relative gap allowed between successive `V_η₀` estimates.
    pub cont_tol: f64,
    /// Relative HJB residual allowed.
    pub hjb_tol: f64,
    /// Relative disagreement of the two stencil widths above which a gradient is unusable.
    pub stab_tol: f64,
    pub hjb_points: usize,
    /// Points re-evaluated under refinement.
    pub refine_points: usize,
    pub refine_factor: usize,
    /// Required drop of the residual under refinement.
    pub refine_decrease: f64,
    /// Terms of the convergent sequences in the regularity probe.
    pub sequence_len: usize,
}

impl Default for ProbeOpts {
    fn default() -> Self {
        Self {
            seed: 2011,
            pairs: 50,
            cont_tol: 5e-2,
            hjb_tol: 0.1,
            stab_tol: crate::value::STAB_TOL,
            hjb_points: 10,
            refine_points: 3,
            refine_factor: 4,
            refine_decrease: 1.5,
            sequence_len: 5,
        }
    }
}

/// Anything that returns bracketed values of `V` on the value grid.
pub trait ValueOracle<T: Real>: Sync {
    fn problem(&self) -> &ValueProblem<T>;

    fn value(&self, eta: &HState<T>, warm: Option<&ValueEstimate<T>>) -> Result<ValueEstimate<T>>;
}

impl<T: Real> ValueOracle<T> for ValueProblem<T> {
    fn problem(&self) -> &ValueProblem<T> {
        self
    }

    fn value(&self, eta: &HState<T>, warm: Option<&ValueEstimate<T>>) -> Result<ValueEstimate<T>> {
        self.solve(eta, warm)
    }
}

/// Closed-form fakes that break one property on purpose.
#[derive(Debug, Clone)]
pub enum Planted<T> {
    /// `η₀² + ∫η₁²`: convex, so the concavity probe must fail.
    Convex(ValueProblem<T>),
    /// `-η₀`: decreasing, so the monotonicity probe must fail.
    Decreasing(ValueProblem<T>),
}

impl<T: Real> ValueOracle<T> for Planted<T> {
    fn problem(&self) -> &ValueProblem<T> {
        match self {
            Planted::Convex(p) | Planted::Decreasing(p) => p,
        }
    }

    fn value(&self, eta: &HState<T>, _warm: Option<&ValueEstimate<T>>) -> Result<ValueEstimate<T>> {
        let prob = self.problem();
        let v = match self {
            Planted::Convex(_) => eta.eta0 * eta.eta0 + inner(&HState { eta0: T::zero(), ..eta.clone() }, eta),
            Planted::Decreasing(_) => -eta.eta0,
        };
        let mut est = ValueEstimate::outside(prob.horizon);
        est.v_lo = v;
        est.v_hi = v;
        est.estimate = v;
        Ok(est)
    }
}

/// A smooth random state in `H₊₊` on the value grid.
fn sample_state<T: Real>(prob: &ValueProblem<T>, rng: &mut impl Rng) -> HState<T> {
    random_hpp_state(rng, prob.model.delay(), prob.model.n())
}

/// A warm start made of a control and a multiplier.
fn warm<T: Real>(control: ControlPath<T>, mu: T, horizon: T) -> ValueEstimate<T> {
    let mut w = ValueEstimate::outside(horizon);
    w.v_lo = T::zero();
    w.control = control;
    w.shadow_price = mu;
    w
}

fn f(v: impl Real) -> f64 {
    v.as_f64()
}

/// `v_lo(λη + (1-λ)η̄) ≥ λ v_lo(η) + (1-λ) v_lo(η̄) - opt_gap` on random pairs, plus the
/// degenerate blends `λ ∈ {0, 1}`.
///
/// The blend is solved with the blended maximizers as a warm start, which is
/// admissible there by concavity of the state in `(η, c)`.
pub fn concavity_probe<T: Real, O: ValueOracle<T>>(oracle: &O, opts: &ProbeOpts) -> ProbeReport {
    let prob = oracle.problem();
    let mut rng = seeded_rng(opts.seed, 10);
    let mut cases: Vec<(HState<T>, HState<T>, T)> = (0..opts.pairs)
        .map(|_| {
            let a = sample_state(prob, &mut rng);
            let b = sample_state(prob, &mut rng);
            (a, b, T::lit(rng.gen_range(0.1..0.9)))
        })
        .collect();
    let a = sample_state(prob, &mut rng);
    let b = sample_state(prob, &mut rng);
    cases.push((a.clone(), b.clone(), T::one()));
    cases.push((a, b, T::zero()));

    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(k, (a, b, lambda))| {
            let lambda = *lambda;
            let check = if k < opts.pairs {
                "value.concavity"
            } else {
                "value.concavity_endpoint"
            };
            let input = format!("pair {k}, lambda {lambda}, eta0 {} / {}", a.eta0, b.eta0);
            let row = || -> Result<CheckRow> {
                let va = oracle.value(a, None)?;
                let vb = oracle.value(b, None)?;
                let mid = a.blend(lambda, b);
                let start = va
                    .control
                    .blend(lambda, &vb.control)
                    .unwrap_or_else(|_| va.control.clone());
                let mu = lambda * va.shadow_price + (T::one() - lambda) * vb.shadow_price;
                let vm = oracle.value(&mid, Some(&warm(start, mu, va.horizon)))?;
                let rhs = lambda * va.v_lo + (T::one() - lambda) * vb.v_lo;
                let floor = T::lit(1e-12) * rhs.abs().max(T::one());
                let tol = lambda * va.opt_gap + (T::one() - lambda) * vb.opt_gap + floor;
                Ok(if k < opts.pairs {
                    CheckRow::new(check, k, input.clone(), f(vm.v_lo), f(rhs), f((rhs - vm.v_lo).max(T::zero())), f(tol))
                } else {
                    // the endpoint is reproduced up to both gaps
                    let tol = tol + vm.opt_gap;
                    CheckRow::new(check, k, input.clone(), f(vm.v_lo), f(rhs), f((vm.v_lo - rhs).abs()), f(tol))
                })
            };
            row().unwrap_or_else(|e| CheckRow::failed(check, k, format!("{input}: {e}")))
        })
        .collect();
    ProbeReport::from_rows("value.concavity", rows)
}

/// `v_lo(η) ≤ v_hi(η + b)` for nonnegative bumps `b` (none, present, past, both), and
/// a strict increase beyond the brackets for large present bumps.
pub fn monotonicity_probe<T: Real, O: ValueOracle<T>>(oracle: &O, opts: &ProbeOpts) -> ProbeReport {
    let prob = oracle.problem();
    let mut rng = seeded_rng(opts.seed, 20);
    let delay = prob.model.delay();
    let labels = ["zero", "present", "past", "both"];
    let mut cases: Vec<(HState<T>, HState<T>, String)> = (0..opts.pairs)
        .map(|k| {
            let eta = sample_state(prob, &mut rng);
            let kind = k % 4;
            let present = if kind == 1 || kind == 3 { rng.gen_range(0.0..1.0) } else { 0.0 };
            let mut shape = SmoothFn::random(&mut rng, 0.5);
            shape.c0 = shape.oscillation();
            let bump = HState::from_fn(T::lit(present), delay, eta.n(), |s| {
                if kind >= 2 {
                    T::lit(shape.eval(s.as_f64(), delay.as_f64()).max(0.0))
                } else {
                    T::zero()
                }
            });
            let label = format!("sample {k}, {} bump, eta0 {}", labels[kind], eta.eta0);
            let up = eta.axpy(T::one(), &bump);
            (eta, up, label)
        })
        .collect();
    let strict = (opts.pairs / 5).max(1);
    for _ in 0..strict {
        let eta = sample_state(prob, &mut rng);
        let up = HState {
            eta0: eta.eta0 + T::lit(2.0),
            ..eta.clone()
        };
        let label = format!("eta0 {} -> {}", eta.eta0, up.eta0);
        cases.push((eta, up, label));
    }

    let rows = cases
        .par_iter()
        .enumerate()
        .map(|(k, (eta, up, input))| {
            let check = if k < opts.pairs {
                "value.monotonicity"
            } else {
                "value.strict_present"
            };
            let row = || -> Result<CheckRow> {
                let v = oracle.value(eta, None)?;
                let vu = oracle.value(up, Some(&v))?;
                Ok(if k < opts.pairs {
                    let tol = T::lit(1e-12) * v.v_lo.abs().max(T::one());
                    CheckRow::le(check, k, input.clone(), f(v.v_lo), f(vu.v_hi), f(tol))
                } else {
                    // strictly above the whole bracket of the lower point
                    CheckRow::new(check, k, input.clone(), f(vu.v_lo), f(v.v_hi), f((v.v_hi - vu.v_lo).max(T::zero())), 0.0)
                })
            };
            row().unwrap_or_else(|e| CheckRow::failed(check, k, format!("{input}: {e}")))
        })
        .collect();
    ProbeReport::from_rows("value.monotonicity", rows)
}

/// Wraps an oracle and keeps every upper bound it hands out, for the ceiling check.
pub struct Recording<'a, T, O> {
    inner: &'a O,
    seen: Mutex<Vec<(String, T)>>,
}

impl<'a, T: Real, O: ValueOracle<T>> Recording<'a, T, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    /// `v_hi ≤ (Ū₁ + Ū₂)/ρ` for every recorded evaluation, in a stable order.
    pub fn ceiling_report(&self) -> ProbeReport {
        let ceiling = self.inner.problem().ceiling();
        let mut seen = self.seen.lock().expect("recording lock").clone();
        seen.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)));
        let rows = seen
            .into_iter()
            .enumerate()
            .map(|(k, (input, v_hi))| {
                CheckRow::le("value.ceiling", k, input, f(v_hi), f(ceiling), f(T::lit(1e-12) * ceiling))
            })
            .collect();
        ProbeReport::from_rows("value.ceiling", rows)
    }
}

impl<T: Real, O: ValueOracle<T>> ValueOracle<T> for Recording<'_, T, O> {
    fn problem(&self) -> &ValueProblem<T> {
        self.inner.problem()
    }

    fn value(&self, eta: &HState<T>, warm: Option<&ValueEstimate<T>>) -> Result<ValueEstimate<T>> {
        let v = self.inner.value(eta, warm)?;
        if v.in_domain() {
            let past: T = eta.eta1.iter().copied().fold(T::zero(), |a, b| a + b);
            let key = format!("eta0 {:.17e}, past sum {:.17e}", eta.eta0.as_f64(), past.as_f64());
            self.seen.lock().expect("recording lock").push((key, v.v_hi));
        }
        Ok(v)
    }
}

/// `v_lo` along increasing `η₀` for a fixed past: it must climb to within `rel` of the
/// ceiling. One row per level, with only the last one judged.
pub fn large_present_scan<T: Real, O: ValueOracle<T>>(oracle: &O, past: &HState<T>, levels: &[T], rel: f64) -> ProbeReport {
    let ceiling = oracle.problem().ceiling();
    let estimates: Vec<Result<ValueEstimate<T>>> = levels
        .par_iter()
        .map(|&level| {
            oracle.value(
                &HState {
                    eta0: level,
                    ..past.clone()
                },
                None,
            )
        })
        .collect();
    let last = levels.len().saturating_sub(1);
    let rows = estimates
        .into_iter()
        .zip(levels)
        .enumerate()
        .map(|(k, (est, level))| match est {
            Ok(v) => {
                let gap = (ceiling - v.v_lo) / ceiling;
                let tol = if k == last { rel } else { f64::INFINITY };
                CheckRow::new("value.large_present", k, format!("eta0 {level}"), f(v.v_lo), f(ceiling), f(gap), tol)
            }
            Err(e) => CheckRow::failed("value.large_present", k, format!("eta0 {level}: {e}")),
        })
        .collect();
    ProbeReport::from_rows("value.large_present", rows)
}

/// Sequences `ηⁿ → η` for the regularity probe.
#[derive(Debug, Clone, PartialEq)]
pub enum Sequence<T> {
    /// `ηⁿ = η`.
    Constant,
    /// `η₀ + δ 2⁻ⁿ`.
    Present(T),
    /// `η₁ + 2⁻ⁿ b` with `b` a nonnegative past bump; `‖ηⁿ - η‖₋₁ → 0`.
    Past(HState<T>),
}

/// `V_η₀` along `ηⁿ → η`: successive relative gaps must stay below `cont_tol`.
pub fn regularity_probe<T: Real>(
    prob: &ValueProblem<T>,
    eta: &HState<T>,
    sequence: &Sequence<T>,
    opts: &ProbeOpts,
) -> ProbeReport {
    let (name, step): (&str, Box<dyn Fn(usize) -> HState<T>>) = match sequence {
        Sequence::Constant => ("regularity.constant", Box::new(|_| eta.clone())),
        Sequence::Present(delta) => {
            let delta = *delta;
            (
                "regularity.present",
                Box::new(move |n| HState {
                    eta0: eta.eta0 + delta * T::lit(0.5).powi(n as i32),
                    ..eta.clone()
                }),
            )
        }
        Sequence::Past(bump) => {
            let bump = bump.clone();
            (
                "regularity.past",
                Box::new(move |n| eta.axpy(T::lit(0.5).powi(n as i32), &bump)),
            )
        }
    };
    let r = prob.model.params.r;
    let mut rows = Vec::new();
    let mut prev: Option<(T, ValueEstimate<T>)> = None;
    for n in 1..=opts.sequence_len {
        let point = step(n);
        let dist = norm_minus1(r, &point.sub(eta));
        let est = (|| -> Result<(GradientEstimate<T>, ValueEstimate<T>)> {
            let base = prob.solve(&point, prev.as_ref().map(|p| &p.1))?;
            let g = partial_v_eta0(prob, &point, default_stencil(point.eta0), Some(&base))?;
            Ok((g, base))
        })();
        match est {
            Ok((g, base)) => {
                if let Some((p, _)) = &prev {
                    let gap = (g.v_eta0 - *p).abs() / p.abs().max(T::min_positive_value());
                    rows.push(CheckRow::new(
                        name,
                        n,
                        format!("n {n}, -1 distance {dist}"),
                        f(g.v_eta0),
                        f(*p),
                        f(gap),
                        opts.cont_tol,
                    ));
                }
                prev = Some((g.v_eta0, base));
            }
            Err(e) => {
                rows.push(CheckRow::failed(name, n, format!("n {n}: {e}")));
                break;
            }
        }
    }
    ProbeReport::from_rows(name, rows)
}

/// Both sides of the dynamic-programming identity at split time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct DppResult<T> {
    /// `V̂(η)`.
    pub lhs: T,
    /// `sup_c [∫₀ˢ e^{-ρt}(U₁ + U₂) dt + e^{-ρs} V̂(X(s))]`.
    pub rhs: T,
    pub residual: T,
    /// Bracket of `V̂(η)` plus the discounted bracket of the continuation.
    pub tolerance: T,
}

/// `J` on `[0, s]` plus the discounted continuation value for an outer control.
fn split_payoff<T: Real>(
    prob: &ValueProblem<T>,
    eta: &HState<T>,
    outer: &ControlPath<T>,
    s_steps: usize,
    warm: &ValueEstimate<T>,
) -> Result<(T, ValueEstimate<T>)> {
    let mut stepper = Stepper::new(&prob.model, eta, prob.dt())?;
    stepper.advance(outer, s_steps)?;
    if stepper.violation_step().is_some() {
        return Ok((T::neg_infinity(), ValueEstimate::outside(prob.horizon)));
    }
    let cont = prob.solve(&stepper.lifted_state(), Some(warm))?;
    let s = prob.dt() * T::from_usize_lossy(s_steps);
    let total = stepper.payoff() + (-prob.model.params.rho * s).exp() * cont.v_lo;
    Ok((if cont.in_domain() { total } else { T::neg_infinity() }, cont))
}

/// `|V̂(η) - sup_c [∫₀ˢ … + e^{-ρs} V̂(X(s))]|`, the continuation solved by the same
/// value search over its full horizon. The outer control uses pieces no longer than
/// the value segments, so `s` must be a multiple of `dt` times their number.
pub fn dpp_residual<T: Real>(
    prob: &ValueProblem<T>,
    eta: &HState<T>,
    s: T,
    base: Option<&ValueEstimate<T>>,
) -> Result<DppResult<T>> {
    if !(s > T::zero()) || s >= prob.horizon {
        return Err(Error::TimeOutOfRange {
            t: s.as_f64(),
            lo: 0.0,
            hi: prob.horizon.as_f64(),
        });
    }
    let owned;
    let base = match base {
        Some(b) => b,
        None => {
            owned = prob.solve(eta, None)?;
            &owned
        }
    };
    if !base.in_domain() {
        return Err(Error::OutsideValueDomain("split point base".into()));
    }
    let dt = prob.dt();
    let s_steps = integer_ratio(s, dt, 1e-9).ok_or(Error::StepMismatch {
        dt: dt.as_f64(),
        what: "split time",
        other: s.as_f64(),
    })?;
    let pieces = (s / prob.segment_length() - T::lit(1e-9)).ceil().max(T::one());
    let m = pieces.to_usize().unwrap_or(1);
    if s_steps % m != 0 {
        return Err(Error::StepMismatch {
            dt: dt.as_f64(),
            what: "split time (pieces must be whole steps)",
            other: s.as_f64(),
        });
    }
    let piece = s / pieces;
    let mut c: Vec<T> = (0..m)
        .map(|i| base.control.value_at((T::from_usize_lossy(i) + T::lit(0.5)) * piece))
        .collect();
    let len = prob.segment_length();
    let tail = ControlPath::new(
        len,
        (0..prob.segments())
            .map(|i| base.control.value_at(s + (T::from_usize_lossy(i) + T::lit(0.5)) * len))
            .collect(),
    )?;
    let mut warm_est = warm(tail, base.shadow_price, prob.horizon);

    let eval = |c: &[T], warm_est: &mut ValueEstimate<T>| -> Result<(T, ValueEstimate<T>)> {
        let outer = ControlPath::new(piece, c.to_vec())?;
        let (v, cont) = split_payoff(prob, eta, &outer, s_steps, warm_est)?;
        if cont.in_domain() {
            *warm_est = cont.clone();
        }
        Ok((v, cont))
    };
    let (mut best, mut cont) = eval(&c, &mut warm_est)?;
    // the payoff is flat to second order at the maximizer
    let rel = T::lit(1e-5).max(T::epsilon().sqrt());
    for _ in 0..4 {
        let start = best;
        for i in 0..m {
            let x0 = c[i];
            let width = x0.max(T::lit(1e-2)) * T::lit(0.5);
            let (lo, hi) = ((x0 - width).max(T::zero()), x0 + width);
            let mut failure = None;
            // the outer problem is concave in c
            let (xb, fb) = brent_max(
                |v| {
                    let mut trial = c.clone();
                    trial[i] = v;
                    match eval(&trial, &mut warm_est) {
                        Ok((f, _)) => f,
                        Err(e) => {
                            failure.get_or_insert(e);
                            T::neg_infinity()
                        }
                    }
                },
                lo,
                hi,
                x0,
                best,
                rel,
                T::epsilon() * width,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            if fb > best {
                c[i] = xb;
                let (f, next) = eval(&c, &mut warm_est)?;
                best = f;
                cont = next;
            }
        }
        if best - start <= T::lit(1e-10).max(T::epsilon()) * best.abs().max(T::one()) {
            break;
        }
    }
    let disc = (-prob.model.params.rho * s).exp();
    let tolerance = base.bracket() + disc * cont.bracket();
    Ok(DppResult {
        lhs: base.v_lo,
        rhs: best,
        residual: (base.v_lo - best).abs(),
        tolerance,
    })
}

/// Terms of the HJB equation at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbTerms<T> {
    pub rho_v: T,
    /// `⟨η, A*∇V⟩`.
    pub transport: T,
    /// `f(η) V_η₀`.
    pub drift: T,
    pub u2: T,
    /// `ℋ(V_η₀)`.
    pub hamiltonian: T,
    /// `∂V̂/∂h`: the search runs over a fixed remaining horizon `h`, so `V̂` carries
    /// this term in its own equation. It vanishes as `h → ∞`.
    pub horizon_drift: T,
}

impl<T: Real> HjbTerms<T> {
    /// `|ρV - ⟨η, A*∇V⟩ - f V_η₀ - U₂(η₀) - ℋ(V_η₀)| / max(1, |ρV|)`.
    pub fn relative_residual(&self) -> T {
        self.raw_residual().abs() / self.rho_v.abs().max(T::one())
    }

    /// `ρV - ⟨η, A*∇V⟩ - f V_η₀ - U₂(η₀) - ℋ(V_η₀) + ∂V̂/∂h`.
    pub fn raw_residual(&self) -> T {
        self.rho_v - self.transport - self.drift - self.u2 - self.hamiltonian + self.horizon_drift
    }

    /// The residual without the horizon term, i.e. against the infinite-horizon equation.
    pub fn untruncated_residual(&self) -> T {
        (self.raw_residual() - self.horizon_drift).abs() / self.rho_v.abs().max(T::one())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbResult<T> {
    pub residual: T,
    pub terms: HjbTerms<T>,
    pub gradient: GradientEstimate<T>,
    /// `∇V` after projection onto `ζ₁(-T) = 0`.
    pub zeta: HState<T>,
    /// `|ζ₁(-T)|` before the projection.
    pub projection: T,
    /// `V_η₀` from the envelope difference at the fixed maximizer, for comparison.
    pub envelope_v_eta0: T,
}

const ENVELOPE_STEP: f64 = 1e-6;

fn envelope_step<T: Real>() -> T {
    T::lit(ENVELOPE_STEP).max(T::epsilon().cbrt())
}

/// Gradient of `V̂` at the maximizer by the envelope theorem: central differences of
/// `Φ + μ x(h)` with the control held fixed. Past entries are densities (node bumps
/// divided by their trapezoid weight); the node at `ζ = 0` is extrapolated from its
/// neighbours.
///
/// The state ends near zero and `x(h)` reacts strongly to the initial datum, so a wide
/// stencil pushes the end of the path across the kink of `f₀` at zero. Steps stay at
/// `1e-6` relative.
pub fn envelope_gradient<T: Real>(prob: &ValueProblem<T>, eta: &HState<T>, est: &ValueEstimate<T>) -> Result<HState<T>> {
    let n = eta.n();
    if n < 3 {
        return Err(Error::Resolution("the past gradient needs at least 3 grid intervals".into()));
    }
    let mu = est.shadow_price;
    let l = |p: &HState<T>| prob.lagrangian(p, &est.control, mu);
    let d0 = envelope_step::<T>() * eta.eta0.abs().max(T::one());
    let plus = HState { eta0: eta.eta0 + d0, ..eta.clone() };
    let minus = HState { eta0: eta.eta0 - d0, ..eta.clone() };
    let zeta0 = (l(&plus)? - l(&minus)?) / (d0 + d0);
    let mut zeta1 = vec![T::zero(); n + 1];
    for (j, z) in zeta1.iter_mut().enumerate().take(n) {
        let d = envelope_step::<T>() * eta.eta1[j].abs().max(T::one());
        let w = if j == 0 { eta.dxi * T::lit(0.5) } else { eta.dxi };
        let mut p = eta.clone();
        p.eta1[j] = eta.eta1[j] + d;
        let lp = l(&p)?;
        p.eta1[j] = eta.eta1[j] - d;
        let lm = l(&p)?;
        *z = (lp - lm) / ((d + d) * w);
    }
    zeta1[n] = zeta1[n - 1] + zeta1[n - 1] - zeta1[n - 2];
    Ok(HState {
        eta0: zeta0,
        eta1: zeta1,
        dxi: eta.dxi,
    })
}

/// `(V̂_{h+Δ} - V̂_{h-Δ}) / 2Δ` with `Δ` one control segment.
pub fn horizon_drift<T: Real>(prob: &ValueProblem<T>, eta: &HState<T>, base: &ValueEstimate<T>) -> Result<T> {
    let m = prob.segments();
    if m < 2 {
        return Err(Error::Resolution("the horizon derivative needs two control segments".into()));
    }
    let len = prob.segment_length();
    let long = prob.with_horizon(prob.horizon + len, m + 1)?.solve(eta, Some(base))?;
    let short = prob.with_horizon(prob.horizon - len, m - 1)?.solve(eta, Some(base))?;
    if !long.in_domain() || !short.in_domain() {
        return Err(Error::OutsideValueDomain("horizon neighbours".into()));
    }
    Ok((long.v_lo - short.v_lo) / (len + len))
}

/// HJB residual at `η` on the value grid. Fails with [`Error::Unstable`] when the two
/// stencil widths disagree by more than `stab_tol`.
pub fn hjb_residual<T: Real>(prob: &ValueProblem<T>, eta: &HState<T>, stab_tol: f64) -> Result<HjbResult<T>> {
    let base = prob.solve(eta, None)?;
    if !base.in_domain() {
        return Err(Error::OutsideValueDomain("HJB sample point".into()));
    }
    let gradient = partial_v_eta0(prob, eta, default_stencil(eta.eta0), Some(&base))?;
    if gradient.stability > T::lit(stab_tol) {
        return Err(Error::Unstable(format!(
            "stencil widths disagree by {} (tolerance {stab_tol})",
            gradient.stability
        )));
    }
    let mut zeta = envelope_gradient(prob, eta, &base)?;
    let envelope_v_eta0 = zeta.eta0;
    let projection = zeta.eta1[0].abs();
    zeta.eta1[0] = T::zero();
    zeta.eta0 = gradient.v_eta0;
    let model = &prob.model;
    let p = &model.params;
    let astar = apply_astar(p.r, &zeta)?;
    let v0 = gradient.v_eta0;
    let terms = HjbTerms {
        rho_v: p.rho * base.v_lo,
        transport: inner(eta, &astar.state),
        drift: model.drift(eta)? * v0,
        u2: model.utilities.u2.value(eta.eta0),
        hamiltonian: hamiltonian(&model.utilities, v0)?,
        horizon_drift: horizon_drift(prob, eta, &base)?,
    };
    Ok(HjbResult {
        residual: terms.relative_residual(),
        terms,
        gradient,
        zeta,
        projection,
        envelope_v_eta0,
    })
}

/// Interior sample points for the HJB check: smooth states in `H₊₊` with moderate
/// present and past.
pub fn hjb_sample_points<T: Real>(prob: &ValueProblem<T>, count: usize, seed: u64) -> Vec<HState<T>> {
    let mut rng = seeded_rng(seed, 30);
    let delay = prob.model.delay();
    let n = prob.model.n();
    (0..count)
        .map(|_| {
            let mut s = random_hpp_state(&mut rng, delay, n);
            s.eta0 = T::lit(rng.gen_range(0.5..3.0));
            s
        })
        .collect()
}

/// HJB residual rows at the interior sample points, the same residual against the
/// untruncated equation (diagnostic), and the refinement trend on the first
/// `refine_points` of them.
pub fn hjb_probe<T: Real>(prob: &ValueProblem<T>, opts: &ProbeOpts) -> Vec<ProbeReport> {
    let points = hjb_sample_points(prob, opts.hjb_points, opts.seed);
    let results: Vec<Result<HjbResult<T>>> = points
        .par_iter()
        .map(|eta| hjb_residual(prob, eta, opts.stab_tol))
        .collect();
    let input = |k: usize, eta: &HState<T>| format!("point {k}, eta0 {}", eta.eta0);
    let mut rows = Vec::new();
    let mut untruncated = Vec::new();
    for (k, (eta, r)) in points.iter().zip(&results).enumerate() {
        match r {
            Ok(r) => {
                let t = &r.terms;
                let lhs = t.rho_v;
                let rhs = t.transport + t.drift + t.u2 + t.hamiltonian - t.horizon_drift;
                rows.push(CheckRow::new("hjb.residual", k, input(k, eta), f(lhs), f(rhs), f(r.residual), opts.hjb_tol));
                untruncated.push(CheckRow::new(
                    "hjb.untruncated",
                    k,
                    input(k, eta),
                    f(lhs),
                    f(rhs + t.horizon_drift),
                    f(t.untruncated_residual()),
                    opts.hjb_tol,
                ));
            }
            Err(e) => rows.push(CheckRow::failed("hjb.residual", k, format!("{}: {e}", input(k, eta)))),
        }
    }

    let fine = ValueProblem::new(&prob.model, prob.opts.refined(opts.refine_factor));
    let take = opts.refine_points.min(points.len());
    let refined: Vec<Result<HjbResult<T>>> = match &fine {
        Ok(fine) => points[..take]
            .par_iter()
            .map(|eta| hjb_residual(fine, eta, opts.stab_tol))
            .collect(),
        Err(e) => (0..take).map(|_| Err(Error::Config(e.to_string()))).collect(),
    };
    let trend = refined
        .iter()
        .enumerate()
        .map(|(k, fine)| {
            let label = format!("{}, refined {}x", input(k, &points[k]), opts.refine_factor);
            match (&results[k], fine) {
                (Ok(c), Ok(r)) => CheckRow::le(
                    "hjb.refinement",
                    k,
                    label,
                    f(r.residual * T::lit(opts.refine_decrease)),
                    f(c.residual),
                    0.0,
                ),
                (Err(e), _) | (_, Err(e)) => CheckRow::failed("hjb.refinement", k, format!("{label}: {e}")),
            }
        })
        .collect();
    vec![
        ProbeReport::from_rows("hjb.residual", rows),
        ProbeReport::from_rows("hjb.untruncated", untruncated).diagnostic(),
        ProbeReport::from_rows("hjb.refinement", trend),
    ]
}

/// DPP residual against the combined bracket at each split time, at the first HJB
/// sample point.
pub fn dpp_probe<T: Real>(prob: &ValueProblem<T>, splits: &[T], opts: &ProbeOpts) -> ProbeReport {
    let eta = &hjb_sample_points(prob, 1, opts.seed)[0];
    let base = match prob.solve(eta, None) {
        Ok(b) => b,
        Err(e) => return ProbeReport::single(CheckRow::failed("hjb.dpp", 0, e.to_string())),
    };
    let rows = splits
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            let input = format!("eta0 {}, split {s}", eta.eta0);
            match dpp_residual(prob, eta, s, Some(&base)) {
                Ok(r) => CheckRow::new("hjb.dpp", k, input, f(r.lhs), f(r.rhs), f(r.residual), f(r.tolerance)),
                Err(e) => CheckRow::failed("hjb.dpp", k, format!("{input}: {e}")),
            }
        })
        .collect();
    ProbeReport::from_rows("hjb.dpp", rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;
    use crate::value::ValueOpts;

    fn problem() -> ValueProblem<f64> {
        ValueProblem::new(&Model::default_with_resolution(20), ValueOpts::default()).unwrap()
    }

    #[test]
    fn shifting_utility_by_a_constant_leaves_the_residual() {
        let t = HjbTerms::<f64> {
            rho_v: 0.8,
            transport: 0.1,
            drift: 0.2,
            u2: 0.0,
            hamiltonian: 0.45,
            horizon_drift: 1e-3,
        };
        let k = 0.3;
        let shifted = HjbTerms {
            rho_v: t.rho_v + k,
            u2: t.u2 + k,
            ..t.clone()
        };
        assert!((t.raw_residual() - shifted.raw_residual()).abs() < 1e-15);
    }

    #[test]
    fn planted_fakes_fail_their_probes() {
        let opts = ProbeOpts {
            pairs: 8,
            ..ProbeOpts::default()
        };
        let p = problem();
        assert!(!concavity_probe(&Planted::Convex(p.clone()), &opts).pass);
        assert!(!monotonicity_probe(&Planted::Decreasing(p), &opts).pass);
    }

    #[test]
    fn constant_sequence_has_zero_gaps() {
        let p = problem();
        let eta = HState::constant(1.0, 1.0, 1.0, 20);
        let opts = ProbeOpts {
            sequence_len: 3,
            ..ProbeOpts::default()
        };
        let r = regularity_probe(&p, &eta, &Sequence::Constant, &opts);
        // warm starts move the maximizer only at solver precision
        assert!(r.pass, "{r}");
        assert!(r.max_violation < 1e-6, "{r}");
    }
}
