//! Discounted payoff, value-function brackets, the Hamiltonian and the feedback map.
//!
//! `V` is approximated from below by maximizing over piecewise-constant consumption on
//! `[0, h]` followed by `c ≡ 0`. With a bounded `U₁` the state constraint binds at the
//! horizon, where plain coordinate moves in `c` stall. The search therefore works on
//! the Lagrangian `L_μ(c) = Φ(c) + μ x(h)`: coordinate ascent (golden section with
//! parabolic steps) for fixed `μ`, then a root search in `μ` until `x(h)` reaches a
//! small target. For every `μ ≥ 0` with a converged inner maximum, `max L_μ` bounds the
//! truncated problem from above, which is where `opt_gap` comes from.

use crate::dde::{domain_membership, integrate, step_count, verdict_of, ControlPath, Stepper, POS_EPS};
use crate::error::{Error, Result};
use crate::model::utility::UtilityPair;
use crate::model::{params::ModelParams, Model};
use crate::scalar::{integer_ratio, Real};
use crate::state::HState;

/// Tuning of the value search.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueOpts<T> {
    /// Simulation step; must divide the kernel grid spacing.
    pub dt: T,
    /// Kernel grid intervals used for value computations.
    pub n: usize,
    /// `None` picks `max(5/ρ, 3T)`, rounded up to whole segments.
    pub horizon: Option<T>,
    pub segments: usize,
    /// A sweep sequence stops once one sweep gains less than `tol · max(1, |L|)`.
    pub tol: T,
    pub max_sweeps: usize,
}

impl<T: Real> Default for ValueOpts<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.05),
            n: 20,
            horizon: None,
            segments: 20,
            tol: T::lit(1e-12),
            max_sweeps: 60,
        }
    }
}

impl<T: Real> ValueOpts<T> {
    /// Time step and optimizer tolerance divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let f = T::from_usize_lossy(factor);
        Self {
            dt: self.dt / f,
            tol: self.tol / f,
            ..self.clone()
        }
    }

    /// As [`refined`](Self::refined), with the kernel grid refined too.
    pub fn refined_with_grid(&self, factor: usize) -> Self {
        Self {
            n: self.n * factor,
            ..self.refined(factor)
        }
    }
}

/// `(Ū₁ + Ū₂)/ρ`.
pub fn value_upper_bound<T: Real>(params: &ModelParams<T>) -> T {
    (params.u1_sup + params.u2_sup) / params.rho
}

/// Payoff of one control on `[0, h]` with the brackets for what comes after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JEstimate<T> {
    /// `∫₀^h e^{-ρt}(U₁(c) + U₂(x)) dt`; `-∞` for an inadmissible control.
    pub estimate: T,
    /// Lower bound on the discounted payoff after `h` under `c ≡ 0`.
    pub tail_lo: T,
    /// `e^{-ρh}(Ū₁ + Ū₂)/ρ`.
    pub tail_hi: T,
}

impl<T: Real> JEstimate<T> {
    pub fn v_lo(&self) -> T {
        self.estimate + self.tail_lo
    }

    pub fn is_admissible(&self) -> bool {
        self.estimate > T::neg_infinity()
    }
}

fn tails<T: Real>(model: &Model<T>, horizon: T, x_end: T) -> (T, T) {
    let p = &model.params;
    let u = &model.utilities;
    let disc = (-p.rho * horizon).exp();
    let hi = disc * value_upper_bound(p);
    let after = if u.u2.is_zero() {
        T::zero()
    } else if x_end > T::zero() {
        u.u2.decay_tail_integral(x_end, p.rho, p.c_f0)
    } else {
        T::neg_infinity()
    };
    (disc * (u.u1.value(T::zero()) / p.rho + after), hi)
}

/// Evaluates `J` for `control` restricted to `[0, horizon]`, with `c ≡ 0` afterwards.
///
/// The lower tail uses `x(t) ≥ x(h) e^{-C_f0 (t-h)}` once the segment at `h` is in
/// `H₊₊`, and the monotonicity of `U₂`.
pub fn evaluate_j<T: Real>(
    model: &Model<T>,
    eta: &HState<T>,
    control: &ControlPath<T>,
    horizon: T,
    dt: T,
) -> Result<JEstimate<T>> {
    let control = control.truncated(horizon);
    let traj = integrate(model, eta, &control, horizon, dt)?;
    let x_end = *traj.x.last().expect("nonempty");
    let (tail_lo, tail_hi) = tails(model, horizon, x_end);
    let estimate = if verdict_of(&traj, &control).certified_forever {
        traj.j_partial
    } else {
        T::neg_infinity()
    };
    Ok(JEstimate {
        estimate,
        tail_lo,
        tail_hi,
    })
}

/// Bracketed approximation of `V(η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueEstimate<T> {
    /// Payoff of the best control found, `estimate + tail_lo`.
    pub v_lo: T,
    /// `estimate + tail_hi + opt_gap`.
    pub v_hi: T,
    pub control: ControlPath<T>,
    pub horizon: T,
    /// Upper bound on how far `v_lo` is below the best payoff of the control class.
    pub opt_gap: T,
    pub estimate: T,
    pub tail_lo: T,
    pub tail_hi: T,
    /// Multiplier of the terminal constraint `x(h) ≥ 0`.
    pub shadow_price: T,
    pub x_end: T,
}

impl<T: Real> ValueEstimate<T> {
    /// The `sup ∅ = -∞` marker.
    pub fn outside(horizon: T) -> Self {
        let ninf = T::neg_infinity();
        Self {
            v_lo: ninf,
            v_hi: ninf,
            control: ControlPath::zero(),
            horizon,
            opt_gap: T::zero(),
            estimate: ninf,
            tail_lo: T::zero(),
            tail_hi: T::zero(),
            shadow_price: T::zero(),
            x_end: T::nan(),
        }
    }

    pub fn in_domain(&self) -> bool {
        self.v_lo > T::neg_infinity()
    }

    pub fn bracket(&self) -> T {
        self.v_hi - self.v_lo
    }
}

/// A model at value resolution together with the search settings.
#[derive(Debug, Clone)]
pub struct ValueProblem<T> {
    pub model: Model<T>,
    pub opts: ValueOpts<T>,
    pub horizon: T,
    seg_steps: usize,
}

impl<T: Real> ValueProblem<T> {
    /// Resamples the kernel onto `opts.n` intervals when needed.
    pub fn new(model: &Model<T>, opts: ValueOpts<T>) -> Result<Self> {
        if opts.segments == 0 {
            return Err(Error::InvalidParameter("at least one control segment is needed".into()));
        }
        if !(opts.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let model = if model.n() == opts.n {
            model.clone()
        } else {
            model.at_resolution(opts.n)?
        };
        if opts.dt > model.dxi() * (T::one() + T::lit(1e-9)) || integer_ratio(model.dxi(), opts.dt, 1e-9).is_none() {
            return Err(Error::StepMismatch {
                dt: opts.dt.as_f64(),
                what: "value grid spacing (need dxi / dt integer)",
                other: model.dxi().as_f64(),
            });
        }
        let p = &model.params;
        let block = opts.dt * T::from_usize_lossy(opts.segments);
        let horizon = match opts.horizon {
            Some(h) => h,
            None => {
                let h = (T::lit(5.0) / p.rho).max(T::lit(3.0) * p.delay);
                (h / block - T::lit(1e-9)).ceil().max(T::one()) * block
            }
        };
        let steps = step_count(horizon, opts.dt)?;
        if steps % opts.segments != 0 {
            return Err(Error::StepMismatch {
                dt: opts.dt.as_f64(),
                what: "control segment length (horizon / segments)",
                other: (horizon / T::from_usize_lossy(opts.segments)).as_f64(),
            });
        }
        Ok(Self {
            model,
            seg_steps: steps / opts.segments,
            horizon,
            opts,
        })
    }

    /// The same problem on `[0, horizon]` with `segments` pieces.
    pub fn with_horizon(&self, horizon: T, segments: usize) -> Result<Self> {
        Self::new(
            &self.model,
            ValueOpts {
                horizon: Some(horizon),
                segments,
                ..self.opts.clone()
            },
        )
    }

    pub fn dt(&self) -> T {
        self.opts.dt
    }

    pub fn segments(&self) -> usize {
        self.opts.segments
    }

    pub fn segment_length(&self) -> T {
        self.opts.dt * T::from_usize_lossy(self.seg_steps)
    }

    pub fn steps_per_segment(&self) -> usize {
        self.seg_steps
    }

    /// `η` on the value grid.
    pub fn state(&self, eta: &HState<T>) -> HState<T> {
        eta.resample(self.model.n())
    }

    pub fn ceiling(&self) -> T {
        value_upper_bound(&self.model.params)
    }

    pub fn evaluate(&self, eta: &HState<T>, control: &ControlPath<T>) -> Result<JEstimate<T>> {
        evaluate_j(&self.model, eta, control, self.horizon, self.opts.dt)
    }

    pub fn in_domain(&self, eta: &HState<T>) -> Result<bool> {
        domain_membership(&self.model, eta, self.opts.dt)
    }

    /// `Φ(c) + μ x(h)` for a fixed control, ignoring positivity. Differences of this
    /// at the maximizer estimate `∇V` (envelope theorem).
    pub fn lagrangian(&self, eta: &HState<T>, control: &ControlPath<T>, mu: T) -> Result<T> {
        let steps = step_count(self.horizon, self.opts.dt)?;
        let mut stepper = Stepper::new(&self.model, eta, self.opts.dt)?;
        stepper.advance(&control.truncated(self.horizon), steps)?;
        let x_end = stepper.current();
        let (tail_lo, _) = tails(&self.model, self.horizon, x_end);
        Ok(stepper.payoff() + tail_lo + mu * x_end)
    }

    /// `approximate_V` at `η`, optionally warm-started from a nearby estimate.
    pub fn solve(&self, eta: &HState<T>, warm: Option<&ValueEstimate<T>>) -> Result<ValueEstimate<T>> {
        self.model.check_state(eta)?;
        if !eta.in_h_plus() || !self.in_domain(eta)? {
            return Ok(ValueEstimate::outside(self.horizon));
        }
        let m = self.opts.segments;
        let mut search = Search::new(self, eta, vec![T::zero(); m])?;
        let mut book = Book::default();

        let zero = search.evaluate_current();
        book.offer(zero, &search.c, T::infinity());
        if let Some(w) = warm.filter(|w| w.in_domain()) {
            let start = self.align(&w.control);
            let mut trial = Search::new(self, eta, start)?;
            let run = trial.evaluate_current();
            if run.feasible {
                book.offer(run, &trial.c, T::infinity());
                search = trial;
            }
        }

        if !self.model.utilities.u2.is_zero() {
            let inner = search.maximize(T::zero());
            book.record(&inner, &search.c, T::zero());
            if inner.run.feasible && !inner.boundary {
                return Ok(self.finish(book, search.scale));
            }
        }
        let target = search.target();
        let mu0 = warm.map(|w| w.shadow_price).filter(|m| *m > T::zero());
        search.find_multiplier(mu0, target, &mut book);
        Ok(self.finish(book, search.scale))
    }

    /// A warm-start control on this problem's segment grid.
    fn align(&self, control: &ControlPath<T>) -> Vec<T> {
        let len = self.segment_length();
        (0..self.opts.segments)
            .map(|i| control.value_at((T::from_usize_lossy(i) + T::lit(0.5)) * len))
            .collect()
    }

    fn finish(&self, book: Book<T>, scale: T) -> ValueEstimate<T> {
        let best = book.best.expect("the null control is always recorded");
        let (tail_lo, tail_hi) = tails(&self.model, self.horizon, best.run.x_end);
        let v_lo = best.run.phi;
        let estimate = v_lo - tail_lo;
        let floor = self.opts.tol * v_lo.abs().max(T::one()) + T::epsilon() * scale;
        let opt_gap = (book.upper - v_lo).max(T::zero()).max(floor);
        ValueEstimate {
            v_lo,
            v_hi: estimate + tail_hi + opt_gap,
            control: ControlPath::new(self.segment_length(), best.c).expect("nonnegative by construction"),
            horizon: self.horizon,
            opt_gap,
            estimate,
            tail_lo,
            tail_hi,
            shadow_price: best.mu,
            x_end: best.run.x_end,
        }
    }
}

/// `approximate_V(η)` with a fresh [`ValueProblem`].
pub fn approximate_v<T: Real>(model: &Model<T>, eta: &HState<T>, opts: ValueOpts<T>) -> Result<ValueEstimate<T>> {
    let prob = ValueProblem::new(model, opts)?;
    let eta = prob.state(eta);
    prob.solve(&eta, None)
}

#[derive(Debug, Clone, Copy)]
struct Run<T> {
    /// `Φ = J(0..h) + tail_lo`.
    phi: T,
    x_end: T,
    feasible: bool,
}

struct Inner<T> {
    run: Run<T>,
    /// Converged `max L_μ` plus its error estimate, `+∞` when not trustworthy.
    upper: T,
    /// The maximum sits on the edge of the feasible set.
    boundary: bool,
}

struct Candidate<T> {
    run: Run<T>,
    c: Vec<T>,
    mu: T,
}

/// Best feasible control seen and the tightest dual bound.
struct Book<T> {
    best: Option<Candidate<T>>,
    upper: T,
}

impl<T: Real> Default for Book<T> {
    fn default() -> Self {
        Self {
            best: None,
            upper: T::infinity(),
        }
    }
}

impl<T: Real> Book<T> {
    fn offer(&mut self, run: Run<T>, c: &[T], mu: T) {
        if !run.feasible {
            return;
        }
        if self.best.as_ref().map_or(true, |b| run.phi > b.run.phi) {
            self.best = Some(Candidate {
                run,
                c: c.to_vec(),
                mu: if mu.is_finite() { mu } else { T::zero() },
            });
        }
    }

    fn record(&mut self, inner: &Inner<T>, c: &[T], mu: T) {
        self.offer(inner.run, c, mu);
        if !inner.boundary {
            self.upper = self.upper.min(inner.upper);
        }
    }
}

struct Search<'p, T> {
    prob: &'p ValueProblem<T>,
    stepper: Stepper<'p, T>,
    c: Vec<T>,
    /// Leading segments of the stepper that match `c`.
    valid: usize,
    scale: T,
}

impl<'p, T: Real> Search<'p, T> {
    fn new(prob: &'p ValueProblem<T>, eta: &HState<T>, c: Vec<T>) -> Result<Self> {
        let scale = eta
            .eta1
            .iter()
            .fold(eta.eta0.abs().max(T::one()), |m, v| m.max(v.abs()));
        Ok(Self {
            prob,
            stepper: Stepper::new(&prob.model, eta, prob.opts.dt)?,
            c,
            valid: 0,
            scale,
        })
    }

    /// Terminal state the multiplier search aims for, just above zero.
    fn target(&self) -> T {
        T::epsilon().sqrt() * T::lit(0.1) * self.scale
    }

    fn set(&mut self, i: usize, v: T) {
        self.c[i] = v;
        self.valid = self.valid.min(i);
    }

    /// Re-simulates from segment `from`, stopping early on a violation if asked.
    fn run(&mut self, from: usize, stop_early: bool) -> Run<T> {
        let sp = self.prob.seg_steps;
        let m = self.c.len();
        let start = self.valid.min(from).min(self.stepper.steps() / sp);
        self.stepper.truncate(start * sp);
        for seg in start..m {
            let c = self.c[seg];
            for _ in 0..sp {
                self.stepper.step(c);
            }
            if stop_early && self.stepper.violation_step().is_some() {
                self.valid = seg + 1;
                return Run {
                    phi: T::neg_infinity(),
                    x_end: self.stepper.current(),
                    feasible: false,
                };
            }
        }
        self.valid = m;
        let x_end = self.stepper.current();
        let (tail_lo, _) = tails(&self.prob.model, self.prob.horizon, x_end);
        let feasible = self.stepper.violation_step().is_none() && x_end > T::lit(POS_EPS);
        Run {
            phi: if feasible { self.stepper.payoff() + tail_lo } else { T::neg_infinity() },
            x_end,
            feasible,
        }
    }

    fn evaluate_current(&mut self) -> Run<T> {
        self.run(0, false)
    }

    fn lagrangian(&mut self, from: usize, mu: T) -> T {
        let r = self.run(from, true);
        if r.feasible {
            r.phi + mu * r.x_end
        } else {
            T::neg_infinity()
        }
    }

    /// Maximizes `L_μ` along coordinate `i` from the current value `f0`.
    fn line_search(&mut self, i: usize, mu: T, f0: T) -> (T, bool) {
        let x0 = self.c[i];
        let step = if x0 > T::zero() { x0 } else { self.scale * T::lit(1e-2) };
        let gold = T::lit(1.618_033_988_749_895);
        let f = |s: &mut Self, v: T| {
            s.set(i, v);
            s.lagrangian(i, mu)
        };

        let mut lo = T::zero();
        let mut x = x0;
        let mut fx = f0;
        let mut hi = x0 + step;
        let mut fhi = f(self, hi);
        if fhi > fx {
            lo = x0;
            for _ in 0..200 {
                let next = hi + gold * (hi - lo);
                let fnext = f(self, next);
                lo = x;
                x = hi;
                fx = fhi;
                hi = next;
                fhi = fnext;
                if !(fnext > fx) {
                    break;
                }
            }
        }
        let top_infeasible = fhi == T::neg_infinity();
        let abs = T::epsilon() * self.scale;
        let (best, fbest) = brent_max(|v| f(self, v), lo, hi, x, fx, T::epsilon().sqrt() * T::lit(2.0), abs);
        let (best, fbest) = if fbest >= f0 { (best, fbest) } else { (x0, f0) };
        let mut boundary = false;
        if top_infeasible {
            let probe = best + (best.abs() + self.scale) * T::lit(1e-6);
            boundary = f(self, probe) == T::neg_infinity();
        }
        self.set(i, best);
        (fbest, boundary)
    }

    /// Coordinate ascent on `L_μ` from the current control.
    fn maximize(&mut self, mu: T) -> Inner<T> {
        let m = self.c.len();
        let mut val = self.lagrangian(0, mu);
        if !(val > T::neg_infinity()) {
            return Inner {
                run: self.evaluate_current(),
                upper: T::infinity(),
                boundary: true,
            };
        }
        let tol = self.prob.opts.tol;
        let mut prev_gain: Option<T> = None;
        let mut err = T::infinity();
        let mut boundary = false;
        for _ in 0..self.prob.opts.max_sweeps {
            let start = val;
            boundary = false;
            for i in 0..m {
                let (v, b) = self.line_search(i, mu, val);
                val = v;
                boundary |= b;
            }
            let gain = val - start;
            let slack = tol * val.abs().max(T::one());
            // geometric tail of the remaining sweeps
            let q = prev_gain
                .filter(|p| *p > T::zero())
                .map_or(T::lit(0.5), |p| (gain / p).min(T::lit(0.9)));
            err = gain * q / (T::one() - q) + slack;
            if gain <= slack {
                break;
            }
            prev_gain = Some(gain);
        }
        let run = self.evaluate_current();
        Inner {
            run,
            upper: val + err,
            boundary,
        }
    }

    /// Searches `μ > 0` with `x(h)` in `[target, 2 target]`, recording every inner
    /// maximum in `book`.
    fn find_multiplier(&mut self, mu0: Option<T>, target: T, book: &mut Book<T>) {
        let ln = |m: T| m.ln();
        // "high" means x(h) ≥ target with an interior maximum
        let probe = |s: &mut Self, mu: T, book: &mut Book<T>| -> (bool, Option<T>, bool) {
            let inner = s.maximize(mu);
            book.record(&inner, &s.c, mu);
            let phi = inner.run.x_end - target;
            let reliable = inner.run.feasible && !inner.boundary;
            let high = reliable && phi >= T::zero();
            let done = high && phi <= target;
            (high, reliable.then_some(phi), done)
        };

        let (mut factor, mut mu) = match mu0 {
            Some(m) => (T::lit(2.0), m),
            None => (T::lit(10.0), T::lit(1e-2)),
        };
        let (high, phi, done) = probe(self, mu, book);
        if done {
            return;
        }
        let (mut lo, mut hi);
        if high {
            hi = (ln(mu), phi);
            lo = hi;
            for _ in 0..80 {
                mu = mu / factor;
                factor = factor * factor;
                let (h, p, d) = probe(self, mu, book);
                if d {
                    return;
                }
                if !h {
                    lo = (ln(mu), p);
                    break;
                }
                hi = (ln(mu), p);
            }
        } else {
            lo = (ln(mu), phi);
            hi = lo;
            for _ in 0..80 {
                mu = mu * factor;
                factor = factor * factor;
                let (h, p, d) = probe(self, mu, book);
                if d {
                    return;
                }
                if h {
                    hi = (ln(mu), p);
                    break;
                }
                lo = (ln(mu), p);
            }
        }
        if !(lo.0 < hi.0) {
            return;
        }
        // Illinois regula falsi in ln μ, bisection when a side has no usable value
        let mut side = 0i8;
        for _ in 0..100 {
            let u = match (lo.1, hi.1) {
                (Some(pl), Some(ph)) if ph > pl => {
                    let u = hi.0 - ph * (hi.0 - lo.0) / (ph - pl);
                    let w = hi.0 - lo.0;
                    u.max(lo.0 + w * T::lit(1e-3)).min(hi.0 - w * T::lit(1e-3))
                }
                _ => T::lit(0.5) * (lo.0 + hi.0),
            };
            if (hi.0 - lo.0) <= T::epsilon() * T::lit(16.0) * hi.0.abs().max(T::one()) {
                return;
            }
            let (h, p, d) = probe(self, u.exp(), book);
            if d {
                return;
            }
            if h {
                hi = (u, p);
                if side == 1 {
                    lo.1 = lo.1.map(|v| v * T::lit(0.5));
                }
                side = 1;
            } else {
                lo = (u, p);
                if side == -1 {
                    hi.1 = hi.1.map(|v| v * T::lit(0.5));
                }
                side = -1;
            }
        }
    }
}

/// Brent's golden-section search with parabolic steps, maximizing `f` on `[a, b]`
/// from the interior (or end) point `x` with value `fx`.
pub(crate) fn brent_max<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, x: T, fx: T, rel: T, abs: T) -> (T, T) {
    let cgold = T::lit(0.381_966_011_250_105_1);
    let half = T::lit(0.5);
    let (mut a, mut b) = (a, b);
    let (mut x, mut w, mut v) = (x, x, x);
    // minimize h = -f
    let (mut hx, mut hw, mut hv) = (-fx, -fx, -fx);
    let (mut d, mut e) = (T::zero(), T::zero());
    for _ in 0..200 {
        let xm = half * (a + b);
        let tol1 = rel * x.abs() + abs;
        let tol2 = tol1 + tol1;
        if (x - xm).abs() <= tol2 - half * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 && hx.is_finite() && hw.is_finite() && hv.is_finite() {
            let r = (x - w) * (hx - hv);
            let mut q = (x - v) * (hx - hw);
            let mut p = (x - v) * q - (x - w) * r;
            q = (q - r) + (q - r);
            if q > T::zero() {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            if p.abs() < (half * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = cgold * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= T::zero() {
            x + tol1
        } else {
            x - tol1
        };
        let hu = -f(u);
        if hu <= hx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            hv = hw;
            w = x;
            hw = hx;
            x = u;
            hx = hu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if hu <= hw || w == x {
                v = w;
                hv = hw;
                w = u;
                hw = hu;
            } else if hu <= hv || v == x || v == w {
                v = u;
                hv = hu;
            }
        }
    }
    (x, -hx)
}

/// Root of `U₁'(c) = ζ₀` by bisection to `1e-12` relative; `0` when the slope at zero
/// is already below `ζ₀`.
pub fn feedback_c<T: Real>(utilities: &UtilityPair<T>, zeta0: T) -> Result<T> {
    if !(zeta0 > T::zero()) || !zeta0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "the Hamiltonian needs a positive finite costate, got {zeta0}"
        )));
    }
    let u1 = &utilities.u1;
    if u1.deriv(T::zero()) <= zeta0 {
        return Ok(T::zero());
    }
    let (mut lo, mut hi) = (T::one(), T::one());
    if u1.deriv(T::one()) > zeta0 {
        while u1.deriv(hi) > zeta0 {
            lo = hi;
            hi = hi * T::lit(2.0);
            if !hi.is_finite() {
                return Err(Error::Degenerate(format!("no consumption level has slope {zeta0}")));
            }
        }
    } else {
        while u1.deriv(lo) <= zeta0 {
            hi = lo;
            lo = lo * T::lit(0.5);
            if lo == T::zero() {
                return Ok(T::zero());
            }
        }
    }
    let rel = T::lit(1e-12).max(T::epsilon());
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if u1.deriv(mid) > zeta0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel * hi {
            break;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

/// `ℋ(ζ₀) = sup_{c ≥ 0} (U₁(c) - ζ₀ c)`.
pub fn hamiltonian<T: Real>(utilities: &UtilityPair<T>, zeta0: T) -> Result<T> {
    let c = feedback_c(utilities, zeta0)?;
    Ok(utilities.u1.value(c) - zeta0 * c)
}

/// Central difference of `approximate_V` along `n̂ = (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate<T> {
    pub v_eta0: T,
    pub h_used: T,
    /// `|D(h) - D(h/2)| / |D(h)|` for the two stencil widths.
    pub stability: T,
}

/// `1e-3 · max(1, η₀)`.
pub fn default_stencil<T: Real>(eta0: T) -> T {
    T::lit(1e-3) * eta0.max(T::one())
}

/// Relative stencil disagreement above which a gradient estimate is rejected.
pub const STAB_TOL: f64 = 5e-2;

fn shifted<T: Real>(eta: &HState<T>, delta: T) -> HState<T> {
    HState {
        eta0: eta.eta0 + delta,
        ..eta.clone()
    }
}

/// `∂V/∂η₀` by central differences, re-solving at the shifted points warm-started
/// from the maximizer at `η` (`base`, computed when not given).
pub fn partial_v_eta0<T: Real>(
    prob: &ValueProblem<T>,
    eta: &HState<T>,
    h: T,
    base: Option<&ValueEstimate<T>>,
) -> Result<GradientEstimate<T>> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(format!("stencil width must be positive, got {h}")));
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
        return Err(Error::OutsideValueDomain("base point".into()));
    }
    let central = |w: T| -> Result<T> {
        let mut v = [T::zero(); 2];
        for (k, sign) in [T::one(), -T::one()].into_iter().enumerate() {
            let p = shifted(eta, sign * w);
            if !(p.eta0 > T::zero()) {
                return Err(Error::OutsideValueDomain(format!("shifted present {}", p.eta0)));
            }
            let est = prob.solve(&p, Some(base))?;
            if !est.in_domain() {
                return Err(Error::OutsideValueDomain(format!("shifted present {}", p.eta0)));
            }
            v[k] = est.v_lo;
        }
        Ok((v[0] - v[1]) / (w + w))
    };
    let d1 = central(h)?;
    let d2 = central(h * T::lit(0.5))?;
    Ok(GradientEstimate {
        v_eta0: d1,
        h_used: h,
        stability: (d1 - d2).abs() / d1.abs().max(T::min_positive_value()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem() -> ValueProblem<f64> {
        ValueProblem::new(&Model::default_with_resolution(20), ValueOpts::default()).unwrap()
    }

    #[test]
    fn upper_bound_arithmetic() {
        let p = ModelParams::new(0.05, 1.0, 0.1, 0.4, 1.0, 0.0).unwrap();
        assert_relative_eq!(value_upper_bound(&p), 10.0, max_relative = 1e-15);
    }

    #[test]
    fn constant_consumption_payoff() {
        let m = Model::<f64>::default_with_resolution(20);
        let eta = HState::constant(5.0, 5.0, 1.0, 20);
        let (k, h) = (0.3, 4.0);
        let c = ControlPath::constant(k, 0.5, 8).unwrap();
        let j = evaluate_j(&m, &eta, &c, h, 0.05).unwrap();
        let u = m.utilities.u1.value(k);
        assert_relative_eq!(j.estimate, u * (1.0 - (-0.5 * h).exp()) / 0.5, max_relative = 1e-12);
        assert_eq!(j.tail_lo, 0.0);
        assert_relative_eq!(j.tail_hi, (-0.5 * h).exp() * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn inadmissible_control_is_minus_infinity() {
        let m = Model::<f64>::default_with_resolution(20);
        let eta = HState::constant(0.1, 0.1, 1.0, 20);
        let c = ControlPath::constant(1000.0, 0.5, 8).unwrap();
        let j = evaluate_j(&m, &eta, &c, 4.0, 0.05).unwrap();
        assert_eq!(j.estimate, f64::NEG_INFINITY);
        assert!(!j.is_admissible());
    }

    #[test]
    fn feedback_solves_first_order_condition() {
        let u = UtilityPair::<f64>::default();
        let mut prev = f64::INFINITY;
        for k in -8..=8 {
            let z = 10f64.powf(k as f64 / 4.0);
            let c = feedback_c(&u, z).unwrap();
            assert!((u.u1.deriv(c) - z).abs() <= 1e-8 * z);
            assert!(c < prev);
            prev = c;
            let h = hamiltonian(&u, z).unwrap();
            assert!((u.u1.value(c) - z * c - h).abs() <= 1e-10);
        }
        assert!(feedback_c(&u, 0.0).is_err());
        assert!(hamiltonian(&u, -1.0).is_err());
    }

    #[test]
    fn brent_finds_parabola_top() {
        let (x, fx) = brent_max(|v: f64| -(v - 0.3) * (v - 0.3), 0.0, 2.0, 1.0, -0.49, 1e-8, 1e-14);
        assert!((x - 0.3).abs() < 1e-7);
        assert!(fx > -1e-13);
    }

    #[test]
    fn solve_brackets_and_respects_ceiling() {
        let prob = problem();
        let eta = HState::constant(1.0, 1.0, 1.0, 20);
        let v = prob.solve(&eta, None).unwrap();
        assert!(v.in_domain());
        assert!(v.v_lo <= v.v_hi);
        assert!(v.v_hi <= prob.ceiling() + v.opt_gap);
        assert!(v.opt_gap < 1e-6, "{v:?}");
        let j = prob.evaluate(&eta, &v.control).unwrap();
        assert_relative_eq!(j.v_lo(), v.v_lo, max_relative = 1e-12);
    }

    #[test]
    fn outside_domain_is_marked() {
        let prob = problem();
        let eta = HState::constant(0.0, 0.0, 1.0, 20);
        let v = prob.solve(&eta, None).unwrap();
        assert!(!v.in_domain());
        assert_eq!(v.v_lo, f64::NEG_INFINITY);
    }
}
