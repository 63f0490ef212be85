//! Randomized identity and inequality checks for the operators on `H` and for the
//! lifted dynamics.

use rand::Rng;
use rayon::prelude::*;

use crate::dde::ControlPath;
use crate::lift::{
    apply_a, apply_adjoint_semigroup, apply_ainv, apply_astar, apply_semigroup, counterexample_sequence,
    dom_tol, equivalence_error, gronwall_stability, h_norm, inner, lip_a_constant, norm_minus1,
};
use crate::model::kernel::Kernel;
use crate::model::nonlinearity::{delay_integral, Nonlinearity};
use crate::model::Model;
use crate::report::{CheckRow, ProbeReport};
use crate::sampling::{random_hpp_state, random_rough_state, seeded_rng, Boundary, SmoothState};
use crate::scalar::Real;
use crate::state::HState;

/// Sample sizes for the operator suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorCheckOpts {
    pub samples: usize,
    pub seed: u64,
}

impl Default for OperatorCheckOpts {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 2011,
        }
    }
}

fn max_abs_diff<T: Real>(a: &HState<T>, b: &HState<T>) -> T {
    a.eta1
        .iter()
        .zip(&b.eta1)
        .map(|(x, y)| (*x - *y).abs())
        .fold((a.eta0 - b.eta0).abs(), T::max)
}

fn f(v: impl Real) -> f64 {
    v.as_f64()
}

/// `A(A⁻¹η) = η` for smooth η, and `A⁻¹(Aη) = η` on `D(A)`, within `dom_tol`.
pub fn inverse_identity<T: Real>(r: T, delay: T, n: usize, opts: OperatorCheckOpts) -> Vec<ProbeReport> {
    let mut rng = seeded_rng(opts.seed, 11);
    let mut left = Vec::with_capacity(opts.samples);
    let mut right = Vec::with_capacity(opts.samples);
    for id in 0..opts.samples {
        let eta: HState<T> = SmoothState::random(&mut rng, Boundary::Free).sample(delay, n);
        let tol = dom_tol(&eta);
        let inv = apply_ainv(r, &eta);
        let row = if !inv.in_domain_a {
            CheckRow::failed("ops.a_ainv_identity", id, "A^-1 eta left D(A)".into())
        } else {
            match apply_a(r, &inv.state) {
                Ok(back) => {
                    let e = max_abs_diff(&back.state, &eta);
                    CheckRow::new("ops.a_ainv_identity", id, format!("smooth sample {id}"), f(h_norm(&back.state)), f(h_norm(&eta)), f(e), f(tol))
                }
                Err(err) => CheckRow::failed("ops.a_ainv_identity", id, err.to_string()),
            }
        };
        left.push(row);

        let zeta: HState<T> = SmoothState::random(&mut rng, Boundary::DomainA).sample(delay, n);
        let row = match apply_a(r, &zeta) {
            Ok(a) => {
                let back = apply_ainv(r, &a.state).state;
                let e = max_abs_diff(&back, &zeta);
                CheckRow::new("ops.ainv_a_identity", id, format!("D(A) sample {id}"), f(h_norm(&back)), f(h_norm(&zeta)), f(e), f(dom_tol(&zeta)))
            }
            Err(err) => CheckRow::failed("ops.ainv_a_identity", id, err.to_string()),
        };
        right.push(row);
    }
    vec![
        ProbeReport::from_rows("ops.a_ainv_identity", left),
        ProbeReport::from_rows("ops.ainv_a_identity", right),
    ]
}

/// `|⟨Aζ, η⟩ - ⟨ζ, A*η⟩|` for `ζ ∈ D(A)`, `η ∈ D(A*)` given analytically.
pub fn adjoint_pairing_error<T: Real>(r: T, delay: T, n: usize, zeta: &SmoothState, eta: &SmoothState) -> crate::Result<(T, T)> {
    let z: HState<T> = zeta.sample(delay, n);
    let e: HState<T> = eta.sample(delay, n);
    let lhs = inner(&apply_a(r, &z)?.state, &e);
    let rhs = inner(&z, &apply_astar(r, &e)?.state);
    let scale = z.scale() * e.scale();
    Ok(((lhs - rhs).abs(), scale))
}

/// Adjoint identity at resolution `n` with tolerance `1e-3 · scale`, plus the error
/// ratio between `n` and `2n` on the first `convergence_samples` pairs.
pub fn adjoint_identity<T: Real>(r: T, delay: T, n: usize, opts: OperatorCheckOpts) -> Vec<ProbeReport> {
    let mut rng = seeded_rng(opts.seed, 12);
    let pairs: Vec<_> = (0..opts.samples)
        .map(|_| {
            (
                SmoothState::random(&mut rng, Boundary::DomainA),
                SmoothState::random(&mut rng, Boundary::DomainAstar),
            )
        })
        .collect();
    let rows: Vec<CheckRow> = pairs
        .par_iter()
        .enumerate()
        .map(|(id, (z, e))| match adjoint_pairing_error(r, delay, n, z, e) {
            Ok((err, scale)) => CheckRow::new("ops.adjoint_pairing", id, format!("pair {id}"), f(err), 0.0, f(err), 1e-3 * f(scale)),
            Err(err) => CheckRow::failed("ops.adjoint_pairing", id, err.to_string()),
        })
        .collect();
    let conv = pairs.len().min(100);
    let worst = |m: usize| -> f64 {
        pairs[..conv]
            .iter()
            .map(|(z, e)| adjoint_pairing_error::<T>(r, delay, m, z, e).map_or(f64::INFINITY, |(err, s)| f(err / s)))
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (worst(n), worst(2 * n));
    let ratio = coarse / fine;
    let conv_row = CheckRow::new(
        "ops.adjoint_convergence",
        0,
        format!("worst scaled error at N={n} vs N={}", 2 * n),
        coarse,
        fine,
        (1.8 - ratio).max(0.0),
        0.0,
    );
    vec![
        ProbeReport::from_rows("ops.adjoint_pairing", rows),
        ProbeReport::single(conv_row),
    ]
}

/// `‖S(t)η‖² ≤ (3+2T) e^{2rt} ‖η‖² + 1e-9` for random η and `t ∈ [0, 2T]`.
pub fn semigroup_bound<T: Real>(r: T, delay: T, n: usize, opts: OperatorCheckOpts) -> ProbeReport {
    let mut rng = seeded_rng(opts.seed, 13);
    let m = T::lit(3.0) + T::lit(2.0) * delay;
    let rows = (0..opts.samples)
        .map(|id| {
            let eta: HState<T> = if id % 2 == 0 {
                SmoothState::random(&mut rng, Boundary::Free).sample(delay, n)
            } else {
                random_rough_state(&mut rng, delay, n)
            };
            let t = delay * T::lit(rng.gen_range(0.0..2.0));
            let s = apply_semigroup(r, t, &eta).expect("t >= 0").state;
            let lhs = h_norm(&s).powi(2);
            let rhs = m * (T::lit(2.0) * r * t).exp() * h_norm(&eta).powi(2);
            CheckRow::le("ops.semigroup_bound", id, format!("t = {t}"), f(lhs), f(rhs), 1e-9)
        })
        .collect();
    ProbeReport::from_rows("ops.semigroup_bound", rows)
}

/// `S(s)S(t) = S(s+t)` for grid-aligned `s, t`, and `S*(t)` duality.
pub fn semigroup_identities<T: Real>(r: T, delay: T, n: usize, opts: OperatorCheckOpts) -> Vec<ProbeReport> {
    let mut rng = seeded_rng(opts.seed, 14);
    let count = (opts.samples / 5).max(1);
    let dxi = delay / T::from_usize_lossy(n);
    let mut law = Vec::with_capacity(count);
    let mut duality = Vec::with_capacity(count);
    for id in 0..count {
        let eta: HState<T> = SmoothState::random(&mut rng, Boundary::Free).sample(delay, n);
        let (i, j) = (rng.gen_range(0..=2 * n), rng.gen_range(0..=2 * n));
        let (s, t) = (dxi * T::from_usize_lossy(i), dxi * T::from_usize_lossy(j));
        let two = apply_semigroup(r, s, &apply_semigroup(r, t, &eta).expect("t >= 0").state).expect("s >= 0").state;
        let one = apply_semigroup(r, s + t, &eta).expect("s + t >= 0").state;
        let scale = one.scale().max(two.scale());
        law.push(CheckRow::new(
            "ops.semigroup_law",
            id,
            format!("s = {s}, t = {t}"),
            f(h_norm(&two)),
            f(h_norm(&one)),
            f(max_abs_diff(&two, &one)),
            f(T::lit(1e3) * T::epsilon() * scale),
        ));

        let zeta: HState<T> = SmoothState::random(&mut rng, Boundary::Free).sample(delay, n);
        let tt = delay * T::lit(rng.gen_range(0.0..1.0));
        let lhs = inner(&apply_semigroup(r, tt, &zeta).expect("t >= 0").state, &eta);
        let rhs = inner(&zeta, &apply_adjoint_semigroup(r, tt, &eta).expect("t <= T").state);
        // the shifted state jumps where history meets the present, a first-order effect
        let tol = T::lit(10.0) * dxi * zeta.scale() * eta.scale() * (r * tt).exp();
        duality.push(CheckRow::new("ops.adjoint_semigroup_duality", id, format!("t = {tt}"), f(lhs), f(rhs), f((lhs - rhs).abs()), f(tol)));
    }
    vec![
        ProbeReport::from_rows("ops.semigroup_law", law),
        ProbeReport::from_rows("ops.adjoint_semigroup_duality", duality),
    ]
}

/// `|η₀| + |∫aη₁| ≤ C_a ‖η‖₋₁ (1 + 1e-6)` on random η; a single failing row when the
/// kernel admits no constant.
pub fn lipschitz_inequality<T: Real>(r: T, kernel: &Kernel<T>, opts: OperatorCheckOpts) -> ProbeReport {
    let ca = match lip_a_constant(r, kernel) {
        Ok(c) => c,
        Err(e) => {
            return ProbeReport::single(CheckRow::failed(
                "ops.iuiu_inequality",
                0,
                format!("no constant C_a: {e}; see ops.iuiu_counterexample"),
            ))
        }
    };
    let mut rng = seeded_rng(opts.seed, 15);
    let (delay, n) = (kernel.delay(), kernel.n());
    let rows = (0..opts.samples)
        .map(|id| {
            let eta: HState<T> = if id % 2 == 0 {
                SmoothState::random(&mut rng, Boundary::Free).sample(delay, n)
            } else {
                random_rough_state(&mut rng, delay, n)
            };
            let lhs = eta.eta0.abs() + delay_integral(kernel, &eta.eta1).abs();
            let rhs = ca * norm_minus1(r, &eta) * (T::one() + T::lit(1e-6));
            CheckRow::le("ops.iuiu_inequality", id, format!("sample {id}"), f(lhs), f(rhs), 0.0)
        })
        .collect();
    ProbeReport::from_rows("ops.iuiu_inequality", rows)
}

/// Resolvable indices `1..=max_n` of the normalized indicator sequence.
fn counterexample_ratios<T: Real>(kernel: &Kernel<T>, max_n: usize) -> Vec<(usize, T, T)> {
    (1..=max_n)
        .filter_map(|k| counterexample_sequence(kernel, k).ok().map(|(m, nm)| (k, m, nm)))
        .collect()
}

/// For the configured kernel, `pairing / ‖ηⁿ‖₋₁` along `ηⁿ = (0, n I_{[-T,-T+1/n]})` must
/// stay below `C_a`; a kernel with `a(-T) ≠ 0` has no `C_a` and fails here.
pub fn kernel_counterexample<T: Real>(r: T, kernel: &Kernel<T>) -> ProbeReport {
    let seq = counterexample_ratios(kernel, 8);
    let rows = match lip_a_constant(r, kernel) {
        Ok(ca) => seq
            .iter()
            .map(|&(k, m, nm)| CheckRow::le("ops.iuiu_counterexample", k, format!("n = {k}"), f(m / nm), f(ca), 0.0))
            .collect(),
        Err(_) => {
            let first = seq.first().map_or(f64::NAN, |&(_, m, nm)| f(m / nm));
            seq.iter()
                .map(|&(k, m, nm)| {
                    let mut row = CheckRow::failed(
                        "ops.iuiu_counterexample",
                        k,
                        format!("a(-T) != 0: ratio at n = {k} is {} times the n = 1 ratio", f(m / nm) / first),
                    );
                    row.lhs = f(m / nm);
                    row
                })
                .collect()
        }
    };
    ProbeReport::from_rows("ops.iuiu_counterexample", rows)
}

/// The a ≡ 1 sequence: pairing stays 1, `‖ηⁿ‖₋₁` decreases, and the ratio at `n = 8`
/// is at least twice the ratio at `n = 1`.
pub fn constant_kernel_counterexample<T: Real>(delay: T, n: usize) -> Vec<ProbeReport> {
    let ones = Kernel::constant(T::one(), delay, n);
    let seq = counterexample_ratios(&ones, 8);
    let mass_rows = seq
        .iter()
        .map(|&(k, m, _)| CheckRow::new("counterexample.unit_pairing", k, format!("n = {k}"), f(m), 1.0, (f(m) - 1.0).abs(), 1e-9))
        .collect();
    let decay_rows = seq
        .windows(2)
        .map(|w| CheckRow::le("counterexample.norm_decreasing", w[1].0, format!("n = {}", w[1].0), f(w[1].2), f(w[0].2), 0.0))
        .collect();
    let growth = match (seq.first(), seq.iter().find(|s| s.0 == 8)) {
        (Some(&(_, m1, n1)), Some(&(_, m8, n8))) => {
            let g = f((m8 / n8) / (m1 / n1));
            CheckRow::new("counterexample.ratio_growth", 8, "ratio(8) / ratio(1)".into(), g, 2.0, (2.0 - g).max(0.0), 0.0)
        }
        _ => CheckRow::failed("counterexample.ratio_growth", 8, "n = 8 not resolvable on this grid".into()),
    };
    vec![
        ProbeReport::from_rows("counterexample.unit_pairing", mass_rows),
        ProbeReport::from_rows("counterexample.norm_decreasing", decay_rows),
        ProbeReport::single(growth),
    ]
}

/// Full operator suite on the model's grid.
pub fn operator_suite<T: Real>(model: &Model<T>, opts: OperatorCheckOpts) -> Vec<ProbeReport> {
    let (r, delay, n) = (model.params.r, model.delay(), model.n());
    let mut out = inverse_identity(r, delay, n, opts);
    out.extend(adjoint_identity(r, delay, n, opts));
    out.push(semigroup_bound(r, delay, n, opts));
    out.extend(semigroup_identities(r, delay, n, opts));
    out.push(lipschitz_inequality(r, &model.kernel, opts));
    out.push(kernel_counterexample(r, &model.kernel));
    out.extend(constant_kernel_counterexample(delay, n));
    out
}

/// Equivalence of the lifted and delay formulations on `[0, 3T]`: the distance at
/// `(dt, dxi)` must be at most `tol` and shrink by `min_ratio` when both are halved.
pub fn equivalence_check<T: Real>(
    model: &Model<T>,
    eta_fn: &dyn Fn(T, usize) -> HState<T>,
    control: &ControlPath<T>,
    dt: T,
    tol: f64,
    min_ratio: f64,
) -> Vec<ProbeReport> {
    let horizon = T::lit(3.0) * model.delay();
    let n = model.n();
    let run = |m: &Model<T>, nn: usize, step: T| equivalence_error(m, &eta_fn(m.delay(), nn), control, horizon, step).map(|(e, _)| e);
    let coarse = run(model, n, dt);
    let fine = model
        .at_resolution(2 * n)
        .and_then(|m| run(&m, 2 * n, dt * T::lit(0.5)));
    match (coarse, fine) {
        (Ok(c), Ok(fe)) => {
            let ratio = f(c / fe);
            vec![
                ProbeReport::single(CheckRow::new("lift.equivalence", 0, format!("N = {n}, dt = {dt}"), f(c), 0.0, f(c), tol)),
                ProbeReport::single(CheckRow::new(
                    "lift.equivalence_refinement",
                    0,
                    "distance ratio under (dt, dxi) halving".into(),
                    f(c),
                    f(fe),
                    (min_ratio - ratio).max(0.0),
                    0.0,
                )),
            ]
        }
        (Err(e), _) | (_, Err(e)) => vec![ProbeReport::single(CheckRow::failed("lift.equivalence", 0, e.to_string()))],
    }
}

/// Gronwall ratio on random pairs in `H₊₊`, against `K e^{KT}`; both the `‖·‖₋₁`
/// ratio and the present-component corollary are checked.
pub fn gronwall_check<T: Real>(model: &Model<T>, pairs: usize, dt: T, seed: u64) -> Vec<ProbeReport> {
    let mut rng = seeded_rng(seed, 16);
    let (delay, n) = (model.delay(), model.n());
    let inputs: Vec<_> = (0..pairs)
        .map(|_| (random_hpp_state::<T>(&mut rng, delay, n), random_hpp_state::<T>(&mut rng, delay, n)))
        .collect();
    let results: Vec<_> = inputs
        .par_iter()
        .map(|(a, b)| gronwall_stability(model, a, b, dt))
        .collect();
    let mut ratio_rows = Vec::new();
    let mut present_rows = Vec::new();
    for (id, res) in results.into_iter().enumerate() {
        match res {
            Ok(g) => {
                ratio_rows.push(CheckRow::le("lift.gronwall_ratio", id, format!("pair {id}"), f(g.ratio), f(g.bound), 0.0));
                present_rows.push(CheckRow::le("lift.gronwall_present", id, format!("pair {id}"), f(g.present_ratio), f(g.bound), 0.0));
            }
            Err(e) => ratio_rows.push(CheckRow::failed("lift.gronwall_ratio", id, e.to_string())),
        }
    }
    vec![
        ProbeReport::from_rows("lift.gronwall_ratio", ratio_rows),
        ProbeReport::from_rows("lift.gronwall_present", present_rows),
    ]
}

/// With `f₀ ≡ 0` the `‖·‖₋₁` ratio is the semigroup's: at most `√(3+2T) e^{rT}`.
pub fn gronwall_semigroup_check<T: Real>(model: &Model<T>, pairs: usize, dt: T, seed: u64) -> ProbeReport {
    let linear = Model::new_unchecked(model.params, model.kernel.clone(), Nonlinearity::zero(), model.utilities);
    let p = &model.params;
    let bound = f((T::lit(3.0) + T::lit(2.0) * p.delay).sqrt() * (p.r * p.delay).exp());
    let mut rng = seeded_rng(seed, 17);
    let rows = (0..pairs)
        .map(|id| {
            let a = random_hpp_state::<T>(&mut rng, p.delay, model.n());
            let b = random_hpp_state::<T>(&mut rng, p.delay, model.n());
            match gronwall_stability(&linear, &a, &b, dt) {
                Ok(g) => CheckRow::le("lift.gronwall_linear", id, format!("pair {id}"), f(g.ratio), bound, 1e-6 * bound),
                Err(e) => CheckRow::failed("lift.gronwall_linear", id, e.to_string()),
            }
        })
        .collect();
    ProbeReport::from_rows("lift.gronwall_linear", rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> OperatorCheckOpts {
        OperatorCheckOpts { samples: 40, seed: 3 }
    }

    #[test]
    fn operator_suite_passes_on_defaults() {
        let m = Model::<f64>::default_with_resolution(100);
        for rep in operator_suite(&m, small()) {
            assert!(rep.pass, "{rep}");
        }
    }

    #[test]
    fn constant_kernel_breaks_the_lipschitz_checks() {
        let k = Kernel::constant(1.0, 1.0, 100);
        assert!(!lipschitz_inequality(0.05, &k, small()).pass);
        let rep = kernel_counterexample(0.05, &k);
        assert!(!rep.pass);
        assert!(rep.witnesses[0].input.contains("a(-T) != 0"));
    }
}
