//! Value brackets, the feedback map and one HJB residual on coarse grids.

use delay_hjb::dde::ControlPath;
use delay_hjb::hjb::hjb_residual;
use delay_hjb::value::{feedback_c, hamiltonian, value_upper_bound, ValueOpts, ValueProblem, STAB_TOL};
use delay_hjb::{HState, Model};

fn coarse() -> ValueProblem<f64> {
    let opts = ValueOpts {
        dt: 0.1,
        n: 10,
        horizon: Some(6.0),
        segments: 6,
        ..ValueOpts::default()
    };
    ValueProblem::new(&Model::default_with_resolution(10), opts).unwrap()
}

#[test]
fn brackets_are_ordered_and_below_the_ceiling() {
    let prob = coarse();
    let ceiling = value_upper_bound(&prob.model.params);
    let mut last = f64::NEG_INFINITY;
    for eta0 in [0.2, 0.5, 1.0, 2.0, 5.0] {
        let est = prob.solve(&HState::constant(eta0, 1.0, 1.0, 10), None).unwrap();
        assert!(est.v_lo <= est.v_hi && est.v_hi <= ceiling, "{est:?}");
        assert!(est.v_lo >= last, "not monotone at {eta0}");
        last = est.v_lo;
    }
}

#[test]
fn solver_beats_simple_policies() {
    let prob = coarse();
    let eta = HState::constant(1.0, 1.0, 1.0, 10);
    let est = prob.solve(&eta, None).unwrap();
    for c in [0.0, 0.05, 0.2, 0.5] {
        let j = prob.evaluate(&eta, &ControlPath::constant(c, 1.0, 6).unwrap()).unwrap();
        if j.is_admissible() {
            assert!(est.v_lo >= j.v_lo() - 1e-12, "constant {c}: {} > {}", j.v_lo(), est.v_lo);
        }
    }
}

#[test]
fn negative_past_leaves_the_domain() {
    let prob = coarse();
    let est = prob.solve(&HState::constant(0.01, -50.0, 1.0, 10), None).unwrap();
    assert!(!est.in_domain());
    assert_eq!(est.v_lo, f64::NEG_INFINITY);
}

#[test]
fn feedback_solves_the_first_order_condition() {
    let u = Model::<f64>::default_scenario().utilities;
    for z in [0.02, 0.3, 1.0, 7.0, 90.0] {
        let c = feedback_c(&u, z).unwrap();
        // U₁(c) = √(c/(1+c)), U₁'(c) = ½ (c/(1+c))^{-½} (1+c)^{-2}
        let slope = 0.5 * (c / (1.0 + c)).powf(-0.5) / (1.0 + c).powi(2);
        assert!((slope - z).abs() <= 1e-9 * z);
        let h = hamiltonian(&u, z).unwrap();
        assert!((h - ((c / (1.0 + c)).sqrt() - z * c)).abs() < 1e-14);
    }
}

#[test]
fn hjb_residual_is_small_at_an_interior_point() {
    let prob = ValueProblem::new(&Model::default_with_resolution(20), ValueOpts::default()).unwrap();
    let eta = HState::from_fn(1.2, 1.0, 20, |s: f64| 0.8 + 0.2 * s);
    let res = hjb_residual(&prob, &eta, STAB_TOL).unwrap();
    assert!(res.residual < 0.1, "{res:?}");
    assert!(res.gradient.v_eta0 > 0.0);
}
