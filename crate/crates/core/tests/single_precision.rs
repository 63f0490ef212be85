use delay_hjb::dde::{integrate, ControlPath};
use delay_hjb::value::{hamiltonian, ValueOpts, ValueProblem};
use delay_hjb::{HState32, HState64, Model32, Model64};

#[test]
fn f32_path_tracks_f64() {
    let (m32, m64) = (Model32::default_with_resolution(50), Model64::default_with_resolution(50));
    let (e32, e64) = (HState32::constant(1.0, 0.5, 1.0, 50), HState64::constant(1.0, 0.5, 1.0, 50));
    let a = integrate(&m32, &e32, &ControlPath::constant(0.1, 3.0, 1).unwrap(), 3.0, 4e-3).unwrap();
    let b = integrate(&m64, &e64, &ControlPath::constant(0.1, 3.0, 1).unwrap(), 3.0, 4e-3).unwrap();
    for (x, y) in a.path().iter().zip(b.path()) {
        assert!((*x as f64 - y).abs() <= 1e-5 * y.abs().max(1.0));
    }
}

#[test]
fn f32_hamiltonian_and_value() {
    let (m32, m64) = (Model32::default_with_resolution(10), Model64::default_with_resolution(10));
    for z in [0.05f32, 1.0, 20.0] {
        let (h32, h64) = (hamiltonian(&m32.utilities, z).unwrap(), hamiltonian(&m64.utilities, z as f64).unwrap());
        assert!((h32 as f64 - h64).abs() < 1e-5);
    }
    let opts64 = ValueOpts { dt: 0.1, n: 10, horizon: Some(6.0), segments: 6, ..ValueOpts::default() };
    let opts32 = ValueOpts { dt: 0.1f32, n: 10, horizon: Some(6.0), segments: 6, tol: 1e-6, ..ValueOpts::default() };
    let v32 = ValueProblem::new(&m32, opts32).unwrap().solve(&HState32::constant(1.0, 1.0, 1.0, 10), None).unwrap();
    let v64 = ValueProblem::new(&m64, opts64).unwrap().solve(&HState64::constant(1.0, 1.0, 1.0, 10), None).unwrap();
    assert!((v32.v_lo as f64 - v64.v_lo).abs() < 1e-3, "{} vs {}", v32.v_lo, v64.v_lo);
}
