use proptest::prelude::*;

use delay_hjb::dde::{integrate, ControlPath};
use delay_hjb::lift::{apply_a, apply_ainv, apply_semigroup, h_norm};
use delay_hjb::value::hamiltonian;
use delay_hjb::{HState, Model};

const N: usize = 40;

fn state() -> impl Strategy<Value = HState<f64>> {
    (-2.0..2.0f64, prop::collection::vec(-1.0..1.0f64, 4)).prop_map(|(eta0, a)| {
        HState::from_fn(eta0, 1.0, N, move |s: f64| {
            a.iter()
                .enumerate()
                .map(|(k, c)| c * (std::f64::consts::PI * k as f64 * s).cos() / (1 + k * k) as f64)
                .sum::<f64>()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law_on_grid_times(eta in state(), i in 0usize..60, j in 0usize..60) {
        let dxi = 1.0 / N as f64;
        let (s, t) = (dxi * i as f64, dxi * j as f64);
        let two = apply_semigroup(0.05, s, &apply_semigroup(0.05, t, &eta).unwrap().state).unwrap().state;
        let one = apply_semigroup(0.05, s + t, &eta).unwrap().state;
        prop_assert!(h_norm(&two.sub(&one)) <= 1e-12 * (1.0 + h_norm(&eta)) * (0.1 * (s + t)).exp());
    }

    #[test]
    fn a_inverts_ainv(eta in state()) {
        let back = apply_a(0.05, &apply_ainv(0.05, &eta).state).unwrap().state;
        // one-sided derivatives at the ends are first order
        prop_assert!(h_norm(&back.sub(&eta)) <= 0.05 * (1.0 + h_norm(&eta)));
    }

    #[test]
    fn fenchel_young(c in 0.0..100.0f64, lz in -2.0..2.0f64) {
        let u = Model::<f64>::default_with_resolution(10).utilities;
        let z = 10f64.powf(lz);
        prop_assert!((c / (1.0 + c)).sqrt() - z * c <= hamiltonian(&u, z).unwrap() + 1e-12);
    }

    #[test]
    fn more_consumption_lowers_the_path(c in 0.0..0.5f64, d in 0.0..0.5f64, eta0 in 0.2..3.0f64) {
        let m = Model::<f64>::default_with_resolution(20);
        let eta = HState::constant(eta0, 1.0, 1.0, 20);
        let lo = integrate(&m, &eta, &ControlPath::constant(c + d, 3.0, 1).unwrap(), 3.0, 0.01).unwrap();
        let hi = integrate(&m, &eta, &ControlPath::constant(c, 3.0, 1).unwrap(), 3.0, 0.01).unwrap();
        for (a, b) in lo.path().iter().zip(hi.path()) {
            prop_assert!(a <= b);
        }
    }
}
