use mixedorder_core::{Boundary, LatticeSpec};
use mixedorder_statmech::fdw::tension_and_phase;
use mixedorder_statmech::{fdw_weight, replica_enumerate, villain_fn_coefficients, ReplicaSpinModel};
use num_complex::Complex64;
use proptest::prelude::*;

fn config(bits: u8) -> Vec<i8> {
    (0..4).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cyclic_weights_are_real_and_phase_free(
        p in 0.0f64..=1.0,
        theta in 0.0f64..std::f64::consts::TAU,
        t in 2usize..=4,
        raw in proptest::collection::vec(0u8..16, 4),
    ) {
        let ds: Vec<Vec<i8>> = raw[..t].iter().map(|&b| config(b)).collect();
        let (beta, _) = tension_and_phase(p, theta).unwrap();
        let mut w = Complex64::new(1.0, 0.0);
        let mut walls = 0;
        for k in 0..t {
            let (a, b) = (&ds[k], &ds[(k + 1) % t]);
            w *= fdw_weight(p, theta, a, b).unwrap();
            walls += a.iter().zip(b).filter(|(x, y)| x != y).count();
        }
        prop_assert!(w.im.abs() < 1e-12);
        prop_assert!((w.re - beta.powi(walls as i32)).abs() < 1e-12);
    }

    #[test]
    fn replica_phase_is_a_unit_modulus(p in 0.0f64..=1.0, theta in -10.0f64..10.0) {
        let (beta, alpha) = tension_and_phase(p, theta).unwrap();
        prop_assert!((alpha.norm() - 1.0).abs() < 1e-12);
        prop_assert!((beta - (1.0 - 4.0 * p * (1.0 - p) * theta.sin().powi(2)).max(0.0).sqrt()).abs() < 1e-7);
    }

    #[test]
    fn correlators_are_bounded_and_decay_with_weaker_coupling(
        lx in 2usize..=3, ly in 2usize..=3, t in 2usize..=3, th in 0.05f64..0.9,
    ) {
        let lat = LatticeSpec::square(lx, ly, Boundary::Open);
        let n = lat.n_sites();
        prop_assume!((t - 1) * n <= 18);
        let ins = [(0, 0), (0, n - 1)];
        let strong = replica_enumerate(&ReplicaSpinModel::new(t, lat, th).unwrap(), Some(&ins)).unwrap();
        let weak = replica_enumerate(&ReplicaSpinModel::new(t, lat, 0.5 * th).unwrap(), Some(&ins)).unwrap();
        // Ferromagnetic couplings: Griffiths inequalities.
        prop_assert!(strong > 0.0 && strong <= 1.0 + 1e-12);
        prop_assert!(weak <= strong + 1e-12);
    }

    #[test]
    fn fn_coefficients_are_positive_and_decreasing(alpha in 0.02f64..8.0) {
        let f = villain_fn_coefficients(alpha, 12).unwrap();
        prop_assert!(f.iter().all(|&x| x > 0.0));
        prop_assert!(f.windows(2).all(|w| w[1] <= w[0]));
    }
}
