use mixedorder_core::diagnostics::replicated_fidelity_normalized;
use mixedorder_core::models::state_decohered_ising;
use mixedorder_core::{Boundary, LatticeSpec, Pauli, PauliString, Representation, SiteOperator};
use mixedorder_statmech::replica::replica_histogram;
use mixedorder_statmech::{replica_enumerate, villain_fn_coefficients, ReplicaSpinModel};

fn zz(n: usize, x: usize, y: usize) -> PauliString {
    PauliString::new(n, vec![SiteOperator::pauli(x, Pauli::Z), SiteOperator::pauli(y, Pauli::Z)]).unwrap()
}

#[test]
fn three_replica_insertion_is_the_normalized_replicated_fidelity() {
    for (lx, ly) in [(2, 2), (2, 3)] {
        let lat = LatticeSpec::square(lx, ly, Boundary::Open);
        let n = lat.n_sites();
        for p in [0.05, 0.1, 0.2] {
            let rho = state_decohered_ising::<f64>(&lat, p, Representation::Dense).unwrap().to_density().unwrap();
            let model = ReplicaSpinModel::from_decoherence(3, lat, p).unwrap();
            for (x, y) in [(0, n - 1), (0, 1), (1, n - 2)] {
                let quantum = replicated_fidelity_normalized(&rho, &zz(n, x, y), 1, 1).unwrap();
                let classical = replica_enumerate(&model, Some(&[(0, x), (0, y)])).unwrap();
                assert!((quantum - classical).abs() < 1e-10, "{lx}x{ly} p={p} ({x},{y}): {quantum} vs {classical}");
            }
        }
    }
}

#[test]
fn partition_sum_is_the_replica_trace() {
    // Tr ρ^t = 2^{n(1−t)} ((1−p)/cosh τ)^{tE} Z_t.
    let lat = LatticeSpec::square(2, 3, Boundary::Open);
    let (n, e) = (lat.n_sites() as i32, lat.bonds().len() as i32);
    for p in [0.05, 0.2, 0.35] {
        let rho = state_decohered_ising::<f64>(&lat, p, Representation::Dense).unwrap().to_density().unwrap();
        for t in 2..=4i32 {
            let trace: f64 = rho.eigenvalues().iter().map(|l| l.max(0.0).powi(t)).sum();
            let model = ReplicaSpinModel::from_decoherence(t as usize, lat, p).unwrap();
            let z = replica_enumerate(&model, None).unwrap();
            let pref = 2f64.powi(n * (1 - t)) * ((1.0 - p) / model.tau().cosh()).powi(t * e);
            assert!((pref * z / trace - 1.0).abs() < 1e-12, "p={p} t={t}");
        }
    }
}

/// Plain Ising enumeration with weight e^{K Σσσ}.
fn ising_partition(lat: &LatticeSpec, k: f64, pair: Option<(usize, usize)>) -> f64 {
    let n = lat.n_sites();
    let bonds = lat.bonds();
    let (mut z, mut c) = (0.0, 0.0);
    for conf in 0u32..1 << n {
        let s = |i: usize| if conf >> i & 1 == 1 { -1.0 } else { 1.0 };
        let w = (k * bonds.iter().map(|&(i, j)| s(i) * s(j)).sum::<f64>()).exp();
        z += w;
        if let Some((x, y)) = pair {
            c += w * s(x) * s(y);
        }
    }
    if pair.is_some() {
        c / z
    } else {
        z
    }
}

#[test]
fn two_replicas_are_ising_at_doubled_coupling() {
    for lat in [LatticeSpec::square(3, 3, Boundary::Periodic), LatticeSpec::square(4, 3, Boundary::Open)] {
        for th in [0.1, 0.3, 0.6] {
            let model = ReplicaSpinModel::new(2, lat, th).unwrap();
            let k = 2.0 * model.tau();
            let z = replica_enumerate(&model, None).unwrap();
            assert!((z / ising_partition(&lat, k, None) - 1.0).abs() < 1e-12);
            let c = replica_enumerate(&model, Some(&[(0, 0), (0, 4)])).unwrap();
            assert!((c - ising_partition(&lat, k, Some((0, 4)))).abs() < 1e-12);
        }
    }
}

#[test]
fn energy_histogram_counts_all_configurations() {
    let model = ReplicaSpinModel::new(3, LatticeSpec::square(3, 3, Boundary::Periodic), 0.2).unwrap();
    let h = replica_histogram(&model, None).unwrap();
    assert_eq!(h.counts.iter().sum::<u64>(), 1 << 18);
    // Ground states: all replicas uniform, 2^{t−1} of them.
    assert_eq!(*h.counts.last().unwrap(), 4);
}

/// `f_n / f_0` from the convolution `Σ_k p_k p_{n−k}`, `p_k ∝ e^{−αk²}`.
fn brute_force_fn(alpha: f64, n: i64) -> f64 {
    let conv = |n: i64| -> f64 { (-300i64..=300).map(|k| (-alpha * (k * k + (n - k) * (n - k)) as f64).exp()).sum() };
    conv(n) / conv(0)
}

#[test]
fn theta_coefficients_match_fourier_coefficients() {
    for alpha in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let f = villain_fn_coefficients(alpha, 10).unwrap();
        assert_eq!(f[0], 1.0);
        for n in 1..=10i64 {
            let b = brute_force_fn(alpha, n);
            assert!((f[n as usize] / b - 1.0).abs() < 1e-8, "alpha {alpha} n {n}");
            assert!((brute_force_fn(alpha, -n) / b - 1.0).abs() < 1e-12);
        }
    }
    let f = villain_fn_coefficients(5.0, 1).unwrap();
    assert!((f[1] - brute_force_fn(5.0, 1)).abs() < 1e-10);
}

#[test]
fn small_alpha_is_the_villain_gaussian() {
    let alpha = 0.1;
    let f = villain_fn_coefficients(alpha, 5).unwrap();
    for (n, fv) in f.iter().enumerate() {
        let g = (-0.5 * alpha * (n * n) as f64).exp();
        assert!((fv / g - 1.0).abs() < 1e-6);
    }
}
