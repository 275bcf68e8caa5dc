//! Seeded random states, unitaries and channels for property suites.

use nalgebra::ComplexField;
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::{KrausChannel, LocalKraus};
use crate::density::DensityMatrix;
use crate::matrix::ComplexMatrix;
use crate::scalar::Real;

fn gaussian<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(T::lit(re), T::lit(im))
    })
}

/// Unnormalized `G G^dagger` with `G` a `dim x rank` Gaussian matrix.
pub fn random_psd<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> ComplexMatrix<T> {
    let g = gaussian::<T, R>(dim, rank, rng);
    &g * g.adjoint()
}

/// Induced-measure random state of the given rank.
pub fn random_density<T: Real, R: Rng + ?Sized>(n_sites: usize, rank: usize, rng: &mut R) -> DensityMatrix<T> {
    let m = random_psd::<T, R>(1 << n_sites, rank.max(1), rng);
    let tr = crate::matrix::trace(&m);
    DensityMatrix::new(m / tr).expect("Gram matrix is a valid state")
}

/// Haar-random unitary via QR with phase-corrected R.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix<T> {
    let qr = gaussian::<T, R>(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let n = d.modulus();
        if n > T::zero() {
            let ph = d / n;
            let mut col = q.column_mut(j);
            col *= ph;
        }
    }
    q
}

/// Random channel on `support`: `n_kraus` operators from a Haar isometry.
pub fn random_local_channel<T: Real, R: Rng + ?Sized>(
    n_sites: usize,
    support: &[usize],
    n_kraus: usize,
    rng: &mut R,
) -> KrausChannel<T> {
    let k = 1usize << support.len();
    let u = random_unitary::<T, R>(k * n_kraus, rng);
    let ops = (0..n_kraus).map(|i| u.view((i * k, 0), (k, k)).into_owned()).collect();
    let local = LocalKraus::new(support.to_vec(), ops).expect("isometry blocks are complete");
    KrausChannel::from_factors(n_sites, vec![local]).expect("support in range")
}
