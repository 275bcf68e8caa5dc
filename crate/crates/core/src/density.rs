//! Validated qubit density matrices and the state-level operations on them.

use nalgebra::ComplexField;
use std::sync::{Arc, OnceLock};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix::{
    self, from_hadamard_diagonal, qubits_for_dim, symmetrize, ComplexMatrix, EigenBasis, SiteEmbedding, Spectral,
    MAX_DENSE_SITES,
};
use crate::pauli::PauliString;
use crate::scalar::{cr, Real};

/// Hermitian, unit-trace, positive semidefinite operator on `n_sites` qubits.
///
/// Construction symmetrizes the input, renormalizes the trace, and clips
/// eigenvalues in `[-psd_tol, 0)` to zero. The eigendecomposition computed
/// during validation is cached and reused by every spectral function.
#[derive(Debug, Clone)]
pub struct DensityMatrix<T: Real = f64> {
    n_sites: usize,
    mat: ComplexMatrix<T>,
    psd_tol: T,
    spectral: OnceLock<Arc<Spectral<T>>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(mat: ComplexMatrix<T>) -> Result<Self> {
        Self::with_tolerance(mat, T::lit(T::PSD_TOL))
    }

    pub fn with_tolerance(mat: ComplexMatrix<T>, psd_tol: T) -> Result<Self> {
        let dim = matrix::require_square(&mat)?;
        let n_sites = qubits_for_dim(dim)
            .ok_or_else(|| Error::InvalidArgument(format!("dimension {dim} is not a power of two")))?;
        check_cap(n_sites)?;
        if !matrix::is_finite(&mat) {
            return Err(Error::NonFinite);
        }
        let defect = matrix::hermitian_defect(&mat);
        if defect > T::lit(T::HERMITIAN_TOL) * matrix::max_abs(&mat).max(T::one()) {
            return Err(Error::NotHermitian { defect: defect.as_f64() });
        }
        let mut mat = symmetrize(&mat);
        let tr = matrix::trace(&mat).re;
        if (tr - T::one()).abs() > T::lit(T::TRACE_TOL) {
            return Err(Error::InvalidTrace { trace: tr.as_f64() });
        }
        mat.iter_mut().for_each(|z| *z /= tr);
        let spec = Spectral::of_hermitian(&mat)?;
        Self::finish(n_sites, mat, psd_tol, spec)
    }

    fn finish(n_sites: usize, mat: ComplexMatrix<T>, psd_tol: T, mut spec: Spectral<T>) -> Result<Self> {
        let min = spec.min_value();
        if min < -psd_tol {
            return Err(Error::NotPsd { min_eigenvalue: min.as_f64() });
        }
        let mat = if min < T::zero() {
            spec.values.iter_mut().for_each(|l| *l = l.max(T::zero()));
            let total = spec.values.iter().fold(T::zero(), |a, &b| a + b);
            spec.values.iter_mut().for_each(|l| *l /= total);
            spec.map(cr)
        } else {
            mat
        };
        let spectral = OnceLock::new();
        let _ = spectral.set(Arc::new(spec));
        Ok(DensityMatrix { n_sites, mat, psd_tol, spectral })
    }

    /// State diagonal in the Hadamard (X-product) basis with the given weights.
    /// Index bit `1` at a site means the `|->` eigenstate there.
    pub fn from_hadamard_probabilities(probs: &[T]) -> Result<Self> {
        let (n_sites, probs) = normalized_probabilities(probs)?;
        let diag: Vec<Complex<T>> = probs.iter().map(|&p| cr(p)).collect();
        let mat = from_hadamard_diagonal(&diag);
        let spec = Spectral { values: probs, basis: EigenBasis::Hadamard };
        Self::finish(n_sites, mat, T::lit(T::PSD_TOL), spec)
    }

    /// State diagonal in the computational basis.
    pub fn from_probabilities(probs: &[T]) -> Result<Self> {
        let (n_sites, probs) = normalized_probabilities(probs)?;
        let mat =
            ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(probs.len(), probs.iter().map(|&p| cr(p))));
        let spec = Spectral { values: probs, basis: EigenBasis::Computational };
        Self::finish(n_sites, mat, T::lit(T::PSD_TOL), spec)
    }

    /// `|psi><psi|` for a (not necessarily normalized) state vector.
    pub fn from_pure(psi: &[Complex<T>]) -> Result<Self> {
        let norm = psi.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt();
        if norm <= T::lit(T::SUPPORT_TOL) {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let v: Vec<Complex<T>> = psi.iter().map(|z| *z / norm).collect();
        let d = v.len();
        Self::new(ComplexMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj()))
    }

    pub fn maximally_mixed(n_sites: usize) -> Result<Self> {
        check_cap(n_sites)?;
        let d = 1usize << n_sites;
        Self::from_probabilities(&vec![T::one() / T::from_usize(d).unwrap(); d])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.mat
    }

    pub fn psd_tol(&self) -> T {
        self.psd_tol
    }

    pub fn spectral(&self) -> &Spectral<T> {
        self.spectral.get_or_init(|| Arc::new(Spectral::of_hermitian(&self.mat).expect("validated state")))
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.spectral().values
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> T {
        self.eigenvalues().iter().fold(T::zero(), |a, &l| a + l * l)
    }

    /// `Tr(rho op)`.
    pub fn expectation(&self, op: &ComplexMatrix<T>) -> Complex<T> {
        matrix::trace_product(&self.mat, op)
    }

    pub fn tensor(&self, other: &DensityMatrix<T>) -> Result<Self> {
        check_cap(self.n_sites + other.n_sites)?;
        Self::new(matrix::kron(&self.mat, &other.mat))
    }

    /// `max |rho - other|` entrywise.
    pub fn max_distance(&self, other: &DensityMatrix<T>) -> T {
        (&self.mat - &other.mat).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
    }

    /// Whether `U rho = e^{i theta} rho` for the given symmetry generator,
    /// returning the best phase and the residual `max |U rho - e^{i theta} rho|`.
    pub fn strong_symmetry_residual(&self, generator: &PauliString<T>) -> (Complex<T>, T) {
        let u_rho = generator.left_apply(&self.mat);
        let overlap = matrix::trace_product(&self.mat, &u_rho);
        let phase = if overlap.modulus() > T::lit(T::SUPPORT_TOL) { overlap / overlap.modulus() } else { cr(T::one()) };
        let resid = (u_rho - &self.mat * phase).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
        (phase, resid)
    }
}

fn normalized_probabilities<T: Real>(probs: &[T]) -> Result<(usize, Vec<T>)> {
    let n_sites = qubits_for_dim(probs.len())
        .ok_or_else(|| Error::InvalidArgument(format!("{} weights is not a power of two", probs.len())))?;
    check_cap(n_sites)?;
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite);
    }
    let total = probs.iter().fold(T::zero(), |a, &b| a + b);
    if (total - T::one()).abs() > T::lit(T::TRACE_TOL) {
        return Err(Error::InvalidTrace { trace: total.as_f64() });
    }
    Ok((n_sites, probs.iter().map(|&p| p / total).collect()))
}

pub(crate) fn check_cap(n_sites: usize) -> Result<()> {
    if n_sites > MAX_DENSE_SITES {
        return Err(Error::TooLarge { n_sites, cap: MAX_DENSE_SITES });
    }
    Ok(())
}

/// Reduced state on `keep` (sorted; qubit order of the result follows site order).
pub fn partial_trace<T: Real>(rho: &DensityMatrix<T>, keep: &[usize]) -> Result<DensityMatrix<T>> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let before = keep.len();
    keep.dedup();
    if keep.len() != before {
        return Err(Error::BadSiteSet("duplicate site in keep set".into()));
    }
    if keep.is_empty() {
        return Err(Error::BadSiteSet("keep set is empty".into()));
    }
    let emb = SiteEmbedding::new(rho.n_sites(), &keep)?;
    DensityMatrix::with_tolerance(emb.trace_out_rest(rho.matrix()), rho.psd_tol())
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy<T: Real>(rho: &DensityMatrix<T>) -> T {
    let tol = T::lit(T::SUPPORT_TOL);
    rho.eigenvalues().iter().filter(|&&l| l > tol).fold(T::zero(), |acc, &l| acc - l * l.ln())
}

/// Entropy of the marginal on `sites`; zero for the empty set.
pub fn subsystem_entropy<T: Real>(rho: &DensityMatrix<T>, sites: &[usize]) -> Result<T> {
    if sites.is_empty() {
        return Ok(T::zero());
    }
    if sites.len() == rho.n_sites() {
        return Ok(von_neumann_entropy(rho));
    }
    Ok(von_neumann_entropy(&partial_trace(rho, sites)?))
}

/// `P rho P^dagger`.
pub fn apply_pauli_string<T: Real>(rho: &DensityMatrix<T>, p: &PauliString<T>) -> Result<DensityMatrix<T>> {
    if p.n_sites() != rho.n_sites() {
        return Err(Error::DimensionMismatch { expected: rho.n_sites(), found: p.n_sites() });
    }
    DensityMatrix::with_tolerance(p.conjugate(rho.matrix()), rho.psd_tol())
}
