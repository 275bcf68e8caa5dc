//! Dense complex matrices and the Hermitian matrix calculus built on them.
//!
//! Every matrix function goes through a [`Spectral`] decomposition. Inputs are
//! symmetrized first, and two structured bases are recognized before falling
//! back to a dense eigensolve: matrices already diagonal in the computational
//! basis, and matrices diagonal in the Hadamard (X-product) basis. Most of the
//! symmetric states in this crate live in the latter, which keeps 12-qubit
//! diagnostics tractable.

use nalgebra::ComplexField;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cr, Real};

/// Dense complex matrix, column-major storage.
pub type ComplexMatrix<T = f64> = DMatrix<Complex<T>>;

/// Largest register handled by dense routines.
pub const MAX_DENSE_SITES: usize = 14;

pub fn identity<T: Real>(dim: usize) -> ComplexMatrix<T> {
    ComplexMatrix::identity(dim, dim)
}

pub fn max_abs<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(z.modulus()))
}

/// `max |m - m^dagger|` over all entries.
pub fn hermitian_defect<T: Real>(m: &ComplexMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for j in 0..n {
        for i in 0..=j {
            let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub fn is_finite<T: Real>(m: &ComplexMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(m + m^dagger) / 2`.
pub fn symmetrize<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let half = T::lit(0.5);
    let n = m.nrows();
    let mut out = m.clone();
    for j in 0..n {
        for i in 0..=j {
            let v = (m[(i, j)] + m[(j, i)].conj()) * half;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

pub fn trace<T: Real>(m: &ComplexMatrix<T>) -> Complex<T> {
    (0..m.nrows().min(m.ncols())).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + m[(i, i)])
}

/// `Tr(a b)` without forming the product.
pub fn trace_product<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Complex<T> {
    let n = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    a.kronecker(b)
}

pub(crate) fn require_square<T: Real>(m: &ComplexMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Qubit count of a power-of-two dimension.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}

fn fwht_in_place<T: Real>(v: &mut [Complex<T>]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = v[i];
                let b = v[i + h];
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `H m H / dim` with `H` the unnormalized Walsh-Hadamard matrix, i.e. the
/// conjugation of `m` by the orthonormal global Hadamard `H^{(x)n}`.
pub fn hadamard_conjugate<T: Real>(m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let d = m.nrows();
    debug_assert!(d.is_power_of_two());
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        fwht_in_place(col.as_mut_slice());
    }
    let data = out.as_mut_slice();
    let mut h = 1;
    while h < d {
        for start in (0..d).step_by(2 * h) {
            for j in start..start + h {
                let (left, right) = data.split_at_mut((j + h) * d);
                let a = &mut left[j * d..(j + 1) * d];
                let b = &mut right[..d];
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    let (p, q) = (*x, *y);
                    *x = p + q;
                    *y = p - q;
                }
            }
        }
        h *= 2;
    }
    let scale = T::one() / T::from_usize(d).unwrap();
    out.iter_mut().for_each(|z| *z *= scale);
    out
}

/// Dense matrix `sum_k f_k |h_k><h_k|` for the normalized Hadamard basis
/// vectors `|h_k>`; entry `(i, j)` depends only on `i xor j`.
pub fn from_hadamard_diagonal<T: Real>(diag: &[Complex<T>]) -> ComplexMatrix<T> {
    let d = diag.len();
    let mut g = diag.to_vec();
    fwht_in_place(&mut g);
    let scale = T::one() / T::from_usize(d).unwrap();
    ComplexMatrix::from_fn(d, d, |i, j| g[i ^ j] * scale)
}

/// Dense Hermitian eigendecomposition. The Householder reduction can produce
/// NaN on some exactly degenerate inputs; those are retried in a scrambled
/// unitary frame `W m W^dagger` and rotated back.
pub fn hermitian_eigen<T: Real>(m: ComplexMatrix<T>) -> Result<(Vec<T>, ComplexMatrix<T>)> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|l| l.is_finite()) && is_finite(&eig.eigenvectors) {
        return Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors));
    }
    let d = m.nrows();
    for attempt in 1..=3 {
        let w = scrambling_unitary::<T>(d, attempt);
        let eig = SymmetricEigen::new(symmetrize(&(&w * &m * w.adjoint())));
        if eig.eigenvalues.iter().all(|l| l.is_finite()) && is_finite(&eig.eigenvectors) {
            return Ok((eig.eigenvalues.iter().copied().collect(), w.adjoint() * eig.eigenvectors));
        }
    }
    Err(Error::NonFinite)
}

/// Deterministic dense unitary: Householder reflection times a quadratic phase.
fn scrambling_unitary<T: Real>(d: usize, seed: usize) -> ComplexMatrix<T> {
    let g = 0.618_033_988_749_895 * seed as f64;
    let phase: Vec<Complex<T>> = (0..d)
        .map(|k| {
            let a = g * (k * k + 1) as f64;
            Complex::new(T::lit(a.cos()), T::lit(a.sin()))
        })
        .collect();
    let v: Vec<f64> = (0..d).map(|k| 1.0 + ((k as f64 + 1.0) * g).sin()).collect();
    let nv: f64 = v.iter().map(|x| x * x).sum();
    ComplexMatrix::from_fn(d, d, |i, j| {
        let refl = if i == j { 1.0 } else { 0.0 } - 2.0 * v[i] * v[j] / nv;
        phase[i] * T::lit(refl)
    })
}

fn off_diagonal_max<T: Real>(m: &ComplexMatrix<T>) -> T {
    let n = m.nrows();
    let mut worst = T::zero();
    for j in 0..n {
        for i in 0..n {
            if i != j {
                let a = m[(i, j)].modulus();
                if a > worst {
                    worst = a;
                }
            }
        }
    }
    worst
}

fn diagonal_tolerance<T: Real>(m: &ComplexMatrix<T>) -> T {
    T::default_epsilon() * T::lit(1000.0) * max_abs(m).max(T::one())
}

/// Orthonormal eigenbasis of a Hermitian matrix.
#[derive(Debug, Clone)]
pub enum EigenBasis<T: Real> {
    /// Standard basis vectors.
    Computational,
    /// Normalized Walsh-Hadamard vectors (X-product eigenbasis).
    Hadamard,
    /// Columns of a unitary matrix.
    Dense(ComplexMatrix<T>),
}

/// Eigen-decomposition `m = sum_k values[k] |v_k><v_k|`.
#[derive(Debug, Clone)]
pub struct Spectral<T: Real> {
    pub values: Vec<T>,
    pub basis: EigenBasis<T>,
}

impl<T: Real> Spectral<T> {
    /// Decomposes a Hermitian matrix (symmetrized internally).
    pub fn of_hermitian(m: &ComplexMatrix<T>) -> Result<Self> {
        let d = require_square(m)?;
        if !is_finite(m) {
            return Err(Error::NonFinite);
        }
        let m = symmetrize(m);
        let tol = diagonal_tolerance(&m);
        if off_diagonal_max(&m) <= tol {
            return Ok(Spectral { values: (0..d).map(|i| m[(i, i)].re).collect(), basis: EigenBasis::Computational });
        }
        if d >= 4 && d.is_power_of_two() {
            let h = hadamard_conjugate(&m);
            if off_diagonal_max(&h) <= tol {
                return Ok(Spectral { values: (0..d).map(|i| h[(i, i)].re).collect(), basis: EigenBasis::Hadamard });
            }
        }
        let (values, vectors) = hermitian_eigen(m)?;
        Ok(Spectral { values, basis: EigenBasis::Dense(vectors) })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
    }

    /// `sum_k f(lambda_k) |v_k><v_k|`.
    pub fn map(&self, f: impl Fn(T) -> Complex<T>) -> ComplexMatrix<T> {
        let d = self.dim();
        let fv: Vec<Complex<T>> = self.values.iter().map(|&l| f(l)).collect();
        match &self.basis {
            EigenBasis::Computational => ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(fv)),
            EigenBasis::Hadamard => from_hadamard_diagonal(&fv),
            EigenBasis::Dense(v) => {
                let mut scaled = v.clone();
                for (k, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= fv[k];
                }
                let mut out = ComplexMatrix::zeros(d, d);
                out.gemm(cr(T::one()), &scaled, &v.adjoint(), cr(T::zero()));
                out
            }
        }
    }

    /// Eigenvectors as explicit columns.
    pub fn vectors(&self) -> ComplexMatrix<T> {
        let d = self.dim();
        match &self.basis {
            EigenBasis::Computational => identity(d),
            EigenBasis::Hadamard => {
                let s = T::one() / T::from_usize(d).unwrap().sqrt();
                ComplexMatrix::from_fn(d, d, |i, j| if (i & j).count_ones() % 2 == 0 { cr(s) } else { cr(-s) })
            }
            EigenBasis::Dense(v) => v.clone(),
        }
    }

    /// Whether two decompositions share a structured basis, so that both
    /// matrices are simultaneously diagonal in it.
    pub fn same_structured_basis(&self, other: &Spectral<T>) -> bool {
        matches!(
            (&self.basis, &other.basis),
            (EigenBasis::Computational, EigenBasis::Computational) | (EigenBasis::Hadamard, EigenBasis::Hadamard)
        )
    }
}

fn check_hermitian<T: Real>(m: &ComplexMatrix<T>) -> Result<()> {
    require_square(m)?;
    let defect = hermitian_defect(m);
    if defect > T::lit(T::HERMITIAN_TOL) * max_abs(m).max(T::one()) {
        return Err(Error::NotHermitian { defect: defect.as_f64() });
    }
    Ok(())
}

/// Hermitian PSD decomposition, rejecting eigenvalues below `-psd_tol`.
pub fn psd_spectral<T: Real>(m: &ComplexMatrix<T>, psd_tol: T) -> Result<Spectral<T>> {
    check_hermitian(m)?;
    let s = Spectral::of_hermitian(m)?;
    let min = s.min_value();
    if min < -psd_tol {
        return Err(Error::NotPsd { min_eigenvalue: min.as_f64() });
    }
    Ok(s)
}

/// Principal square root of a Hermitian PSD matrix.
pub fn mat_sqrt<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let s = psd_spectral(m, T::lit(T::PSD_TOL))?;
    Ok(s.map(|l| cr(l.max(T::zero()).sqrt())))
}

/// Real power on the support; eigenvalues at or below `support_tol` map to zero,
/// which makes negative exponents a pseudo-inverse.
pub fn mat_power_with<T: Real>(m: &ComplexMatrix<T>, exponent: T, support_tol: T) -> Result<ComplexMatrix<T>> {
    let s = psd_spectral(m, T::lit(T::PSD_TOL))?;
    Ok(s.map(|l| if l > support_tol { cr(l.powf(exponent)) } else { cr(T::zero()) }))
}

pub fn mat_power<T: Real>(m: &ComplexMatrix<T>, exponent: T) -> Result<ComplexMatrix<T>> {
    mat_power_with(m, exponent, T::lit(T::SUPPORT_TOL))
}

/// `lambda^(re + i im)` on the support, zero elsewhere.
pub fn spectral_complex_power<T: Real>(s: &Spectral<T>, re: T, im: T, support_tol: T) -> ComplexMatrix<T> {
    s.map(|l| {
        if l > support_tol {
            let ln = l.ln();
            let mag = (re * ln).exp();
            let ph = im * ln;
            Complex::new(mag * ph.cos(), mag * ph.sin())
        } else {
            cr(T::zero())
        }
    })
}

/// Natural logarithm on the support, zero elsewhere.
pub fn mat_log_support<T: Real>(m: &ComplexMatrix<T>, support_tol: T) -> Result<ComplexMatrix<T>> {
    let s = psd_spectral(m, T::lit(T::PSD_TOL))?;
    Ok(s.map(|l| if l > support_tol { cr(l.ln()) } else { cr(T::zero()) }))
}

/// Index bookkeeping for an operator acting on an ordered list of sites of an
/// `n`-qubit register. Site 0 is the most significant bit of the full index;
/// the first listed site is the most significant bit of the local index.
#[derive(Debug, Clone)]
pub struct SiteEmbedding {
    pub n_sites: usize,
    pub sites: Vec<usize>,
    local_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
}

impl SiteEmbedding {
    pub fn new(n_sites: usize, sites: &[usize]) -> Result<Self> {
        let mut seen = vec![false; n_sites];
        for &s in sites {
            if s >= n_sites {
                return Err(Error::BadSiteSet(format!("site {s} out of range for {n_sites} sites")));
            }
            if seen[s] {
                return Err(Error::BadSiteSet(format!("site {s} listed twice")));
            }
            seen[s] = true;
        }
        let bit = |site: usize| 1usize << (n_sites - 1 - site);
        let k = sites.len();
        let local_offsets = (0..1usize << k)
            .map(|loc| (0..k).filter(|&b| loc >> (k - 1 - b) & 1 == 1).map(|b| bit(sites[b])).sum())
            .collect();
        let rest: Vec<usize> = (0..n_sites).filter(|s| !seen[*s]).collect();
        let r = rest.len();
        let rest_offsets = (0..1usize << r)
            .map(|loc| (0..r).filter(|&b| loc >> (r - 1 - b) & 1 == 1).map(|b| bit(rest[b])).sum())
            .collect();
        Ok(SiteEmbedding { n_sites, sites: sites.to_vec(), local_offsets, rest_offsets })
    }

    pub fn local_dim(&self) -> usize {
        self.local_offsets.len()
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_offsets.len()
    }

    #[inline]
    pub fn full_index(&self, local: usize, rest: usize) -> usize {
        self.local_offsets[local] + self.rest_offsets[rest]
    }

    /// `(op (x) 1) m`.
    pub fn left_apply<T: Real>(&self, op: &ComplexMatrix<T>, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let k = self.local_dim();
        let d = m.nrows();
        let zero = cr(T::zero());
        let mut out = ComplexMatrix::zeros(d, m.ncols());
        let mut v = vec![zero; k];
        for col in 0..m.ncols() {
            let src = m.column(col);
            let mut dst = out.column_mut(col);
            for &r in &self.rest_offsets {
                for (s, slot) in v.iter_mut().enumerate() {
                    *slot = src[self.local_offsets[s] + r];
                }
                for a in 0..k {
                    let mut acc = zero;
                    for (b, vb) in v.iter().enumerate() {
                        acc += op[(a, b)] * *vb;
                    }
                    dst[self.local_offsets[a] + r] = acc;
                }
            }
        }
        out
    }

    /// `m (op (x) 1)`.
    pub fn right_apply<T: Real>(&self, m: &ComplexMatrix<T>, op: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        self.left_apply(&op.adjoint(), &m.adjoint()).adjoint()
    }

    /// `(op (x) 1) m (op (x) 1)^dagger`, with a fast path for diagonal `op`.
    pub fn conjugate<T: Real>(&self, op: &ComplexMatrix<T>, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        if off_diagonal_max(op) == T::zero() {
            let d = m.nrows();
            let mut phase = vec![cr(T::zero()); d];
            for (s, &lo) in self.local_offsets.iter().enumerate() {
                for &r in &self.rest_offsets {
                    phase[lo + r] = op[(s, s)];
                }
            }
            return ComplexMatrix::from_fn(d, d, |i, j| phase[i] * m[(i, j)] * phase[j].conj());
        }
        let left = self.left_apply(op, m);
        self.right_apply(&left, &op.adjoint())
    }

    /// Embeds a local operator into the full register.
    pub fn expand<T: Real>(&self, op: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let d = 1usize << self.n_sites;
        let mut out = ComplexMatrix::zeros(d, d);
        for &r in &self.rest_offsets {
            for (a, &la) in self.local_offsets.iter().enumerate() {
                for (b, &lb) in self.local_offsets.iter().enumerate() {
                    out[(la + r, lb + r)] = op[(a, b)];
                }
            }
        }
        out
    }

    /// Partial trace over every site not in the embedding.
    pub fn trace_out_rest<T: Real>(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let k = self.local_dim();
        ComplexMatrix::from_fn(k, k, |a, b| {
            let (la, lb) = (self.local_offsets[a], self.local_offsets[b]);
            self.rest_offsets.iter().fold(cr(T::zero()), |acc, &r| acc + m[(la + r, lb + r)])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_psd;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(vals: &[f64]) -> ComplexMatrix<f64> {
        ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| cr(v))))
    }

    #[test]
    fn sqrt_of_identity_and_diagonal() {
        let id = identity::<f64>(4);
        assert!((mat_sqrt(&id).unwrap() - &id).camax() < 1e-15);
        let r = mat_sqrt(&diag(&[4.0, 0.0])).unwrap();
        assert!((r - diag(&[2.0, 0.0])).camax() < 1e-15);
    }

    #[test]
    fn sqrt_matches_eigendecomposition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let m: ComplexMatrix<f64> = random_psd(8, 8, &mut rng);
            let r = mat_sqrt(&m).unwrap();
            assert!((&r * &r - &m).camax() <= 1e-9 * m.camax());
            let eig = SymmetricEigen::new(m.clone());
            let v = &eig.eigenvectors;
            let d = ComplexMatrix::from_diagonal(&eig.eigenvalues.map(|l| cr(l.max(0.0).sqrt())));
            let oracle = v * d * v.adjoint();
            assert!((r - oracle).camax() < 1e-10);
        }
    }

    #[test]
    fn power_agrees_with_sqrt_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m: ComplexMatrix<f64> = random_psd(8, 8, &mut rng);
        assert!((mat_power(&m, 1.0).unwrap() - &m).camax() < 1e-12);
        assert!((mat_power(&m, 0.5).unwrap() - mat_sqrt(&m).unwrap()).camax() < 1e-10);
        let inv = mat_power(&diag(&[4.0, 1.0]), -0.5).unwrap();
        assert!((inv - diag(&[0.5, 1.0])).camax() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_and_negative() {
        let mut m = identity::<f64>(2);
        m[(0, 1)] = cr(1.0);
        assert!(matches!(mat_sqrt(&m), Err(Error::NotHermitian { .. })));
        assert!(matches!(mat_sqrt(&diag(&[1.0, -0.1])), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn hadamard_detection_round_trip() {
        let vals: Vec<Complex<f64>> = (0..16).map(|i| cr(i as f64)).collect();
        let m = from_hadamard_diagonal(&vals);
        let s = Spectral::of_hermitian(&m).unwrap();
        assert!(matches!(s.basis, EigenBasis::Hadamard));
        let back = s.map(cr);
        assert!((back - &m).camax() < 1e-12);
        let h = hadamard_conjugate(&m);
        for i in 0..16 {
            assert!((h[(i, i)].re - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let op: ComplexMatrix<f64> = random_psd(2, 2, &mut rng);
        let emb = SiteEmbedding::new(3, &[1]).unwrap();
        let full = kron(&kron(&identity(2), &op), &identity(2));
        assert!((emb.expand(&op) - &full).camax() < 1e-15);
        let m: ComplexMatrix<f64> = random_psd(8, 8, &mut rng);
        assert!((emb.left_apply(&op, &m) - &full * &m).camax() < 1e-13);
        assert!((emb.conjugate(&op, &m) - &full * &m * full.adjoint()).camax() < 1e-13);
    }

    #[test]
    fn f32_sqrt_round_trip() {
        let m = ComplexMatrix::<f32>::from_diagonal(&nalgebra::DVector::from_vec(vec![cr(9.0f32), cr(1.0)]));
        let r = mat_sqrt(&m).unwrap();
        assert!((r[(0, 0)].re - 3.0).abs() < 1e-6);
    }
}
