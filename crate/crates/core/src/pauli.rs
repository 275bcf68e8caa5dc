//! Site operators and tensor-product strings of them.

use nalgebra::ComplexField;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, SiteEmbedding};
use crate::scalar::{c, cr, Real};

/// Operator-norm ceiling accepted for explicit 2x2 site matrices.
pub const SITE_OPERATOR_NORM_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix<T: Real>(self) -> ComplexMatrix<T> {
        let (o, z, i) = (c::<T>(1.0, 0.0), c::<T>(0.0, 0.0), c::<T>(0.0, 1.0));
        match self {
            Pauli::I => ComplexMatrix::from_row_slice(2, 2, &[o, z, z, o]),
            Pauli::X => ComplexMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => ComplexMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Pauli::Z => ComplexMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    /// Image of `|bit>`: (flips the bit, phase).
    #[inline]
    fn action<T: Real>(self, bit: bool) -> (bool, Complex<T>) {
        match (self, bit) {
            (Pauli::I, _) => (false, c(1.0, 0.0)),
            (Pauli::X, _) => (true, c(1.0, 0.0)),
            (Pauli::Y, false) => (true, c(0.0, 1.0)),
            (Pauli::Y, true) => (true, c(0.0, -1.0)),
            (Pauli::Z, false) => (false, c(1.0, 0.0)),
            (Pauli::Z, true) => (false, c(-1.0, 0.0)),
        }
    }

    pub fn from_char(ch: char) -> Option<Pauli> {
        match ch.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Single-site operator: a Pauli or an explicit 2x2 matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalOp<T: Real = f64> {
    Pauli(Pauli),
    Matrix(ComplexMatrix<T>),
}

impl<T: Real> LocalOp<T> {
    pub fn matrix(&self) -> ComplexMatrix<T> {
        match self {
            LocalOp::Pauli(p) => p.matrix(),
            LocalOp::Matrix(m) => m.clone(),
        }
    }

    pub fn adjoint(&self) -> Self {
        match self {
            LocalOp::Pauli(p) => LocalOp::Pauli(*p),
            LocalOp::Matrix(m) => LocalOp::Matrix(m.adjoint()),
        }
    }

    pub fn is_unitary(&self) -> bool {
        match self {
            LocalOp::Pauli(_) => true,
            LocalOp::Matrix(m) => {
                let d = m.adjoint() * m - ComplexMatrix::identity(2, 2);
                d.iter().all(|z| z.modulus() <= T::lit(1e-10))
            }
        }
    }
}

impl<T: Real> From<Pauli> for LocalOp<T> {
    fn from(p: Pauli) -> Self {
        LocalOp::Pauli(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteOperator<T: Real = f64> {
    pub site: usize,
    pub op: LocalOp<T>,
    pub phase: Complex<T>,
}

impl<T: Real> SiteOperator<T> {
    pub fn new(site: usize, op: impl Into<LocalOp<T>>) -> Result<Self> {
        let op = op.into();
        if let LocalOp::Matrix(m) = &op {
            if m.nrows() != 2 || m.ncols() != 2 {
                return Err(Error::InvalidArgument("site operator must be 2x2".into()));
            }
            let norm = m.clone().svd(false, false).singular_values.max();
            if norm.as_f64().is_nan() || norm.as_f64() > SITE_OPERATOR_NORM_CAP {
                return Err(Error::InvalidArgument(format!("site operator norm {} exceeds cap", norm.as_f64())));
            }
        }
        Ok(SiteOperator { site, op, phase: cr(T::one()) })
    }

    pub fn pauli(site: usize, p: Pauli) -> Self {
        SiteOperator { site, op: LocalOp::Pauli(p), phase: cr(T::one()) }
    }

    pub fn with_phase(mut self, phase: Complex<T>) -> Self {
        self.phase = phase;
        self
    }

    fn matrix(&self) -> ComplexMatrix<T> {
        self.op.matrix() * self.phase
    }
}

/// Product of site operators on distinct sites; unlisted sites carry identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString<T: Real = f64> {
    n_sites: usize,
    factors: Vec<SiteOperator<T>>,
}

impl<T: Real> PauliString<T> {
    pub fn new(n_sites: usize, factors: Vec<SiteOperator<T>>) -> Result<Self> {
        for w in factors.windows(2) {
            if w[0].site >= w[1].site {
                return Err(Error::BadSiteSet("factor sites must be strictly increasing".into()));
            }
        }
        if let Some(f) = factors.last() {
            if f.site >= n_sites {
                return Err(Error::BadSiteSet(format!("site {} out of range for {n_sites} sites", f.site)));
            }
        }
        Ok(PauliString { n_sites, factors })
    }

    pub fn identity(n_sites: usize) -> Self {
        PauliString { n_sites, factors: Vec::new() }
    }

    /// `P (x) P (x) ... (x) P` on every site, e.g. the Z2 generator `prod_i X_i`.
    pub fn global(n_sites: usize, p: Pauli) -> Self {
        PauliString { n_sites, factors: (0..n_sites).map(|s| SiteOperator::pauli(s, p)).collect() }
    }

    pub fn single(n_sites: usize, site: usize, op: impl Into<LocalOp<T>>) -> Result<Self> {
        Self::new(n_sites, vec![SiteOperator::new(site, op)?])
    }

    /// Parses a label such as `"XIZZ"`, one character per site.
    pub fn from_label(label: &str) -> Result<Self> {
        let n = label.chars().count();
        let mut factors = Vec::new();
        for (s, ch) in label.chars().enumerate() {
            let p = Pauli::from_char(ch).ok_or_else(|| Error::InvalidArgument(format!("bad Pauli label {ch}")))?;
            if p != Pauli::I {
                factors.push(SiteOperator::pauli(s, p));
            }
        }
        Self::new(n, factors)
    }

    /// The charged pair `O(x) O^dagger(y)`.
    pub fn charged_pair(n_sites: usize, op: &LocalOp<T>, x: usize, y: usize) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidArgument("charged pair needs distinct sites".into()));
        }
        let fx = SiteOperator::new(x, op.clone())?;
        let fy = SiteOperator::new(y, op.adjoint())?;
        let factors = if x < y { vec![fx, fy] } else { vec![fy, fx] };
        Self::new(n_sites, factors)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn factors(&self) -> &[SiteOperator<T>] {
        &self.factors
    }

    pub fn support(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.site).collect()
    }

    pub fn adjoint(&self) -> Self {
        PauliString {
            n_sites: self.n_sites,
            factors: self
                .factors
                .iter()
                .map(|f| SiteOperator { site: f.site, op: f.op.adjoint(), phase: f.phase.conj() })
                .collect(),
        }
    }

    /// Restriction to a subset of sites, re-indexed in the order given.
    pub fn restrict(&self, sites: &[usize]) -> Self {
        let factors = sites
            .iter()
            .enumerate()
            .filter_map(|(new, s)| {
                self.factors.iter().find(|f| f.site == *s).map(|f| SiteOperator { site: new, ..f.clone() })
            })
            .collect();
        PauliString { n_sites: sites.len(), factors }
    }

    fn pauli_factors(&self) -> Option<Vec<(usize, Pauli, Complex<T>)>> {
        self.factors
            .iter()
            .map(|f| match f.op {
                LocalOp::Pauli(p) => Some((f.site, p, f.phase)),
                LocalOp::Matrix(_) => None,
            })
            .collect()
    }

    /// Bit-flip masks `(x, z)` of a pure Pauli string, ignoring phases: `x`
    /// marks sites carrying X or Y, `z` marks sites carrying Z or Y.
    pub fn flip_masks(&self) -> Option<(usize, usize)> {
        let n = self.n_sites;
        self.pauli_factors().map(|fs| {
            fs.iter().fold((0, 0), |(x, z), &(s, p, _)| {
                let bit = 1 << (n - 1 - s);
                match p {
                    Pauli::I => (x, z),
                    Pauli::X => (x | bit, z),
                    Pauli::Y => (x | bit, z | bit),
                    Pauli::Z => (x, z | bit),
                }
            })
        })
    }

    pub fn is_unitary(&self) -> bool {
        self.factors.iter().all(|f| f.op.is_unitary() && (f.phase.modulus() - T::one()).abs() < T::lit(1e-12))
    }

    /// Signed permutation data for a pure Pauli string: `P|j> = phase[j] |j ^ flip>`.
    fn permutation(&self) -> Option<(usize, Vec<Complex<T>>)> {
        let factors = self.pauli_factors()?;
        let n = self.n_sites;
        let global = factors.iter().fold(cr(T::one()), |acc, f| acc * f.2);
        let mut flip = 0usize;
        for &(s, p, _) in &factors {
            if matches!(p, Pauli::X | Pauli::Y) {
                flip |= 1 << (n - 1 - s);
            }
        }
        let phases = (0..1usize << n)
            .map(|j| {
                factors.iter().fold(global, |acc, &(s, p, _)| {
                    let bit = j >> (n - 1 - s) & 1 == 1;
                    acc * p.action::<T>(bit).1
                })
            })
            .collect();
        Some((flip, phases))
    }

    pub fn to_dense(&self) -> ComplexMatrix<T> {
        let d = 1usize << self.n_sites;
        self.left_apply(&ComplexMatrix::identity(d, d))
    }

    /// `P m`.
    pub fn left_apply(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        if let Some((flip, phase)) = self.permutation() {
            let d = m.nrows();
            return ComplexMatrix::from_fn(d, m.ncols(), |a, b| phase[a ^ flip] * m[(a ^ flip, b)]);
        }
        let mut out = m.clone();
        for f in &self.factors {
            let emb = SiteEmbedding::new(self.n_sites, &[f.site]).expect("validated site");
            out = emb.left_apply(&f.matrix(), &out);
        }
        out
    }

    /// `P m P^dagger`.
    pub fn conjugate(&self, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        if let Some((flip, phase)) = self.permutation() {
            let d = m.nrows();
            return ComplexMatrix::from_fn(d, d, |a, b| {
                let (j, k) = (a ^ flip, b ^ flip);
                phase[j] * m[(j, k)] * phase[k].conj()
            });
        }
        let mut out = m.clone();
        for f in &self.factors {
            let emb = SiteEmbedding::new(self.n_sites, &[f.site]).expect("validated site");
            out = emb.conjugate(&f.matrix(), &out);
        }
        out
    }

    /// `Tr(m P)`.
    pub fn trace_with(&self, m: &ComplexMatrix<T>) -> Complex<T> {
        if let Some((flip, phase)) = self.permutation() {
            return (0..m.nrows()).fold(cr(T::zero()), |acc, a| acc + m[(a, a ^ flip)] * phase[a]);
        }
        crate::matrix::trace(&self.left_apply(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let x = Pauli::X.matrix::<f64>();
        let y = Pauli::Y.matrix::<f64>();
        let z = Pauli::Z.matrix::<f64>();
        let i = c::<f64>(0.0, 1.0);
        assert!((&x * &y - &z * i).camax() < 1e-15);
    }

    #[test]
    fn fast_paths_match_dense() {
        let p = PauliString::<f64>::from_label("XYZ").unwrap();
        let dense = {
            let m = [Pauli::X, Pauli::Y, Pauli::Z].map(|q| q.matrix::<f64>());
            m[0].kronecker(&m[1]).kronecker(&m[2])
        };
        assert!((p.to_dense() - &dense).camax() < 1e-15);
        let m = ComplexMatrix::from_fn(8, 8, |a, b| c::<f64>(a as f64 + 0.5 * b as f64, (a * b) as f64 * 0.1));
        assert!((p.conjugate(&m) - &dense * &m * dense.adjoint()).camax() < 1e-12);
        let tr = crate::matrix::trace(&(&m * &dense));
        assert!((p.trace_with(&m) - tr).norm() < 1e-12);
    }

    #[test]
    fn rejects_unsorted_and_oversized() {
        let f = vec![SiteOperator::<f64>::pauli(2, Pauli::X), SiteOperator::pauli(1, Pauli::X)];
        assert!(PauliString::new(3, f).is_err());
        let big = ComplexMatrix::<f64>::identity(2, 2) * cr(1e7);
        assert!(SiteOperator::new(0, LocalOp::Matrix(big)).is_err());
    }

    #[test]
    fn matrix_factors_use_generic_path() {
        let h = ComplexMatrix::<f64>::from_row_slice(2, 2, &[cr(1.0), cr(1.0), cr(1.0), cr(-1.0)]) / cr(2f64.sqrt());
        let p = PauliString::new(2, vec![SiteOperator::new(1, LocalOp::Matrix(h.clone())).unwrap()]).unwrap();
        let dense = ComplexMatrix::<f64>::identity(2, 2).kronecker(&h);
        assert!((p.to_dense() - dense).camax() < 1e-15);
    }
}
