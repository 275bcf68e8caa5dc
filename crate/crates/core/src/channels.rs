//! Kraus channels built from site-local factors, and the symmetric
//! decoherence channels of the decohered Ising and GHZ examples.
//!
//! A [`KrausChannel`] is an ordered product of [`LocalKraus`] factors, each a
//! Kraus set on a few sites. Factors are expanded to the full register only
//! when a full Kraus list is explicitly requested.

use nalgebra::ComplexField;
use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::matrix::{self, ComplexMatrix, SiteEmbedding};
use crate::pauli::{Pauli, PauliString, SiteOperator};
use crate::scalar::{cr, Real};

/// Completeness tolerance `|sum K^dagger K - 1|_max`.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Commutator tolerance for the strong-symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-10;

const PAULI_DECOMPOSITION_MAX_SITES: usize = 4;

fn pauli_bits(p: Pauli) -> (bool, bool) {
    match p {
        Pauli::I => (false, false),
        Pauli::X => (true, false),
        Pauli::Y => (true, true),
        Pauli::Z => (false, true),
    }
}

fn pauli_from_bits(x: bool, z: bool) -> Pauli {
    match (x, z) {
        (false, false) => Pauli::I,
        (true, false) => Pauli::X,
        (true, true) => Pauli::Y,
        (false, true) => Pauli::Z,
    }
}

fn local_pauli_matrix<T: Real>(label: &[Pauli]) -> ComplexMatrix<T> {
    label.iter().fold(ComplexMatrix::identity(1, 1), |acc, p| acc.kronecker(&p.matrix::<T>()))
}

/// `K = c P` for a Pauli string `P` on the support, if it holds.
fn as_scaled_pauli<T: Real>(op: &ComplexMatrix<T>, k: usize) -> Option<(Complex<T>, Vec<Pauli>)> {
    let dim = T::from_usize(1 << k).unwrap();
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut found = None;
    for idx in 0..1usize << (2 * k) {
        let label: Vec<Pauli> = (0..k).map(|s| all[(idx >> (2 * (k - 1 - s))) & 3]).collect();
        let p = local_pauli_matrix::<T>(&label);
        let coef = matrix::trace_product(&p.adjoint(), op) / dim;
        if coef.modulus() > T::lit(1e-14) {
            if found.is_some() {
                return None;
            }
            found = Some((coef, label));
        }
    }
    let (coef, label) = found?;
    let resid = (op - local_pauli_matrix::<T>(&label) * coef).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    (resid <= T::lit(1e-12)).then_some((coef, label))
}

/// Kraus set `{K_i}` acting on an ordered list of sites.
#[derive(Debug, Clone)]
pub struct LocalKraus<T: Real = f64> {
    support: Vec<usize>,
    ops: Vec<ComplexMatrix<T>>,
    pauli_form: Option<Vec<(Complex<T>, Vec<Pauli>)>>,
}

impl<T: Real> LocalKraus<T> {
    pub fn new(support: Vec<usize>, ops: Vec<ComplexMatrix<T>>) -> Result<Self> {
        let k = 1usize << support.len();
        if ops.is_empty() {
            return Err(Error::InvalidArgument("empty Kraus set".into()));
        }
        for op in &ops {
            if op.nrows() != k || op.ncols() != k {
                return Err(Error::DimensionMismatch { expected: k, found: op.nrows() });
            }
        }
        let defect = completeness_defect(&ops);
        if defect > T::lit(COMPLETENESS_TOL) {
            return Err(Error::CompletenessViolated(defect.as_f64()));
        }
        let pauli_form = if support.len() <= PAULI_DECOMPOSITION_MAX_SITES {
            ops.iter().map(|op| as_scaled_pauli(op, support.len())).collect()
        } else {
            None
        };
        Ok(LocalKraus { support, ops, pauli_form })
    }

    /// Mixture `sum_k w_k P_k rho P_k` of Pauli strings on the support.
    pub fn pauli_mixture(support: Vec<usize>, terms: &[(T, Vec<Pauli>)]) -> Result<Self> {
        let ops = terms.iter().map(|(w, label)| local_pauli_matrix::<T>(label) * cr(w.max(T::zero()).sqrt())).collect();
        Self::new(support, ops)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn ops(&self) -> &[ComplexMatrix<T>] {
        &self.ops
    }

    pub fn is_pauli_mixture(&self) -> bool {
        self.pauli_form.is_some()
    }

    fn relabel(&self, map: impl Fn(usize) -> usize) -> Self {
        LocalKraus { support: self.support.iter().map(|&s| map(s)).collect(), ..self.clone() }
    }

    /// Composition `other after self` for two Pauli mixtures on the same support.
    fn merge_pauli(&self, other: &Self) -> Option<Self> {
        let (a, b) = (self.pauli_form.as_ref()?, other.pauli_form.as_ref()?);
        let mut weights: BTreeMap<Vec<u8>, (T, Vec<Pauli>)> = BTreeMap::new();
        let mut order = Vec::new();
        for (ca, pa) in a {
            for (cb, pb) in b {
                let label: Vec<Pauli> = pa
                    .iter()
                    .zip(pb)
                    .map(|(x, y)| {
                        let (bx, bz) = pauli_bits(*x);
                        let (cx, cz) = pauli_bits(*y);
                        pauli_from_bits(bx ^ cx, bz ^ cz)
                    })
                    .collect();
                let key: Vec<u8> = label.iter().map(|p| *p as u8).collect();
                let w = ca.norm_sqr() * cb.norm_sqr();
                let entry = weights.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    (T::zero(), label)
                });
                entry.0 += w;
            }
        }
        let terms: Vec<(T, Vec<Pauli>)> = order.iter().map(|k| weights[k].clone()).collect();
        Self::pauli_mixture(self.support.clone(), &terms).ok()
    }

    /// `sum_i K_i m K_i^dagger` on the full register.
    fn apply_to(&self, n_sites: usize, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let d = m.nrows();
        let mut out = ComplexMatrix::zeros(d, d);
        if let Some(form) = &self.pauli_form {
            for (coef, label) in form {
                let p = full_pauli(n_sites, &self.support, label);
                out += p.conjugate(m) * cr(coef.norm_sqr());
            }
            return out;
        }
        let emb = SiteEmbedding::new(n_sites, &self.support).expect("validated support");
        for op in &self.ops {
            out += emb.conjugate(op, m);
        }
        out
    }

    /// `sum_i K_i^dagger m K_i` on the full register.
    fn apply_adjoint_to(&self, n_sites: usize, m: &ComplexMatrix<T>) -> ComplexMatrix<T> {
        let d = m.nrows();
        let mut out = ComplexMatrix::zeros(d, d);
        if let Some(form) = &self.pauli_form {
            for (coef, label) in form {
                let p = full_pauli(n_sites, &self.support, label);
                out += p.conjugate(m) * cr(coef.norm_sqr());
            }
            return out;
        }
        let emb = SiteEmbedding::new(n_sites, &self.support).expect("validated support");
        for op in &self.ops {
            out += emb.conjugate(&op.adjoint(), m);
        }
        out
    }
}

fn full_pauli<T: Real>(n_sites: usize, support: &[usize], label: &[Pauli]) -> PauliString<T> {
    let mut pairs: Vec<(usize, Pauli)> =
        support.iter().copied().zip(label.iter().copied()).filter(|(_, p)| *p != Pauli::I).collect();
    pairs.sort_by_key(|(s, _)| *s);
    PauliString::new(n_sites, pairs.into_iter().map(|(s, p)| SiteOperator::pauli(s, p)).collect())
        .expect("support validated")
}

fn completeness_defect<T: Real>(ops: &[ComplexMatrix<T>]) -> T {
    let k = ops[0].nrows();
    let mut sum = ComplexMatrix::<T>::zeros(k, k);
    for op in ops {
        sum += op.adjoint() * op;
    }
    (sum - ComplexMatrix::identity(k, k)).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
}

/// Ordered product of local Kraus factors; `factors[0]` acts first.
#[derive(Debug, Clone)]
pub struct KrausChannel<T: Real = f64> {
    n_sites: usize,
    factors: Vec<LocalKraus<T>>,
}

impl<T: Real> KrausChannel<T> {
    pub fn identity(n_sites: usize) -> Self {
        KrausChannel { n_sites, factors: Vec::new() }
    }

    pub fn from_factors(n_sites: usize, factors: Vec<LocalKraus<T>>) -> Result<Self> {
        for f in &factors {
            SiteEmbedding::new(n_sites, &f.support)?;
        }
        Ok(KrausChannel { n_sites, factors })
    }

    /// Single unitary gate on `support`.
    pub fn unitary(n_sites: usize, support: Vec<usize>, u: ComplexMatrix<T>) -> Result<Self> {
        Self::from_factors(n_sites, vec![LocalKraus::new(support, vec![u])?])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn factors(&self) -> &[LocalKraus<T>] {
        &self.factors
    }

    /// Union of factor supports, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.factors.iter().flat_map(|f| f.support.iter().copied()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Number of Kraus operators in the expanded product representation.
    pub fn kraus_count(&self) -> usize {
        self.factors.iter().map(|f| f.ops.len()).product()
    }

    /// Full-register Kraus operators `K_{i_m} ... K_{i_1}`.
    pub fn kraus_operators(&self) -> Result<Vec<ComplexMatrix<T>>> {
        crate::density::check_cap(self.n_sites)?;
        let d = 1usize << self.n_sites;
        let mut acc = vec![ComplexMatrix::<T>::identity(d, d)];
        for f in &self.factors {
            let emb = SiteEmbedding::new(self.n_sites, &f.support)?;
            let expanded: Vec<ComplexMatrix<T>> = f.ops.iter().map(|op| emb.expand(op)).collect();
            acc = expanded.iter().flat_map(|k| acc.iter().map(move |a| k * a)).collect();
        }
        Ok(acc)
    }

    /// Worst completeness defect over all factors.
    pub fn completeness_defect(&self) -> T {
        self.factors.iter().fold(T::zero(), |a, f| a.max(completeness_defect(&f.ops)))
    }

    /// Channel action on an arbitrary operator.
    pub fn apply_matrix(&self, m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let d = 1usize << self.n_sites;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let mut out = m.clone();
        for f in &self.factors {
            out = f.apply_to(self.n_sites, &out);
        }
        Ok(out)
    }

    /// Heisenberg-picture (adjoint) action `E^dagger(m)`.
    pub fn apply_adjoint(&self, m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let d = 1usize << self.n_sites;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let mut out = m.clone();
        for f in self.factors.iter().rev() {
            out = f.apply_adjoint_to(self.n_sites, &out);
        }
        Ok(out)
    }

    /// The same channel on the sub-register `sites` (in that order). Every
    /// factor must be supported inside `sites`.
    pub fn localize(&self, sites: &[usize]) -> Result<Self> {
        let pos = |s: usize| sites.iter().position(|&t| t == s);
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            if f.support.iter().any(|&s| pos(s).is_none()) {
                return Err(Error::BadSiteSet(format!("factor on {:?} leaves region {:?}", f.support, sites)));
            }
            factors.push(f.relabel(|s| pos(s).unwrap()));
        }
        Self::from_factors(sites.len(), factors)
    }

    /// Inverse of [`KrausChannel::localize`]: local site `k` becomes `sites[k]`
    /// of an `n_sites` register.
    pub fn embed(&self, n_sites: usize, sites: &[usize]) -> Result<Self> {
        if sites.len() != self.n_sites {
            return Err(Error::DimensionMismatch { expected: self.n_sites, found: sites.len() });
        }
        Self::from_factors(n_sites, self.factors.iter().map(|f| f.relabel(|s| sites[s])).collect())
    }

    /// Only the factors supported inside `sites`, on the full register.
    pub fn restricted_to(&self, sites: &[usize]) -> Self {
        KrausChannel {
            n_sites: self.n_sites,
            factors: self.factors.iter().filter(|f| f.support.iter().all(|s| sites.contains(s))).cloned().collect(),
        }
    }
}

/// `rho' = sum K rho K^dagger`, re-validated.
pub fn apply<T: Real>(channel: &KrausChannel<T>, rho: &DensityMatrix<T>) -> Result<DensityMatrix<T>> {
    if channel.n_sites != rho.n_sites() {
        return Err(Error::DimensionMismatch { expected: rho.n_sites(), found: channel.n_sites });
    }
    DensityMatrix::with_tolerance(channel.apply_matrix(rho.matrix())?, rho.psd_tol())
}

/// `b after a`, merging Pauli-mixture factors on identical supports whenever
/// every factor between them is also a Pauli mixture (Pauli channels commute).
pub fn compose<T: Real>(a: &KrausChannel<T>, b: &KrausChannel<T>) -> Result<KrausChannel<T>> {
    let mut out = compose_unpruned(a, b)?;
    let split = a.factors.len();
    let mut merged: Vec<LocalKraus<T>> = out.factors.drain(..split).collect();
    for f in out.factors.drain(..) {
        let target = merged.iter().rposition(|g| g.support == f.support);
        let fused = target.and_then(|i| {
            let clear = merged[i + 1..].iter().all(LocalKraus::is_pauli_mixture);
            if clear {
                merged[i].merge_pauli(&f).map(|m| (i, m))
            } else {
                None
            }
        });
        match fused {
            Some((i, m)) => merged[i] = m,
            None => merged.push(f),
        }
    }
    out.factors = merged;
    let defect = out.completeness_defect();
    if defect > T::lit(COMPLETENESS_TOL) {
        return Err(Error::CompletenessViolated(defect.as_f64()));
    }
    Ok(out)
}

/// `b after a` with the full product Kraus set.
pub fn compose_unpruned<T: Real>(a: &KrausChannel<T>, b: &KrausChannel<T>) -> Result<KrausChannel<T>> {
    if a.n_sites != b.n_sites {
        return Err(Error::DimensionMismatch { expected: a.n_sites, found: b.n_sites });
    }
    let mut factors = a.factors.clone();
    factors.extend(b.factors.iter().cloned());
    Ok(KrausChannel { n_sites: a.n_sites, factors })
}

fn check_probability<T: Real>(p: T) -> Result<()> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::BadProbability(p.as_f64()));
    }
    Ok(())
}

/// `exp(i theta Z_i Z_j)`, a diagonal two-site gate.
pub fn zz_rotation<T: Real>(theta: T) -> ComplexMatrix<T> {
    let (s, co) = (theta.sin(), theta.cos());
    let plus = Complex::new(co, s);
    let minus = Complex::new(co, -s);
    ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![plus, minus, minus, plus]))
}

/// `E_ij(rho) = (1-p) rho + p Z_i Z_j rho Z_i Z_j` on every bond.
pub fn zz_dephasing<T: Real>(lattice: &LatticeSpec, p: T) -> Result<KrausChannel<T>> {
    check_probability(p)?;
    lattice.validate()?;
    let factors = lattice
        .bonds()
        .into_iter()
        .map(|(i, j)| {
            LocalKraus::pauli_mixture(
                vec![i, j],
                &[(T::one() - p, vec![Pauli::I, Pauli::I]), (p, vec![Pauli::Z, Pauli::Z])],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::from_factors(lattice.n_sites(), factors)
}

/// `E_ij(rho) = (1-p) rho + p e^{i theta ZZ} rho e^{-i theta ZZ}` on every bond.
pub fn theta_channel<T: Real>(lattice: &LatticeSpec, p: T, theta: T) -> Result<KrausChannel<T>> {
    check_probability(p)?;
    general_ising_channel(lattice, &[(T::one() - p, T::zero()), (p, theta)])
}

/// `E_ij(rho) = sum_n p_n e^{i theta_n ZZ} rho e^{-i theta_n ZZ}` on every bond.
pub fn general_ising_channel<T: Real>(lattice: &LatticeSpec, weights: &[(T, T)]) -> Result<KrausChannel<T>> {
    lattice.validate()?;
    if weights.is_empty() {
        return Err(Error::BadWeights("no terms".into()));
    }
    if weights.iter().any(|(p, _)| p.as_f64().is_nan() || *p < T::zero()) {
        return Err(Error::BadWeights("negative weight".into()));
    }
    let total = weights.iter().fold(T::zero(), |a, (p, _)| a + *p);
    if (total - T::one()).abs() > T::lit(1e-12) {
        return Err(Error::BadWeights(format!("weights sum to {}", total.as_f64())));
    }
    let ops: Vec<ComplexMatrix<T>> = weights.iter().map(|(p, th)| zz_rotation(*th) * cr(p.sqrt())).collect();
    let factors = lattice
        .bonds()
        .into_iter()
        .map(|(i, j)| LocalKraus::new(vec![i, j], ops.clone()))
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::from_factors(lattice.n_sites(), factors)
}

/// Effective damping `|sum_n p_n e^{2 i theta_n}|` of a diagonal Ising channel.
pub fn ising_channel_beta<T: Real>(weights: &[(T, T)]) -> T {
    weights
        .iter()
        .fold(cr(T::zero()), |acc, (p, th)| acc + Complex::new((*th + *th).cos(), (*th + *th).sin()) * *p)
        .modulus()
}

/// `E_i(rho) = (1-p) rho + p X_i rho X_i` on every site.
pub fn site_x_dephasing<T: Real>(n_sites: usize, p: T) -> Result<KrausChannel<T>> {
    site_x_dephasing_on(n_sites, &(0..n_sites).collect::<Vec<_>>(), p)
}

/// Single-site X dephasing on a subset of sites.
pub fn site_x_dephasing_on<T: Real>(n_sites: usize, sites: &[usize], p: T) -> Result<KrausChannel<T>> {
    check_probability(p)?;
    let factors = sites
        .iter()
        .map(|&s| LocalKraus::pauli_mixture(vec![s], &[(T::one() - p, vec![Pauli::I]), (p, vec![Pauli::X])]))
        .collect::<Result<Vec<_>>>()?;
    KrausChannel::from_factors(n_sites, factors)
}

/// Symmetry generated by a string of on-site operators.
#[derive(Debug, Clone)]
pub struct SymmetrySpec<T: Real = f64> {
    generator: PauliString<T>,
    group_order: usize,
}

impl<T: Real> SymmetrySpec<T> {
    pub fn new(generator: PauliString<T>, group_order: usize) -> Result<Self> {
        if group_order == 0 {
            return Err(Error::InvalidArgument("group order must be positive".into()));
        }
        let mut total = cr(T::one());
        for f in generator.factors() {
            let m = f.op.matrix() * f.phase;
            let mut pow = ComplexMatrix::<T>::identity(2, 2);
            for _ in 0..group_order {
                pow = &pow * &m;
            }
            let lambda = pow[(0, 0)];
            let resid =
                (pow - ComplexMatrix::identity(2, 2) * lambda).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
            if resid > T::lit(1e-12) {
                return Err(Error::InvalidArgument("generator power is not the identity".into()));
            }
            total *= lambda;
        }
        if (total - cr(T::one())).modulus() > T::lit(1e-12) {
            return Err(Error::InvalidArgument("generator power is not the identity".into()));
        }
        Ok(SymmetrySpec { generator, group_order })
    }

    /// The Z2 symmetry `prod_i X_i`.
    pub fn z2_x(n_sites: usize) -> Self {
        Self::new(PauliString::global(n_sites, Pauli::X), 2).expect("X squares to one")
    }

    pub fn generator(&self) -> &PauliString<T> {
        &self.generator
    }

    pub fn group_order(&self) -> usize {
        self.group_order
    }

    /// The generator restricted to `sites`, as a dense local matrix.
    pub fn local_generator(&self, sites: &[usize]) -> ComplexMatrix<T> {
        self.generator.restrict(sites).to_dense()
    }
}

/// Outcome of a Kraus-level commutation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub symmetric: bool,
    pub max_violation: f64,
}

/// Whether every Kraus operator of the given representation commutes with the
/// symmetry generator. The check is representation dependent: failure does
/// not rule out a different, symmetric Kraus representation.
pub fn check_strong_symmetry<T: Real>(channel: &KrausChannel<T>, sym: &SymmetrySpec<T>) -> SymmetryCheck {
    let mut worst = T::zero();
    for f in channel.factors() {
        let u = sym.local_generator(f.support());
        for k in f.ops() {
            let comm = k * &u - &u * k;
            worst = worst.max(comm.iter().fold(T::zero(), |a, z| a.max(z.modulus())));
        }
    }
    SymmetryCheck { symmetric: worst <= T::lit(SYMMETRY_TOL), max_violation: worst.as_f64() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    ZzDephasing,
    Theta,
    GeneralIsing,
    SiteXDephasing,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
}

/// JSON document `{type, n_sites, lattice, params}` describing a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDescription {
    #[serde(rename = "type")]
    pub kind: ChannelKind,
    pub n_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    pub params: ChannelParams,
}

impl ChannelDescription {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn build<T: Real>(&self) -> Result<KrausChannel<T>> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("channel parameter `{name}` missing")))
        };
        let lattice = || -> Result<LatticeSpec> {
            let l = self.lattice.ok_or_else(|| Error::InvalidArgument("lattice missing".into()))?;
            if l.n_sites() != self.n_sites {
                return Err(Error::DimensionMismatch { expected: self.n_sites, found: l.n_sites() });
            }
            Ok(l)
        };
        match self.kind {
            ChannelKind::ZzDephasing => zz_dephasing(&lattice()?, T::lit(need(self.params.p, "p")?)),
            ChannelKind::Theta => {
                theta_channel(&lattice()?, T::lit(need(self.params.p, "p")?), T::lit(need(self.params.theta, "theta")?))
            }
            ChannelKind::GeneralIsing => {
                let w = self.params.weights.as_ref().ok_or_else(|| Error::BadWeights("weights missing".into()))?;
                let w: Vec<(T, T)> = w.iter().map(|(p, t)| (T::lit(*p), T::lit(*t))).collect();
                general_ising_channel(&lattice()?, &w)
            }
            ChannelKind::SiteXDephasing => {
                let p = T::lit(need(self.params.p, "p")?);
                match &self.params.sites {
                    Some(s) => site_x_dephasing_on(self.n_sites, s, p),
                    None => site_x_dephasing(self.n_sites, p),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::models::{state_ghz, state_plus_product};
    use crate::random::{random_density, random_unitary};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn bond() -> LatticeSpec {
        LatticeSpec::chain(2, Boundary::Open)
    }

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho: DensityMatrix = random_density(2, 4, &mut rng);
        for ch in [
            zz_dephasing(&bond(), 0.0).unwrap(),
            theta_channel(&bond(), 0.3, 0.0).unwrap(),
            site_x_dephasing(2, 0.0).unwrap(),
        ] {
            assert!(apply(&ch, &rho).unwrap().max_distance(&rho) < 1e-14);
        }
        assert!(matches!(zz_dephasing::<f64>(&bond(), 1.5), Err(Error::BadProbability(_))));
    }

    #[test]
    fn half_dephasing_kills_correlations_on_plus_state() {
        let rho = state_plus_product::<f64>(2).unwrap();
        let out = apply(&zz_dephasing(&bond(), 0.5).unwrap(), &rho).unwrap();
        let zz = PauliString::from_label("ZZ").unwrap();
        let x0 = PauliString::from_label("XI").unwrap();
        assert!(zz.trace_with(out.matrix()).norm() < 1e-14);
        assert!(x0.trace_with(out.matrix()).norm() < 1e-14);
    }

    #[test]
    fn sequential_dephasing_composes_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho: DensityMatrix = random_density(2, 4, &mut rng);
        let (p, q) = (0.13, 0.27);
        let two = apply(&zz_dephasing(&bond(), q).unwrap(), &apply(&zz_dephasing(&bond(), p).unwrap(), &rho).unwrap())
            .unwrap();
        let one = apply(&zz_dephasing(&bond(), p + q - 2.0 * p * q).unwrap(), &rho).unwrap();
        assert!(two.max_distance(&one) < 1e-14);
    }

    #[test]
    fn theta_half_pi_matches_zz() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = LatticeSpec::chain(3, Boundary::Open);
        for _ in 0..5 {
            let rho: DensityMatrix = random_density(3, 8, &mut rng);
            let p: f64 = rng.random();
            let a = apply(&theta_channel(&l, p, FRAC_PI_2).unwrap(), &rho).unwrap();
            let b = apply(&zz_dephasing(&l, p).unwrap(), &rho).unwrap();
            assert!(a.max_distance(&b) < 1e-12);
        }
    }

    #[test]
    fn beta_weight_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let p: f64 = rng.random();
            let th: f64 = rng.random_range(-3.0..3.0);
            let beta = ising_channel_beta(&[(1.0 - p, 0.0), (p, th)]);
            let closed = (1.0 - 4.0 * p * (1.0 - p) * th.sin().powi(2)).sqrt();
            assert!((beta - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn general_channel_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho: DensityMatrix = random_density(2, 4, &mut rng);
        let th = 0.37;
        let u = general_ising_channel(&bond(), &[(1.0, th)]).unwrap();
        let out = apply(&u, &rho).unwrap();
        let g = zz_rotation(th);
        let direct = &g * rho.matrix() * g.adjoint();
        assert!((out.matrix() - direct).camax() < 1e-14);

        let p = 0.3;
        let a = apply(&general_ising_channel(&bond(), &[(1.0 - p, 0.0), (p, th)]).unwrap(), &rho).unwrap();
        let b = apply(&theta_channel(&bond(), p, th).unwrap(), &rho).unwrap();
        assert!(a.max_distance(&b) < 1e-15);
        assert!(matches!(general_ising_channel::<f64>(&bond(), &[(0.5, 0.0), (0.4, 1.0)]), Err(Error::BadWeights(_))));
    }

    #[test]
    fn general_channel_damps_coherence_by_beta() {
        // |01><10| sits in the ZZ = -1 block on both sides; e^{i th ZZ} acts as e^{-i th} on each,
        // so the coherence |00><01| (ZZ = +1 vs -1) is multiplied by sum_n p_n e^{2 i th_n}.
        let weights = [(0.2, 0.1), (0.5, 0.9), (0.3, -0.4)];
        let ch = general_ising_channel(&bond(), &weights).unwrap();
        let mut m = ComplexMatrix::<f64>::zeros(4, 4);
        m[(0, 1)] = cr(1.0);
        let out = ch.apply_matrix(&m).unwrap();
        assert!((out[(0, 1)].norm() - ising_channel_beta(&weights)).abs() < 1e-14);
    }

    #[test]
    fn x_dephasing_on_ghz() {
        let ghz = state_ghz::<f64>(3).unwrap();
        let out = apply(&site_x_dephasing(3, 0.5).unwrap(), &ghz).unwrap();
        let xxx = PauliString::<f64>::from_label("XXX").unwrap().to_dense();
        let expected = (ComplexMatrix::identity(8, 8) + xxx) / cr(8.0);
        assert!((out.matrix() - expected).camax() < 1e-14);
    }

    #[test]
    fn unitary_and_unital_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let rho: DensityMatrix = random_density(3, 8, &mut rng);
        let u = KrausChannel::unitary(3, vec![0, 2], random_unitary(4, &mut rng)).unwrap();
        let out = apply(&u, &rho).unwrap();
        let mut a = rho.eigenvalues().to_vec();
        let mut b = out.eigenvalues().to_vec();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));

        let l = LatticeSpec::chain(3, Boundary::Periodic);
        for _ in 0..20 {
            let rho: DensityMatrix = random_density(3, 3, &mut rng);
            let ch = theta_channel(&l, rng.random(), rng.random_range(0.0..3.0)).unwrap();
            assert!(apply(&ch, &rho).unwrap().purity() <= rho.purity() + 1e-12);
        }
    }

    #[test]
    fn strong_symmetry_checks() {
        let l = LatticeSpec::square(2, 2, Boundary::Open);
        let sym = SymmetrySpec::z2_x(4);
        for p in [0.0, 0.1, 0.5, 1.0] {
            assert!(check_strong_symmetry(&zz_dephasing(&l, p).unwrap(), &sym).symmetric);
        }
        for th in [0.1, 1.0, 2.5] {
            assert!(check_strong_symmetry(&theta_channel(&l, 0.3, th).unwrap(), &sym).symmetric);
        }
        let z0 = KrausChannel::unitary(4, vec![0], Pauli::Z.matrix()).unwrap();
        let check = check_strong_symmetry(&z0, &sym);
        assert!(!check.symmetric);
        assert!((check.max_violation - 2.0).abs() < 1e-12);
        assert!(check_strong_symmetry(&KrausChannel::<f64>::identity(4), &sym).symmetric);
    }

    #[test]
    fn symmetric_channel_preserves_strong_symmetry() {
        let l = LatticeSpec::square(2, 2, Boundary::Open);
        let rho = state_plus_product::<f64>(4).unwrap();
        let out = apply(&theta_channel(&l, 0.3, 0.7).unwrap(), &rho).unwrap();
        let (_, resid) = out.strong_symmetry_residual(&PauliString::global(4, Pauli::X));
        assert!(resid < 1e-10);
    }

    #[test]
    fn compose_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let rho: DensityMatrix = random_density(2, 4, &mut rng);
        let id = KrausChannel::identity(2);
        let c = theta_channel(&bond(), 0.2, 0.5).unwrap();
        let lhs = apply(&compose(&id, &c).unwrap(), &rho).unwrap();
        assert!(lhs.max_distance(&apply(&c, &rho).unwrap()) < 1e-15);

        let (p, q) = (0.1, 0.35);
        let a = zz_dephasing(&bond(), p).unwrap();
        let b = zz_dephasing(&bond(), q).unwrap();
        let raw = compose_unpruned(&a, &b).unwrap();
        assert_eq!(raw.kraus_count(), 4);
        assert_eq!(raw.kraus_operators().unwrap().len(), 4);
        let pruned = compose(&a, &b).unwrap();
        assert_eq!(pruned.kraus_count(), 2);
        let target = apply(&zz_dephasing(&bond(), p + q - 2.0 * p * q).unwrap(), &rho).unwrap();
        assert!(apply(&pruned, &rho).unwrap().max_distance(&target) < 1e-14);
        assert!(apply(&raw, &rho).unwrap().max_distance(&target) < 1e-14);

        // non-Pauli factors are never merged
        let t = compose(&c, &c).unwrap();
        assert_eq!(t.kraus_count(), 4);
    }

    #[test]
    fn full_kraus_list_matches_factored_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let l = LatticeSpec::chain(3, Boundary::Open);
        let ch = theta_channel(&l, 0.25, 0.6).unwrap();
        let rho: DensityMatrix = random_density(3, 8, &mut rng);
        let mut direct = ComplexMatrix::<f64>::zeros(8, 8);
        for k in ch.kraus_operators().unwrap() {
            direct += &k * rho.matrix() * k.adjoint();
        }
        assert!((apply(&ch, &rho).unwrap().matrix() - direct).camax() < 1e-14);
        let x = ComplexMatrix::from_fn(8, 8, |i, j| Complex::new((i + 2 * j) as f64, i as f64 - j as f64));
        let mut adj = ComplexMatrix::<f64>::zeros(8, 8);
        for k in ch.kraus_operators().unwrap() {
            adj += k.adjoint() * &x * &k;
        }
        assert!((ch.apply_adjoint(&x).unwrap() - adj).camax() < 1e-12);
    }

    #[test]
    fn description_round_trip() {
        let json = r#"{"type":"theta","n_sites":4,"lattice":{"kind":"square","lx":2,"ly":2,"boundary":"open"},"params":{"p":0.2,"theta":0.5}}"#;
        let d = ChannelDescription::from_json(json).unwrap();
        assert_eq!(ChannelDescription::from_json(&d.to_json()).unwrap(), d);
        let ch: KrausChannel = d.build().unwrap();
        assert_eq!(ch.factors().len(), 4);
        assert!(ChannelDescription::from_json(r#"{"type":"theta","n_sites":4,"params":{"q":1}}"#).is_err());
    }
}
