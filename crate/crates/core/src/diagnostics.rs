//! Distinguishability measures and SSB diagnostics on dense states.
//!
//! Fidelities are root fidelities `F = Tr sqrt(sqrt(rho) sigma sqrt(rho))`.
//! Entropic quantities are in nats, except [`sandwiched_renyi`], which is in bits.

use nalgebra::ComplexField;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::density::{subsystem_entropy, DensityMatrix};
use crate::error::{Error, Result};
use crate::matrix::{self, psd_spectral, spectral_complex_power, ComplexMatrix, EigenBasis, Spectral};
use crate::pauli::{LocalOp, Pauli, PauliString};
use crate::scalar::{cr, Real};

fn positive_sqrt<T: Real>(x: T) -> T {
    x.max(T::zero()).sqrt()
}

/// Square root of an eigenvalue of `sqrt(s) r sqrt(s)`; eigensolver noise
/// (below `SUPPORT_TOL / 100`) would otherwise add ~1e-8 to orthogonal pairs.
/// `sandwiched_renyi` uses the same floor.
fn product_eigen_sqrt<T: Real>(x: T) -> T {
    if x <= T::lit(T::SUPPORT_TOL * 1e-2) {
        T::zero()
    } else {
        x.sqrt()
    }
}

fn infinity<T: Real>() -> T {
    T::lit(f64::INFINITY)
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Columns of `s` whose eigenvalue exceeds `tol`, with those eigenvalues.
fn support_columns<T: Real>(s: &Spectral<T>, tol: T) -> (ComplexMatrix<T>, Vec<T>) {
    let keep: Vec<usize> = (0..s.dim()).filter(|&k| s.values[k] > tol).collect();
    let d = s.dim();
    let vecs = match &s.basis {
        EigenBasis::Computational => {
            ComplexMatrix::from_fn(d, keep.len(), |i, j| if i == keep[j] { cr(T::one()) } else { cr(T::zero()) })
        }
        EigenBasis::Hadamard => {
            let sc = T::one() / T::from_usize(d).unwrap().sqrt();
            ComplexMatrix::from_fn(d, keep.len(), |i, j| {
                if (i & keep[j]).count_ones().is_multiple_of(2) {
                    cr(sc)
                } else {
                    cr(-sc)
                }
            })
        }
        EigenBasis::Dense(v) => v.select_columns(keep.iter()),
    };
    (vecs, keep.iter().map(|&k| s.values[k]).collect())
}

fn fidelity_spectral<T: Real>(
    a: &Spectral<T>,
    a_mat: &ComplexMatrix<T>,
    b: &Spectral<T>,
    b_mat: &ComplexMatrix<T>,
) -> Result<T> {
    if a.same_structured_basis(b) {
        return Ok(a.values.iter().zip(&b.values).fold(T::zero(), |acc, (&p, &q)| acc + positive_sqrt(p * q)));
    }
    let tol = T::lit(T::SUPPORT_TOL);
    let rank = |s: &Spectral<T>| s.values.iter().filter(|&&l| l > tol).count();
    let (small, other) = if rank(a) <= rank(b) { (a, b_mat) } else { (b, a_mat) };
    let (v, lam) = support_columns(small, tol);
    if lam.is_empty() {
        return Ok(T::zero());
    }
    let scale = DVector::from_iterator(lam.len(), lam.iter().map(|&l| cr(l.sqrt())));
    let mut m = v.adjoint() * other * &v;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            m[(i, j)] *= scale[i] * scale[j];
        }
    }
    let mu = matrix::hermitian_eigen(matrix::symmetrize(&m))?.0;
    Ok(mu.iter().fold(T::zero(), |acc, &x| acc + product_eigen_sqrt(x)))
}

/// Root fidelity of two states.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_dims(rho.dim(), sigma.dim())?;
    Ok(fidelity_spectral(rho.spectral(), rho.matrix(), sigma.spectral(), sigma.matrix())?.min(T::one()))
}

/// Root fidelity against an unnormalized PSD operator of trace at most one.
pub fn fidelity_psd<T: Real>(rho: &DensityMatrix<T>, sigma: &ComplexMatrix<T>) -> Result<T> {
    check_dims(rho.dim(), sigma.nrows())?;
    let s = psd_spectral(sigma, rho.psd_tol())?;
    let tr = s.values.iter().fold(T::zero(), |a, &b| a + b);
    if tr > T::one() + T::lit(1e-10) {
        return Err(Error::InvalidTrace { trace: tr.as_f64() });
    }
    fidelity_spectral(rho.spectral(), rho.matrix(), &s, sigma)
}

/// `F(rho, sigma / Tr sigma)`.
pub fn fidelity_normalized<T: Real>(rho: &DensityMatrix<T>, sigma: &ComplexMatrix<T>) -> Result<T> {
    let tr = matrix::trace(sigma).re;
    if tr <= T::lit(T::SUPPORT_TOL) {
        return Err(Error::InvalidTrace { trace: tr.as_f64() });
    }
    fidelity_psd(rho, &(sigma / cr(tr)))
}

/// Fidelity average `F(rho, O rho O^dagger)` of an operator string.
pub fn fidelity_average<T: Real>(rho: &DensityMatrix<T>, op: &PauliString<T>) -> Result<T> {
    check_dims(rho.n_sites(), op.n_sites())?;
    if let Some(v) = structured_pair_fidelity(rho, op) {
        return Ok(v);
    }
    fidelity_psd(rho, &op.conjugate(rho.matrix()))
}

/// Index permutation `k -> k ^ mask` induced by a unitary Pauli string on the
/// eigenbasis of `rho`, when that basis is structured.
fn structured_flip<T: Real>(rho: &DensityMatrix<T>, op: &PauliString<T>) -> Option<usize> {
    if !op.is_unitary() {
        return None;
    }
    let (x, z) = op.flip_masks()?;
    match rho.spectral().basis {
        EigenBasis::Computational => Some(x),
        EigenBasis::Hadamard => Some(z),
        EigenBasis::Dense(_) => None,
    }
}

fn structured_pair_fidelity<T: Real>(rho: &DensityMatrix<T>, op: &PauliString<T>) -> Option<T> {
    let mask = structured_flip(rho, op)?;
    let p = rho.eigenvalues();
    Some(p.iter().enumerate().fold(T::zero(), |acc, (k, &v)| acc + positive_sqrt(v * p[k ^ mask])))
}

fn check_pair(n: usize, x: usize, y: usize) -> Result<()> {
    if x == y {
        return Err(Error::BadSiteSet(format!("correlator sites coincide at {x}")));
    }
    if x >= n || y >= n {
        return Err(Error::BadSiteSet(format!("site pair ({x}, {y}) outside {n} sites")));
    }
    Ok(())
}

fn pair_operator<T: Real>(rho: &DensityMatrix<T>, op: &LocalOp<T>, x: usize, y: usize) -> Result<PauliString<T>> {
    check_pair(rho.n_sites(), x, y)?;
    PauliString::charged_pair(rho.n_sites(), op, x, y)
}

/// `F(rho, O_x O_y^dagger rho O_y O_x^dagger)`, unnormalized for non-unitary `O`.
pub fn fidelity_correlator<T: Real>(rho: &DensityMatrix<T>, op: &LocalOp<T>, x: usize, y: usize) -> Result<T> {
    let a = pair_operator(rho, op, x, y)?;
    fidelity_average(rho, &a)
}

/// `Tr(O_x O_y^dagger rho O_y O_x^dagger rho) / Tr rho^2`.
pub fn renyi2_correlator<T: Real>(rho: &DensityMatrix<T>, op: &LocalOp<T>, x: usize, y: usize) -> Result<T> {
    let a = pair_operator(rho, op, x, y)?;
    let purity = rho.purity();
    if purity <= T::lit(T::SUPPORT_TOL) {
        return Err(Error::DegeneratePurity(purity.as_f64()));
    }
    if let Some(mask) = structured_flip(rho, &a) {
        let p = rho.eigenvalues();
        let num = p.iter().enumerate().fold(T::zero(), |acc, (k, &v)| acc + v * p[k ^ mask]);
        return Ok(num / purity);
    }
    Ok(matrix::trace_product(&a.conjugate(rho.matrix()), rho.matrix()).re / purity)
}

/// `|Tr(rho O_x O_y^dagger)|`.
pub fn linear_correlator<T: Real>(rho: &DensityMatrix<T>, op: &LocalOp<T>, x: usize, y: usize) -> Result<T> {
    let a = pair_operator(rho, op, x, y)?;
    Ok(a.trace_with(rho.matrix()).modulus())
}

/// Half the trace norm of a Hermitian difference.
pub fn trace_distance_matrices<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<T> {
    check_dims(a.nrows(), b.nrows())?;
    let s = Spectral::of_hermitian(&(a - b))?;
    Ok(s.values.iter().fold(T::zero(), |acc, l| acc + l.abs()) * T::lit(0.5))
}

pub fn trace_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_dims(rho.dim(), sigma.dim())?;
    let (a, b) = (rho.spectral(), sigma.spectral());
    if a.same_structured_basis(b) {
        return Ok(a.values.iter().zip(&b.values).fold(T::zero(), |acc, (p, q)| acc + (*p - *q).abs()) * T::lit(0.5));
    }
    trace_distance_matrices(rho.matrix(), sigma.matrix())
}

/// Diagonal of `rho` in the eigenbasis of `s`.
fn weights_in_basis<T: Real>(rho: &DensityMatrix<T>, s: &Spectral<T>) -> Vec<T> {
    if rho.spectral().same_structured_basis(s) {
        return rho.eigenvalues().to_vec();
    }
    let v = s.vectors();
    let rv = rho.matrix() * &v;
    (0..s.dim()).map(|k| v.column(k).dotc(&rv.column(k)).re).collect()
}

fn support_violated<T: Real>(weights: &[T], s: &Spectral<T>) -> bool {
    let (sup, psd) = (T::lit(T::SUPPORT_TOL), T::lit(T::PSD_TOL));
    weights.iter().zip(&s.values).any(|(&w, &q)| q <= sup && w > psd)
}

/// `Tr rho (ln rho - ln sigma)`; `+inf` when `supp rho` is not inside `supp sigma`.
pub fn relative_entropy<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_dims(rho.dim(), sigma.dim())?;
    let s = sigma.spectral();
    let w = weights_in_basis(rho, s);
    if support_violated(&w, s) {
        return Ok(infinity());
    }
    let sup = T::lit(T::SUPPORT_TOL);
    let cross = w.iter().zip(&s.values).filter(|(_, &q)| q > sup).fold(T::zero(), |acc, (&w, &q)| acc + w * q.ln());
    let neg_entropy = rho.eigenvalues().iter().filter(|&&l| l > sup).fold(T::zero(), |acc, &l| acc + l * l.ln());
    Ok((neg_entropy - cross).max(T::zero()))
}

/// Sandwiched Renyi divergence in bits,
/// `log2 Tr[(sigma^g rho sigma^g)^alpha] / (alpha - 1)` with `g = (1-alpha)/(2 alpha)`.
pub fn sandwiched_renyi<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>, alpha: T) -> Result<T> {
    check_dims(rho.dim(), sigma.dim())?;
    if !(alpha > T::zero() && alpha.is_finite()) || alpha == T::one() {
        return Err(Error::InvalidArgument(format!("Renyi order {} outside (0,1)u(1,inf)", alpha.as_f64())));
    }
    let s = sigma.spectral();
    let sup = T::lit(T::SUPPORT_TOL);
    if alpha > T::one() && support_violated(&weights_in_basis(rho, s), s) {
        return Ok(infinity());
    }
    let q = if rho.spectral().same_structured_basis(s) {
        rho.eigenvalues()
            .iter()
            .zip(&s.values)
            .filter(|(&p, &q)| p > T::zero() && q > sup)
            .fold(T::zero(), |acc, (&p, &q)| acc + p.powf(alpha) * q.powf(T::one() - alpha))
    } else {
        let g = (T::one() - alpha) / (alpha + alpha);
        let sg = spectral_complex_power(s, g, T::zero(), sup);
        let m = &sg * rho.matrix() * &sg;
        let mu = Spectral::of_hermitian(&m)?;
        let floor = T::lit(T::SUPPORT_TOL * 1e-2);
        mu.values.iter().filter(|&&x| x > floor).fold(T::zero(), |acc, &x| acc + x.powf(alpha))
    };
    if q <= T::zero() {
        return Ok(infinity());
    }
    Ok(q.log2() / (alpha - T::one()))
}

/// `Tr[(rho^m sigma rho^m)^n]` with `sigma = A rho A^dagger`, unnormalized.
pub fn replicated_fidelity<T: Real>(rho: &DensityMatrix<T>, a: &PauliString<T>, m: usize, n: usize) -> Result<T> {
    check_dims(rho.n_sites(), a.n_sites())?;
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("replica indices must be positive".into()));
    }
    if let Some(mask) = structured_flip(rho, a) {
        let p = rho.eigenvalues();
        return Ok(p.iter().enumerate().fold(T::zero(), |acc, (k, &v)| {
            acc + (v.max(T::zero()).powi(2 * m as i32) * p[k ^ mask].max(T::zero())).powi(n as i32)
        }));
    }
    let rm = rho.spectral().map(|l| cr(l.max(T::zero()).powi(m as i32)));
    let x = &rm * a.conjugate(rho.matrix()) * &rm;
    let xn = (1..n).fold(x.clone(), |acc, _| &acc * &x);
    Ok(matrix::trace(&xn).re)
}

/// `replicated_fidelity / Tr rho^{2mn+n}`.
pub fn replicated_fidelity_normalized<T: Real>(
    rho: &DensityMatrix<T>,
    a: &PauliString<T>,
    m: usize,
    n: usize,
) -> Result<T> {
    let num = replicated_fidelity(rho, a, m, n)?;
    let k = (2 * m * n + n) as i32;
    let den = rho.eigenvalues().iter().fold(T::zero(), |acc, &l| acc + l.max(T::zero()).powi(k));
    Ok(num / den)
}

fn sorted_union(parts: &[&[usize]]) -> Vec<usize> {
    let mut v: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    v.sort_unstable();
    v
}

/// `I(A;C|B) = S(AB) + S(BC) - S(B) - S(ABC)` in nats.
pub fn cmi<T: Real>(rho: &DensityMatrix<T>, a: &[usize], b: &[usize], c: &[usize]) -> Result<T> {
    if a.is_empty() || c.is_empty() {
        return Err(Error::BadPartition("regions A and C must be nonempty".into()));
    }
    let all = sorted_union(&[a, b, c]);
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::BadPartition("regions overlap".into()));
    }
    if all.last().is_some_and(|&s| s >= rho.n_sites()) {
        return Err(Error::BadPartition(format!("site outside {} sites", rho.n_sites())));
    }
    let s = |sites: Vec<usize>| subsystem_entropy(rho, &sites);
    Ok(s(sorted_union(&[a, b]))? + s(sorted_union(&[b, c]))? - s(sorted_union(&[b]))? - s(all)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SsbThresholds {
    pub fidelity: f64,
    pub linear: f64,
}

impl Default for SsbThresholds {
    fn default() -> Self {
        SsbThresholds { fidelity: 0.1, linear: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Unbroken,
    SwSsb,
    FullyBroken,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsbClassification {
    pub pair: (usize, usize),
    pub fidelity_value: f64,
    pub renyi2_value: f64,
    pub linear_value: f64,
    pub verdict: Verdict,
    pub thresholds: SsbThresholds,
}

/// Charged operators probed by default.
pub fn default_operator_family<T: Real>() -> Vec<LocalOp<T>> {
    vec![LocalOp::Pauli(Pauli::Z), LocalOp::Pauli(Pauli::Y)]
}

/// Thresholds the farthest pair (largest `|x - y|`). Each value is the
/// maximum over the operator family.
pub fn classify_ssb<T: Real>(
    rho: &DensityMatrix<T>,
    ops: &[LocalOp<T>],
    pairs: &[(usize, usize)],
    thresholds: SsbThresholds,
) -> Result<SsbClassification> {
    let &(x, y) = pairs
        .iter()
        .max_by_key(|(x, y)| x.abs_diff(*y))
        .ok_or_else(|| Error::InvalidArgument("no site pairs".into()))?;
    if ops.is_empty() {
        return Err(Error::InvalidArgument("empty operator family".into()));
    }
    let (mut f, mut r, mut l) = (0.0f64, 0.0f64, 0.0f64);
    for op in ops {
        f = f.max(fidelity_correlator(rho, op, x, y)?.as_f64());
        r = r.max(renyi2_correlator(rho, op, x, y)?.as_f64());
        l = l.max(linear_correlator(rho, op, x, y)?.as_f64());
    }
    let verdict = match (f >= thresholds.fidelity, l >= thresholds.linear) {
        (true, false) => Verdict::SwSsb,
        (true, true) => Verdict::FullyBroken,
        (false, false) => Verdict::Unbroken,
        (false, true) => Verdict::Inconsistent,
    };
    Ok(SsbClassification { pair: (x, y), fidelity_value: f, renyi2_value: r, linear_value: l, verdict, thresholds })
}

fn require_unitary<T: Real>(op: &LocalOp<T>) -> Result<()> {
    if !op.is_unitary() {
        return Err(Error::InvalidArgument("charged operator must be unitary".into()));
    }
    Ok(())
}

/// `(1/N) sum_x O_x m O_x^dagger`.
fn charge_average<T: Real>(n: usize, op: &LocalOp<T>, m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
    for x in 0..n {
        out += PauliString::single(n, x, op.clone())?.conjugate(m);
    }
    Ok(out / cr(T::from_usize(n).unwrap()))
}

/// `|Tr[M (rho~ - rho)]|` with `rho~ = (1/N) sum_x O_x rho O_x^dagger`.
pub fn local_indistinguishability_check<T: Real>(
    rho: &DensityMatrix<T>,
    op: &LocalOp<T>,
    m: &PauliString<T>,
) -> Result<T> {
    require_unitary(op)?;
    check_dims(rho.n_sites(), m.n_sites())?;
    let tilde = charge_average(rho.n_sites(), op, rho.matrix())?;
    Ok(m.trace_with(&(tilde - rho.matrix())).modulus())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl DetectabilityBound {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs >= self.rhs - slack
    }
}

/// Joint-concavity chain: `lhs = F(rho_+, (1/N) sum_y O_y rho_+ O_y^dagger)` with
/// `rho_+ = (rho + rho~)/2`, and `rhs = (1/N^2) sum_{x,y} F(rho, O_x^dagger O_y rho O_y^dagger O_x)`.
pub fn detectability_bound<T: Real>(rho: &DensityMatrix<T>, op: &LocalOp<T>) -> Result<DetectabilityBound> {
    require_unitary(op)?;
    let n = rho.n_sites();
    let tilde = charge_average(n, op, rho.matrix())?;
    let plus = DensityMatrix::with_tolerance((rho.matrix() + tilde) * cr(T::lit(0.5)), rho.psd_tol())?;
    let shifted = DensityMatrix::with_tolerance(charge_average(n, op, plus.matrix())?, rho.psd_tol())?;
    let lhs = fidelity(&plus, &shifted)?;
    let adj = op.adjoint();
    let mut total = T::zero();
    for x in 0..n {
        for y in 0..n {
            total += if x == y { T::one() } else { fidelity_average(rho, &PauliString::charged_pair(n, &adj, x, y)?)? };
        }
    }
    let rhs = total / T::from_usize(n * n).unwrap();
    Ok(DetectabilityBound { lhs: lhs.as_f64(), rhs: rhs.as_f64() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    Fidelity,
    Renyi2,
    Linear,
    TraceDistance,
    RelEntropy,
    Sandwiched { alpha: f64 },
    Replicated { m: usize, n: usize },
}

impl Measure {
    pub fn name(&self) -> String {
        match self {
            Measure::Fidelity => "fidelity".into(),
            Measure::Renyi2 => "renyi2".into(),
            Measure::Linear => "linear".into(),
            Measure::TraceDistance => "trace_distance".into(),
            Measure::RelEntropy => "rel_entropy".into(),
            Measure::Sandwiched { alpha } => format!("sandwiched_{alpha}"),
            Measure::Replicated { m, n } => format!("replicated_{m}_{n}"),
        }
    }
}

/// Two-point diagnostic between `rho` and `O_x O_y^dagger rho O_y O_x^dagger`.
#[derive(Debug, Clone)]
pub struct CorrelatorRequest<T: Real = f64> {
    pub op: LocalOp<T>,
    pub x: usize,
    pub y: usize,
    pub measure: Measure,
}

impl<T: Real> CorrelatorRequest<T> {
    pub fn new(x: usize, y: usize, measure: Measure) -> Self {
        CorrelatorRequest { op: LocalOp::Pauli(Pauli::Z), x, y, measure }
    }

    pub fn with_op(mut self, op: LocalOp<T>) -> Self {
        self.op = op;
        self
    }

    pub fn evaluate(&self, rho: &DensityMatrix<T>) -> Result<T> {
        let (op, x, y) = (&self.op, self.x, self.y);
        let shifted = || -> Result<DensityMatrix<T>> {
            let a = pair_operator(rho, op, x, y)?;
            DensityMatrix::with_tolerance(a.conjugate(rho.matrix()), rho.psd_tol())
        };
        match self.measure {
            Measure::Fidelity => fidelity_correlator(rho, op, x, y),
            Measure::Renyi2 => renyi2_correlator(rho, op, x, y),
            Measure::Linear => linear_correlator(rho, op, x, y),
            Measure::TraceDistance => trace_distance(rho, &shifted()?),
            Measure::RelEntropy => relative_entropy(rho, &shifted()?),
            Measure::Sandwiched { alpha } => sandwiched_renyi(rho, &shifted()?, T::lit(alpha)),
            Measure::Replicated { m, n } => replicated_fidelity(rho, &pair_operator(rho, op, x, y)?, m, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub state_id: String,
    pub measure: String,
    pub x: usize,
    pub y: usize,
    pub value: f64,
}

/// Table of `{state_id, measure, x, y, value}` rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rows: Vec<DiagnosticRow>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, state_id: &str, measure: &str, x: usize, y: usize, value: f64) {
        self.rows.push(DiagnosticRow { state_id: state_id.into(), measure: measure.into(), x, y, value });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("plain data serializes")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["state_id", "measure", "x", "y", "value"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.state_id.clone(),
                r.measure.clone(),
                r.x.to_string(),
                r.y.to_string(),
                format!("{:.16e}", r.value),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{state_counterexample, state_ghz, state_one_plus_X, state_plus_product};
    use crate::random::{random_density, random_unitary};
    use num_complex::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z() -> LocalOp<f64> {
        LocalOp::Pauli(Pauli::Z)
    }

    fn ket(bits: &[f64]) -> DensityMatrix {
        let psi: Vec<Complex<f64>> = bits.iter().map(|&b| cr(b)).collect();
        DensityMatrix::from_pure(&psi).unwrap()
    }

    #[test]
    fn fidelity_basics() {
        let a = ket(&[1.0, 0.0]);
        let b = ket(&[0.0, 1.0]);
        assert!(fidelity(&a, &b).unwrap() < 1e-12);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let r: DensityMatrix = random_density(3, 3, &mut rng);
            let s: DensityMatrix = random_density(3, 8, &mut rng);
            assert!((fidelity(&r, &s).unwrap() - fidelity(&s, &r).unwrap()).abs() < 1e-9);
            assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fidelity_of_commuting_states_is_bhattacharyya() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.25, 0.25, 0.4, 0.1];
        let a = DensityMatrix::from_probabilities(&p).unwrap();
        let b = DensityMatrix::from_probabilities(&q).unwrap();
        let bc: f64 = p.iter().zip(&q).map(|(x, y)| (x * y).sqrt()).sum();
        assert!((fidelity(&a, &b).unwrap() - bc).abs() < 1e-14);
    }

    #[test]
    fn uhlmann_lower_bound() {
        // Purify qubit states on a qubit auxiliary; every auxiliary unitary gives
        // an overlap below F, and the best of many samples comes close.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let r: DensityMatrix = random_density(1, 2, &mut rng);
            let s: DensityMatrix = random_density(1, 2, &mut rng);
            let f = fidelity(&r, &s).unwrap();
            let purify = |rho: &DensityMatrix| {
                let v = rho.spectral().vectors();
                let l = rho.eigenvalues().to_vec();
                let mut psi = nalgebra::DVector::<Complex<f64>>::zeros(4);
                for k in 0..2 {
                    for i in 0..2 {
                        psi[2 * i + k] += v[(i, k)] * l[k].max(0.0).sqrt();
                    }
                }
                psi
            };
            let (pr, ps) = (purify(&r), purify(&s));
            let mut best: f64 = 0.0;
            for _ in 0..4000 {
                let u: ComplexMatrix<f64> = random_unitary(2, &mut rng);
                let full = ComplexMatrix::<f64>::identity(2, 2).kronecker(&u);
                let ov = pr.dotc(&(&full * &ps)).norm();
                assert!(ov <= f + 1e-12);
                best = best.max(ov);
            }
            assert!(best > f - 1e-2);
        }
    }

    #[test]
    fn correlators_on_named_states() {
        for n in [3, 4, 5] {
            let ideal = state_one_plus_X::<f64>(n).unwrap();
            let plus = state_plus_product::<f64>(n).unwrap();
            let ghz = state_ghz::<f64>(n).unwrap();
            for (x, y) in [(0, n - 1), (1, 2)] {
                assert!((fidelity_correlator(&ideal, &z(), x, y).unwrap() - 1.0).abs() < 1e-12);
                assert!((renyi2_correlator(&ideal, &z(), x, y).unwrap() - 1.0).abs() < 1e-12);
                assert!(linear_correlator(&ideal, &z(), x, y).unwrap() < 1e-12);
                assert!(fidelity_correlator(&plus, &z(), x, y).unwrap() < 1e-10);
                assert!((linear_correlator(&ghz, &z(), x, y).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        assert!(fidelity_correlator(&state_ghz::<f64>(3).unwrap(), &z(), 1, 1).is_err());
    }

    #[test]
    fn renyi2_on_pure_state_is_squared_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: DensityMatrix = random_density(3, 1, &mut rng);
        let zz = PauliString::from_label("ZIZ").unwrap();
        let e = zz.trace_with(rho.matrix()).norm();
        assert!((renyi2_correlator(&rho, &z(), 0, 2).unwrap() - e * e).abs() < 1e-10);
    }

    #[test]
    fn structured_and_generic_paths_agree() {
        let rho = state_counterexample::<f64>(5).unwrap();
        let a = PauliString::charged_pair(5, &z(), 0, 4).unwrap();
        let sigma = a.conjugate(rho.matrix());
        let fast = fidelity_correlator(&rho, &z(), 0, 4).unwrap();
        // force the dense path by presenting sigma in a frame the detector cannot see
        let u: ComplexMatrix<f64> = random_unitary(32, &mut ChaCha8Rng::seed_from_u64(4));
        let r2 = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
        let slow = fidelity_psd(&r2, &(&u * sigma * u.adjoint())).unwrap();
        assert!((fast - slow).abs() < 1e-9);
        let cx = state_counterexample::<f64>(8).unwrap();
        assert!(renyi2_correlator(&cx, &z(), 0, 7).unwrap() < fidelity_correlator(&cx, &z(), 0, 7).unwrap());
    }

    #[test]
    fn trace_distance_and_entropies() {
        let a = ket(&[1.0, 0.0]);
        let b = ket(&[0.0, 1.0]);
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(trace_distance(&a, &a).unwrap() < 1e-12);
        assert_eq!(relative_entropy(&a, &b).unwrap(), f64::INFINITY);
        let mixed = DensityMatrix::<f64>::maximally_mixed(1).unwrap();
        assert!((relative_entropy(&a, &mixed).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(relative_entropy(&mixed, &mixed).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sandwiched_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r: DensityMatrix = random_density(2, 4, &mut rng);
        let s: DensityMatrix = random_density(2, 4, &mut rng);
        let f = fidelity(&r, &s).unwrap();
        assert!((sandwiched_renyi(&r, &s, 0.5).unwrap() + 2.0 * f.log2()).abs() < 1e-8);
        let d = relative_entropy(&r, &s).unwrap() / 2f64.ln();
        for a in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert!((sandwiched_renyi(&r, &s, a).unwrap() - d).abs() < 1e-2);
        }
        assert!(sandwiched_renyi(&r, &s, 1.0).is_err());
    }

    #[test]
    fn replicated_fidelity_reductions() {
        let rho = state_one_plus_X::<f64>(4).unwrap();
        let a = PauliString::charged_pair(4, &z(), 0, 2).unwrap();
        let tr3: f64 = rho.eigenvalues().iter().map(|l| l.powi(3)).sum();
        assert!((replicated_fidelity(&rho, &a, 1, 1).unwrap() - tr3).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r: DensityMatrix = random_density(3, 5, &mut rng);
        let id = PauliString::identity(3);
        for (m, n) in [(1, 1), (2, 1), (1, 2)] {
            let k = ((2 * m + 1) * n) as i32;
            let expect: f64 = r.eigenvalues().iter().map(|l| l.powi(k)).sum();
            assert!((replicated_fidelity(&r, &id, m, n).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cmi_examples() {
        let ghz = state_ghz::<f64>(4).unwrap();
        assert!((cmi(&ghz, &[0], &[1, 2], &[3]).unwrap() - 2f64.ln()).abs() < 1e-10);
        let plus = state_plus_product::<f64>(4).unwrap();
        assert!(cmi(&plus, &[0], &[1], &[2, 3]).unwrap().abs() < 1e-10);
        assert!(matches!(cmi(&plus, &[0], &[0], &[2]), Err(Error::BadPartition(_))));
    }

    #[test]
    fn classification_table() {
        let pairs = [(0, 1), (0, 4)];
        let fam = default_operator_family::<f64>();
        let th = SsbThresholds::default();
        let v = |rho: &DensityMatrix| classify_ssb(rho, &fam, &pairs, th).unwrap().verdict;
        assert_eq!(v(&state_one_plus_X(5).unwrap()), Verdict::SwSsb);
        assert_eq!(v(&state_ghz(5).unwrap()), Verdict::FullyBroken);
        assert_eq!(v(&state_plus_product(5).unwrap()), Verdict::Unbroken);
    }

    #[test]
    fn indistinguishability_and_detectability() {
        let ideal = state_one_plus_X::<f64>(4).unwrap();
        assert!(local_indistinguishability_check(&ideal, &z(), &PauliString::identity(4)).unwrap() < 1e-14);
        let x0 = PauliString::from_label("XIII").unwrap();
        assert!(local_indistinguishability_check(&ideal, &z(), &x0).unwrap() < 1e-14);
        let b = detectability_bound(&ideal, &z()).unwrap();
        assert!((b.lhs - 1.0).abs() < 1e-10 && (b.rhs - 1.0).abs() < 1e-10);
        let plus = state_plus_product::<f64>(4).unwrap();
        let b = detectability_bound(&plus, &z()).unwrap();
        assert!(b.holds(1e-9) && b.lhs >= 0.0);
        assert!((b.rhs - 0.25).abs() < 1e-10);
    }

    #[test]
    fn request_dispatch_and_report() {
        let rho = state_one_plus_X::<f64>(3).unwrap();
        let mut report = DiagnosticsReport::default();
        for m in [Measure::Fidelity, Measure::Renyi2, Measure::Linear, Measure::TraceDistance] {
            let v = CorrelatorRequest::new(0, 2, m).evaluate(&rho).unwrap();
            report.push("one_plus_x", &m.name(), 0, 2, v);
        }
        assert!(report.rows[3].value < 1e-12);
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("state_id,measure,x,y,value\n"));
        assert_eq!(csv.lines().count(), 5);
        let back: Vec<DiagnosticRow> = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report.rows);
    }
}
