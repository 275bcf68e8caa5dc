//! Named states: ideal and counterexample SW-SSB states, GHZ, the commuting
//! thermal ensemble, and the ZZ-decohered Ising state in two representations.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channels::{apply, zz_dephasing};
use crate::density::{check_cap, DensityMatrix};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::matrix::{ComplexMatrix, Spectral};
use crate::pauli::{LocalOp, PauliString};
use crate::scalar::{cr, Real};

/// Largest register for the string-basis representation.
pub const MAX_STRING_BASIS_SITES: usize = 20;
/// Largest edge count for which the explicit edge-subset map is produced.
pub const MAX_EXPLICIT_EDGES: usize = 24;

fn check_sites(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::TooLarge { n_sites: n, cap });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("at least one site is required".into()));
    }
    Ok(())
}

fn parity_weights<T: Real>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..1usize << n).map(f).collect()
}

/// `|+...+><+...+|`.
pub fn state_plus_product<T: Real>(n: usize) -> Result<DensityMatrix<T>> {
    check_sites(n, crate::matrix::MAX_DENSE_SITES)?;
    DensityMatrix::from_hadamard_probabilities(&parity_weights(n, |k| if k == 0 { T::one() } else { T::zero() }))
}

/// `(1 + prod_i X_i) / 2^n`.
#[allow(non_snake_case)]
pub fn state_one_plus_X<T: Real>(n: usize) -> Result<DensityMatrix<T>> {
    check_sites(n, crate::matrix::MAX_DENSE_SITES)?;
    let w = T::lit(0.5f64.powi(n as i32 - 1));
    DensityMatrix::from_hadamard_probabilities(&parity_weights(
        n,
        |k| {
            if k.count_ones() % 2 == 0 {
                w
            } else {
                T::zero()
            }
        },
    ))
}

/// `1/2 |+...+><+...+| + 2^{-(L+1)} (1 + prod_i X_i)`.
pub fn state_counterexample<T: Real>(l: usize) -> Result<DensityMatrix<T>> {
    check_sites(l, 12)?;
    let bulk = T::lit(0.5f64.powi(l as i32));
    DensityMatrix::from_hadamard_probabilities(&parity_weights(l, |k| match (k, k.count_ones() % 2) {
        (0, _) => T::lit(0.5) + bulk,
        (_, 0) => bulk,
        _ => T::zero(),
    }))
}

/// `(|0...0> + |1...1>)/sqrt 2`.
pub fn state_ghz<T: Real>(n: usize) -> Result<DensityMatrix<T>> {
    check_sites(n, crate::matrix::MAX_DENSE_SITES)?;
    let mut psi = vec![cr(T::zero()); 1 << n];
    psi[0] = cr(T::one());
    psi[(1 << n) - 1] = cr(T::one());
    DensityMatrix::from_pure(&psi)
}

/// Z2 charge sector of `prod_i X_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    Even,
    Odd,
}

impl Sector {
    fn admits(self, popcount: u32) -> bool {
        match self {
            Sector::Even => popcount.is_multiple_of(2),
            Sector::Odd => popcount % 2 == 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub beta: f64,
    #[serde(default = "even")]
    pub sector: Sector,
}

fn even() -> Sector {
    Sector::Even
}

impl ThermalSpec {
    pub fn new(beta: f64, sector: Sector) -> Result<Self> {
        let s = ThermalSpec { beta, sector };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidArgument(format!("beta must be finite and nonnegative, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Gibbs ensemble `P_sector e^{-beta sum_i X_i} / Z`, weighting each X-basis
/// configuration by `exp(-beta sum_i b_i)`.
pub fn state_thermal_commuting<T: Real>(n: usize, spec: ThermalSpec) -> Result<DensityMatrix<T>> {
    check_sites(n, 12)?;
    spec.validate()?;
    let beta = spec.beta;
    // Shift by the smallest energy so large beta stays finite.
    let weights: Vec<f64> = (0..1usize << n)
        .map(|k| {
            let minus = k.count_ones();
            if spec.sector.admits(minus) {
                (-2.0 * beta * (n as f64 - minus as f64)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    DensityMatrix::from_hadamard_probabilities(&weights.iter().map(|&w| T::lit(w / z)).collect::<Vec<_>>())
}

/// Closed-form fidelity correlator of the even-sector commuting ensemble.
pub fn thermal_fidelity_closed_form(n: usize, beta: f64) -> f64 {
    1.0 / (beta.cosh().powi(2) * (1.0 + beta.tanh().powi(n as i32)))
}

/// Weighted sum of Pauli strings, `H = sum_k c_k P_k`.
#[derive(Debug, Clone)]
pub struct PauliSum<T: Real = f64> {
    n_sites: usize,
    terms: Vec<(T, PauliString<T>)>,
}

impl<T: Real> PauliSum<T> {
    pub fn new(n_sites: usize, terms: Vec<(T, PauliString<T>)>) -> Result<Self> {
        for (_, p) in &terms {
            if p.n_sites() != n_sites {
                return Err(Error::DimensionMismatch { expected: n_sites, found: p.n_sites() });
            }
        }
        Ok(PauliSum { n_sites, terms })
    }

    /// Parses `[(coef, "XIZ"), ...]`.
    pub fn from_labels(terms: &[(f64, &str)]) -> Result<Self> {
        let n = terms.first().map(|(_, l)| l.len()).ok_or_else(|| Error::InvalidArgument("empty sum".into()))?;
        let parsed =
            terms.iter().map(|(c, l)| Ok((T::lit(*c), PauliString::from_label(l)?))).collect::<Result<Vec<_>>>()?;
        Self::new(n, parsed)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn to_dense(&self) -> ComplexMatrix<T> {
        let d = 1usize << self.n_sites;
        self.terms.iter().fold(ComplexMatrix::zeros(d, d), |acc, (c, p)| acc + p.to_dense() * cr(*c))
    }
}

/// `Tr[(sqrt rho A rho A^dagger sqrt rho)^n] / Tr rho^{2n}` with
/// `A = O_x O_y^dagger` and `rho = P e^{-beta H} / Z`, `P` the optional sector projector.
pub fn thermal_replicated_correlator<T: Real>(
    h: &PauliSum<T>,
    beta: T,
    sector: Option<Sector>,
    n_rep: usize,
    x: usize,
    y: usize,
    op: &LocalOp<T>,
) -> Result<T> {
    let n = h.n_sites;
    check_sites(n, 10)?;
    if !(1..=3).contains(&n_rep) {
        return Err(Error::InvalidArgument(format!("replica count {n_rep} not in 1..=3")));
    }
    if !(beta.is_finite() && beta >= T::zero()) {
        return Err(Error::InvalidArgument("beta must be finite and nonnegative".into()));
    }
    let hm = h.to_dense();
    let spec = Spectral::of_hermitian(&hm)?;
    let e0 = spec.values.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b));
    let mut gibbs = spec.map(|e| cr((-(beta * (e - e0))).exp()));
    if let Some(s) = sector {
        let d = 1usize << n;
        let u = PauliString::<T>::global(n, crate::pauli::Pauli::X).to_dense();
        let sign = if s == Sector::Even { T::one() } else { -T::one() };
        let proj = (ComplexMatrix::identity(d, d) + u * cr(sign)) * cr(T::lit(0.5));
        gibbs = &proj * gibbs * &proj;
    }
    let tr = crate::matrix::trace(&gibbs).re;
    if tr <= T::zero() {
        return Err(Error::InvalidArgument("empty charge sector".into()));
    }
    let rho = DensityMatrix::new(gibbs / cr(tr))?;
    let a = PauliString::charged_pair(n, op, x, y)?;
    let sqrt = rho.spectral().map(|l| cr(l.max(T::zero()).sqrt()));
    let inner = a.conjugate(rho.matrix());
    let m = &sqrt * inner * &sqrt;
    let power = |m: &ComplexMatrix<T>| (1..n_rep).fold(m.clone(), |acc, _| &acc * m);
    let num = crate::matrix::trace(&power(&m)).re;
    let den = rho.eigenvalues().iter().fold(T::zero(), |acc, &l| acc + l.max(T::zero()).powi(2 * n_rep as i32));
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Dense,
    StringBasis,
}

/// ZZ-decohered `|+...+>`, stored as the probability of each boundary
/// configuration: index `s` is the X-basis state `prod_{v in s} Z_v |+...+>`.
#[derive(Debug, Clone)]
pub struct StringBasisState<T: Real = f64> {
    lattice: LatticeSpec,
    p: T,
    boundary_probs: Vec<T>,
}

impl<T: Real> StringBasisState<T> {
    pub fn new(lattice: LatticeSpec, p: T) -> Result<Self> {
        lattice.validate()?;
        let n = lattice.n_sites();
        check_sites(n, MAX_STRING_BASIS_SITES)?;
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::BadProbability(p.as_f64()));
        }
        let mut probs = vec![T::zero(); 1 << n];
        probs[0] = T::one();
        let q = T::one() - p;
        for (i, j) in lattice.bonds() {
            let mask = site_bit(n, i) | site_bit(n, j);
            let old = probs.clone();
            for (s, v) in probs.iter_mut().enumerate() {
                *v = q * old[s] + p * old[s ^ mask];
            }
        }
        Ok(StringBasisState { lattice, p, boundary_probs: probs })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// `tanh tau = p / (1 - p)`.
    pub fn tanh_tau(&self) -> T {
        self.p / (T::one() - self.p)
    }

    pub fn boundary_probabilities(&self) -> &[T] {
        &self.boundary_probs
    }

    /// Weight `(1-p)^{N_e} (tanh tau)^{|l|}` of every edge subset `l`; bit `k`
    /// of the mask is bond `k` in lattice bond order.
    pub fn string_weights(&self) -> Result<BTreeMap<u64, T>> {
        let ne = self.lattice.bonds().len();
        if ne > MAX_EXPLICIT_EDGES {
            return Err(Error::TooLarge { n_sites: ne, cap: MAX_EXPLICIT_EDGES });
        }
        let q = T::one() - self.p;
        Ok((0..1u64 << ne)
            .map(|mask| {
                let k = mask.count_ones() as i32;
                (mask, q.powi(ne as i32 - k) * self.p.powi(k))
            })
            .collect())
    }

    /// Boundary `∂l` of an edge subset, as an X-basis index.
    pub fn boundary_of(&self, mask: u64) -> usize {
        let n = self.lattice.n_sites();
        self.lattice
            .bonds()
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .fold(0, |s, (_, &(i, j))| s ^ site_bit(n, i) ^ site_bit(n, j))
    }

    pub fn to_density(&self) -> Result<DensityMatrix<T>> {
        check_cap(self.lattice.n_sites())?;
        DensityMatrix::from_hadamard_probabilities(&self.boundary_probs)
    }
}

fn site_bit(n: usize, site: usize) -> usize {
    1 << (n - 1 - site)
}

#[derive(Debug, Clone)]
pub enum DecoheredState<T: Real = f64> {
    Dense(DensityMatrix<T>),
    StringBasis(StringBasisState<T>),
}

impl<T: Real> DecoheredState<T> {
    pub fn to_density(&self) -> Result<DensityMatrix<T>> {
        match self {
            DecoheredState::Dense(d) => Ok(d.clone()),
            DecoheredState::StringBasis(s) => s.to_density(),
        }
    }
}

/// ZZ dephasing at strength `p` on every bond of `lattice`, applied to `|+...+>`.
pub fn state_decohered_ising<T: Real>(lattice: &LatticeSpec, p: T, repr: Representation) -> Result<DecoheredState<T>> {
    lattice.validate()?;
    match repr {
        Representation::Dense => {
            check_sites(lattice.n_sites(), 12)?;
            let rho = state_plus_product(lattice.n_sites())?;
            Ok(DecoheredState::Dense(apply(&zz_dephasing(lattice, p)?, &rho)?))
        }
        Representation::StringBasis => Ok(DecoheredState::StringBasis(StringBasisState::new(*lattice, p)?)),
    }
}

/// JSON interchange form `{n_sites, representation, data}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateExport {
    pub n_sites: usize,
    pub representation: Representation,
    pub data: serde_json::Value,
}

/// Dense payload: base64 of row-major little-endian `f64` pairs `(re, im)`.
pub fn export_dense<T: Real>(rho: &DensityMatrix<T>) -> StateExport {
    let m = rho.matrix();
    let d = m.nrows();
    let mut bytes = Vec::with_capacity(d * d * 16);
    for i in 0..d {
        for j in 0..d {
            bytes.extend_from_slice(&m[(i, j)].re.as_f64().to_le_bytes());
            bytes.extend_from_slice(&m[(i, j)].im.as_f64().to_le_bytes());
        }
    }
    StateExport {
        n_sites: rho.n_sites(),
        representation: Representation::Dense,
        data: serde_json::json!({ "dim": d, "encoding": "f64le-complex-rowmajor", "matrix": B64.encode(bytes) }),
    }
}

/// String-basis payload: lattice, `p`, and the `{edge_mask: weight}` map.
pub fn export_string_basis<T: Real>(state: &StringBasisState<T>) -> Result<StateExport> {
    let weights: serde_json::Map<String, serde_json::Value> =
        state.string_weights()?.into_iter().map(|(k, w)| (k.to_string(), serde_json::json!(w.as_f64()))).collect();
    Ok(StateExport {
        n_sites: state.lattice.n_sites(),
        representation: Representation::StringBasis,
        data: serde_json::json!({ "lattice": state.lattice, "p": state.p.as_f64(), "edge_mask": weights }),
    })
}

impl StateExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Rebuilds the dense density matrix.
    pub fn to_density<T: Real>(&self) -> Result<DensityMatrix<T>> {
        let bad = |msg: &str| Error::Serialization(msg.to_string());
        match self.representation {
            Representation::Dense => {
                let payload = self.data.get("matrix").and_then(|v| v.as_str()).ok_or_else(|| bad("missing matrix"))?;
                let bytes = B64.decode(payload).map_err(|e| Error::Serialization(e.to_string()))?;
                let d = 1usize << self.n_sites;
                if bytes.len() != d * d * 16 {
                    return Err(bad("matrix payload has the wrong length"));
                }
                let val = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
                let m = ComplexMatrix::from_fn(d, d, |i, j| {
                    let k = 2 * (i * d + j);
                    Complex::new(T::lit(val(k)), T::lit(val(k + 1)))
                });
                DensityMatrix::new(m)
            }
            Representation::StringBasis => {
                let lattice: LatticeSpec =
                    serde_json::from_value(self.data.get("lattice").cloned().unwrap_or_default())
                        .map_err(|e| Error::Serialization(e.to_string()))?;
                let p = self.data.get("p").and_then(|v| v.as_f64()).ok_or_else(|| bad("missing p"))?;
                StringBasisState::new(lattice, T::lit(p))?.to_density()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::pauli::Pauli;

    #[test]
    fn plus_state_single_site() {
        let rho = state_plus_product::<f64>(1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((rho.matrix()[(i, j)] - cr(0.5)).norm() < 1e-15);
            }
        }
        assert!(matches!(state_plus_product::<f64>(15), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn named_states_are_strongly_symmetric() {
        for n in [2, 3, 5] {
            let u = PauliString::global(n, Pauli::X);
            for rho in [
                state_plus_product::<f64>(n).unwrap(),
                state_one_plus_X(n).unwrap(),
                state_counterexample(n).unwrap(),
                state_ghz(n).unwrap(),
            ] {
                let (phase, resid) = rho.strong_symmetry_residual(&u);
                assert!(resid < 1e-12);
                assert!((phase - cr(1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn one_plus_x_matches_definition() {
        let n = 3;
        let rho = state_one_plus_X::<f64>(n).unwrap();
        let u = PauliString::<f64>::global(n, Pauli::X).to_dense();
        let expected = (ComplexMatrix::identity(8, 8) + u) / cr(8.0);
        assert!((rho.matrix() - expected).camax() < 1e-15);
    }

    #[test]
    fn counterexample_matches_definition() {
        let l = 4;
        let rho = state_counterexample::<f64>(l).unwrap();
        let plus = state_plus_product::<f64>(l).unwrap();
        let u = PauliString::<f64>::global(l, Pauli::X).to_dense();
        let expected = plus.matrix() * cr(0.5) + (ComplexMatrix::identity(16, 16) + u) * cr(1.0 / 32.0);
        assert!((rho.matrix() - expected).camax() < 1e-15);
    }

    #[test]
    fn ghz_correlations() {
        let rho = state_ghz::<f64>(4).unwrap();
        let zz = PauliString::from_label("ZIIZ").unwrap();
        assert!((zz.trace_with(rho.matrix()) - cr(1.0)).norm() < 1e-14);
    }

    #[test]
    fn thermal_state_limits() {
        let rho = state_thermal_commuting::<f64>(4, ThermalSpec::new(0.0, Sector::Even).unwrap()).unwrap();
        let target = state_one_plus_X::<f64>(4).unwrap();
        assert!(rho.max_distance(&target) < 1e-15);
        assert!(ThermalSpec::new(f64::INFINITY, Sector::Even).is_err());
        assert!(ThermalSpec::new(-1.0, Sector::Even).is_err());
        // Sum b_i is pushed toward -n: <X_0> = -tanh-like, negative.
        let cold = state_thermal_commuting::<f64>(4, ThermalSpec::new(2.0, Sector::Even).unwrap()).unwrap();
        let x0 = PauliString::from_label("XIII").unwrap();
        assert!(x0.trace_with(cold.matrix()).re < -0.9);
        let odd = state_thermal_commuting::<f64>(3, ThermalSpec::new(0.4, Sector::Odd).unwrap()).unwrap();
        let (phase, resid) = odd.strong_symmetry_residual(&PauliString::global(3, Pauli::X));
        assert!(resid < 1e-12 && (phase + cr(1.0)).norm() < 1e-12);
    }

    #[test]
    fn thermal_state_agrees_with_dense_gibbs() {
        let n = 3;
        let beta = 0.7;
        let h = PauliSum::<f64>::from_labels(&[(1.0, "XII"), (1.0, "IXI"), (1.0, "IIX")]).unwrap();
        let spec = Spectral::of_hermitian(&h.to_dense()).unwrap();
        let gibbs = spec.map(|e| cr((-beta * e).exp()));
        let u = PauliString::<f64>::global(n, Pauli::X).to_dense();
        let proj = (ComplexMatrix::identity(8, 8) + u) * cr(0.5);
        let m = &proj * gibbs;
        let tr = crate::matrix::trace(&m);
        let rho = state_thermal_commuting::<f64>(n, ThermalSpec::new(beta, Sector::Even).unwrap()).unwrap();
        assert!((rho.matrix() - m / tr).camax() < 1e-14);
    }

    #[test]
    fn replicated_correlator_identity_and_commuting_case() {
        let h = PauliSum::<f64>::from_labels(&[(1.0, "XIII"), (1.0, "IXII"), (1.0, "IIXI"), (1.0, "IIIX")]).unwrap();
        let id = LocalOp::Pauli(Pauli::I);
        for n_rep in 1..=3 {
            let f = thermal_replicated_correlator(&h, 0.8, Some(Sector::Even), n_rep, 0, 2, &id).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
        }
        // rho diagonal in the X basis: F^(1) = sum_b p(b) p(b') / sum_b p(b)^2 with b' flipped at x, y.
        let beta = 0.6;
        let z = LocalOp::Pauli(Pauli::Z);
        let f = thermal_replicated_correlator(&h, beta, Some(Sector::Even), 1, 0, 3, &z).unwrap();
        let w = |k: usize| {
            if k.count_ones().is_multiple_of(2) {
                (-beta * (4.0 - 2.0 * k.count_ones() as f64)).exp()
            } else {
                0.0
            }
        };
        let flip = 0b1001;
        let num: f64 = (0..16).map(|k| w(k) * w(k ^ flip)).sum();
        let den: f64 = (0..16).map(|k| w(k) * w(k)).sum();
        assert!((f - num / den).abs() < 1e-12);
    }

    #[test]
    fn decohered_representations_agree() {
        let l = LatticeSpec::square(2, 2, Boundary::Open);
        let dense = state_decohered_ising::<f64>(&l, 0.1, Representation::Dense).unwrap().to_density().unwrap();
        let sb = match state_decohered_ising::<f64>(&l, 0.1, Representation::StringBasis).unwrap() {
            DecoheredState::StringBasis(s) => s,
            _ => unreachable!(),
        };
        // explicit sum over edge subsets of w(l) |∂l><∂l|
        let mut probs = vec![0.0; 16];
        for (mask, w) in sb.string_weights().unwrap() {
            probs[sb.boundary_of(mask)] += w;
        }
        let oracle = DensityMatrix::from_hadamard_probabilities(&probs).unwrap();
        assert!(dense.max_distance(&oracle) < 1e-12);
        assert!(dense.max_distance(&sb.to_density().unwrap()) < 1e-12);
        assert!((sb.tanh_tau() - 0.1 / 0.9).abs() < 1e-15);
    }

    #[test]
    fn decohered_at_zero_is_plus_state() {
        let l = LatticeSpec::chain(5, Boundary::Periodic);
        let rho = state_decohered_ising::<f64>(&l, 0.0, Representation::Dense).unwrap().to_density().unwrap();
        assert!(rho.max_distance(&state_plus_product(5).unwrap()) < 1e-15);
    }

    #[test]
    fn export_round_trips() {
        let rho = state_counterexample::<f64>(3).unwrap();
        let back: DensityMatrix = StateExport::from_json(&export_dense(&rho).to_json()).unwrap().to_density().unwrap();
        assert_eq!(back.max_distance(&rho), 0.0);
        let sb = StringBasisState::<f64>::new(LatticeSpec::chain(3, Boundary::Open), 0.2).unwrap();
        let ex = export_string_basis(&sb).unwrap();
        assert_eq!(ex.data["edge_mask"].as_object().unwrap().len(), 4);
        let back: DensityMatrix = ex.to_density().unwrap();
        assert!(back.max_distance(&sb.to_density().unwrap()) < 1e-15);
    }
}
