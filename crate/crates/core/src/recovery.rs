//! Rotated Petz recovery, the local recoverability bound, and layered
//! recovery of depth-one channels on chains.
//!
//! A [`PetzMap`] lives on a region of the register. Applied to a state of the
//! full register it acts as `R_region (x) id`, which is the Petz map of the
//! product reference `rho_AB (x) rho_C` on every operator whose `C` marginal is
//! supported inside `supp rho_C`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::channels::{apply, KrausChannel, SymmetrySpec};
use crate::density::{partial_trace, DensityMatrix};
use crate::diagnostics::{cmi, fidelity, trace_distance};
use crate::error::{Error, Result};
use crate::matrix::{self, spectral_complex_power, ComplexMatrix, SiteEmbedding, Spectral};
use crate::scalar::{cr, Real};

/// Largest region dimension for which the superoperator is materialized.
const SUPEROP_MAX_DIM: usize = 32;
/// Largest number of effective Kraus operators folded into a superoperator.
const SUPEROP_MAX_KRAUS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rotation {
    /// The plain Petz map `R^0`.
    StandardT0,
    /// `int beta_0(t) R^{t/2} dt` by Gauss-Legendre on `[-t_cutoff, t_cutoff]`.
    Rotated { n_nodes: usize, t_cutoff: f64 },
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::Rotated { n_nodes: 96, t_cutoff: 6.0 }
    }
}

/// `beta_0(t) = (pi/2) / (cosh(pi t) + 1)`.
pub fn beta0(t: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 / ((std::f64::consts::PI * t).cosh() + 1.0)
}

/// Mass of `beta_0` outside `[-t, t]`, at most `2 e^{-pi t}`.
pub fn beta0_tail(t: f64) -> f64 {
    1.0 - (std::f64::consts::FRAC_PI_2 * t).tanh()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> =
        (0..n).map(|k| (eig.eigenvalues[k], 2.0 * eig.eigenvectors[(0, k)].powi(2))).collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes
}

/// Rotation nodes `(t, w)` for `R^{t/2}`; weights are renormalized to sum to one.
pub fn rotation_nodes(rotation: Rotation) -> Result<Vec<(f64, f64)>> {
    match rotation {
        Rotation::StandardT0 => Ok(vec![(0.0, 1.0)]),
        Rotation::Rotated { n_nodes, t_cutoff } => {
            if n_nodes == 0 || !(t_cutoff > 0.0 && t_cutoff.is_finite()) {
                return Err(Error::InvalidArgument("quadrature needs nodes and a positive cutoff".into()));
            }
            let raw: Vec<(f64, f64)> = gauss_legendre(n_nodes)
                .into_iter()
                .map(|(x, w)| (t_cutoff * x, t_cutoff * w * beta0(t_cutoff * x)))
                .collect();
            let total: f64 = raw.iter().map(|n| n.1).sum();
            Ok(raw.into_iter().map(|(t, w)| (t, w / total)).collect())
        }
    }
}

/// Reference state, channel and rotation on a local register.
#[derive(Debug, Clone)]
pub struct PetzSpec<T: Real = f64> {
    pub sigma: DensityMatrix<T>,
    pub channel: KrausChannel<T>,
    pub rotation: Rotation,
}

#[derive(Debug, Clone)]
enum Backend<T: Real> {
    Superop(ComplexMatrix<T>),
    Factored { left: Vec<ComplexMatrix<T>>, inner: Vec<ComplexMatrix<T>>, weights: Vec<T> },
}

/// Rotated Petz map `R_{sigma,E}` on the register of its spec.
#[derive(Debug, Clone)]
pub struct PetzMap<T: Real = f64> {
    n_local: usize,
    channel: KrausChannel<T>,
    backend: Backend<T>,
}

/// Left factors, right factors and weights of the rotation nodes.
type NodeOperators<T> = (Vec<ComplexMatrix<T>>, Vec<ComplexMatrix<T>>, Vec<T>);

/// Per-node operators `sigma^{1/2 - i t/2}` and `E(sigma)^{-1/2 + i t/2}`.
fn node_operators<T: Real>(spec: &PetzSpec<T>) -> Result<NodeOperators<T>> {
    let e_sigma = spec.channel.apply_matrix(spec.sigma.matrix())?;
    let es = Spectral::of_hermitian(&e_sigma)?;
    let sup = T::lit(T::SUPPORT_TOL);
    if es.values.iter().all(|&l| l <= sup) {
        return Err(Error::SingularReference("E(sigma) vanishes".into()));
    }
    let half = T::lit(0.5);
    let (mut left, mut inner, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    for (t, w) in rotation_nodes(spec.rotation)? {
        let s = T::lit(t / 2.0);
        left.push(spectral_complex_power(spec.sigma.spectral(), half, -s, sup));
        inner.push(spectral_complex_power(&es, -half, s, sup));
        weights.push(T::lit(w));
    }
    Ok((left, inner, weights))
}

/// Builds the map. Small registers get an explicit superoperator.
pub fn petz_map<T: Real>(spec: &PetzSpec<T>) -> Result<PetzMap<T>> {
    let n = spec.sigma.n_sites();
    if spec.channel.n_sites() != n {
        return Err(Error::DimensionMismatch { expected: n, found: spec.channel.n_sites() });
    }
    let (left, inner, weights) = node_operators(spec)?;
    let k = 1usize << n;
    let small = k <= SUPEROP_MAX_DIM && spec.channel.kraus_count().saturating_mul(weights.len()) <= SUPEROP_MAX_KRAUS;
    let backend = if small {
        let kraus = spec.channel.kraus_operators()?;
        let mut s = ComplexMatrix::<T>::zeros(k * k, k * k);
        for ((l, m), w) in left.iter().zip(&inner).zip(&weights) {
            for kr in &kraus {
                let eff = l * kr.adjoint() * m;
                s += eff.kronecker(&eff.map(|z| z.conj())) * cr(*w);
            }
        }
        Backend::Superop(s)
    } else {
        Backend::Factored { left, inner, weights }
    };
    Ok(PetzMap { n_local: n, channel: spec.channel.clone(), backend })
}

impl<T: Real> PetzMap<T> {
    pub fn n_sites(&self) -> usize {
        self.n_local
    }

    /// Action on an operator of the local register.
    pub fn apply_local(&self, x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        let all: Vec<usize> = (0..self.n_local).collect();
        self.apply_embedded(self.n_local, &all, x)
    }

    /// `(R (x) id)(x)` with the local register placed on `region` of an `n_sites` register.
    pub fn apply_embedded(&self, n_sites: usize, region: &[usize], x: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if region.len() != self.n_local {
            return Err(Error::DimensionMismatch { expected: self.n_local, found: region.len() });
        }
        let d = 1usize << n_sites;
        if x.nrows() != d || x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: x.nrows() });
        }
        let emb = SiteEmbedding::new(n_sites, region)?;
        match &self.backend {
            Backend::Superop(s) => Ok(apply_superop(&emb, s, x)),
            Backend::Factored { left, inner, weights } => {
                let channel = self.channel.embed(n_sites, region)?;
                let mut out = ComplexMatrix::zeros(d, d);
                for ((l, m), w) in left.iter().zip(inner).zip(weights) {
                    let y = emb.right_apply(&emb.left_apply(m, x), &m.adjoint());
                    let y = channel.apply_adjoint(&y)?;
                    out += emb.right_apply(&emb.left_apply(l, &y), &l.adjoint()) * cr(*w);
                }
                Ok(out)
            }
        }
    }

    /// Recovered state, renormalized; also returns the trace deficit `1 - Tr R(rho)`.
    pub fn recover(&self, region: &[usize], rho: &DensityMatrix<T>) -> Result<(DensityMatrix<T>, T)> {
        let out = self.apply_embedded(rho.n_sites(), region, rho.matrix())?;
        let tr = matrix::trace(&out).re;
        if tr <= T::lit(T::SUPPORT_TOL) {
            return Err(Error::SingularReference("recovered operator has no trace".into()));
        }
        Ok((DensityMatrix::with_tolerance(out / cr(tr), rho.psd_tol())?, T::one() - tr))
    }
}

fn apply_superop<T: Real>(emb: &SiteEmbedding, s: &ComplexMatrix<T>, x: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (k, r) = (emb.local_dim(), emb.rest_dim());
    let d = k * r;
    let idx: Vec<Vec<usize>> = (0..r).map(|rest| (0..k).map(|a| emb.full_index(a, rest)).collect()).collect();
    let mut out = ComplexMatrix::zeros(d, d);
    let mut buf = DVector::zeros(k * k);
    for r1 in &idx {
        for r2 in &idx {
            for a in 0..k {
                for b in 0..k {
                    buf[a * k + b] = x[(r1[a], r2[b])];
                }
            }
            let y = s * &buf;
            for a in 0..k {
                for b in 0..k {
                    out[(r1[a], r2[b])] = y[a * k + b];
                }
            }
        }
    }
    out
}

/// Whether every effective Kraus operator `sigma^{1/2-it} K^dagger E(sigma)^{-1/2+it}`
/// commutes with the symmetry generator, relative to the operator's size.
pub fn check_recovery_symmetry<T: Real>(
    spec: &PetzSpec<T>,
    sym: &SymmetrySpec<T>,
) -> Result<crate::channels::SymmetryCheck> {
    let n = spec.sigma.n_sites();
    if sym.generator().n_sites() != n {
        return Err(Error::DimensionMismatch { expected: n, found: sym.generator().n_sites() });
    }
    let (left, inner, _) = node_operators(spec)?;
    let u = sym.generator().to_dense();
    let mut worst = T::zero();
    for (l, m) in left.iter().zip(&inner) {
        for k in spec.channel.kraus_operators()? {
            let eff = l * k.adjoint() * m;
            let comm = &eff * &u - &u * &eff;
            worst = worst.max(matrix::max_abs(&comm) / matrix::max_abs(&eff).max(T::one()));
        }
    }
    Ok(crate::channels::SymmetryCheck { symmetric: worst <= T::lit(1e-8), max_violation: worst.as_f64() })
}

/// Outcome of recovering one local channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub fidelity_recovered: f64,
    /// `I(A;C|B)` of the input, nats.
    pub cmi_before: f64,
    /// `I(A;C|B)` after the channel, nats.
    pub cmi_after: f64,
    /// `(cmi_before - cmi_after)/ln 2 + 2 log2 F`; nonnegative when the bound holds.
    pub bound_slack: f64,
    /// `||rho - R E(rho)||_1 / 2`.
    pub trace_distance_residual: f64,
    /// `sqrt(4 cmi_before)`, the bound on `||rho - R E(rho)||_1`.
    pub trace_norm_bound: f64,
    pub trace_deficit: f64,
}

impl RecoveryReport {
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.bound_slack >= -slack
    }
}

fn check_partition(n: usize, a: &[usize], b: &[usize], c: &[usize]) -> Result<Vec<usize>> {
    let mut all: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    all.sort_unstable();
    if all != (0..n).collect::<Vec<_>>() {
        return Err(Error::BadPartition(format!("A, B, C must partition the {n} sites")));
    }
    let mut ab: Vec<usize> = a.iter().chain(b).copied().collect();
    ab.sort_unstable();
    Ok(ab)
}

/// `I(A;C|B)`, zero when `C` is empty.
fn cmi_or_zero<T: Real>(rho: &DensityMatrix<T>, a: &[usize], b: &[usize], c: &[usize]) -> Result<T> {
    if c.is_empty() {
        return Ok(T::zero());
    }
    cmi(rho, a, b, c)
}

/// Recovers a channel supported in `A` with the Petz map of `rho_AB (x) rho_C`.
pub fn cmi_markov_gap<T: Real>(
    rho: &DensityMatrix<T>,
    channel: &KrausChannel<T>,
    a: &[usize],
    b: &[usize],
    c: &[usize],
    rotation: Rotation,
) -> Result<RecoveryReport> {
    let region = check_partition(rho.n_sites(), a, b, c)?;
    if channel.support().iter().any(|s| !a.contains(s)) {
        return Err(Error::BadPartition("channel acts outside A".into()));
    }
    let out = apply(channel, rho)?;
    let sigma = partial_trace(rho, &region)?;
    let spec = PetzSpec { sigma, channel: channel.localize(&region)?, rotation };
    let map = petz_map(&spec)?;
    let (rec, deficit) = map.recover(&region, &out)?;
    let f = fidelity(rho, &rec)?;
    let before = cmi_or_zero(rho, a, b, c)?;
    let after = cmi_or_zero(&out, a, b, c)?;
    let ln2 = std::f64::consts::LN_2;
    let (fb, bb, ab) = (f.as_f64(), before.as_f64(), after.as_f64());
    Ok(RecoveryReport {
        fidelity_recovered: fb,
        cmi_before: bb,
        cmi_after: ab,
        bound_slack: (bb - ab) / ln2 + 2.0 * fb.log2(),
        trace_distance_residual: trace_distance(rho, &rec)?.as_f64(),
        trace_norm_bound: (4.0 * bb.max(0.0)).sqrt(),
        trace_deficit: deficit.as_f64(),
    })
}

/// One block recovery inside [`layered_recovery`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStep {
    pub step: usize,
    pub layer: usize,
    pub sublayer: usize,
    pub block: usize,
    pub region: Vec<usize>,
    pub cmi_before: f64,
    pub cmi_after: f64,
    pub fidelity: f64,
    /// `D(R E_y(tau), tau)` for the exact intermediate state `tau`.
    pub step_residual: f64,
    /// `D(current estimate, tau)` after this step.
    pub cumulative_residual: f64,
    /// Running sum of `step_residual`.
    pub cumulative_bound: f64,
    pub trace_deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredReport {
    pub steps: Vec<LayerStep>,
    /// `D(recovered, rho0)`.
    pub final_residual: f64,
    /// `D(E(rho0), rho0)`, the residual with no recovery.
    pub unrecovered_residual: f64,
}

impl LayeredReport {
    /// Whether every cumulative residual respects the triangle-inequality chain.
    pub fn chain_holds(&self, slack: f64) -> bool {
        self.steps.iter().all(|s| s.cumulative_residual <= s.cumulative_bound + slack)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["step", "block", "cmi_before", "cmi_after", "fidelity", "cumulative_residual"]).map_err(io)?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.block.to_string(),
                format!("{:.16e}", s.cmi_before),
                format!("{:.16e}", s.cmi_after),
                format!("{:.16e}", s.fidelity),
                format!("{:.16e}", s.cumulative_residual),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Gates of one sparse sublayer, grouped per block.
struct Sublayer<T: Real> {
    layer: usize,
    parity: usize,
    blocks: Vec<(usize, KrausChannel<T>)>,
}

fn split_layers<T: Real>(n: usize, layers: &[KrausChannel<T>], l0: usize) -> Result<Vec<Sublayer<T>>> {
    let mut out = Vec::new();
    for (li, layer) in layers.iter().enumerate() {
        if layer.n_sites() != n {
            return Err(Error::BadSchedule(format!("layer {li} acts on {} sites, expected {n}", layer.n_sites())));
        }
        let mut seen = vec![false; n];
        for f in layer.factors() {
            let (lo, hi) = (f.support().iter().min().copied(), f.support().iter().max().copied());
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if hi - lo >= l0 {
                    return Err(Error::BadSchedule(format!("gate on {:?} is wider than the block size", f.support())));
                }
            }
            for &s in f.support() {
                if std::mem::replace(&mut seen[s], true) {
                    return Err(Error::BadSchedule(format!("gates overlap on site {s} in layer {li}")));
                }
            }
        }
        for parity in 0..2 {
            let mut blocks: Vec<(usize, Vec<_>)> = Vec::new();
            for f in layer.factors() {
                let Some(&lo) = f.support().iter().min() else { continue };
                let b = lo / l0;
                if b % 2 != parity {
                    continue;
                }
                match blocks.iter_mut().find(|(bb, _)| *bb == b) {
                    Some((_, v)) => v.push(f.clone()),
                    None => blocks.push((b, vec![f.clone()])),
                }
            }
            blocks.sort_by_key(|(b, _)| *b);
            let blocks = blocks
                .into_iter()
                .map(|(b, fs)| Ok((b, KrausChannel::from_factors(n, fs)?)))
                .collect::<Result<Vec<_>>>()?;
            if !blocks.is_empty() {
                out.push(Sublayer { layer: li, parity, blocks });
            }
        }
    }
    Ok(out)
}

fn recovery_region(n: usize, l0: usize, block: usize, gates: &KrausChannel<impl Real>) -> Vec<usize> {
    let lo = (block * l0).saturating_sub(l0 / 2);
    let hi = ((block + 1) * l0 + l0 / 2).min(n);
    let mut region: Vec<usize> = (lo..hi).chain(gates.support()).collect();
    region.sort_unstable();
    region.dedup();
    region
}

/// Applies `layers` to `rho0` and undoes them sublayer by sublayer, last first.
/// Each layer is split into two sparse sublayers (even and odd blocks of
/// `block_size` sites); each block is reversed by a Petz map on the block
/// widened by half a block on both sides.
pub fn layered_recovery<T: Real>(
    rho0: &DensityMatrix<T>,
    layers: &[KrausChannel<T>],
    block_size: usize,
    rotation: Rotation,
) -> Result<LayeredReport> {
    let n = rho0.n_sites();
    if n > 12 {
        return Err(Error::TooLarge { n_sites: n, cap: 12 });
    }
    if block_size == 0 {
        return Err(Error::BadSchedule("block size must be positive".into()));
    }
    let subs = split_layers(n, layers, block_size)?;
    let mut states = vec![rho0.clone()];
    for sub in &subs {
        let mut s = states.last().unwrap().clone();
        for (_, g) in &sub.blocks {
            s = apply(g, &s)?;
        }
        states.push(s);
    }
    let final_state = states.last().unwrap().clone();
    let mut current = final_state.clone();
    let mut steps = Vec::new();
    let mut bound = 0.0;
    for (h, sub) in subs.iter().enumerate().rev() {
        let before = &states[h];
        for (y, (block, gates)) in sub.blocks.iter().enumerate().rev() {
            let mut tau = before.clone();
            for (_, g) in &sub.blocks[..y] {
                tau = apply(g, &tau)?;
            }
            let region = recovery_region(n, block_size, *block, gates);
            let a = gates.support();
            let b: Vec<usize> = region.iter().copied().filter(|s| !a.contains(s)).collect();
            let c: Vec<usize> = (0..n).filter(|s| !region.contains(s)).collect();
            let spec = PetzSpec { sigma: partial_trace(&tau, &region)?, channel: gates.localize(&region)?, rotation };
            let map = petz_map(&spec)?;
            let damaged = apply(gates, &tau)?;
            let (ideal, _) = map.recover(&region, &damaged)?;
            let (next, deficit) = map.recover(&region, &current)?;
            current = next;
            let step_res = trace_distance(&ideal, &tau)?.as_f64();
            bound += step_res;
            steps.push(LayerStep {
                step: steps.len(),
                layer: sub.layer,
                sublayer: sub.parity,
                block: *block,
                region: region.clone(),
                cmi_before: cmi_or_zero(&tau, &a, &b, &c)?.as_f64(),
                cmi_after: cmi_or_zero(&damaged, &a, &b, &c)?.as_f64(),
                fidelity: fidelity(&tau, &ideal)?.as_f64(),
                step_residual: step_res,
                cumulative_residual: trace_distance(&current, &tau)?.as_f64(),
                cumulative_bound: bound,
                trace_deficit: deficit.as_f64(),
            });
        }
    }
    Ok(LayeredReport {
        steps,
        final_residual: trace_distance(&current, rho0)?.as_f64(),
        unrecovered_residual: trace_distance(&final_state, rho0)?.as_f64(),
    })
}
