//! The Rényi-2 image of the U(1) rotor channel `p_k ∝ e^{−αk²}`: an XY model
//! with bond weight `Σ_n f_n e^{in(θ_i−θ_j)}`, which tends to the Villain model at temperature α.

use std::f64::consts::{PI, TAU};

use mixedorder_core::{Boundary, LatticeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{MCRun, MAX_MC_LINEAR_SIZE};
use crate::stats::{block_means, columns, crossing, derive_seed, jackknife, McRow, N_BINS};

pub const MAX_HARMONIC: usize = 64;
/// Harmonics with `f_n/f_0` below this are dropped from the bond weight.
pub const HARMONIC_CUTOFF: f64 = 1e-12;

/// `Σ_{k≥k0} e^{−a (k + s)²}` summed until the terms stop contributing.
fn gaussian_tail(a: f64, shift: f64) -> f64 {
    let mut sum = 0.0;
    let mut k = 0.0;
    loop {
        let term = (-a * (k + shift) * (k + shift)).exp();
        sum += term;
        if term <= f64::EPSILON * 1e-2 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// `ϑ₃(q) = Σ_k q^{k²}`, `0 < q < 1`.
pub fn theta3(q: f64) -> f64 {
    2.0 * gaussian_tail(-q.ln(), 0.0) - 1.0
}

/// `ϑ₂(q) = Σ_k q^{(k+1/2)²}`, `0 < q < 1`.
pub fn theta2(q: f64) -> f64 {
    2.0 * gaussian_tail(-q.ln(), 0.5)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::BadAlpha(alpha))
    }
}

/// `f_0..=f_{n_max}` with `f_0 = 1`: `f_n ∝ e^{−αn²/2} ϑ₃(e^{−2α})` for even `n`, `ϑ₂` for odd.
pub fn villain_fn_coefficients(alpha: f64, n_max: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n_max > MAX_HARMONIC {
        return Err(Error::InvalidArgument(format!("n_max {n_max} above {MAX_HARMONIC}")));
    }
    let q = (-2.0 * alpha).exp();
    let odd = theta2(q) / theta3(q);
    Ok((0..=n_max)
        .map(|n| {
            let g = (-0.5 * alpha * (n * n) as f64).exp();
            if n % 2 == 0 {
                g
            } else {
                g * odd
            }
        })
        .collect())
}

/// Bond weight `w(Δ) = 1 + 2 Σ_{n≥1} f_n cos nΔ` and the potential `V = −ln w`.
#[derive(Debug, Clone, PartialEq)]
pub struct XyBond {
    pub alpha: f64,
    /// `f_1, f_2, …` down to the cutoff.
    pub harmonics: Vec<f64>,
}

impl XyBond {
    pub fn new(alpha: f64) -> Result<Self> {
        let f = villain_fn_coefficients(alpha, MAX_HARMONIC)?;
        let keep = f.iter().skip(1).take_while(|&&x| x >= HARMONIC_CUTOFF).count();
        if keep == MAX_HARMONIC {
            return Err(Error::BadAlpha(alpha));
        }
        Ok(XyBond { alpha, harmonics: f[1..=keep].to_vec() })
    }

    pub fn weight(&self, delta: f64) -> f64 {
        let (c1, mut c_prev, mut c) = (delta.cos(), 1.0, delta.cos());
        let mut w = 1.0;
        for &f in &self.harmonics {
            w += 2.0 * f * c;
            let next = 2.0 * c1 * c - c_prev;
            c_prev = c;
            c = next;
        }
        w
    }

    /// `(V′, V″)` at `Δ`.
    pub fn potential_derivatives(&self, delta: f64) -> (f64, f64) {
        let (mut w, mut w1, mut w2) = (1.0, 0.0, 0.0);
        for (k, &f) in self.harmonics.iter().enumerate() {
            let n = (k + 1) as f64;
            let (s, c) = (n * delta).sin_cos();
            w += 2.0 * f * c;
            w1 -= 2.0 * n * f * s;
            w2 -= 2.0 * n * n * f * c;
        }
        let r = w1 / w;
        (-r, -w2 / w + r * r)
    }
}

pub const N_XY_OBS: usize = 7;

/// Per-measurement `[A_x, B_x, B_x², A_y, B_y, B_y², |m|²]` with `A = ΣV″/N`, `B = ΣV′/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XyEstimators {
    pub n_samples: usize,
    pub means: [f64; N_XY_OBS],
    pub bins: Vec<[f64; N_XY_OBS]>,
    pub acceptance: f64,
    pub width: f64,
}

/// `Υ/T = ½ Σ_μ (⟨A_μ⟩ − N(⟨B_μ²⟩ − ⟨B_μ⟩²))`.
fn reduced_helicity(m: &[f64], n: usize) -> f64 {
    let n = n as f64;
    0.5 * ((m[0] - n * (m[2] - m[1] * m[1])) + (m[3] - n * (m[5] - m[4] * m[4])))
}

/// Angles on a periodic `L×L` lattice with continuous Metropolis proposals.
#[derive(Debug, Clone)]
pub struct XySystem {
    l: usize,
    theta: Vec<f64>,
    bond: XyBond,
    width: f64,
}

impl XySystem {
    pub fn new(l: usize, alpha: f64) -> Result<Self> {
        if l < 3 {
            return Err(Error::InvalidArgument(format!("linear size {l} below 3")));
        }
        Ok(XySystem { l, theta: vec![0.0; l * l], bond: XyBond::new(alpha)?, width: PI })
    }

    fn neighbors(&self, i: usize) -> [usize; 4] {
        let l = self.l;
        let (x, y) = (i % l, i / l);
        [y * l + (x + 1) % l, y * l + (x + l - 1) % l, ((y + 1) % l) * l + x, ((y + l - 1) % l) * l + x]
    }

    /// Returns the number of accepted moves.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) -> usize {
        let mut accepted = 0;
        for i in 0..self.theta.len() {
            let old = self.theta[i];
            let new = (old + self.width * (2.0 * rng.random::<f64>() - 1.0)).rem_euclid(TAU);
            let mut ratio = 1.0;
            for j in self.neighbors(i) {
                let tj = self.theta[j];
                ratio *= self.bond.weight(new - tj) / self.bond.weight(old - tj);
            }
            if ratio >= 1.0 || rng.random::<f64>() < ratio {
                self.theta[i] = new;
                accepted += 1;
            }
        }
        accepted
    }

    fn measure(&self) -> [f64; N_XY_OBS] {
        let n = self.theta.len();
        let mut out = [0.0; N_XY_OBS];
        let (mut mc, mut ms) = (0.0, 0.0);
        for i in 0..n {
            let nb = self.neighbors(i);
            for (dir, j) in [(0, nb[0]), (3, nb[2])] {
                let (v1, v2) = self.bond.potential_derivatives(self.theta[i] - self.theta[j]);
                out[dir] += v2;
                out[dir + 1] += v1;
            }
            mc += self.theta[i].cos();
            ms += self.theta[i].sin();
        }
        for k in [0, 1, 3, 4] {
            out[k] /= n as f64;
        }
        out[2] = out[1] * out[1];
        out[5] = out[4] * out[4];
        out[6] = (mc * mc + ms * ms) / (n * n) as f64;
        out
    }

    /// Thermalization adapts the proposal width toward 50% acceptance; it is frozen while measuring.
    pub fn run<R: Rng>(&mut self, run: &MCRun, rng: &mut R) -> Result<XyEstimators> {
        run.validate()?;
        let n = self.theta.len() as f64;
        for _ in 0..run.n_therm {
            let rate = self.sweep(rng) as f64 / n;
            self.width = (self.width * (0.5 + rate)).clamp(1e-3, TAU);
        }
        let mut series = Vec::with_capacity(run.n_samples());
        let mut accepted = 0usize;
        for s in 1..=run.n_sweeps {
            accepted += self.sweep(rng);
            if s % run.measure_stride == 0 {
                series.push(self.measure());
            }
        }
        let (means, bins) = block_means(&series, N_BINS);
        Ok(XyEstimators {
            n_samples: series.len(),
            means,
            bins,
            acceptance: accepted as f64 / (n * run.n_sweeps as f64),
            width: self.width,
        })
    }

    /// Dimensionless helicity modulus `Υ/T` of the estimator means.
    pub fn reduced_helicity(&self, est: &XyEstimators) -> f64 {
        reduced_helicity(&est.means, self.theta.len())
    }
}

/// Helicity modulus `Υ(α, L)` in units where the temperature is `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelicityPoint {
    pub l: usize,
    pub alpha: f64,
    pub helicity: f64,
    pub helicity_err: f64,
    /// Universal-jump line `2α/π`.
    pub jump_line: f64,
    pub m2: f64,
    pub m2_err: f64,
    pub acceptance: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelicityTable {
    pub alpha_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Ordered by size, then by α.
    pub points: Vec<HelicityPoint>,
    /// `(L, α where Υ_L crosses 2α/π)` per size.
    pub crossings: Vec<(usize, Option<f64>)>,
    /// Crossing of the largest size.
    pub estimate: Option<f64>,
    pub seed: u64,
}

impl HelicityTable {
    pub fn point(&self, l: usize, alpha: f64) -> Option<&HelicityPoint> {
        self.points.iter().find(|pt| pt.l == l && pt.alpha == alpha)
    }

    pub fn rows(&self) -> Vec<McRow> {
        let mut out = Vec::new();
        for pt in &self.points {
            for (name, mean, stderr) in [("helicity", pt.helicity, pt.helicity_err), ("m2", pt.m2, pt.m2_err)] {
                out.push(McRow {
                    model: "villain_fn_xy".into(),
                    l: pt.l,
                    p_or_alpha: pt.alpha,
                    beta: 1.0 / pt.alpha,
                    observable: name.into(),
                    mean,
                    stderr,
                    n_samples: pt.n_samples,
                    seed: self.seed,
                });
            }
        }
        out
    }
}

/// Monte Carlo of the f_n-weighted XY model on periodic `L×L` lattices. `template.beta`
/// and `template.lattice` are ignored.
pub fn villain_kt_scan(alpha_grid: &[f64], sizes: &[usize], template: &MCRun) -> Result<HelicityTable> {
    if alpha_grid.is_empty() || sizes.is_empty() {
        return Err(Error::BadGrid("empty grid or size list".into()));
    }
    if alpha_grid.iter().any(|a| !a.is_finite() || *a <= 0.0) || alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid("alpha grid must be positive and strictly increasing".into()));
    }
    if sizes.iter().any(|&l| !(3..=MAX_MC_LINEAR_SIZE).contains(&l)) || sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid(format!("sizes must increase within [3, {MAX_MC_LINEAR_SIZE}]")));
    }
    template.validate()?;
    let jobs: Vec<(usize, f64)> = sizes.iter().flat_map(|&l| alpha_grid.iter().map(move |&a| (l, a))).collect();
    let points = jobs
        .into_par_iter()
        .map(|(l, alpha)| {
            let run = MCRun { lattice: LatticeSpec::square(l, l, Boundary::Periodic), beta: 1.0 / alpha, ..*template };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(template.seed, &[3, alpha.to_bits(), l as u64]));
            let mut sys = XySystem::new(l, alpha)?;
            let est = sys.run(&run, &mut rng)?;
            let cols = columns(&est.bins);
            let n = l * l;
            let (h, h_err) = jackknife(&cols, |m| reduced_helicity(m, n));
            let (m2, m2_err) = jackknife(&cols, |m| m[6]);
            Ok(HelicityPoint {
                l,
                alpha,
                helicity: alpha * h,
                helicity_err: alpha * h_err,
                jump_line: 2.0 * alpha / PI,
                m2,
                m2_err,
                acceptance: est.acceptance,
                n_samples: est.n_samples,
            })
        })
        .collect::<Result<Vec<HelicityPoint>>>()?;
    let crossings: Vec<(usize, Option<f64>)> = sizes
        .iter()
        .map(|&l| {
            let pts: Vec<&HelicityPoint> = points.iter().filter(|pt| pt.l == l).collect();
            let line: Vec<f64> = pts.iter().map(|pt| pt.jump_line).collect();
            let ups: Vec<f64> = pts.iter().map(|pt| pt.helicity).collect();
            (l, crossing(alpha_grid, &line, &ups))
        })
        .collect();
    Ok(HelicityTable {
        alpha_grid: alpha_grid.to_vec(),
        sizes: sizes.to_vec(),
        estimate: crossings.last().and_then(|c| c.1),
        crossings,
        points,
        seed: template.seed,
    })
}
