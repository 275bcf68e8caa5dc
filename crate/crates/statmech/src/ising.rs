//! Ising Monte Carlo: the ±J random-bond model on the Nishimori line and the
//! uniform model at doubled coupling (the Rényi-2 image).

use mixedorder_core::{Boundary, LatticeSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{block_means, crossing, derive_seed, jackknife, McRow, N_BINS};

pub const MAX_MC_LINEAR_SIZE: usize = 32;

/// Quenched ±J couplings, one per bond of `lattice.bonds()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondDisorder {
    pub lattice: LatticeSpec,
    pub bond_signs: Vec<i8>,
    pub flip_prob: f64,
    pub seed: u64,
}

impl BondDisorder {
    pub fn uniform(lattice: LatticeSpec) -> Self {
        BondDisorder { bond_signs: vec![1; lattice.bonds().len()], lattice, flip_prob: 0.0, seed: 0 }
    }

    /// Each bond is antiferromagnetic with probability `p`.
    pub fn sample(lattice: LatticeSpec, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadProbability(p));
        }
        lattice.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bond_signs = (0..lattice.bonds().len()).map(|_| if rng.random::<f64>() < p { -1 } else { 1 }).collect();
        Ok(BondDisorder { lattice, bond_signs, flip_prob: p, seed })
    }

    pub fn n_negative(&self) -> usize {
        self.bond_signs.iter().filter(|&&s| s < 0).count()
    }
}

/// Sampling schedule. `beta` multiplies `Σ J σσ` in the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MCRun {
    pub lattice: LatticeSpec,
    pub beta: f64,
    pub n_therm: usize,
    pub n_sweeps: usize,
    pub measure_stride: usize,
    pub seed: u64,
}

impl MCRun {
    pub fn validate(&self) -> Result<()> {
        if self.n_therm < 100 {
            return Err(Error::InvalidArgument(format!("n_therm {} below 100 sweeps", self.n_therm)));
        }
        if self.measure_stride == 0 || self.n_sweeps < self.measure_stride {
            return Err(Error::InvalidArgument(format!(
                "{} sweeps with stride {} give no samples",
                self.n_sweeps, self.measure_stride
            )));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta {}", self.beta)));
        }
        self.lattice.validate()?;
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.n_sweeps / self.measure_stride
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Update {
    /// Sequential single-spin Metropolis.
    Metropolis,
    /// Wolff clusters. Uniform ferromagnets only. During thermalization a sweep flips
    /// clusters until `N` spins have turned; afterwards it is a fixed number of clusters
    /// (`N` over the mean thermalization cluster size), since a state-dependent
    /// stopping rule would bias measurements.
    Wolff,
}

pub const N_ISING_OBS: usize = 6;
const ABS_M: usize = 0;
const M2: usize = 1;
const M4: usize = 2;
const ENERGY: usize = 3;
const CORR: usize = 4;
const FK: usize = 5;

/// Time averages of `|m|, m², m⁴`, bond energy `ΣJσσ/N_b`, the farthest-pair
/// correlator and `|Σσ e^{ik·x}|²/N` at the smallest `k` along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimators {
    pub n_samples: usize,
    pub means: [f64; N_ISING_OBS],
    /// Block means over `N_BINS` consecutive stretches of the time series.
    pub bins: Vec<[f64; N_ISING_OBS]>,
}

impl Estimators {
    pub fn abs_m(&self) -> f64 {
        self.means[ABS_M]
    }
    pub fn m2(&self) -> f64 {
        self.means[M2]
    }
    pub fn m4(&self) -> f64 {
        self.means[M4]
    }
    pub fn energy_per_bond(&self) -> f64 {
        self.means[ENERGY]
    }
    pub fn corr_far(&self) -> f64 {
        self.means[CORR]
    }
    pub fn binder(&self) -> f64 {
        binder(&self.means)
    }
}

fn binder(m: &[f64]) -> f64 {
    1.0 - m[M4] / (3.0 * m[M2] * m[M2])
}

/// Second-moment correlation length from `χ = N⟨m²⟩` and `F(k_min)`.
fn xi_second_moment(m: &[f64], n: usize, lx: usize) -> f64 {
    let ratio = n as f64 * m[M2] / m[FK];
    (ratio - 1.0).max(0.0).sqrt() / (2.0 * (std::f64::consts::PI / lx as f64).sin())
}

/// Spins, couplings and the Metropolis acceptance table at fixed `beta`.
#[derive(Debug, Clone)]
pub struct IsingSystem {
    lattice: LatticeSpec,
    bonds: Vec<(usize, usize, i8)>,
    neighbors: Vec<Vec<(usize, i8)>>,
    max_degree: usize,
    spins: Vec<i8>,
    beta: f64,
    /// `accept[σh + z] = min(1, e^{−2β σh})`.
    accept: Vec<f64>,
    far: (usize, usize),
    phase: Vec<(f64, f64)>,
    ferro: bool,
    stack: Vec<usize>,
    in_cluster: Vec<bool>,
    clusters_per_sweep: Option<usize>,
}

impl IsingSystem {
    /// Starts from the all-up configuration.
    pub fn new(disorder: &BondDisorder, beta: f64) -> Result<Self> {
        let lattice = disorder.lattice;
        lattice.validate()?;
        let raw = lattice.bonds();
        if raw.len() != disorder.bond_signs.len() {
            return Err(Error::InvalidArgument(format!("{} signs for {} bonds", disorder.bond_signs.len(), raw.len())));
        }
        let n = lattice.n_sites();
        let bonds: Vec<(usize, usize, i8)> =
            raw.iter().zip(&disorder.bond_signs).map(|(&(i, j), &s)| (i, j, s)).collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j, s) in &bonds {
            neighbors[i].push((j, s));
            neighbors[j].push((i, s));
        }
        let max_degree = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        let k = 2.0 * std::f64::consts::PI / lattice.lx as f64;
        let phase = (0..n)
            .map(|s| {
                let x = lattice.coords(s).0 as f64;
                ((k * x).cos(), (k * x).sin())
            })
            .collect();
        let mut sys = IsingSystem {
            lattice,
            bonds,
            neighbors,
            max_degree,
            spins: vec![1; n],
            beta,
            accept: Vec::new(),
            far: lattice.farthest_pair(),
            phase,
            ferro: disorder.bond_signs.iter().all(|&s| s > 0),
            stack: Vec::new(),
            in_cluster: vec![false; n],
            clusters_per_sweep: None,
        };
        sys.set_beta(beta)?;
        Ok(sys)
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if beta.is_nan() || beta < 0.0 {
            return Err(Error::InvalidArgument(format!("beta {beta}")));
        }
        self.beta = beta;
        // Powers of e^{−2β} keep β = ∞ exact.
        let x = (-2.0 * beta).exp();
        let z = self.max_degree as i32;
        self.accept = (-z..=z).map(|k| if k <= 0 { 1.0 } else { x.powi(k) }).collect();
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn set_spins(&mut self, spins: &[i8]) -> Result<()> {
        if spins.len() != self.spins.len() || spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("spin configuration must be ±1 per site".into()));
        }
        self.spins.copy_from_slice(spins);
        Ok(())
    }

    /// `Σ_bonds J σ_i σ_j`.
    pub fn bond_sum(&self) -> i64 {
        self.bonds.iter().map(|&(i, j, s)| (s * self.spins[i] * self.spins[j]) as i64).sum()
    }

    pub fn sweep_metropolis<R: Rng>(&mut self, rng: &mut R) {
        let z = self.max_degree as i32;
        for i in 0..self.spins.len() {
            let h: i32 = self.neighbors[i].iter().map(|&(j, s)| (s * self.spins[j]) as i32).sum();
            let a = self.accept[(self.spins[i] as i32 * h + z) as usize];
            if a >= 1.0 || rng.random::<f64>() < a {
                self.spins[i] = -self.spins[i];
            }
        }
    }

    /// Returns the cluster size.
    fn wolff_cluster<R: Rng>(&mut self, rng: &mut R) -> usize {
        let p_add = 1.0 - (-2.0 * self.beta).exp();
        let seed = rng.random_range(0..self.spins.len());
        let s0 = self.spins[seed];
        self.stack.clear();
        self.stack.push(seed);
        self.in_cluster[seed] = true;
        let mut members = vec![seed];
        while let Some(i) = self.stack.pop() {
            for k in 0..self.neighbors[i].len() {
                let (j, _) = self.neighbors[i][k];
                if !self.in_cluster[j] && self.spins[j] == s0 && rng.random::<f64>() < p_add {
                    self.in_cluster[j] = true;
                    self.stack.push(j);
                    members.push(j);
                }
            }
        }
        for &i in &members {
            self.spins[i] = -s0;
            self.in_cluster[i] = false;
        }
        members.len()
    }

    /// Returns `(clusters, flipped spins)`.
    pub fn sweep_wolff<R: Rng>(&mut self, rng: &mut R) -> Result<(usize, usize)> {
        if !self.ferro {
            return Err(Error::InvalidArgument("Wolff updates need uniform ferromagnetic bonds".into()));
        }
        let (mut clusters, mut flipped) = (0, 0);
        match self.clusters_per_sweep {
            Some(k) => {
                for _ in 0..k {
                    flipped += self.wolff_cluster(rng);
                }
                clusters = k;
            }
            None => {
                while flipped < self.spins.len() {
                    flipped += self.wolff_cluster(rng);
                    clusters += 1;
                }
            }
        }
        Ok((clusters, flipped))
    }

    fn sweep<R: Rng>(&mut self, update: Update, rng: &mut R) -> Result<()> {
        match update {
            Update::Metropolis => self.sweep_metropolis(rng),
            Update::Wolff => {
                self.sweep_wolff(rng)?;
            }
        }
        Ok(())
    }

    fn measure(&self) -> [f64; N_ISING_OBS] {
        let n = self.spins.len() as f64;
        let m = self.spins.iter().map(|&s| s as f64).sum::<f64>() / n;
        let (mut re, mut im) = (0.0, 0.0);
        for (&s, &(c, sn)) in self.spins.iter().zip(&self.phase) {
            re += s as f64 * c;
            im += s as f64 * sn;
        }
        let m2 = m * m;
        [
            m.abs(),
            m2,
            m2 * m2,
            self.bond_sum() as f64 / self.bonds.len().max(1) as f64,
            (self.spins[self.far.0] * self.spins[self.far.1]) as f64,
            (re * re + im * im) / n,
        ]
    }

    /// Thermalizes, then measures every `measure_stride` sweeps.
    pub fn run<R: Rng>(&mut self, run: &MCRun, update: Update, rng: &mut R) -> Result<Estimators> {
        run.validate()?;
        self.clusters_per_sweep = None;
        let (mut clusters, mut flipped) = (0usize, 0usize);
        for _ in 0..run.n_therm {
            match update {
                Update::Metropolis => self.sweep_metropolis(rng),
                Update::Wolff => {
                    let (c, f) = self.sweep_wolff(rng)?;
                    clusters += c;
                    flipped += f;
                }
            }
        }
        if update == Update::Wolff {
            let mean_size = flipped as f64 / clusters.max(1) as f64;
            self.clusters_per_sweep = Some(((self.spins.len() as f64 / mean_size).ceil() as usize).max(1));
        }
        let mut series = Vec::with_capacity(run.n_samples());
        for s in 1..=run.n_sweeps {
            self.sweep(update, rng)?;
            if s % run.measure_stride == 0 {
                series.push(self.measure());
            }
        }
        let (means, bins) = block_means(&series, N_BINS);
        Ok(Estimators { n_samples: series.len(), means, bins })
    }
}

/// Disorder- (or block-) averaged observables at one `(p, L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderPoint {
    pub l: usize,
    pub p: f64,
    pub beta: f64,
    pub binder: f64,
    pub binder_err: f64,
    pub abs_m: f64,
    pub abs_m_err: f64,
    pub m2: f64,
    pub m2_err: f64,
    pub energy: f64,
    pub energy_err: f64,
    pub corr_far: f64,
    pub corr_far_err: f64,
    pub xi: f64,
    pub xi_err: f64,
    /// Disorder realizations (1 for the clean model).
    pub n_realizations: usize,
    /// Measurements per realization.
    pub n_samples: usize,
}

/// `U_L = 1 − [⟨m⁴⟩]/(3[⟨m²⟩]²)` over a grid, with the crossing of the two largest sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinderTable {
    pub model: String,
    pub p_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Ordered by size, then by `p`.
    pub points: Vec<BinderPoint>,
    pub crossing: Option<f64>,
    pub seed: u64,
}

impl BinderTable {
    pub fn curve(&self, l: usize) -> Vec<f64> {
        self.points.iter().filter(|pt| pt.l == l).map(|pt| pt.binder).collect()
    }

    pub fn point(&self, l: usize, p: f64) -> Option<&BinderPoint> {
        self.points.iter().find(|pt| pt.l == l && pt.p == p)
    }

    pub fn rows(&self) -> Vec<McRow> {
        let mut out = Vec::new();
        for pt in &self.points {
            let obs = [
                ("binder", pt.binder, pt.binder_err),
                ("abs_m", pt.abs_m, pt.abs_m_err),
                ("m2", pt.m2, pt.m2_err),
                ("energy_per_bond", pt.energy, pt.energy_err),
                ("corr_far", pt.corr_far, pt.corr_far_err),
                ("xi_second_moment", pt.xi, pt.xi_err),
            ];
            for (name, mean, stderr) in obs {
                out.push(McRow {
                    model: self.model.clone(),
                    l: pt.l,
                    p_or_alpha: pt.p,
                    beta: pt.beta,
                    observable: name.into(),
                    mean,
                    stderr,
                    n_samples: pt.n_realizations * pt.n_samples,
                    seed: self.seed,
                });
            }
        }
        out
    }
}

fn summarize_point(rows: &[[f64; N_ISING_OBS]], l: usize, p: f64, beta: f64, n_samples: usize) -> BinderPoint {
    let cols = crate::stats::columns(rows);
    let n = l * l;
    let mean_of = |k: usize| jackknife(&cols, |m| m[k]);
    let (binder, binder_err) = jackknife(&cols, binder);
    let (abs_m, abs_m_err) = mean_of(ABS_M);
    let (m2, m2_err) = mean_of(M2);
    let (energy, energy_err) = mean_of(ENERGY);
    let (corr_far, corr_far_err) = mean_of(CORR);
    let (xi, xi_err) = jackknife(&cols, |m| xi_second_moment(m, n, l));
    BinderPoint {
        l,
        p,
        beta,
        binder,
        binder_err,
        abs_m,
        abs_m_err,
        m2,
        m2_err,
        energy,
        energy_err,
        corr_far,
        corr_far_err,
        xi,
        xi_err,
        n_realizations: rows.len(),
        n_samples,
    }
}

fn check_grid(grid: &[f64], lo: f64, hi: f64, sizes: &[usize]) -> Result<()> {
    if grid.is_empty() || sizes.is_empty() {
        return Err(Error::BadGrid("empty grid or size list".into()));
    }
    if grid.iter().any(|&p| !(lo..=hi).contains(&p)) {
        return Err(Error::BadGrid(format!("values must lie in [{lo}, {hi}]")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid("grid must be strictly increasing".into()));
    }
    if sizes.iter().any(|&l| !(3..=MAX_MC_LINEAR_SIZE).contains(&l)) {
        return Err(Error::BadGrid(format!("sizes must lie in [3, {MAX_MC_LINEAR_SIZE}]")));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadGrid("sizes must be strictly increasing".into()));
    }
    Ok(())
}

fn top_crossing(grid: &[f64], sizes: &[usize], points: &[BinderPoint]) -> Option<f64> {
    if sizes.len() < 2 {
        return None;
    }
    let curve = |l: usize| points.iter().filter(|pt| pt.l == l).map(|pt| pt.binder).collect::<Vec<_>>();
    crossing(grid, &curve(sizes[sizes.len() - 2]), &curve(sizes[sizes.len() - 1]))
}

/// Nishimori inverse temperature `e^{−2β} = p/(1−p)`.
pub fn nishimori_beta(p: f64) -> f64 {
    0.5 * ((1.0 - p) / p).ln()
}

/// ±J RBIM on periodic `L×L` lattices along the Nishimori line. Each realization
/// draws its bonds and its dynamics from streams derived from `(template.seed, p, L, r)`.
pub fn rbim_nishimori_scan(
    p_grid: &[f64],
    sizes: &[usize],
    template: &MCRun,
    n_disorder: usize,
) -> Result<BinderTable> {
    check_grid(p_grid, 0.0, 0.25, sizes)?;
    if n_disorder == 0 {
        return Err(Error::BadGrid("n_disorder must be positive".into()));
    }
    template.validate()?;
    let mut points = Vec::new();
    for &l in sizes {
        let lattice = LatticeSpec::square(l, l, Boundary::Periodic);
        for &p in p_grid {
            let beta = nishimori_beta(p);
            let run = MCRun { lattice, beta, ..*template };
            let rows = (0..n_disorder as u64)
                .into_par_iter()
                .map(|r| {
                    let (pb, lb) = (p.to_bits(), l as u64);
                    let disorder = BondDisorder::sample(lattice, p, derive_seed(template.seed, &[0, pb, lb, r]))?;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(template.seed, &[1, pb, lb, r]));
                    let mut sys = IsingSystem::new(&disorder, beta)?;
                    Ok(sys.run(&run, Update::Metropolis, &mut rng)?.means)
                })
                .collect::<Result<Vec<_>>>()?;
            points.push(summarize_point(&rows, l, p, beta, run.n_samples()));
        }
    }
    Ok(BinderTable {
        model: "rbim_nishimori".into(),
        crossing: top_crossing(p_grid, sizes, &points),
        p_grid: p_grid.to_vec(),
        sizes: sizes.to_vec(),
        points,
        seed: template.seed,
    })
}

/// Clean Ising model at coupling `2τ`, `tanh τ = p/(1−p)`: the image of `Tr ρ²`.
pub fn renyi2_ising_scan(p_grid: &[f64], sizes: &[usize], template: &MCRun, update: Update) -> Result<BinderTable> {
    check_grid(p_grid, 0.0, 0.49, sizes)?;
    template.validate()?;
    let jobs: Vec<(usize, f64)> = sizes.iter().flat_map(|&l| p_grid.iter().map(move |&p| (l, p))).collect();
    let points = jobs
        .into_par_iter()
        .map(|(l, p)| {
            let lattice = LatticeSpec::square(l, l, Boundary::Periodic);
            let beta = 2.0 * (p / (1.0 - p)).atanh();
            let run = MCRun { lattice, beta, ..*template };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(template.seed, &[2, p.to_bits(), l as u64]));
            let mut sys = IsingSystem::new(&BondDisorder::uniform(lattice), beta)?;
            let est = sys.run(&run, update, &mut rng)?;
            Ok(summarize_point(&est.bins, l, p, beta, est.n_samples))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BinderTable {
        model: "ising_doubled_coupling".into(),
        crossing: top_crossing(p_grid, sizes, &points),
        p_grid: p_grid.to_vec(),
        sizes: sizes.to_vec(),
        points,
        seed: template.seed,
    })
}
