//! The nine experiments. Each has strict typed parameters with defaults, a
//! resource estimate for `validate`, and a runner producing rows and plot tables.

use std::f64::consts::LN_2;

use mixedorder_core::channels::{apply, site_x_dephasing, site_x_dephasing_on, theta_channel};
use mixedorder_core::diagnostics::{default_operator_family, replicated_fidelity_normalized};
use mixedorder_core::models::{
    state_decohered_ising, state_ghz, state_one_plus_X, state_plus_product, state_thermal_commuting,
    thermal_fidelity_closed_form,
};
use mixedorder_core::random::{random_density, random_local_channel};
use mixedorder_core::{
    classify_ssb, cmi, cmi_markov_gap, fidelity_correlator, layered_recovery, linear_correlator, renyi2_correlator,
    Boundary, DensityMatrix, KrausChannel, LatticeSpec, LocalOp, Pauli, PauliString, Representation, Rotation, Sector,
    SiteOperator, SsbThresholds, ThermalSpec,
};
use mixedorder_statmech::{
    purity_ising_pc, rbim_nishimori_scan, renyi2_ising_scan, replica_enumerate, villain_fn_coefficients,
    villain_kt_scan, BinderTable, MCRun, ReplicaSpinModel, Update,
};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{typed_params, Experiment, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{DatFile, ExperimentOutput, ResultRow};

/// Largest register any dense experiment accepts.
pub const DENSE_CAP: usize = 12;
/// Largest register in the randomized recovery suite.
pub const RECOVERY_CAP: usize = 8;

fn z_op() -> LocalOp {
    LocalOp::Pauli(Pauli::Z)
}

fn zz(n: usize, x: usize, y: usize) -> CliResult<PauliString> {
    Ok(PauliString::new(n, vec![SiteOperator::pauli(x, Pauli::Z), SiteOperator::pauli(y, Pauli::Z)])?)
}

fn dense_check(what: &str, n: usize, cap: usize) -> CliResult<()> {
    if n > cap {
        return Err(CliError::ResourceExceeded(format!("{what}: {n} sites above the dense cap of {cap}")));
    }
    if n < 2 {
        return Err(CliError::ConfigInvalid(format!("{what}: at least 2 sites are needed")));
    }
    Ok(())
}

fn grid_check(name: &str, grid: &[f64], lo: f64, hi: f64) -> CliResult<()> {
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite() || *v < lo || *v > hi) {
        return Err(CliError::ConfigInvalid(format!("{name} must be a nonempty list within [{lo}, {hi}]")));
    }
    Ok(())
}

/// Rough cost of a run, printed by `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub memory_bytes: f64,
    pub seconds: f64,
}

fn dense_estimate(n: usize, matrices: f64, eigensolves: f64) -> Estimate {
    let d = (1u64 << n.min(20)) as f64;
    Estimate { memory_bytes: matrices * 16.0 * d * d, seconds: eigensolves * 2e-9 * d * d * d }
}

// ---------------------------------------------------------------- table1_demo

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Params {
    pub n: usize,
    pub thresholds: SsbThresholds,
}

impl Default for Table1Params {
    fn default() -> Self {
        Table1Params { n: 6, thresholds: SsbThresholds::default() }
    }
}

fn table1(p: &Table1Params) -> CliResult<ExperimentOutput> {
    dense_check("table1_demo", p.n, DENSE_CAP)?;
    let n = p.n;
    let states: [(&str, DensityMatrix); 3] =
        [("plus_product", state_plus_product(n)?), ("one_plus_x", state_one_plus_X(n)?), ("ghz", state_ghz(n)?)];
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (id, rho) in &states {
        let c = classify_ssb(rho, &default_operator_family(), &[(0, n - 1)], p.thresholds)?;
        let verdict =
            serde_json::to_value(c.verdict).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        rows.push(
            ResultRow::exact("diagnostics", "classify_ssb", id, n, "fidelity_correlator", c.fidelity_value)
                .pair(c.pair.0, c.pair.1)
                .detail(verdict),
        );
        summary.push(json!({"state": id, "classification": c}));
    }
    Ok(ExperimentOutput { rows, dat: Vec::new(), summary: json!({ "states": summary }) })
}

// ---------------------------------------------------------------- thermal_scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalParams {
    pub n: usize,
    pub betas: Vec<f64>,
    pub sector: Sector,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams { n: 8, betas: vec![0.3, 1.0, 2.0], sector: Sector::Even }
    }
}

fn thermal(p: &ThermalParams) -> CliResult<ExperimentOutput> {
    dense_check("thermal_scan", p.n, DENSE_CAP)?;
    grid_check("betas", &p.betas, 0.0, 1e6)?;
    let n = p.n;
    let mut rows = Vec::new();
    let (mut max_err, mut max_linear) = (0.0f64, 0.0f64);
    let mut dat = DatFile::new("thermal_fidelity", "thermal fidelity correlator, farthest pair", "beta", "F_Z");
    let (mut computed, mut closed) = (Vec::new(), Vec::new());
    for &beta in &p.betas {
        let rho = state_thermal_commuting::<f64>(n, ThermalSpec::new(beta, p.sector)?)?;
        let exact = thermal_fidelity_closed_form(n, beta);
        for x in 0..n {
            for y in x + 1..n {
                let f = fidelity_correlator(&rho, &z_op(), x, y)?;
                let l = linear_correlator(&rho, &z_op(), x, y)?;
                max_err = max_err.max((f - exact).abs());
                max_linear = max_linear.max(l.abs());
                rows.push(
                    ResultRow::exact("diagnostics", "fidelity_correlator", "thermal_x", n, "fidelity", f)
                        .beta(beta)
                        .pair(x, y),
                );
                rows.push(
                    ResultRow::exact("diagnostics", "linear_correlator", "thermal_x", n, "linear", l)
                        .beta(beta)
                        .pair(x, y),
                );
            }
        }
        rows.push(
            ResultRow::exact("models", "thermal_fidelity_closed_form", "thermal_x", n, "fidelity_closed_form", exact)
                .beta(beta),
        );
        computed.push([beta, fidelity_correlator(&rho, &z_op(), 0, n - 1)?, 0.0]);
        closed.push([beta, exact, 0.0]);
    }
    dat.push_series("computed", computed);
    dat.push_series("closed form", closed);
    Ok(ExperimentOutput {
        rows,
        dat: vec![dat],
        summary: json!({"max_abs_error_vs_closed_form": max_err, "max_abs_linear": max_linear}),
    })
}

// ---------------------------------------------------------- ising_decohere_scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecohereParams {
    pub lx: usize,
    pub ly: usize,
    pub boundary: Boundary,
    pub p_grid: Vec<f64>,
    /// Rotation angle of the general ZZ channel; absent means the Pauli ZZ channel.
    pub theta: Option<f64>,
}

impl Default for DecohereParams {
    fn default() -> Self {
        DecohereParams {
            lx: 2,
            ly: 3,
            boundary: Boundary::Open,
            p_grid: vec![0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5],
            theta: None,
        }
    }
}

fn decohere(p: &DecohereParams) -> CliResult<ExperimentOutput> {
    let lat =
        if p.ly == 1 { LatticeSpec::chain(p.lx, p.boundary) } else { LatticeSpec::square(p.lx, p.ly, p.boundary) };
    dense_check("ising_decohere_scan", lat.n_sites(), DENSE_CAP)?;
    grid_check("p_grid", &p.p_grid, 0.0, 1.0)?;
    let n = lat.n_sites();
    let (x, y) = lat.farthest_pair();
    let model = if p.theta.is_some() { "theta_decohered_plus" } else { "zz_decohered_plus" };
    let mut rows = Vec::new();
    let mut series: [Vec<[f64; 3]>; 3] = Default::default();
    for &q in &p.p_grid {
        let rho = match p.theta {
            Some(th) => apply(&theta_channel(&lat, q, th)?, &state_plus_product(n)?)?,
            None => state_decohered_ising::<f64>(&lat, q, Representation::Dense)?.to_density()?,
        };
        let vals = [
            ("fidelity_correlator", "fidelity", fidelity_correlator(&rho, &z_op(), x, y)?),
            ("renyi2_correlator", "renyi2", renyi2_correlator(&rho, &z_op(), x, y)?),
            ("linear_correlator", "linear", linear_correlator(&rho, &z_op(), x, y)?),
        ];
        for (k, (op, obs, v)) in vals.into_iter().enumerate() {
            let mut row = ResultRow::exact("diagnostics", op, model, n, obs, v).param(q).pair(x, y);
            if let Some(th) = p.theta {
                row = row.detail(format!("theta={th}"));
            }
            rows.push(row);
            series[k].push([q, v, 0.0]);
        }
    }
    let mut dat =
        DatFile::new("decohered_correlators", "correlators of the decohered state, farthest pair", "p", "value");
    for (label, s) in ["fidelity", "renyi2", "linear"].into_iter().zip(series) {
        dat.push_series(label, s);
    }
    Ok(ExperimentOutput { rows, dat: vec![dat], summary: json!({"pair": [x, y], "n_sites": n}) })
}

// --------------------------------------------------------------- replica_oracle

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicaParams {
    /// `[lx, ly]` open lattices.
    pub lattices: Vec<[usize; 2]>,
    pub p_grid: Vec<f64>,
}

impl Default for ReplicaParams {
    fn default() -> Self {
        ReplicaParams { lattices: vec![[2, 2], [2, 3]], p_grid: vec![0.05, 0.1, 0.2] }
    }
}

/// Largest `|quantum − classical|` over the grid, with the rows.
pub fn replica_oracle_rows(p: &ReplicaParams) -> CliResult<(f64, Vec<ResultRow>)> {
    grid_check("p_grid", &p.p_grid, 0.0, 0.49)?;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &[lx, ly] in &p.lattices {
        let lat = LatticeSpec::square(lx, ly, Boundary::Open);
        let n = lat.n_sites();
        dense_check("replica_oracle", n, DENSE_CAP)?;
        let model_id = format!("{lx}x{ly}_open");
        for &q in &p.p_grid {
            let rho = state_decohered_ising::<f64>(&lat, q, Representation::Dense)?.to_density()?;
            let model = ReplicaSpinModel::from_decoherence(3, lat, q)?;
            let (x, y) = (0, n - 1);
            let quantum = replicated_fidelity_normalized(&rho, &zz(n, x, y)?, 1, 1)?;
            let classical = replica_enumerate(&model, Some(&[(0, x), (0, y)]))?;
            worst = worst.max((quantum - classical).abs());
            rows.push(
                ResultRow::exact(
                    "diagnostics",
                    "replicated_fidelity_normalized",
                    &model_id,
                    n,
                    "quantum_m1_n1",
                    quantum,
                )
                .param(q)
                .pair(x, y),
            );
            rows.push(
                ResultRow::exact("statmech", "replica_enumerate", &model_id, n, "classical_t3", classical)
                    .param(q)
                    .pair(x, y),
            );
            rows.push(
                ResultRow::exact(
                    "statmech",
                    "replica_enumerate",
                    &model_id,
                    n,
                    "abs_difference",
                    (quantum - classical).abs(),
                )
                .param(q)
                .pair(x, y),
            );
        }
    }
    Ok((worst, rows))
}

fn replica(p: &ReplicaParams) -> CliResult<ExperimentOutput> {
    let (worst, rows) = replica_oracle_rows(p)?;
    Ok(ExperimentOutput { rows, dat: Vec::new(), summary: json!({"max_abs_difference": worst}) })
}

// ------------------------------------------------------------ Monte Carlo shared

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub n_therm: usize,
    pub n_sweeps: usize,
    pub measure_stride: usize,
}

impl Schedule {
    fn template(self, seed: u64) -> MCRun {
        MCRun {
            lattice: LatticeSpec::square(4, 4, Boundary::Periodic),
            beta: 0.0,
            n_therm: self.n_therm,
            n_sweeps: self.n_sweeps,
            measure_stride: self.measure_stride,
            seed,
        }
    }

    fn spin_updates(self, sizes: &[usize], cells: usize) -> f64 {
        let sites: usize = sizes.iter().map(|l| l * l).sum();
        (self.n_therm + self.n_sweeps) as f64 * sites as f64 * cells as f64
    }
}

fn binder_dat(name: &str, title: &str, x_label: &str, table: &BinderTable) -> DatFile {
    let mut dat = DatFile::new(name, title, x_label, "U_L");
    for &l in &table.sizes {
        let pts = table.points.iter().filter(|pt| pt.l == l).map(|pt| [pt.p, pt.binder, pt.binder_err]).collect();
        dat.push_series(format!("L={l}"), pts);
    }
    dat
}

// -------------------------------------------------------------------- rbim_scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbimParams {
    pub p_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    pub n_disorder: usize,
    pub schedule: Schedule,
}

impl Default for RbimParams {
    fn default() -> Self {
        RbimParams {
            p_grid: vec![0.07, 0.09, 0.10, 0.11, 0.12, 0.13, 0.15, 0.20],
            sizes: vec![8, 16],
            n_disorder: 200,
            schedule: Schedule { n_therm: 2000, n_sweeps: 4000, measure_stride: 2 },
        }
    }
}

fn rbim(p: &RbimParams, seed: u64) -> CliResult<ExperimentOutput> {
    let table = rbim_nishimori_scan(&p.p_grid, &p.sizes, &p.schedule.template(seed), p.n_disorder)?;
    let mut rows: Vec<ResultRow> =
        table.rows().iter().map(|r| ResultRow::from_mc("statmech", "rbim_nishimori_scan", r)).collect();
    if let Some(c) = table.crossing {
        let (a, b) = (p.sizes[p.sizes.len() - 2], p.sizes[p.sizes.len() - 1]);
        rows.push(
            ResultRow::exact("statmech", "rbim_nishimori_scan", "rbim_nishimori", b, "binder_crossing_p", c)
                .detail(format!("U_{a} vs U_{b}"))
                .sampled(0.0, p.n_disorder, seed),
        );
    }
    let dat = vec![binder_dat("rbim_binder", "RBIM on the Nishimori line", "p", &table)];
    Ok(ExperimentOutput { rows, dat, summary: json!({"crossing": table.crossing, "table": table}) })
}

// -------------------------------------------------------------------- renyi2_pc

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Renyi2Params {
    pub p_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    pub update: Update,
    pub schedule: Schedule,
}

impl Default for Renyi2Params {
    fn default() -> Self {
        Renyi2Params {
            p_grid: vec![0.16, 0.17, 0.175, 0.18, 0.185, 0.19, 0.20],
            sizes: vec![8, 16],
            update: Update::Wolff,
            schedule: Schedule { n_therm: 500, n_sweeps: 20000, measure_stride: 1 },
        }
    }
}

fn renyi2(p: &Renyi2Params, seed: u64) -> CliResult<ExperimentOutput> {
    let pc = purity_ising_pc();
    let mut rows = vec![
        ResultRow::exact("statmech", "purity_ising_pc", "ising_doubled_coupling", 0, "p_c_analytic", pc.p_c),
        ResultRow::exact("statmech", "purity_ising_pc", "ising_doubled_coupling", 0, "tau_c", pc.tau_c),
        ResultRow::exact(
            "statmech",
            "purity_ising_pc",
            "ising_doubled_coupling",
            0,
            "ising_coupling_c",
            pc.ising_coupling,
        ),
    ];
    let table = renyi2_ising_scan(&p.p_grid, &p.sizes, &p.schedule.template(seed), p.update)?;
    rows.extend(table.rows().iter().map(|r| ResultRow::from_mc("statmech", "renyi2_ising_scan", r)));
    if let Some(c) = table.crossing {
        let l = *p.sizes.last().unwrap_or(&0);
        rows.push(
            ResultRow::exact("statmech", "renyi2_ising_scan", "ising_doubled_coupling", l, "binder_crossing_p", c)
                .sampled(0.0, 1, seed),
        );
    }
    let dat = vec![binder_dat("renyi2_binder", "Ising at coupling 2 tau, tanh tau = p/(1-p)", "p", &table)];
    Ok(ExperimentOutput { rows, dat, summary: json!({"analytic": pc, "crossing": table.crossing, "table": table}) })
}

// ------------------------------------------------------------------ villain_scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VillainParams {
    pub alpha_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    /// Harmonics reported in the coefficient table.
    pub n_max: usize,
    pub schedule: Schedule,
}

impl Default for VillainParams {
    fn default() -> Self {
        VillainParams {
            alpha_grid: vec![0.5, 1.1, 1.2, 1.3, 1.4, 1.5, 3.0],
            sizes: vec![16, 32],
            n_max: 10,
            schedule: Schedule { n_therm: 2000, n_sweeps: 20000, measure_stride: 2 },
        }
    }
}

fn villain(p: &VillainParams, seed: u64) -> CliResult<ExperimentOutput> {
    let mut rows = Vec::new();
    for &alpha in &p.alpha_grid {
        for (n, f) in villain_fn_coefficients(alpha, p.n_max)?.into_iter().enumerate() {
            rows.push(
                ResultRow::exact("statmech", "villain_fn_coefficients", "rotor_renyi2", 0, "f_n", f)
                    .param(alpha)
                    .detail(format!("n={n}")),
            );
        }
    }
    let table = villain_kt_scan(&p.alpha_grid, &p.sizes, &p.schedule.template(seed))?;
    rows.extend(table.rows().iter().map(|r| ResultRow::from_mc("statmech", "villain_kt_scan", r)));
    for &(l, c) in &table.crossings {
        if let Some(c) = c {
            rows.push(
                ResultRow::exact("statmech", "villain_kt_scan", "villain_fn_xy", l, "jump_crossing_alpha", c)
                    .sampled(0.0, 1, seed),
            );
        }
    }
    let mut dat = DatFile::new("villain_helicity", "helicity modulus of the f_n XY model", "alpha", "Upsilon");
    for &l in &p.sizes {
        dat.push_series(
            format!("L={l}"),
            table.points.iter().filter(|pt| pt.l == l).map(|pt| [pt.alpha, pt.helicity, pt.helicity_err]).collect(),
        );
    }
    dat.push_series("2 alpha / pi", p.alpha_grid.iter().map(|&a| [a, 2.0 * a / std::f64::consts::PI, 0.0]).collect());
    Ok(ExperimentOutput { rows, dat: vec![dat], summary: json!({"estimate": table.estimate, "table": table}) })
}

// ---------------------------------------------------------------- recovery_suite

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryParams {
    pub n_instances: usize,
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub rotation: Rotation,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams { n_instances: 200, min_qubits: 3, max_qubits: 6, rotation: Rotation::default() }
    }
}

/// One randomized Petz-bound instance on a ring: `A` a block, `B` an annulus around it, `C` the rest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryInstance {
    pub index: usize,
    pub n: usize,
    pub rank: usize,
    pub n_kraus: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub bound_slack: f64,
    pub trace_distance_residual: f64,
    pub trace_norm_bound: f64,
    pub fidelity: f64,
    pub cmi_before: f64,
    pub cmi_after: f64,
    /// Residual of recovering the identity channel.
    pub identity_residual: f64,
}

pub fn recovery_instances(p: &RecoveryParams, seed: u64) -> CliResult<Vec<RecoveryInstance>> {
    if p.max_qubits > RECOVERY_CAP {
        return Err(CliError::ResourceExceeded(format!(
            "recovery_suite: {} qubits above {RECOVERY_CAP}",
            p.max_qubits
        )));
    }
    if p.min_qubits < 3 || p.min_qubits > p.max_qubits || p.n_instances == 0 {
        return Err(CliError::ConfigInvalid("recovery_suite needs 3 <= min_qubits <= max_qubits and instances".into()));
    }
    use rayon::prelude::*;
    (0..p.n_instances)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(mixedorder_statmech::derive_seed(seed, &[4, index as u64]));
            let n = rng.random_range(p.min_qubits..=p.max_qubits);
            let width_a = rng.random_range(1..=(n - 2).min(2));
            let max_w = (n - width_a - 1) / 2;
            let w = rng.random_range(1..=max_w.max(1));
            let start = rng.random_range(0..n);
            let ring = |k: usize| (start + k) % n;
            let mut a: Vec<usize> = (0..width_a).map(ring).collect();
            let mut b: Vec<usize> = (width_a..width_a + w).chain(n - w..n).map(ring).collect();
            b.sort_unstable();
            b.dedup();
            let mut c: Vec<usize> = (0..n).filter(|s| !a.contains(s) && !b.contains(s)).collect();
            a.sort_unstable();
            c.sort_unstable();
            let rank = rng.random_range(1..=1usize << n);
            let rho: DensityMatrix = random_density(n, rank, &mut rng);
            let n_kraus = rng.random_range(1..=3);
            let channel: KrausChannel = random_local_channel(n, &a, n_kraus, &mut rng);
            let rep = cmi_markov_gap(&rho, &channel, &a, &b, &c, p.rotation)?;
            let id = cmi_markov_gap(&rho, &KrausChannel::identity(n), &a, &b, &c, p.rotation)?;
            Ok(RecoveryInstance {
                index,
                n,
                rank,
                n_kraus,
                a,
                b,
                c,
                bound_slack: rep.bound_slack,
                trace_distance_residual: rep.trace_distance_residual,
                trace_norm_bound: rep.trace_norm_bound,
                fidelity: rep.fidelity_recovered,
                cmi_before: rep.cmi_before,
                cmi_after: rep.cmi_after,
                identity_residual: id.trace_distance_residual,
            })
        })
        .collect()
}

fn recovery(p: &RecoveryParams, seed: u64) -> CliResult<ExperimentOutput> {
    let inst = recovery_instances(p, seed)?;
    let mut rows = Vec::new();
    for r in &inst {
        let tag =
            format!("instance={} A={:?} B={:?} C={:?} rank={} kraus={}", r.index, r.a, r.b, r.c, r.rank, r.n_kraus);
        rows.push(
            ResultRow::exact("recovery", "cmi_markov_gap", "random_instance", r.n, "bound_slack", r.bound_slack)
                .sampled(0.0, 1, seed)
                .detail(tag.clone()),
        );
        rows.push(
            ResultRow::exact(
                "recovery",
                "cmi_markov_gap",
                "random_instance",
                r.n,
                "trace_distance_residual",
                r.trace_distance_residual,
            )
            .sampled(0.0, 1, seed)
            .detail(tag.clone()),
        );
        rows.push(
            ResultRow::exact(
                "recovery",
                "cmi_markov_gap",
                "identity_channel",
                r.n,
                "trace_distance_residual",
                r.identity_residual,
            )
            .sampled(0.0, 1, seed)
            .detail(tag),
        );
    }
    let min_slack = inst.iter().map(|r| r.bound_slack).fold(f64::INFINITY, f64::min);
    let max_identity = inst.iter().map(|r| r.identity_residual).fold(0.0, f64::max);
    let mut dat = DatFile::new(
        "recovery_bound",
        "Petz recovery: -2 log2 F against the CMI drop",
        "cmi_drop_bits",
        "minus_2_log2_F",
    );
    dat.push_series(
        "instances",
        inst.iter().map(|r| [(r.cmi_before - r.cmi_after) / LN_2, -2.0 * r.fidelity.log2(), 0.0]).collect(),
    );
    Ok(ExperimentOutput {
        rows,
        dat: vec![dat],
        summary: json!({"n_instances": inst.len(), "min_bound_slack": min_slack, "max_identity_residual": max_identity}),
    })
}

// ------------------------------------------------------------ ghz_counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GhzParams {
    pub n: usize,
    /// Site `x` of the CMI `I(site 0; {x} ∪ B | A)`, with `A = 1..x` and `B = x+1..n`.
    pub x: usize,
    pub block_sizes: Vec<usize>,
    pub rotation: Rotation,
}

impl Default for GhzParams {
    fn default() -> Self {
        GhzParams { n: 8, x: 4, block_sizes: vec![1, 2], rotation: Rotation::StandardT0 }
    }
}

/// GHZ with every site but `0` and `x` fully X-dephased.
pub fn ghz_partial_cmi(n: usize, x: usize) -> CliResult<f64> {
    if x < 2 || x >= n {
        return Err(CliError::ConfigInvalid(format!("x = {x} must lie in [2, {})", n)));
    }
    let rest: Vec<usize> = (0..n).filter(|&s| s != 0 && s != x).collect();
    let rho = apply(&site_x_dephasing_on(n, &rest, 0.5)?, &state_ghz(n)?)?;
    let a: Vec<usize> = (1..x).collect();
    let xb: Vec<usize> = (x..n).collect();
    Ok(cmi(&rho, &[0], &a, &xb)?)
}

fn ghz(p: &GhzParams) -> CliResult<ExperimentOutput> {
    dense_check("ghz_counterexample", p.n, DENSE_CAP)?;
    let n = p.n;
    let value = ghz_partial_cmi(n, p.x)?;
    let mut rows = vec![ResultRow::exact("diagnostics", "cmi", "ghz_partially_dephased", n, "cmi_nats", value)
        .pair(0, p.x)
        .detail(format!("2 ln 2 = {:.16e}", 2.0 * LN_2))];
    let layer = site_x_dephasing(n, 0.5)?;
    let mut zero = vec![Complex::new(0.0, 0.0); 1 << n];
    zero[0] = Complex::new(1.0, 0.0);
    let product = DensityMatrix::from_pure(&zero)?;
    let ghz_state = state_ghz(n)?;
    let mut dat =
        DatFile::new("ghz_layered_steps", "layered Petz recovery of full X dephasing", "step", "cumulative_residual");
    let mut summary = Vec::new();
    for &l0 in &p.block_sizes {
        for (id, rho) in [("ghz", &ghz_state), ("product_zero", &product)] {
            let rep = layered_recovery(rho, std::slice::from_ref(&layer), l0, p.rotation)?;
            rows.push(
                ResultRow::exact("recovery", "layered_recovery", id, n, "final_residual", rep.final_residual)
                    .param(l0 as f64)
                    .detail(format!("block_size={l0}")),
            );
            rows.push(
                ResultRow::exact(
                    "recovery",
                    "layered_recovery",
                    id,
                    n,
                    "unrecovered_residual",
                    rep.unrecovered_residual,
                )
                .param(l0 as f64)
                .detail(format!("block_size={l0}")),
            );
            let worst = rep.steps.iter().map(|s| s.step_residual).fold(0.0, f64::max);
            rows.push(
                ResultRow::exact("recovery", "layered_recovery", id, n, "max_step_residual", worst)
                    .param(l0 as f64)
                    .detail(format!("block_size={l0}")),
            );
            dat.push_series(
                format!("{id} L0={l0}"),
                rep.steps.iter().map(|s| [s.step as f64, s.cumulative_residual, 0.0]).collect(),
            );
            summary.push(json!({"state": id, "block_size": l0, "report": rep, "chain_holds": rep.chain_holds(1e-8)}));
        }
    }
    Ok(ExperimentOutput { rows, dat: vec![dat], summary: json!({"cmi": value, "layered": summary}) })
}

// ------------------------------------------------------------------- dispatch

/// An experiment with its parameters resolved against the defaults.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Table1(Table1Params),
    Thermal(ThermalParams),
    Decohere(DecohereParams),
    Replica(ReplicaParams),
    Rbim(RbimParams),
    Renyi2(Renyi2Params),
    Villain(VillainParams),
    Recovery(RecoveryParams),
    Ghz(GhzParams),
}

impl Resolved {
    pub fn from_config(config: &RunConfig) -> CliResult<Self> {
        let v = &config.params;
        Ok(match config.experiment {
            Experiment::Table1Demo => Resolved::Table1(typed_params(v)?),
            Experiment::ThermalScan => Resolved::Thermal(typed_params(v)?),
            Experiment::IsingDecohereScan => Resolved::Decohere(typed_params(v)?),
            Experiment::ReplicaOracle => Resolved::Replica(typed_params(v)?),
            Experiment::RbimScan => Resolved::Rbim(typed_params(v)?),
            Experiment::Renyi2Pc => Resolved::Renyi2(typed_params(v)?),
            Experiment::VillainScan => Resolved::Villain(typed_params(v)?),
            Experiment::RecoverySuite => Resolved::Recovery(typed_params(v)?),
            Experiment::GhzCounterexample => Resolved::Ghz(typed_params(v)?),
        })
    }

    pub fn params_json(&self) -> serde_json::Value {
        let v = match self {
            Resolved::Table1(p) => serde_json::to_value(p),
            Resolved::Thermal(p) => serde_json::to_value(p),
            Resolved::Decohere(p) => serde_json::to_value(p),
            Resolved::Replica(p) => serde_json::to_value(p),
            Resolved::Rbim(p) => serde_json::to_value(p),
            Resolved::Renyi2(p) => serde_json::to_value(p),
            Resolved::Villain(p) => serde_json::to_value(p),
            Resolved::Recovery(p) => serde_json::to_value(p),
            Resolved::Ghz(p) => serde_json::to_value(p),
        };
        v.expect("parameter structs serialize")
    }

    pub fn run(&self, seed: u64) -> CliResult<ExperimentOutput> {
        match self {
            Resolved::Table1(p) => table1(p),
            Resolved::Thermal(p) => thermal(p),
            Resolved::Decohere(p) => decohere(p),
            Resolved::Replica(p) => replica(p),
            Resolved::Rbim(p) => rbim(p, seed),
            Resolved::Renyi2(p) => renyi2(p, seed),
            Resolved::Villain(p) => villain(p, seed),
            Resolved::Recovery(p) => recovery(p, seed),
            Resolved::Ghz(p) => ghz(p),
        }
    }

    /// Dense-size and lattice-size checks without running anything.
    pub fn check_resources(&self) -> CliResult<()> {
        let mc_sizes = |sizes: &[usize]| -> CliResult<()> {
            if sizes.iter().any(|&l| l > mixedorder_statmech::ising::MAX_MC_LINEAR_SIZE) {
                return Err(CliError::ResourceExceeded(format!(
                    "Monte Carlo linear size above {}",
                    mixedorder_statmech::ising::MAX_MC_LINEAR_SIZE
                )));
            }
            Ok(())
        };
        match self {
            Resolved::Table1(p) => dense_check("table1_demo", p.n, DENSE_CAP),
            Resolved::Thermal(p) => dense_check("thermal_scan", p.n, DENSE_CAP),
            Resolved::Decohere(p) => dense_check("ising_decohere_scan", p.lx * p.ly, DENSE_CAP),
            Resolved::Replica(p) => p.lattices.iter().try_for_each(|&[lx, ly]| {
                dense_check("replica_oracle", lx * ly, DENSE_CAP)?;
                if 2 * lx * ly > mixedorder_statmech::replica::MAX_ENUMERATED_SPINS {
                    return Err(CliError::ResourceExceeded("replica enumeration above 24 spins".into()));
                }
                Ok(())
            }),
            Resolved::Rbim(p) => mc_sizes(&p.sizes),
            Resolved::Renyi2(p) => mc_sizes(&p.sizes),
            Resolved::Villain(p) => mc_sizes(&p.sizes),
            Resolved::Recovery(p) => {
                if p.max_qubits > RECOVERY_CAP {
                    return Err(CliError::ResourceExceeded(format!("recovery_suite above {RECOVERY_CAP} qubits")));
                }
                Ok(())
            }
            Resolved::Ghz(p) => dense_check("ghz_counterexample", p.n, DENSE_CAP),
        }
    }

    /// Order-of-magnitude memory and single-thread runtime.
    pub fn estimate(&self) -> Estimate {
        const SPIN_UPDATE: f64 = 1.8e-8;
        const XY_UPDATE: f64 = 5e-7;
        match self {
            Resolved::Table1(p) => dense_estimate(p.n, 12.0, 30.0),
            Resolved::Thermal(p) => {
                let pairs = (p.n * (p.n - 1) / 2) as f64;
                Estimate { seconds: p.betas.len() as f64 * pairs * 1e-4, ..dense_estimate(p.n, 6.0, 0.0) }
            }
            Resolved::Decohere(p) => dense_estimate(p.lx * p.ly, 12.0, 6.0 * p.p_grid.len() as f64),
            Resolved::Replica(p) => {
                let n = p.lattices.iter().map(|l| l[0] * l[1]).max().unwrap_or(0);
                dense_estimate(n, 8.0, 2.0 * (p.p_grid.len() * p.lattices.len()) as f64)
            }
            Resolved::Rbim(p) => Estimate {
                memory_bytes: 1e6,
                seconds: SPIN_UPDATE * p.schedule.spin_updates(&p.sizes, p.p_grid.len() * p.n_disorder),
            },
            Resolved::Renyi2(p) => Estimate {
                memory_bytes: 1e6,
                seconds: 3.0 * SPIN_UPDATE * p.schedule.spin_updates(&p.sizes, p.p_grid.len()),
            },
            Resolved::Villain(p) => Estimate {
                memory_bytes: 1e6,
                seconds: XY_UPDATE * p.schedule.spin_updates(&p.sizes, p.alpha_grid.len()),
            },
            Resolved::Recovery(p) => Estimate {
                seconds: p.n_instances as f64 * 0.05 * 4f64.powi(p.max_qubits as i32 - 5).max(1.0),
                ..dense_estimate(p.max_qubits, 200.0, 0.0)
            },
            Resolved::Ghz(p) => dense_estimate(p.n, 40.0, 200.0 * p.block_sizes.len() as f64),
        }
    }
}
