//! Exact enumeration of the t-replica spin model
//! H_eff = −Σ_⟨ij⟩ (Σ_{k<t} σ_i^k σ_j^k + ∏_{k<t} σ_i^k σ_j^k), weight e^{−τ H_eff}.

use mixedorder_core::LatticeSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of independent spins `(t − 1)·n` that is enumerated.
pub const MAX_ENUMERATED_SPINS: usize = 24;

/// `t` replicas of Ising spins with the per-site constraint `∏_k σ^k = 1`.
/// Replicas `0..t-1` are free; replica `t − 1` is their product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaSpinModel {
    pub t: usize,
    pub lattice: LatticeSpec,
    pub tanh_tau: f64,
}

impl ReplicaSpinModel {
    pub fn new(t: usize, lattice: LatticeSpec, tanh_tau: f64) -> Result<Self> {
        let m = ReplicaSpinModel { t, lattice, tanh_tau };
        m.validate()?;
        Ok(m)
    }

    /// The image of `Tr ρ^t` for ZZ decoherence at strength `p`: `tanh τ = p/(1−p)`.
    pub fn from_decoherence(t: usize, lattice: LatticeSpec, p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::BadProbability(p));
        }
        Self::new(t, lattice, p / (1.0 - p))
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::InvalidArgument(format!("replica count {} below 2", self.t)));
        }
        if !(0.0..1.0).contains(&self.tanh_tau) {
            return Err(Error::InvalidArgument(format!("tanh tau {} outside [0, 1)", self.tanh_tau)));
        }
        self.lattice.validate()?;
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.tanh_tau.atanh()
    }

    pub fn n_free_spins(&self) -> usize {
        (self.t - 1) * self.lattice.n_sites()
    }
}

/// Exact density of states of `S = −H_eff ∈ {−tE, −tE+2, …, tE}`, with the
/// signed sum of the spin insertion on each level when one was requested.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyHistogram {
    pub t: usize,
    pub n_bonds: usize,
    /// `counts[i]` configurations have `S = 2i − tE`.
    pub counts: Vec<u64>,
    pub insertion: Option<Vec<i64>>,
}

impl EnergyHistogram {
    fn level(&self, i: usize) -> f64 {
        2.0 * i as f64 - (self.t * self.n_bonds) as f64
    }

    /// `Σ_i v_i e^{τ(S_i − S_max)}`.
    fn shifted_sum(&self, v: impl Iterator<Item = f64>, tau: f64) -> f64 {
        let top = (self.t * self.n_bonds) as f64;
        v.enumerate().map(|(i, c)| c * (tau * (self.level(i) - top)).exp()).sum()
    }

    pub fn partition(&self, tau: f64) -> f64 {
        let top = (self.t * self.n_bonds) as f64;
        self.shifted_sum(self.counts.iter().map(|&c| c as f64), tau) * (tau * top).exp()
    }

    /// `⟨∏ σ⟩` at inverse temperature `τ`.
    pub fn insertion_ratio(&self, tau: f64) -> Option<f64> {
        let ins = self.insertion.as_ref()?;
        let num = self.shifted_sum(ins.iter().map(|&c| c as f64), tau);
        Some(num / self.shifted_sum(self.counts.iter().map(|&c| c as f64), tau))
    }
}

/// Bonds grouped by site offset `d = j − i`, as bitmasks of the lower sites.
fn bond_groups(lattice: &LatticeSpec) -> Vec<(u32, u64)> {
    let mut groups: Vec<(u32, u64)> = Vec::new();
    for (i, j) in lattice.bonds() {
        let (lo, hi) = (i.min(j), i.max(j));
        let d = (hi - lo) as u32;
        match groups.iter_mut().find(|g| g.0 == d) {
            Some(g) => g.1 |= 1 << lo,
            None => groups.push((d, 1 << lo)),
        }
    }
    groups
}

fn disagreements(groups: &[(u32, u64)], m: u64) -> u32 {
    groups.iter().map(|&(d, mask)| ((m ^ (m >> d)) & mask).count_ones()).sum()
}

/// Enumerates all `2^{(t−1)n}` configurations. `insert` lists `(replica, site)`
/// spins whose product is tracked.
pub fn replica_histogram(model: &ReplicaSpinModel, insert: Option<&[(usize, usize)]>) -> Result<EnergyHistogram> {
    model.validate()?;
    let n = model.lattice.n_sites();
    let bits = model.n_free_spins();
    if bits > MAX_ENUMERATED_SPINS {
        return Err(Error::TooLarge { what: "replica enumeration", bits, cap: MAX_ENUMERATED_SPINS });
    }
    let t = model.t;
    let mut ins_masks = vec![0u64; t];
    if let Some(list) = insert {
        for &(k, s) in list {
            if k >= t || s >= n {
                return Err(Error::InvalidArgument(format!("insertion ({k}, {s}) outside {t} replicas x {n} sites")));
            }
            ins_masks[k] ^= 1 << s;
        }
    }
    let groups = bond_groups(&model.lattice);
    let n_bonds = model.lattice.bonds().len();
    let full = (1u64 << n) - 1;
    let mut counts = vec![0u64; t * n_bonds + 1];
    let mut ins = insert.map(|_| vec![0i64; t * n_bonds + 1]);
    let mut reps = vec![0u64; t];
    for c in 0..1u64 << bits {
        let mut prod = 0u64;
        for (k, r) in reps.iter_mut().take(t - 1).enumerate() {
            *r = (c >> (k * n)) & full;
            prod ^= *r;
        }
        reps[t - 1] = prod;
        let dis: u32 = reps.iter().map(|&m| disagreements(&groups, m)).sum();
        // S = tE − 2·dis, stored at index (S + tE)/2.
        let idx = t * n_bonds - dis as usize;
        counts[idx] += 1;
        if let Some(ins) = ins.as_mut() {
            let parity: u32 = reps.iter().zip(&ins_masks).map(|(&r, &m)| (r & m).count_ones()).sum();
            ins[idx] += if parity.is_multiple_of(2) { 1 } else { -1 };
        }
    }
    Ok(EnergyHistogram { t, n_bonds, counts, insertion: ins })
}

/// Partition sum at `τ = artanh(tanh_tau)`, or the insertion expectation when `insert` is given.
pub fn replica_enumerate(model: &ReplicaSpinModel, insert: Option<&[(usize, usize)]>) -> Result<f64> {
    let h = replica_histogram(model, insert)?;
    let tau = model.tau();
    Ok(match insert {
        Some(_) => h.insertion_ratio(tau).expect("insertion histogram present"),
        None => h.partition(tau),
    })
}

/// Analytic Rényi-2 critical point of the decohered square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityCritical {
    /// Critical Ising coupling `2τ_c = artanh(√2 − 1)`.
    pub ising_coupling: f64,
    pub tau_c: f64,
    pub p_c: f64,
}

/// At `t = 2` the replica model is Ising at coupling `2τ`; Onsager's point fixes `p_c^(2)`.
pub fn purity_ising_pc() -> PurityCritical {
    let ising_coupling = (std::f64::consts::SQRT_2 - 1.0).atanh();
    let tau_c = ising_coupling / 2.0;
    let th = tau_c.tanh();
    PurityCritical { ising_coupling, tau_c, p_c: th / (1.0 + th) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mixedorder_core::Boundary;

    #[test]
    fn free_spins_at_zero_tau() {
        let lat = LatticeSpec::square(2, 3, Boundary::Open);
        for t in [2, 3, 4] {
            let m = ReplicaSpinModel::new(t, lat, 0.0).unwrap();
            assert_eq!(replica_enumerate(&m, None).unwrap(), 2f64.powi(((t - 1) * 6) as i32));
        }
    }

    #[test]
    fn purity_critical_point() {
        let pc = purity_ising_pc();
        assert!((0.177..=0.179).contains(&pc.p_c), "{}", pc.p_c);
        assert!((pc.tau_c - 0.2203).abs() < 1e-4);
        assert!((pc.ising_coupling - 0.5 * (1.0 + std::f64::consts::SQRT_2).ln()).abs() < 1e-15);
    }

    #[test]
    fn cap_and_validation() {
        let lat = LatticeSpec::square(5, 5, Boundary::Open);
        assert!(matches!(
            replica_enumerate(&ReplicaSpinModel::new(2, lat, 0.1).unwrap(), None),
            Err(Error::TooLarge { .. })
        ));
        assert!(ReplicaSpinModel::new(1, lat, 0.1).is_err());
        assert!(ReplicaSpinModel::new(2, lat, 1.0).is_err());
        let small = ReplicaSpinModel::new(3, LatticeSpec::square(2, 2, Boundary::Open), 0.2).unwrap();
        assert!(replica_enumerate(&small, Some(&[(3, 0)])).is_err());
    }

    #[test]
    fn insertion_on_dependent_replica_matches_free_replica() {
        let m = ReplicaSpinModel::from_decoherence(3, LatticeSpec::square(2, 3, Boundary::Open), 0.15).unwrap();
        let a = replica_enumerate(&m, Some(&[(0, 0), (0, 5)])).unwrap();
        let b = replica_enumerate(&m, Some(&[(2, 0), (2, 5)])).unwrap();
        assert!((a - b).abs() < 1e-12 && a > 0.0 && a < 1.0);
    }
}
