//! Classical images of the replica calculations: exact enumeration of the
//! replica spin model, Monte Carlo for the Nishimori RBIM, the doubled-coupling
//! Ising model and the f_n-weighted XY model, and the θ-channel domain-wall weights.

pub mod error;
pub mod fdw;
pub mod ising;
pub mod replica;
pub mod stats;
pub mod villain;

pub use error::{Error, Result};
pub use fdw::fdw_weight;
pub use ising::{
    rbim_nishimori_scan, renyi2_ising_scan, BinderPoint, BinderTable, BondDisorder, Estimators, IsingSystem, MCRun,
    Update,
};
pub use replica::{purity_ising_pc, replica_enumerate, EnergyHistogram, PurityCritical, ReplicaSpinModel};
pub use stats::{crossing, derive_seed, jackknife, mean_stderr, McRow};
pub use villain::{villain_fn_coefficients, villain_kt_scan, HelicityPoint, HelicityTable, XyBond, XyEstimators};
