//! Dense mixed-state toolkit for strong-to-weak symmetry breaking on qubit
//! lattices: states, symmetric channels, correlators, entropies and Petz
//! recovery.
//!
//! Everything is generic over the real scalar (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below fix it. Site 0 is the most significant bit of a
//! basis index. Entropies are in nats unless a function says otherwise.

pub mod channels;
pub mod density;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod matrix;
pub mod models;
pub mod pauli;
pub mod random;
pub mod recovery;
pub mod scalar;

pub use channels::{
    apply, compose, ChannelDescription, ChannelKind, ChannelParams, KrausChannel, LocalKraus, SymmetryCheck,
    SymmetrySpec,
};
pub use density::{partial_trace, von_neumann_entropy, DensityMatrix};
pub use diagnostics::{
    classify_ssb, cmi, fidelity, fidelity_correlator, linear_correlator, relative_entropy, renyi2_correlator,
    sandwiched_renyi, trace_distance, CorrelatorRequest, DiagnosticsReport, Measure, SsbThresholds, Verdict,
};
pub use error::{Error, Result};
pub use lattice::{Boundary, LatticeKind, LatticeSpec};
pub use matrix::{ComplexMatrix, MAX_DENSE_SITES};
pub use models::{Representation, Sector, ThermalSpec};
pub use pauli::{LocalOp, Pauli, PauliString, SiteOperator};
pub use recovery::{cmi_markov_gap, layered_recovery, petz_map, PetzMap, PetzSpec, RecoveryReport, Rotation};
pub use scalar::{Complex, Real};

pub type DensityMatrixF64 = DensityMatrix<f64>;
pub type DensityMatrixF32 = DensityMatrix<f32>;
pub type ComplexMatrixF64 = ComplexMatrix<f64>;
pub type ComplexMatrixF32 = ComplexMatrix<f32>;
pub type KrausChannelF64 = KrausChannel<f64>;
pub type KrausChannelF32 = KrausChannel<f32>;
pub type PauliStringF64 = PauliString<f64>;
pub type PauliStringF32 = PauliString<f32>;
