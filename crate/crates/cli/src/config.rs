//! Run configuration: strict JSON, with TOML accepted and translated first.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Table1Demo,
    ThermalScan,
    IsingDecohereScan,
    ReplicaOracle,
    RbimScan,
    Renyi2Pc,
    VillainScan,
    RecoverySuite,
    GhzCounterexample,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Table1Demo,
        Experiment::ThermalScan,
        Experiment::IsingDecohereScan,
        Experiment::ReplicaOracle,
        Experiment::RbimScan,
        Experiment::Renyi2Pc,
        Experiment::VillainScan,
        Experiment::RecoverySuite,
        Experiment::GhzCounterexample,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::Table1Demo => "classify |+...+>, the 1+X state and GHZ as unbroken / SW-SSB / SSB",
            Experiment::ThermalScan => "fidelity correlator of the X-commuting Gibbs state against its closed form",
            Experiment::IsingDecohereScan => {
                "fidelity, Renyi-2 and linear correlators of ZZ- or theta-decohered |+...+>"
            }
            Experiment::ReplicaOracle => "dense replicated fidelity against t-replica spin-model enumeration",
            Experiment::RbimScan => "Binder cumulants of the +-J RBIM on the Nishimori line",
            Experiment::Renyi2Pc => "analytic Renyi-2 critical point and the doubled-coupling Ising Binder crossing",
            Experiment::VillainScan => "f_n coefficients and helicity modulus of the rotor channel's Renyi-2 image",
            Experiment::RecoverySuite => {
                "rotated Petz recovery bound on random states, channels and annular partitions"
            }
            Experiment::GhzCounterexample => "GHZ CMI under partial dephasing and layered recovery of full dephasing",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// Experiment-specific keys; missing keys take documented defaults.
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        RunConfig { experiment, params: empty_params(), seed: 0, output_dir: default_output_dir() }
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }

    pub fn from_json_str(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        let json = serde_json::to_value(value).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        serde_json::from_value(json).map_err(|e| CliError::ConfigInvalid(e.to_string()))
    }

    /// `.toml` files go through the TOML front end; anything else is read as JSON.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "toml") {
            Self::from_toml_str(&text)
        } else {
            Self::from_json_str(&text)
        }
    }
}

/// Parses `params` into an experiment's typed parameters, rejecting unknown keys.
pub fn typed_params<P: serde::de::DeserializeOwned>(params: &serde_json::Value) -> CliResult<P> {
    let value = if params.is_null() { empty_params() } else { params.clone() };
    serde_json::from_value(value).map_err(|e| CliError::ConfigInvalid(format!("params: {e}")))
}
