//! Run configurations: JSON files with unknown keys rejected, overridden by
//! command-line flags, validated before anything runs.

use std::path::{Path, PathBuf};

use duality_core::criteria::ToleranceProfile;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Parse `AxB` into `[A, B]`.
pub fn parse_dims(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected <a>x<b>, got `{s}`"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("bad dimension `{t}`: {e}"))
    };
    let dims = [parse(a)?, parse(b)?];
    if dims.contains(&0) {
        return Err("dimensions must be positive".into());
    }
    Ok(dims)
}

/// Read a config file, or fall back to defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// SHA-256 of the canonical JSON of the effective configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let text = serde_json::to_string(config).expect("configs serialize");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| {
        CliError::Config(format!(
            "{command} requires --seed (or `seed` in the config file)"
        ))
    })
}

fn check_dims(dims: [usize; 2]) -> Result<(), CliError> {
    if dims[0] < 2 || dims[1] < dims[0] {
        return Err(CliError::Config(format!(
            "dims {}x{} must satisfy 2 <= d_A <= d_B",
            dims[0], dims[1]
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: Option<u64>,
    /// Samples per suite.
    pub samples: usize,
    /// Samples for the hierarchy suite, which maximizes over bases.
    pub hierarchy_samples: usize,
    /// Restarts of the basis maximization.
    pub restarts: usize,
    /// Restrict the detector suites to `d_A x d_B` and the single-system
    /// suites to dimension `d_A`.
    pub dims: Option<[usize; 2]>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: None,
            samples: 1000,
            hierarchy_samples: 100,
            restarts: 32,
            dims: None,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<u64, CliError> {
        if self.samples == 0 || self.hierarchy_samples == 0 {
            return Err(CliError::Config("sample counts must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be positive".into()));
        }
        if let Some(d) = self.dims {
            check_dims(d)?;
        }
        require_seed(self.seed, "verify")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub seed: Option<u64>,
    pub dims: [usize; 2],
    /// Explicit overlap grid; when absent, `points` evenly spaced values on
    /// `[0, 1]`.
    pub overlaps: Option<Vec<f64>>,
    pub points: usize,
    /// Real path amplitudes (normalized on load); uniform when absent.
    pub amplitudes: Option<Vec<f64>>,
    pub restarts: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: None,
            dims: [2, 2],
            overlaps: None,
            points: 11,
            amplitudes: None,
            restarts: 32,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<u64, CliError> {
        check_dims(self.dims)?;
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be positive".into()));
        }
        match &self.overlaps {
            Some(grid) => {
                if grid.is_empty() {
                    return Err(CliError::Config("overlap grid is empty".into()));
                }
                if let Some(bad) = grid.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                    return Err(CliError::Config(format!("overlap {bad} outside [0, 1]")));
                }
            }
            None if self.points == 0 => {
                return Err(CliError::Config("points must be positive".into()))
            }
            None => {}
        }
        if let Some(a) = &self.amplitudes {
            if a.len() != self.dims[0] {
                return Err(CliError::Config(format!(
                    "{} amplitudes for d_A = {}",
                    a.len(),
                    self.dims[0]
                )));
            }
            let norm: f64 = a.iter().map(|x| x * x).sum();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(CliError::Config(
                    "amplitudes must have positive finite norm".into(),
                ));
            }
        }
        require_seed(self.seed, "sweep")
    }

    pub fn grid(&self) -> Vec<f64> {
        match &self.overlaps {
            Some(g) => g.clone(),
            None if self.points == 1 => vec![0.0],
            None => (0..self.points)
                .map(|i| i as f64 / (self.points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoofConfig {
    pub seed: Option<u64>,
    /// State file (see `StateJson`).
    pub input: Option<PathBuf>,
    /// Override the bipartition stored in the state file.
    pub dims: Option<[usize; 2]>,
    /// Defaults to `rank^2`.
    pub ensemble_size: Option<usize>,
    pub restarts: usize,
    /// Largest accepted excess over the two-qubit closed form.
    pub tolerance: f64,
}

impl Default for RoofConfig {
    fn default() -> Self {
        Self {
            seed: None,
            input: None,
            dims: None,
            ensemble_size: None,
            restarts: 32,
            tolerance: 5e-3,
        }
    }
}

impl RoofConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.input.is_none() {
            return Err(CliError::Config(
                "roof requires --input (or `input` in the config file)".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be positive".into()));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(CliError::Config(
                "tolerance must be a nonnegative number".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaConfig {
    pub seed: Option<u64>,
    pub measure: Option<String>,
    pub profile: ToleranceProfile,
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.measure.is_none() {
            return Err(CliError::Config(
                "criteria requires --measure (or `measure` in the config file)".into(),
            ));
        }
        self.profile.validate().map_err(CliError::from)
    }
}
