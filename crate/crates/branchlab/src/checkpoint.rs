//! Model checkpoints: a JSON container with the network spec, parameters in
//! row-major order and the optimizer state. Floats are written with
//! round-trip precision, so reloading is bit-exact.

use std::path::Path;

use branchlab_core::neural::{AdamState, EpochRecord, NetError, NetParams, NetSpec, PolicyNet, TrainConfig};
use branchlab_core::FEATURE_VERSION;
use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json, IoError};

pub const FORMAT: &str = "branchlab-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("not a checkpoint (format `{0}`)")]
    Format(String),
    #[error("checkpoint container version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("feature version mismatch: checkpoint has `{found}`, solver emits `{expected}`")]
    FeatureVersion { found: String, expected: String },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub feature_version: String,
    pub spec: NetSpec,
    pub seed: u64,
    pub params: NetParams,
    #[serde(default)]
    pub optimizer: Option<AdamState>,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub curves: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn new(net: &PolicyNet) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            feature_version: FEATURE_VERSION.to_string(),
            spec: net.spec,
            seed: net.seed,
            params: net.params.clone(),
            optimizer: None,
            train_config: None,
            curves: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        Ok(write_json(path, self)?)
    }

    /// Loads and checks container format, version and feature layout.
    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ckpt: Checkpoint = read_json(path)?;
        if ckpt.format != FORMAT {
            return Err(CheckpointError::Format(ckpt.format));
        }
        if ckpt.version != VERSION {
            return Err(CheckpointError::Version { found: ckpt.version, expected: VERSION });
        }
        if ckpt.feature_version != FEATURE_VERSION {
            return Err(CheckpointError::FeatureVersion {
                found: ckpt.feature_version,
                expected: FEATURE_VERSION.to_string(),
            });
        }
        Ok(ckpt)
    }

    pub fn net(&self) -> Result<PolicyNet, CheckpointError> {
        let net = PolicyNet { spec: self.spec, seed: self.seed, params: self.params.clone() };
        net.spec.validate()?;
        net.check_shapes()?;
        Ok(net)
    }
}
