//! Run manifests: every training run writes one next to its artifacts with
//! the fully resolved configuration, so the run can be reproduced or audited
//! later. Rerunning from a manifest regenerates byte-identical checkpoints
//! and traces (wall-clock fields aside, which describe the original run).

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeaturizerConfig;
use crate::model::TrainConfig;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: invalid manifest: {message}")]
    Invalid { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub library_version: String,
    /// Wall-clock timestamp when the run finished (ms since the epoch).
    pub created_unix_ms: u64,
    /// Training duration in seconds.
    pub wall_clock_secs: f64,
    pub data_path: String,
    pub data_format: DataFormat,
    pub train: TrainConfig,
    pub featurizer: FeaturizerConfig,
    pub out_dir: String,
    pub checkpoint_file: String,
    pub trace_file: String,
    pub final_loss: f64,
}

impl RunManifest {
    pub fn now_unix_ms() -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| ManifestError::Invalid {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::write(path, json + "\n").map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunManifest, ManifestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ManifestError::Invalid {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}
