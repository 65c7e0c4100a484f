//! The run configuration file.
//!
//! A run is described by one TOML document with the sections `[data]`,
//! `[network]`, `[train]` and `[metrics]` plus a few top-level keys. Every
//! section is optional and falls back to its defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::SynthConfig;
use crate::error::{Error, Result};
pub use crate::metrics::MetricsConfig;
use crate::networks::NetworkConfig;
use crate::tensor::Precision;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset directory read by the training, evaluation and inference commands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Every artifact of the run is written below this directory.
    pub out: PathBuf,
    pub precision: Precision,
    /// Synthetic dataset generation.
    pub data: SynthConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            out: PathBuf::from("out"),
            precision: Precision::F32,
            data: SynthConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        // TOML integers are signed 64-bit.
        if self.train.seed > i64::MAX as u64 || self.data.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seeds must not exceed {}", i64::MAX)));
        }
        let d = &self.data;
        if d.scenes == 0 || d.disparities.is_empty() || !(d.channels == 1 || d.channels == 3) {
            return Err(Error::Config(
                "data needs scenes, disparities and 1 or 3 channels".into(),
            ));
        }
        if !(d.sigma >= 0.0 && d.sigma.is_finite()) || d.disparities.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("data noise and disparities must be finite".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialised configuration; recorded in checkpoints.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
