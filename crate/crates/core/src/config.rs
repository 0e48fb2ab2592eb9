//! The single JSON configuration document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, WireClientConfig};
use crate::eval::{IdmParams, OracleConfig, SweepParams};
use crate::memory::{Embedder, HashEmbedder, MemoryError, WireEmbedder, WireEmbedderConfig};
use crate::risk_assessor::{NotificationTemplates, RiskError, RiskThresholds, SamplingOptions};
use crate::risk_field::{GridSpec, QprConvention, RiskModel};
use crate::scene::{ExtractOptions, LabelerConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config schema_version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Thresholds calibrated on the default `highway_traffic` synthetic table
/// with 20,000 samples, seed 7 and the default risk model and grid.
pub fn default_thresholds() -> RiskThresholds {
    RiskThresholds {
        t_low: DEFAULT_T_LOW,
        t_high: DEFAULT_T_HIGH,
        sample_count: 20_000,
        convention: QprConvention::AreaIntegral,
        seed: Some(7),
        source_tag: "synthetic:highway_traffic".into(),
    }
}

pub const DEFAULT_T_LOW: f64 = 12.498387393977163;
pub const DEFAULT_T_HIGH: f64 = 339.96272403747486;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Replay,
    Wire,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(BackendKind::Scripted),
            "replay" => Ok(BackendKind::Replay),
            "wire" => Ok(BackendKind::Wire),
            other => Err(ConfigError::Invalid(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Rule table for the scripted backend; the bundled table when unset.
    pub rules_path: Option<PathBuf>,
    /// Recorded responses for the replay backend; when unset the replay
    /// backend answers each scene with its ground-truth label.
    pub replay_path: Option<PathBuf>,
    pub wire: WireClientConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Hash,
    Wire,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub kind: EmbedderKind,
    /// Dimension of the offline hash embedder.
    pub dimension: usize,
    pub wire: WireEmbedderConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: EmbedderKind::Hash,
            dimension: HashEmbedder::default().dimension(),
            wire: WireEmbedderConfig::default(),
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Box<dyn Embedder>, ConfigError> {
        Ok(match self.kind {
            EmbedderKind::Hash => Box::new(HashEmbedder::new(self.dimension)),
            EmbedderKind::Wire => Box::new(WireEmbedder::new(self.wire.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub schema_version: u32,
    pub risk: RiskModel,
    pub grid: GridSpec,
    /// Used unless `thresholds_path` is set.
    pub thresholds: RiskThresholds,
    pub thresholds_path: Option<PathBuf>,
    pub notifications: NotificationTemplates,
    pub sampling: SamplingOptions,
    pub extraction: ExtractOptions,
    pub labeler: LabelerConfig,
    pub agent: AgentConfig,
    /// Seed each fresh evaluation store with the bundled exemplars.
    pub seed_exemplars: bool,
    pub oracle: OracleConfig,
    pub idm: IdmParams,
    pub backend: BackendConfig,
    pub embedding: EmbeddingConfig,
    pub sweep: SweepParams,
    /// Largest relative change of the integrated risk field between arc mode
    /// at twice the straight-mode threshold and a straight path with the same
    /// widths.
    pub continuity_tolerance: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            schema_version: SCHEMA_VERSION,
            risk: RiskModel::default(),
            grid: GridSpec::default(),
            thresholds: default_thresholds(),
            thresholds_path: None,
            notifications: NotificationTemplates::default(),
            sampling: SamplingOptions::default(),
            extraction: ExtractOptions::default(),
            labeler: LabelerConfig::default(),
            agent: AgentConfig::default(),
            seed_exemplars: true,
            oracle: OracleConfig::default(),
            idm: IdmParams::default(),
            backend: BackendConfig::default(),
            embedding: EmbeddingConfig::default(),
            sweep: SweepParams::default(),
            continuity_tolerance: 1e-4,
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl AppConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: AppConfig = serde_json::from_str(text)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: config.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        config.validate()?;
        Ok(config)
    }

    /// Loads a config; relative `thresholds_path`, `rules_path` and
    /// `replay_path` are resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let mut config = Self::from_json(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut config.thresholds_path,
            &mut config.backend.rules_path,
            &mut config.backend.replay_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = ConfigError::Invalid;
        self.risk.drf.validate().map_err(invalid)?;
        self.risk.costs.validate().map_err(invalid)?;
        if !self.grid.is_valid() {
            return Err(invalid("grid must have positive length, width and resolution".into()));
        }
        self.thresholds.validate()?;
        self.notifications.validate().map_err(invalid)?;
        self.idm.validate().map_err(|e| invalid(e.to_string()))?;
        self.oracle.validate().map_err(|e| invalid(e.to_string()))?;
        if !(self.continuity_tolerance.is_finite() && self.continuity_tolerance > 0.0) {
            return Err(invalid("continuity_tolerance must be positive".into()));
        }
        if self.embedding.kind == EmbedderKind::Hash && self.embedding.dimension == 0 {
            return Err(invalid("embedding.dimension must be positive".into()));
        }
        Ok(())
    }

    /// Thresholds from `thresholds_path` when set, else the inline ones.
    /// They must use the risk model's convention.
    pub fn resolve_thresholds(&self) -> Result<RiskThresholds, ConfigError> {
        let t = match &self.thresholds_path {
            Some(p) => RiskThresholds::load(p)?,
            None => self.thresholds.clone(),
        };
        t.validate()?;
        if t.convention != self.risk.convention {
            return Err(RiskError::ConventionMismatch {
                report: self.risk.convention,
                thresholds: t.convention,
            }
            .into());
        }
        Ok(t)
    }

    pub fn read_rules(&self) -> Result<Option<String>, ConfigError> {
        self.backend.rules_path.as_deref().map(read).transpose()
    }

    pub fn read_replay(&self) -> Result<Option<String>, ConfigError> {
        self.backend.replay_path.as_deref().map(read).transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_assessor::{calibrate_thresholds, sample_qpr_distribution};
    use crate::scene::synth::{HighwayTraffic, SynthSpec};
    use crate::scene::synth_scenario;

    #[test]
    fn round_trip() {
        let c = AppConfig::default();
        assert_eq!(AppConfig::from_json(&c.to_json()).unwrap(), c);
        assert_eq!(AppConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn rejects_other_schema_versions() {
        assert!(matches!(
            AppConfig::from_json(r#"{"schema_version": 2}"#),
            Err(ConfigError::SchemaVersion { found: 2, .. })
        ));
    }

    #[test]
    fn rejects_invalid_sections() {
        assert!(matches!(
            AppConfig::from_json(r#"{"risk": {"drf": {"p": -1.0}}}"#),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn convention_must_match() {
        let mut c = AppConfig::default();
        c.risk.convention = QprConvention::GridSum;
        assert!(matches!(c.resolve_thresholds(), Err(ConfigError::Risk(_))));
    }

    #[test]
    fn shipped_thresholds_reproduce() {
        let table = synth_scenario(&SynthSpec::HighwayTraffic(HighwayTraffic::default())).unwrap();
        let c = AppConfig::default();
        let samples = sample_qpr_distribution(&table, 20_000, 7, &c.risk, &c.grid, &c.sampling).unwrap();
        let t = calibrate_thresholds(&samples, c.risk.convention).unwrap();
        assert_eq!((t.t_low, t.t_high), (DEFAULT_T_LOW, DEFAULT_T_HIGH));
    }
}
