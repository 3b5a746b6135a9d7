//! Versioned run configuration. Every default lives here; flags override.

use std::path::Path;

use anyhow::{bail, Context};
use cellplan::model_select::{SearchMode, Split};
use cellplan::planner::QosConfig;
use cellplan::synthgen::{default_start, TemplateConfig};
use cellplan::Granularity;
use chrono::{FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    /// UTC offset used to bin timestamps, e.g. `+01:00`.
    pub timezone: String,
    pub gen: GenConfig,
    pub templates: TemplateConfig,
    pub ingest: IngestConfig,
    pub svm: SvmConfig,
    pub kmeans: KmeansConfig,
    pub svr: SvrConfig,
    pub tune: TuneConfig,
    pub qos: QosConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub stations: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub users: usize,
    pub femto_capacity: u32,
    /// Weekly mode: weekdays class 2, Sunday class 1.
    pub weekly: bool,
    pub weeks: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub granularity: Granularity,
    pub max_error_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    /// Unset means `1 / dimension`.
    pub gamma: Option<f64>,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub granularity: Granularity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrConfig {
    pub c: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub svm_folds: usize,
    pub svr_split: Split,
    pub mode: SearchMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 42,
            timezone: "+00:00".into(),
            gen: GenConfig::default(),
            templates: TemplateConfig::default(),
            ingest: IngestConfig::default(),
            svm: SvmConfig::default(),
            kmeans: KmeansConfig::default(),
            svr: SvrConfig::default(),
            tune: TuneConfig::default(),
            qos: QosConfig::default(),
        }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            stations: 30,
            days: 7,
            start: default_start(),
            users: 200,
            femto_capacity: 120,
            weekly: false,
            weeks: 12,
        }
    }
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            granularity: Granularity::TenMin,
            max_error_fraction: 0.01,
        }
    }
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 10.0,
            gamma: None,
            tol: 1e-3,
        }
    }
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            granularity: Granularity::Hourly,
        }
    }
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 10.0,
            gamma: 100.0,
            epsilon: 2.0,
            tol: 1e-3,
        }
    }
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            svm_folds: 5,
            svr_split: Split::KFold(3),
            mode: SearchMode::Cartesian,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text)
                    .map_err(|e| ConfigError(format!("{}: {}", p.display(), e.message())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(ConfigError(format!(
                "config version {} unsupported, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        self.offset()?;
        self.qos.validate()?;
        Ok(())
    }

    pub fn offset(&self) -> anyhow::Result<FixedOffset> {
        self.timezone
            .parse()
            .map_err(|_| ConfigError(format!("bad timezone offset {:?}", self.timezone)).into())
    }
}

/// Invalid configuration file or flag combination.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}
