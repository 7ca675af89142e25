//! Experiment configuration files and run manifests.
//!
//! Configurations are TOML. Saving a loaded configuration reproduces the
//! canonical text exactly, and a manifest embeds the configuration so a run
//! can be replayed from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariance::ModelSpec;
use crate::error::{Error, Result};
use crate::montecarlo::{DeltaSchedule, NormKind, ThresholdRule};
use crate::rates::TransformSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Packing,
    RateBound,
    Concentration,
    PhaseDiagram,
    GumbelCheck,
    ConjectureProbe,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Packing => "packing",
            Command::RateBound => "rate-bound",
            Command::Concentration => "concentration",
            Command::PhaseDiagram => "phase-diagram",
            Command::GumbelCheck => "gumbel-check",
            Command::ConjectureProbe => "conjecture-probe",
        }
    }
}

/// Everything needed to rerun an experiment.
///
/// Plain values come before tables so the TOML form is well ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<u64>,
    pub p_grid: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_kind: Option<NormKind>,
    /// Packing threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub r_relative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_grid: Option<Vec<f64>>,
    /// Guard constant for the log-decay optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "ModelSpec::iid")]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "TransformSpec::is_identity")]
    pub transform: TransformSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_schedule: Option<DeltaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdRule>,
    /// Extra transforms tabulated by `rate-bound`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformSpec>,
}

fn default_seed() -> u64 {
    1
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ExperimentConfig {
    pub fn new(command: Command, p_grid: Vec<u64>) -> Self {
        ExperimentConfig {
            command,
            seed: default_seed(),
            reps: None,
            p_grid,
            norm_kind: None,
            tau: None,
            beta_grid: None,
            r_grid: None,
            r_relative: false,
            c_grid: None,
            c_tilde: None,
            output_dir: None,
            model: ModelSpec::iid(),
            transform: TransformSpec::IDENTITY,
            delta_schedule: None,
            threshold: None,
            transforms: Vec::new(),
        }
    }

    /// Value of an optional field, or a named configuration error.
    pub fn require<T: Clone>(&self, v: &Option<T>, name: &str) -> Result<T> {
        v.clone()
            .ok_or_else(|| Error::Config(format!("command `{}` requires `{name}`", self.command.name())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(toml_error(text, &e)))?;
        if cfg.p_grid.is_empty() {
            return Err(Error::Config("`p_grid` must be nonempty".into()));
        }
        Ok(cfg)
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", e.message())
        }
        None => e.message().to_string(),
    }
}

/// Loads a TOML config, or the config embedded in a JSON manifest.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|x| x == "json") {
        let m: Manifest = serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!("{}: line {}: {e}", path.display(), e.line()))
        })?;
        return Ok(m.config);
    }
    ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_toml()?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    /// Method choices and warnings recorded during the run.
    pub notes: Vec<String>,
}

pub fn save_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
