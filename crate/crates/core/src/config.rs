//! Run configuration: one JSON document describing the environment, mission,
//! vehicle, noise model and algorithm parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bltl::{parse_formula, to_sequential, FragmentError, ParseError};
use crate::dynamics::{NoiseModel, VehicleParams};
use crate::env::{EnvError, Environment, EnvironmentDoc};
use crate::mdp::{Problem, ProblemError};
use crate::presets;
use crate::synthesis::{SynthesisError, SynthesisParams};
use crate::tracegen::EventDetection;

pub const CASE_STUDY_CONFIG: &str = include_str!("../data/paper_sec9.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("formula: {0}")]
    Parse(#[from] ParseError),
    #[error("formula: {0}")]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error("detection_substeps must be at least 1")]
    Substeps,
    #[error("environment path `{0}` given but the config was not loaded from a file")]
    RelativeEnv(String),
}

/// Environment given inline or as a path relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSource {
    Path(String),
    Inline(EnvironmentDoc),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvSource,
    pub formula: String,
    pub vehicle: VehicleParams,
    pub noise: NoiseModel,
    #[serde(default)]
    pub synthesis: SynthesisParams,
    #[serde(default = "default_substeps")]
    pub detection_substeps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

fn default_substeps() -> usize {
    EventDetection::default().substeps
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Loads a config file and inlines a path-referenced environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut cfg = Self::from_json(&text)?;
        if let EnvSource::Path(p) = &cfg.environment {
            let env_path = path.parent().unwrap_or(Path::new(".")).join(p);
            let doc: EnvironmentDoc = serde_json::from_str(&read(&env_path)?)?;
            cfg.environment = EnvSource::Inline(doc);
        }
        Ok(cfg)
    }

    /// The bundled case-study configuration on the stand-in environment.
    pub fn case_study() -> Self {
        let mut cfg = Self::from_json(CASE_STUDY_CONFIG).expect("bundled config is valid");
        cfg.environment = EnvSource::Inline(presets::stand_in_environment().to_doc());
        cfg
    }

    pub fn environment(&self) -> Result<Environment, ConfigError> {
        match &self.environment {
            EnvSource::Inline(doc) => Ok(Environment::from_doc(doc.clone())?),
            EnvSource::Path(p) => Err(ConfigError::RelativeEnv(p.clone())),
        }
    }

    pub fn detection(&self) -> EventDetection {
        EventDetection {
            substeps: self.detection_substeps,
            ..EventDetection::default()
        }
    }

    /// Validates every section and builds the sampling problem.
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        self.synthesis.validate()?;
        if self.detection_substeps == 0 {
            return Err(ConfigError::Substeps);
        }
        let env = self.environment()?;
        let formula = parse_formula(&self.formula)?;
        let spec = to_sequential(&formula, env.unsafe_prop())?;
        Ok(Problem::new(
            env,
            spec,
            self.vehicle.clone(),
            self.noise.clone(),
            self.detection(),
        )?)
    }

    /// SHA-256 over everything that defines the problem and the algorithm;
    /// seed and worker count are excluded.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.seed = 0;
        canon.workers = 0;
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}
