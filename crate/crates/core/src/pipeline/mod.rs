//! Declarative pipelines: named inputs, an ordered list of stages, and the
//! artifacts to write.
//!
//! ```toml
//! [inputs.normals]
//! path = "statue.png"
//! kind = "normals"
//!
//! [[stages]]
//! op = "decompose"
//! sigma_c = 3.0
//!
//! [[stages]]
//! op = "tune"
//! beta = 1.0
//! gamma = 0.5
//!
//! [[stages]]
//! op = "compose"
//!
//! [[stages]]
//! op = "solve"
//! lambda = 0.3
//!
//! [outputs]
//! height = "out/height.png"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

mod artifact;
mod stage;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{Artifact, Artifacts, InputKind};
pub use stage::{AuxSpec, Stage};

use crate::error::ReliefError;
use crate::io::Depth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub kind: InputKind,
    /// JSON label→offset sidecar, for `labels` inputs.
    #[serde(default)]
    pub offsets: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub inputs: BTreeMap<String, InputSpec>,
    #[serde(default)]
    pub stages: Vec<Stage>,
    /// Artifact name → output file.
    #[serde(default)]
    pub outputs: BTreeMap<String, PathBuf>,
    /// Bit depth of written normal maps.
    #[serde(default)]
    pub normal_depth: Depth,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("input {name:?} ({path}): {source}")]
    Input {
        name: String,
        path: PathBuf,
        source: ReliefError,
    },
    #[error("stage {index} ({op}): {source}")]
    Stage {
        index: usize,
        op: &'static str,
        source: ReliefError,
    },
    #[error("output {name:?} ({path}): {source}")]
    Output {
        name: String,
        path: PathBuf,
        source: ReliefError,
    },
}

impl PipelineError {
    /// Problems detectable before running anything.
    pub fn is_validation(&self) -> bool {
        match self {
            PipelineError::Config(_) => true,
            PipelineError::Input { source, .. } | PipelineError::Stage { source, .. } => {
                source.is_validation() || matches!(source, ReliefError::Io(_))
            }
            PipelineError::Output { .. } => false,
        }
    }

    /// 2 for invalid configs or inputs, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks parameters and artifact wiring without reading any file.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut known: BTreeSet<&str> = self.inputs.keys().map(String::as_str).collect();
        for (name, spec) in &self.inputs {
            if spec.offsets.is_some() && spec.kind != InputKind::Labels {
                return Err(PipelineError::Config(format!(
                    "input {name:?}: offsets only apply to labels inputs"
                )));
            }
        }
        for (index, stage) in self.stages.iter().enumerate() {
            let fail = |source| PipelineError::Stage {
                index,
                op: stage.name(),
                source,
            };
            stage.validate().map_err(fail)?;
            for input in stage.inputs() {
                if !known.contains(input) {
                    return Err(fail(ReliefError::InvalidParameter(format!(
                        "artifact {input:?} is not produced before this stage"
                    ))));
                }
            }
            known.extend(stage.outputs());
        }
        for name in self.outputs.keys() {
            if !known.contains(name.as_str()) {
                return Err(PipelineError::Config(format!("output {name:?} is never produced")));
            }
        }
        Ok(())
    }
}

/// Reads and parses a config file; relative paths stay relative to its directory.
pub fn load_config(path: &Path) -> Result<(PipelineConfig, PathBuf), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let config = PipelineConfig::from_toml(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Loads every input named by `config`, resolving paths against `base`.
pub fn load_inputs(config: &PipelineConfig, base: &Path) -> Result<Artifacts, PipelineError> {
    let mut artifacts = Artifacts::new();
    for (name, spec) in &config.inputs {
        let path = resolve(base, &spec.path);
        let fail = |source| PipelineError::Input {
            name: name.clone(),
            path: path.clone(),
            source,
        };
        let bytes = fs::read(&path).map_err(|e| fail(e.into()))?;
        let offsets = match &spec.offsets {
            Some(p) => Some(fs::read_to_string(resolve(base, p)).map_err(|e| fail(e.into()))?),
            None => None,
        };
        let artifact = Artifact::decode(spec.kind, &bytes, offsets.as_deref()).map_err(fail)?;
        artifacts.insert(name.clone(), artifact);
    }
    Ok(artifacts)
}

/// Applies `stages` in order, tagging failures with the stage index and op.
pub fn run_stages(stages: &[Stage], artifacts: &mut Artifacts) -> Result<(), PipelineError> {
    for (index, stage) in stages.iter().enumerate() {
        log::info!("stage {index}: {}", stage.name());
        stage.apply(artifacts).map_err(|source| PipelineError::Stage {
            index,
            op: stage.name(),
            source,
        })?;
    }
    Ok(())
}

/// Validates, loads inputs, runs every stage, then writes the declared
/// outputs. Returns all artifacts of the run.
pub fn run_pipeline(config: &PipelineConfig, base: &Path) -> Result<Artifacts, PipelineError> {
    config.validate()?;
    let mut artifacts = load_inputs(config, base)?;
    run_stages(&config.stages, &mut artifacts)?;
    for (name, path) in &config.outputs {
        let path = resolve(base, path);
        let fail = |source| PipelineError::Output {
            name: name.clone(),
            path: path.clone(),
            source,
        };
        let artifact = artifacts.get(name).expect("validated output");
        let bytes = artifact.encode(config.normal_depth).map_err(fail)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| fail(e.into()))?;
        }
        fs::write(&path, bytes).map_err(|e| fail(e.into()))?;
    }
    Ok(artifacts)
}
