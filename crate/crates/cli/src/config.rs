//! Run configuration: one strict JSON document per run.

use std::fs;
use std::path::{Path, PathBuf};

use mai_core::engine::EngineConfig;
use mai_core::eval::{EvalConfig, RunSpec, StreamSpec};
use mai_core::tasks::{EpisodeSpec, Shape};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    H1,
    H2,
    H3,
    H4,
    H5,
}

fn default_checks() -> Vec<Check> {
    vec![Check::H1, Check::H2, Check::H3, Check::H5]
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Root of every random stream in the run.
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    /// Hypothesis checks that decide the exit code.
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
    /// Seeds per arm for ablations: `seed, seed + 1, ...`.
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<PathBuf>,
    /// Run this ablation (both arms) instead of a plain experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<String>,
}

/// Episode stream for T1. `novel` alternates in from `novel_from` (default: halfway).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub shape: Shape,
    pub novel: Option<Shape>,
    pub novel_from: Option<usize>,
    pub steps: usize,
    pub jitter: f64,
    pub permute: bool,
    pub closed: bool,
    pub scramble: bool,
    pub segment: usize,
    pub open_fraction: f64,
    pub random_phase: bool,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        let s = StreamSpec::stationary(Shape::Circle);
        let e = s.episode;
        Self {
            shape: e.shape,
            novel: None,
            novel_from: None,
            steps: e.steps,
            jitter: e.jitter,
            permute: e.permute,
            closed: e.closed,
            scramble: e.scramble,
            segment: e.segment,
            open_fraction: e.open_fraction,
            random_phase: e.random_phase,
            epochs: s.epochs,
            episodes_per_epoch: s.episodes_per_epoch,
        }
    }
}

impl TaskConfig {
    pub fn stream(&self) -> StreamSpec {
        let len = self.epochs * self.episodes_per_epoch;
        StreamSpec {
            episode: EpisodeSpec {
                shape: self.shape,
                steps: self.steps,
                jitter: self.jitter,
                permute: self.permute,
                closed: self.closed,
                scramble: self.scramble,
                segment: self.segment,
                open_fraction: self.open_fraction,
                random_phase: self.random_phase,
            },
            novel: self.novel,
            novel_from: self.novel_from.unwrap_or(if self.novel.is_some() { len / 2 } else { 0 }),
            epochs: self.epochs,
            episodes_per_epoch: self.episodes_per_epoch,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub out: Option<PathBuf>,
    pub library: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (or an empty document when `None`) and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(CliError::io("cannot read config", p))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::json!({ "schema_version": SCHEMA_VERSION }),
        };
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
        if let Some(seed) = overrides.seed {
            obj.insert("seed".into(), seed.into());
        }
        let mut cfg = Self::from_value(doc)?;
        if let Some(tau) = overrides.tau {
            cfg.engine.tau = tau;
        }
        if let Some(out) = &overrides.out {
            cfg.out = Some(out.clone());
        }
        if let Some(lib) = &overrides.library {
            cfg.library = Some(lib.clone());
        }
        cfg.engine.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(doc: Value) -> Result<Self, CliError> {
        if let Some(obj) = doc.as_object() {
            match obj.get("schema_version").and_then(Value::as_u64) {
                None => return Err(CliError::Config("missing field `schema_version`".into())),
                Some(v) if v != u64::from(SCHEMA_VERSION) => {
                    return Err(CliError::Config(format!(
                        "unsupported schema_version {v} (this build reads {SCHEMA_VERSION})"
                    )))
                }
                Some(_) => {}
            }
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.engine.validate()?;
        let t = &self.task;
        let checks: [(bool, &str); 6] = [
            (t.steps >= 8, "task.steps must be at least 8"),
            (t.epochs >= 1 && t.episodes_per_epoch >= 1, "task.epochs and task.episodes_per_epoch must be >= 1"),
            (t.jitter >= 0.0, "task.jitter must be >= 0"),
            (t.segment >= 2, "task.segment must be >= 2"),
            (t.open_fraction > 0.0 && t.open_fraction < 1.0, "task.open_fraction must be in (0, 1)"),
            (self.replicates >= 1, "replicates must be >= 1"),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(CliError::Config((*msg).into()));
        }
        if let Some(from) = t.novel_from {
            if from >= t.epochs * t.episodes_per_epoch {
                return Err(CliError::Config("task.novel_from is past the end of the stream".into()));
            }
        }
        Ok(())
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            engine: self.engine.clone(),
            stream: self.task.stream(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("mai-out"))
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replicates as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(v: Value) -> Result<RunConfig, CliError> {
        RunConfig::from_value(v)
    }

    #[test]
    fn minimal_document_takes_defaults() {
        let c = parse(serde_json::json!({ "schema_version": 1, "seed": 3 })).unwrap();
        assert_eq!(c.engine, EngineConfig::default());
        assert_eq!(c.task.stream(), StreamSpec::stationary(Shape::Circle));
        assert_eq!(c.checks, default_checks());
    }

    #[test]
    fn missing_seed_is_named() {
        let e = parse(serde_json::json!({ "schema_version": 1 })).unwrap_err();
        assert!(matches!(e, CliError::Config(ref m) if m.contains("seed")), "{e}");
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        for doc in [
            serde_json::json!({ "schema_version": 1, "seed": 1, "colour": 1 }),
            serde_json::json!({ "schema_version": 1, "seed": 1, "engine": { "taus": 0.1 } }),
            serde_json::json!({ "schema_version": 1, "seed": 1, "engine": { "memory": { "radius": 0.1 } } }),
            serde_json::json!({ "schema_version": 1, "seed": 1, "task": { "shape": "circle", "loops": 2 } }),
            serde_json::json!({ "schema_version": 1, "seed": 1, "eval": { "h9": 1 } }),
        ] {
            assert!(matches!(parse(doc), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn schema_version_checked() {
        assert!(parse(serde_json::json!({ "seed": 1 })).is_err());
        let e = parse(serde_json::json!({ "schema_version": 2, "seed": 1 })).unwrap_err();
        assert!(e.to_string().contains("schema_version"));
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(9),
            tau: Some(0.0),
            ..Overrides::default()
        };
        let c = RunConfig::load(None, &o).unwrap();
        assert_eq!((c.seed, c.engine.seed, c.engine.tau), (9, 9, 0.0));
        assert!(RunConfig::load(None, &Overrides::default()).is_err());
    }

    #[test]
    fn novel_defaults_to_halfway() {
        let mut t = TaskConfig {
            novel: Some(Shape::Figure8),
            ..TaskConfig::default()
        };
        assert_eq!(t.stream(), RunSpec::t1_novel().stream);
        t.novel_from = Some(4);
        assert_eq!(t.stream().novel_from, 4);
    }
}
