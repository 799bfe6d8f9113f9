//! Run configuration: a TOML document with one table per concern, plus
//! `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::glmm::FitConfig;
use crate::oracle::OracleEndpoint;
use crate::prompts::GenerationConfig;
use crate::quarkpool::{ControlTokens, ExplorationConfig, TokenSide};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory holding the standard `<kind>.jsonl` files.
    pub corpus_dir: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub model_outputs: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub property_annotations: Option<PathBuf>,
    pub gen_questions: Option<PathBuf>,
    pub oracle_predictions: Option<PathBuf>,
    pub gen_annotations: Option<PathBuf>,
    /// Replacement prompt templates, laid out like the shipped `templates/`.
    pub templates_dir: Option<PathBuf>,
}

impl Paths {
    fn all_mut(&mut self) -> [&mut Option<PathBuf>; 9] {
        [
            &mut self.corpus_dir,
            &mut self.instances,
            &mut self.model_outputs,
            &mut self.annotations,
            &mut self.property_annotations,
            &mut self.gen_questions,
            &mut self.oracle_predictions,
            &mut self.gen_annotations,
            &mut self.templates_dir,
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Oracles {
    /// Question-only predictor.
    pub i: Option<OracleEndpoint>,
    /// Question-plus-rationale predictor.
    pub ir: Option<OracleEndpoint>,
    /// Text generator for gen questions and exploration samples.
    pub generator: Option<OracleEndpoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub genq: Option<u64>,
    pub exploration: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pools {
    /// Utility annotators per (instance, model).
    pub vote_pool_size: usize,
    /// Validators per generated question.
    pub validator_pool_size: usize,
}

impl Default for Pools {
    fn default() -> Self {
        Pools {
            vote_pool_size: 5,
            validator_pool_size: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolSettings {
    pub control_tokens: ControlTokens,
    pub token_side: TokenSide,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub oracle: Oracles,
    pub seeds: Seeds,
    pub pools: Pools,
    pub glmm: FitConfig,
    pub generation: GenerationConfig,
    pub exploration: ExplorationConfig,
    pub pool: PoolSettings,
    pub jobs: Option<usize>,
}

/// Sets `a.b.c = value` in a TOML table. The value is read as TOML when it
/// parses, else kept as a string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {p} is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Reads the file (if any), applies overrides, resolves relative paths
    /// against the file's directory, and checks that every named path exists.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut doc, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                let doc: toml::Table =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                (doc, p.parent().map(Path::to_path_buf))
            }
            None => (toml::Table::new(), None),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for p in cfg.paths.all_mut().into_iter().flatten() {
            if p.is_relative() {
                if let Some(b) = &base {
                    *p = b.join(&*p);
                }
            }
            if !p.exists() {
                return Err(CliError::Io(format!("{}: configured path does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_nest_and_type() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "exploration.interval_steps=10").unwrap();
        apply_override(&mut t, "oracle.i.base_url=http://x").unwrap();
        apply_override(&mut t, "glmm.ridge=0.5").unwrap();
        let cfg: RunConfig = toml::Value::Table(t).try_into().unwrap();
        assert_eq!(cfg.exploration.interval_steps, 10);
        assert_eq!(cfg.oracle.i.unwrap().base_url, "http://x");
        assert_eq!(cfg.glmm.ridge, 0.5);
        assert_eq!(cfg.pools.vote_pool_size, 5);
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn missing_configured_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "[paths]\ninstances = \"nope.jsonl\"\n").unwrap();
        match RunConfig::load(Some(&p), &[]) {
            Err(CliError::Io(m)) => assert!(m.contains("nope.jsonl")),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "[bogus]\n").unwrap();
        assert!(matches!(RunConfig::load(Some(&p), &[]), Err(CliError::Config(_))));
    }
}
