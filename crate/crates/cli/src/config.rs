//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use foldsearch_core::SearchConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub kind: OracleKind,
    /// Overrides `FOLD_ENDPOINT_URL`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Noise seed of the synthetic oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_models: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plddt_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposerKind {
    Chat,
    GuidedMock,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposerSpec {
    pub kind: ProposerKind,
    /// Overrides `LLM_ENDPOINT_URL`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Overrides `LLM_MODEL`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Seed for proposal randomness; defaults to `search.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Guided mock only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    #[serde(default = "default_case_id")]
    pub case_id: String,
    pub length: usize,
    pub start_distance: usize,
    /// Defaults to `search.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_case_id() -> String {
    "synthetic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Path to a dataset manifest, relative to the config file.
    Manifest(PathBuf),
    Synthetic(SyntheticDataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub search: SearchConfig,
    pub oracle: OracleSpec,
    pub proposer: ProposerSpec,
    pub dataset: DatasetSpec,
    pub output_dir: PathBuf,
}

impl OracleSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        let o = self;
        match o.kind {
            OracleKind::Synthetic => {
                if o.endpoint.is_some() || o.timeout_s.is_some() {
                    return Err(config_error(
                        "oracle",
                        "endpoint and timeout_s apply to remote oracles only",
                    ));
                }
                if let Some(noise) = o.plddt_noise {
                    if !(0.0..=100.0).contains(&noise) {
                        return Err(config_error("oracle.plddt_noise", "must lie in [0, 100]"));
                    }
                }
            }
            OracleKind::Remote => {
                if o.plddt_noise.is_some() || o.seed.is_some() {
                    return Err(config_error(
                        "oracle",
                        "seed and plddt_noise apply to synthetic oracles only",
                    ));
                }
                require_setting(
                    o.endpoint.as_deref(),
                    "FOLD_ENDPOINT_URL",
                    "oracle.endpoint",
                )?;
            }
        }
        if o.num_models == Some(0) {
            return Err(config_error("oracle.num_models", "must be at least 1"));
        }
        Ok(())
    }
}

/// A validated configuration and whether its seed was generated.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub generated_seed: bool,
}

fn config_error(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config(format!("{path}: {}", message.into()))
}

impl RunConfig {
    /// Reads, parses and validates a config file. Paths inside are made
    /// relative to the file's directory. No other file or network access
    /// happens here.
    pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut loaded = Self::parse(&text, None)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let cfg = &mut loaded.config;
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let DatasetSpec::Manifest(m) = &mut cfg.dataset {
            if m.is_relative() {
                *m = base.join(&*m);
            }
        }
        Ok(loaded)
    }

    /// Parses and validates config JSON. A missing `search.seed` is taken
    /// from `seed` when given, otherwise drawn at random.
    pub fn parse(text: &str, seed: Option<u64>) -> Result<LoadedConfig, CliError> {
        let mut raw: Value =
            serde_json::from_str(text).map_err(|e| config_error("$", e.to_string()))?;
        let Some(root) = raw.as_object_mut() else {
            return Err(config_error("$", "expected an object"));
        };
        let search = root
            .entry("search")
            .or_insert_with(|| Value::Object(Default::default()));
        let Some(search) = search.as_object_mut() else {
            return Err(config_error("search", "expected an object"));
        };
        let generated_seed = !search.contains_key("seed");
        if generated_seed {
            search.insert(
                "seed".into(),
                seed.unwrap_or_else(rand::random::<u64>).into(),
            );
        }
        let config: RunConfig = serde_path_to_error::deserialize(raw).map_err(|e| {
            let at = e.path().to_string();
            config_error(
                if at.is_empty() { "$" } else { &at },
                e.into_inner().to_string(),
            )
        })?;
        config.validate()?;
        Ok(LoadedConfig {
            config,
            generated_seed: generated_seed && seed.is_none(),
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.search;
        if s.k == 0 {
            return Err(config_error("search.k", "must be at least 1"));
        }
        if s.n == 0 {
            return Err(config_error("search.n", "must be at least 1"));
        }
        if s.budget == 0 {
            return Err(config_error("search.budget", "must be at least 1"));
        }
        if s.regimes.is_empty() {
            return Err(config_error(
                "search.regimes",
                "at least one regime is required",
            ));
        }
        if s.stall_limit == 0 {
            return Err(config_error("search.stall_limit", "must be at least 1"));
        }
        s.weights
            .validate()
            .map_err(|e| config_error("search.weights", e.to_string()))?;

        self.oracle.validate()?;

        let p = &self.proposer;
        match p.kind {
            ProposerKind::Chat => {
                require_setting(
                    p.endpoint.as_deref(),
                    "LLM_ENDPOINT_URL",
                    "proposer.endpoint",
                )?;
                require_setting(p.model.as_deref(), "LLM_MODEL", "proposer.model")?;
            }
            ProposerKind::GuidedMock | ProposerKind::Random => {
                if p.endpoint.is_some() || p.model.is_some() {
                    return Err(config_error(
                        "proposer",
                        "endpoint and model apply to chat proposers only",
                    ));
                }
            }
        }
        if let Some(q) = p.p_noise {
            if p.kind != ProposerKind::GuidedMock {
                return Err(config_error(
                    "proposer.p_noise",
                    "applies to the guided mock only",
                ));
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(config_error("proposer.p_noise", "must lie in [0, 1]"));
            }
        }

        if let DatasetSpec::Synthetic(d) = &self.dataset {
            if d.length == 0 {
                return Err(config_error(
                    "dataset.synthetic.length",
                    "must be at least 1",
                ));
            }
            if d.start_distance > d.length {
                return Err(config_error(
                    "dataset.synthetic.start_distance",
                    "cannot exceed length",
                ));
            }
            if d.case_id.is_empty() {
                return Err(config_error(
                    "dataset.synthetic.case_id",
                    "must not be empty",
                ));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(config_error("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// Seed used for proposal randomness.
    pub fn proposal_seed(&self) -> u64 {
        self.proposer.seed.unwrap_or(self.search.seed)
    }

    /// Search settings as handed to the engines.
    pub fn effective_search(&self) -> SearchConfig {
        SearchConfig {
            seed: self.proposal_seed(),
            ..self.search.clone()
        }
    }
}

fn require_setting(value: Option<&str>, env: &str, field: &str) -> Result<(), CliError> {
    let set =
        value.is_some_and(|v| !v.is_empty()) || std::env::var(env).is_ok_and(|v| !v.is_empty());
    if set {
        Ok(())
    } else {
        Err(config_error(field, format!("not set and {env} is empty")))
    }
}
