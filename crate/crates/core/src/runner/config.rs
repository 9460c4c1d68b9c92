//! TOML run configuration.
//!
//! ```toml
//! run_id = "toy"
//! seeds = [13, 42, 101, 2024, 31337]
//! test_fraction = "0.15"
//!
//! [prompt]
//! variants = ["vanilla", "agka"]   # "agka" expands over shot_counts
//! shot_counts = [0, 1, 5, 10]
//!
//! [[dataset]]
//! name = "epistemic"
//! path = "toy/epistemic.jsonl"
//! schema = "schemas/epistemic.json"
//! knowledge = "knowledge/epistemic.json"
//!
//! [[provider]]
//! name = "gpt-4"
//! base_url = "https://api.openai.com/v1"
//! model_id = "gpt-4-0125-preview"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [[provider]]
//! name = "echo"
//! kind = "mock"
//! mock = { rule = "gold_echo" }
//! ```
//!
//! Relative dataset, schema, knowledge and template paths are resolved
//! against the directory holding the config file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use url::Url;

use super::RunnerError;
use crate::corpus::{Fraction, ScoreRule};
use crate::llm::{DecodingConfig, ProviderSpec};

/// Seeds used when a config names none.
pub const DEFAULT_SEEDS: [u64; 5] = [13, 42, 101, 2024, 31337];

/// Shot counts `"agka"` expands to when a config names none.
pub const DEFAULT_SHOT_COUNTS: [u32; 4] = [0, 1, 5, 10];

fn default_run_id() -> String {
    "run".into()
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_test_fraction() -> Fraction {
    Fraction::new(3, 20).expect("valid")
}

fn default_shot_counts() -> Vec<u32> {
    DEFAULT_SHOT_COUNTS.to_vec()
}

fn default_variants() -> Vec<String> {
    vec!["vanilla".into(), "agka".into()]
}

fn default_concurrency() -> u32 {
    4
}

fn default_trial_concurrency() -> usize {
    4
}

fn default_max_attempts() -> u32 {
    5
}

fn default_results_dir() -> PathBuf {
    "results".into()
}

fn default_cache_dir() -> PathBuf {
    "cache".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: Fraction,
    #[serde(default)]
    pub decoding: DecodingConfig,
    #[serde(default)]
    pub prompt: PromptSection,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default, rename = "provider")]
    pub providers: Vec<ProviderConfig>,
    #[serde(default)]
    pub execution: ExecutionConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSection {
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default = "default_shot_counts")]
    pub shot_counts: Vec<u32>,
    /// Template file; the built-in template when absent.
    #[serde(default)]
    pub template: Option<PathBuf>,
}

impl Default for PromptSection {
    fn default() -> Self {
        Self {
            variants: default_variants(),
            shot_counts: default_shot_counts(),
            template: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    pub schema: PathBuf,
    #[serde(default)]
    pub knowledge: Option<PathBuf>,
    /// Labels records from a numeric `score` field instead of `label`.
    #[serde(default)]
    pub score_rule: Option<ScoreRule>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Http,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum MockConfig {
    GoldEcho,
    Uniform {
        #[serde(default)]
        seed: u64,
    },
    Fixed {
        reply: String,
    },
    /// `confusions.<gold>.<predicted> = rate`
    NoisyEcho {
        #[serde(default)]
        seed: u64,
        confusions: IndexMap<String, IndexMap<String, f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub name: String,
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default)]
    pub base_url: Option<Url>,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: u32,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default)]
    pub snapshot: Option<String>,
    #[serde(default)]
    pub mock: Option<MockConfig>,
}

impl ProviderConfig {
    pub fn spec(&self) -> Result<ProviderSpec, RunnerError> {
        let invalid = |m: &str| RunnerError::Config(format!("provider {}: {m}", self.name));
        let mut spec = match self.kind {
            ProviderKind::Http => {
                let base_url = self.base_url.clone().ok_or_else(|| invalid("base_url is required"))?;
                let model_id = self.model_id.clone().ok_or_else(|| invalid("model_id is required"))?;
                if self.mock.is_some() {
                    return Err(invalid("`mock` is only valid with kind = \"mock\""));
                }
                ProviderSpec::new(&self.name, base_url, model_id)
            }
            ProviderKind::Mock => {
                if self.mock.is_none() {
                    return Err(invalid("kind = \"mock\" needs a `mock` rule"));
                }
                let mut spec = ProviderSpec::mock(&self.name);
                if let Some(m) = &self.model_id {
                    spec.model_id = m.clone();
                }
                spec
            }
        };
        spec.api_key_env = self.api_key_env.clone();
        spec.max_concurrency = self.max_concurrency;
        spec.requests_per_minute = self.requests_per_minute;
        spec.snapshot = self.snapshot.clone();
        spec.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionConfig {
    /// Trials run concurrently; requests within a trial are further bounded
    /// by each provider's `max_concurrency`.
    #[serde(default = "default_trial_concurrency")]
    pub trial_concurrency: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Relative to the workspace directory.
    #[serde(default = "default_results_dir")]
    pub results_dir: PathBuf,
    /// Relative to the workspace directory.
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            trial_concurrency: default_trial_concurrency(),
            max_attempts: default_max_attempts(),
            results_dir: default_results_dir(),
            cache_dir: default_cache_dir(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(src: &str, base_dir: impl Into<PathBuf>) -> Result<Self, RunnerError> {
        let mut cfg: RunConfig = toml::from_str(src).map_err(|e| RunnerError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let src = fs::read_to_string(path).map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&src, base).map_err(|e| match e {
            RunnerError::Config(m) => RunnerError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// An empty config whose relative paths resolve against `base_dir`.
    pub fn empty(base_dir: impl Into<PathBuf>) -> Self {
        Self {
            run_id: default_run_id(),
            seeds: default_seeds(),
            test_fraction: default_test_fraction(),
            decoding: DecodingConfig::default(),
            prompt: PromptSection::default(),
            datasets: Vec::new(),
            providers: Vec::new(),
            execution: ExecutionConfig::default(),
            base_dir: base_dir.into(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_owned()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<(), RunnerError> {
        let err = |m: String| Err(RunnerError::Config(m));
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return err(format!("run_id {:?} is not a valid directory name", self.run_id));
        }
        if self.seeds.is_empty() {
            return err("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return err("seeds must be distinct".into());
        }
        if !self.test_fraction.is_unit_interval_open() && self.test_fraction.to_f64() != 1.0 {
            return err(format!("test_fraction {} is not in (0, 1]", self.test_fraction));
        }
        self.decoding.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        let names: HashSet<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        if names.len() != self.datasets.len() {
            return err("dataset names must be distinct".into());
        }
        for d in &self.datasets {
            if d.name.is_empty() || d.name.contains(['/', '\\']) || d.name.contains("__") {
                return err(format!("dataset name {:?} must be non-empty without '/' or '__'", d.name));
            }
        }
        let names: HashSet<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        if names.len() != self.providers.len() {
            return err("provider names must be distinct".into());
        }
        for p in &self.providers {
            if p.name.contains(['/', '\\']) || p.name.contains("__") {
                return err(format!("provider name {:?} must not contain '/' or '__'", p.name));
            }
            p.spec()?;
        }
        if self.execution.trial_concurrency == 0 {
            return err("execution.trial_concurrency must be at least 1".into());
        }
        if self.execution.max_attempts == 0 {
            return err("execution.max_attempts must be at least 1".into());
        }
        Ok(())
    }

    /// Keeps only the named datasets.
    pub fn retain_datasets(&mut self, names: &[String]) -> Result<(), RunnerError> {
        for n in names {
            if !self.datasets.iter().any(|d| &d.name == n) {
                return Err(RunnerError::Config(format!("unknown dataset {n:?}")));
            }
        }
        self.datasets.retain(|d| names.contains(&d.name));
        Ok(())
    }

    /// Keeps only the named providers.
    pub fn retain_providers(&mut self, names: &[String]) -> Result<(), RunnerError> {
        for n in names {
            if !self.providers.iter().any(|p| &p.name == n) {
                return Err(RunnerError::Config(format!("unknown provider {n:?}")));
            }
        }
        self.providers.retain(|p| names.contains(&p.name));
        Ok(())
    }
}
