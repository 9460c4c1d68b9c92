//! Experiment plans, trial execution and the resumable results store.
//!
//! A trial is one (dataset, provider, prompt variant, seed) combination.
//! Its test subset depends only on (dataset, seed), so every provider and
//! variant sees the same examples. Few-shot exemplars are drawn once per
//! trial from the examples outside that subset.

mod config;
mod manifest;
mod store;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use futures::stream::{self, StreamExt};
use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use config::{
    DatasetConfig, ExecutionConfig, MockConfig, PromptSection, ProviderConfig, ProviderKind, RunConfig,
    DEFAULT_SEEDS, DEFAULT_SHOT_COUNTS,
};
pub use manifest::{DatasetFingerprint, ProviderRecord, RunManifest};
pub use store::{read_records, ResultsStore, StoreIndex, TrialStatus, TrialWriter};

use crate::corpus::{self, CorpusError, Dataset, Example, Fraction, LabelSchema, PreprocessReport};
use crate::knowledge::{self, KnowledgeBase, KnowledgeError};
use crate::llm::{
    DecodingConfig, LlmClient, LlmError, MockRule, MockTransport, Provider, ProviderSpec, ResponseCache, RetryPolicy,
};
use crate::metrics::INVALID_LABEL;
use crate::parse::{self, ErrorClass, ParseKind};
use crate::prompt::{PromptError, PromptKind, PromptTemplate, PromptVariant};
use crate::rng::sha256_hex;
use crate::sampler::{self, SamplerError, ShotSet};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(String),
    #[error("storage error at {path}: {message}")]
    Storage { path: PathBuf, message: String },
    #[error("dataset {dataset}: {source}")]
    Corpus {
        dataset: String,
        #[source]
        source: CorpusError,
    },
    #[error("dataset {dataset}: knowledge: {source}")]
    Knowledge {
        dataset: String,
        #[source]
        source: KnowledgeError,
    },
    #[error("trial {trial}: {message}")]
    Trial { trial: String, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("run interrupted")]
    Interrupted,
}

/// Number of in-context exemplars, or the full training set for
/// fine-tuned baselines. Serialized as a number or `"full"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShotCount {
    Count(u32),
    Full,
}

impl fmt::Display for ShotCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Count(n) => write!(f, "{n}"),
            Self::Full => f.write_str("full"),
        }
    }
}

impl FromStr for ShotCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::Full);
        }
        s.parse().map(Self::Count).map_err(|_| format!("invalid shot count {s:?}"))
    }
}

impl Serialize for ShotCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Count(n) => s.serialize_u32(*n),
            Self::Full => s.serialize_str("full"),
        }
    }
}

impl<'de> Deserialize<'de> for ShotCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(n) => Ok(Self::Count(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Which system produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordVariant {
    Vanilla,
    Agka,
    Finetuned,
}

impl RecordVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Agka => "agka",
            Self::Finetuned => "finetuned",
        }
    }
}

impl From<PromptKind> for RecordVariant {
    fn from(k: PromptKind) -> Self {
        match k {
            PromptKind::Vanilla => Self::Vanilla,
            PromptKind::Agka => Self::Agka,
        }
    }
}

/// One prediction with its provenance. Also the interchange format for
/// records produced outside this crate, which may omit the prompt and
/// provider bookkeeping fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub run_id: String,
    #[serde(default)]
    pub trial_id: String,
    pub dataset: String,
    /// Provider name, or the model family for fine-tuned baselines.
    pub provider: String,
    #[serde(default)]
    pub model_id: String,
    pub variant: RecordVariant,
    pub shots: ShotCount,
    pub seed: u64,
    pub example_id: String,
    pub gold: String,
    #[serde(default)]
    pub prompt_hash: Option<String>,
    #[serde(default)]
    pub raw_output: Option<String>,
    #[serde(default)]
    pub parse_kind: Option<ParseKind>,
    pub scored_label: String,
    pub error_class: ErrorClass,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub from_cache: bool,
    #[serde(default)]
    pub failure: Option<String>,
    #[serde(default)]
    pub completed_at: Option<String>,
}

impl PredictionRecord {
    /// Copy with the fields that legitimately differ between otherwise
    /// identical runs cleared.
    pub fn without_volatile(&self) -> Self {
        Self {
            latency_ms: 0,
            from_cache: false,
            completed_at: None,
            ..self.clone()
        }
    }
}

/// One (dataset, provider, variant, seed) combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial_id: String,
    pub dataset: String,
    pub provider: String,
    pub variant: PromptVariant,
    pub seed: u64,
}

impl TrialSpec {
    pub fn new(dataset: &str, provider: &str, variant: PromptVariant, seed: u64) -> Self {
        Self {
            trial_id: format!("{dataset}__{provider}__{variant}__s{seed}"),
            dataset: dataset.to_owned(),
            provider: provider.to_owned(),
            variant,
            seed,
        }
    }
}

/// The expanded cross product of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub run_id: String,
    pub datasets: Vec<String>,
    pub providers: Vec<ProviderSpec>,
    pub variants: Vec<PromptVariant>,
    pub seeds: Vec<u64>,
    pub test_fraction: Fraction,
    pub decoding: DecodingConfig,
    /// Ordered by dataset, then provider, variant and seed.
    pub trials: Vec<TrialSpec>,
}

/// Expands `"vanilla"`, `"agka"` (over `shot_counts`) and explicit
/// `"agka-N"` entries, keeping first occurrences.
pub fn expand_variants(names: &[String], shot_counts: &[u32]) -> Result<Vec<PromptVariant>, RunnerError> {
    let mut out: Vec<PromptVariant> = Vec::new();
    for name in names {
        let expanded = if name.trim().eq_ignore_ascii_case("agka") {
            shot_counts.iter().map(|&n| PromptVariant::agka(n)).collect()
        } else {
            vec![PromptVariant::from_str(name).map_err(|e| RunnerError::Config(e.to_string()))?]
        };
        for v in expanded {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

pub fn plan_experiments(cfg: &RunConfig) -> Result<ExperimentPlan, RunnerError> {
    cfg.validate()?;
    let variants = expand_variants(&cfg.prompt.variants, &cfg.prompt.shot_counts)?;
    if variants.is_empty() && !cfg.datasets.is_empty() && !cfg.providers.is_empty() {
        return Err(RunnerError::Config("no prompt variants configured".into()));
    }
    let providers = cfg.providers.iter().map(ProviderConfig::spec).collect::<Result<Vec<_>, _>>()?;
    let mut trials = Vec::new();
    for d in &cfg.datasets {
        for p in &providers {
            for &v in &variants {
                for &seed in &cfg.seeds {
                    trials.push(TrialSpec::new(&d.name, &p.name, v, seed));
                }
            }
        }
    }
    Ok(ExperimentPlan {
        run_id: cfg.run_id.clone(),
        datasets: cfg.datasets.iter().map(|d| d.name.clone()).collect(),
        providers,
        variants,
        seeds: cfg.seeds.clone(),
        test_fraction: cfg.test_fraction,
        decoding: cfg.decoding,
        trials,
    })
}

/// A dataset ready for trials.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub data: Dataset,
    pub knowledge: Option<Arc<KnowledgeBase>>,
    pub preprocess: Option<PreprocessReport>,
}

impl LoadedDataset {
    pub fn new(name: impl Into<String>, data: Dataset, knowledge: Option<KnowledgeBase>) -> Self {
        Self {
            name: name.into(),
            data,
            knowledge: knowledge.map(Arc::new),
            preprocess: None,
        }
    }

    pub fn content_sha256(&self) -> String {
        let mut body = String::new();
        for e in self.data.examples() {
            body.push_str(&serde_json::to_string(e).expect("example serializes"));
            body.push('\n');
        }
        sha256_hex(body.as_bytes())
    }
}

/// Loads every dataset named in `cfg`, with its schema and knowledge.
pub fn load_datasets(cfg: &RunConfig) -> Result<Vec<LoadedDataset>, RunnerError> {
    cfg.datasets
        .iter()
        .map(|d| {
            let corpus_err = |source| RunnerError::Corpus {
                dataset: d.name.clone(),
                source,
            };
            let schema = Arc::new(LabelSchema::load(cfg.resolve(&d.schema)).map_err(corpus_err)?);
            let path = cfg.resolve(&d.path);
            let (data, preprocess) = match d.score_rule {
                Some(rule) => {
                    let (data, report) = corpus::load_scored(&path, schema.clone(), rule).map_err(corpus_err)?;
                    (data, Some(report))
                }
                None => (corpus::load_dataset(&path, schema.clone()).map_err(corpus_err)?, None),
            };
            let knowledge = d
                .knowledge
                .as_ref()
                .map(|k| knowledge::load_knowledge(cfg.resolve(k), &schema))
                .transpose()
                .map_err(|source| RunnerError::Knowledge {
                    dataset: d.name.clone(),
                    source,
                })?;
            Ok(LoadedDataset {
                name: d.name.clone(),
                data,
                knowledge: knowledge.map(Arc::new),
                preprocess,
            })
        })
        .collect()
}

/// Builds a provider for every entry in `cfg`. Mock providers are wired to
/// the loaded datasets; HTTP providers read their API keys now.
pub fn build_providers(
    cfg: &RunConfig,
    datasets: &[LoadedDataset],
) -> Result<IndexMap<String, Provider>, RunnerError> {
    let mut out = IndexMap::new();
    for p in &cfg.providers {
        let spec = p.spec()?;
        let provider = match (&p.kind, &p.mock) {
            (ProviderKind::Http, _) => Provider::http(spec)?,
            (ProviderKind::Mock, Some(mock)) => {
                let data = datasets.iter().map(|d| &d.data);
                let rule = match mock {
                    MockConfig::GoldEcho => MockRule::gold_echo(data),
                    MockConfig::Uniform { seed } => {
                        let mut labels: Vec<String> = Vec::new();
                        for d in datasets {
                            for l in d.data.schema().labels() {
                                if !labels.contains(l) {
                                    labels.push(l.clone());
                                }
                            }
                        }
                        MockRule::Uniform { labels, seed: *seed }
                    }
                    MockConfig::Fixed { reply } => MockRule::Fixed(reply.clone()),
                    MockConfig::NoisyEcho { seed, confusions } => MockRule::noisy_echo(
                        data,
                        confusions
                            .iter()
                            .map(|(gold, to)| (gold.clone(), to.iter().map(|(l, r)| (l.clone(), *r)).collect())),
                        *seed,
                    ),
                };
                Provider::new(spec, Arc::new(MockTransport::new(rule)))?
            }
            (ProviderKind::Mock, None) => unreachable!("validated by ProviderConfig::spec"),
        };
        out.insert(p.name.clone(), provider);
    }
    Ok(out)
}

/// What happened to each trial of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials_total: usize,
    pub trials_completed: usize,
    /// Trials aborted by a trial-level error, with the error.
    pub trials_failed: Vec<(String, String)>,
    pub records_written: usize,
    pub records_skipped: usize,
    /// Completions that were not served from the cache.
    pub provider_calls: usize,
    pub interrupted: bool,
}

/// Executes plans against loaded datasets and providers.
pub struct Harness {
    plan: ExperimentPlan,
    datasets: IndexMap<String, LoadedDataset>,
    providers: IndexMap<String, Provider>,
    template: PromptTemplate,
    client: LlmClient,
    cache: Option<Arc<ResponseCache>>,
    store: ResultsStore,
    trial_concurrency: usize,
    stop_after: Option<usize>,
    written: AtomicUsize,
    skipped: AtomicUsize,
    calls: AtomicUsize,
    stopped: AtomicBool,
    index: Mutex<StoreIndex>,
}

struct TrialContext<'a> {
    trial: &'a TrialSpec,
    dataset: &'a LoadedDataset,
    provider: &'a Provider,
    knowledge: Option<&'a KnowledgeBase>,
    shots: ShotSet,
}

impl Harness {
    pub fn new(
        plan: ExperimentPlan,
        datasets: Vec<LoadedDataset>,
        providers: IndexMap<String, Provider>,
        store: ResultsStore,
    ) -> Result<Self, RunnerError> {
        let datasets: IndexMap<String, LoadedDataset> = datasets.into_iter().map(|d| (d.name.clone(), d)).collect();
        for t in &plan.trials {
            if !datasets.contains_key(&t.dataset) {
                return Err(RunnerError::Config(format!("dataset {:?} is not loaded", t.dataset)));
            }
            if !providers.contains_key(&t.provider) {
                return Err(RunnerError::Config(format!("unknown provider {:?}", t.provider)));
            }
        }
        let index = store.index()?;
        Ok(Self {
            plan,
            datasets,
            providers,
            template: PromptTemplate::default(),
            client: LlmClient::default(),
            cache: None,
            store,
            trial_concurrency: 4,
            stop_after: None,
            written: AtomicUsize::new(0),
            skipped: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
            stopped: AtomicBool::new(false),
            index: Mutex::new(index),
        })
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client = LlmClient::new(retry);
        self
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_trial_concurrency(mut self, n: usize) -> Self {
        self.trial_concurrency = n.max(1);
        self
    }

    /// Stops the run once `n` records have been written, as if the process
    /// had been killed. Used to exercise resume.
    pub fn stop_after(mut self, n: usize) -> Self {
        self.stop_after = Some(n);
        self
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    pub fn store(&self) -> &ResultsStore {
        &self.store
    }

    /// The examples a trial is scored on. Depends only on (dataset, seed).
    pub fn test_subset(&self, dataset: &str, seed: u64) -> Result<Dataset, RunnerError> {
        let d = self.loaded(dataset)?;
        corpus::sample_test_subset(&d.data, self.plan.test_fraction, seed).map_err(|source| RunnerError::Corpus {
            dataset: dataset.to_owned(),
            source,
        })
    }

    /// Exemplars for a trial, drawn from outside its test subset.
    pub fn shots_for(&self, trial: &TrialSpec, test: &Dataset) -> Result<ShotSet, RunnerError> {
        let n = trial.variant.shots() as usize;
        if trial.variant.kind() == PromptKind::Vanilla || n == 0 {
            return Ok(ShotSet::empty(trial.seed));
        }
        let pool = self.loaded(&trial.dataset)?.data.without(test);
        Ok(sampler::rus_select(&pool, n, trial.seed)?)
    }

    fn loaded(&self, dataset: &str) -> Result<&LoadedDataset, RunnerError> {
        self.datasets
            .get(dataset)
            .ok_or_else(|| RunnerError::Config(format!("dataset {dataset:?} is not loaded")))
    }

    fn update_index(&self, trial_id: &str, status: TrialStatus) -> Result<(), RunnerError> {
        let mut index = self.index.lock().expect("index lock poisoned");
        index.trials.insert(trial_id.to_owned(), status);
        self.store.write_index(&index)
    }

    /// Runs every trial in the plan, skipping records already in the store.
    pub async fn execute(&self) -> Result<RunSummary, RunnerError> {
        let datasets: Vec<LoadedDataset> = self.datasets.values().cloned().collect();
        let mut manifest = RunManifest::new(&self.plan, &self.template, &datasets);
        store::write_atomic(
            &self.store.manifest_path(),
            &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
        )?;

        let results: Vec<(String, Result<(), RunnerError>)> = stream::iter(&self.plan.trials)
            .map(|t| async move { (t.trial_id.clone(), self.execute_trial(t).await.map(|_| ())) })
            .buffer_unordered(self.trial_concurrency)
            .collect()
            .await;

        let mut summary = RunSummary {
            trials_total: self.plan.trials.len(),
            ..RunSummary::default()
        };
        for (trial_id, result) in results {
            match result {
                Ok(()) => summary.trials_completed += 1,
                Err(RunnerError::Interrupted) => summary.interrupted = true,
                Err(e @ RunnerError::Storage { .. }) => return Err(e),
                Err(e) => {
                    log::error!("trial {trial_id} failed: {e}");
                    summary.trials_failed.push((trial_id, e.to_string()));
                }
            }
        }
        summary.trials_failed.sort();
        summary.records_written = self.written.load(Ordering::SeqCst);
        summary.records_skipped = self.skipped.load(Ordering::SeqCst);
        summary.provider_calls = self.calls.load(Ordering::SeqCst);
        summary.interrupted |= self.stopped.load(Ordering::SeqCst);

        if !summary.interrupted {
            manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
            store::write_atomic(
                &self.store.manifest_path(),
                &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
            )?;
        }
        Ok(summary)
    }

    /// Runs one trial and returns all of its records in test-subset order,
    /// including records written by earlier runs.
    pub async fn execute_trial(&self, trial: &TrialSpec) -> Result<Vec<PredictionRecord>, RunnerError> {
        if self.stopped.load(Ordering::SeqCst) {
            return Err(RunnerError::Interrupted);
        }
        let trial_err = |message: String| RunnerError::Trial {
            trial: trial.trial_id.clone(),
            message,
        };
        let dataset = self.loaded(&trial.dataset)?;
        let provider = self
            .providers
            .get(&trial.provider)
            .ok_or_else(|| trial_err(format!("unknown provider {:?}", trial.provider)))?;
        let knowledge = match trial.variant.kind() {
            PromptKind::Agka => Some(
                dataset
                    .knowledge
                    .as_deref()
                    .ok_or_else(|| trial_err("AGKA prompts need a knowledge file for this dataset".into()))?,
            ),
            PromptKind::Vanilla => None,
        };
        let test = self.test_subset(&trial.dataset, trial.seed)?;
        let shots = self.shots_for(trial, &test)?;
        let ctx = TrialContext {
            trial,
            dataset,
            provider,
            knowledge,
            shots,
        };

        let mut records = self.store.load_trial(&trial.trial_id)?;
        let done: HashSet<String> = records.iter().map(|r| r.example_id.clone()).collect();
        let pending: Vec<&Example> = test.examples().iter().filter(|e| !done.contains(&e.id)).collect();
        self.skipped.fetch_add(test.len() - pending.len(), Ordering::SeqCst);
        let status = |written: usize| TrialStatus {
            expected: test.len(),
            written,
            complete: written == test.len(),
        };
        if pending.is_empty() {
            self.update_index(&trial.trial_id, status(records.len()))?;
            return Ok(order_by(records, &test));
        }

        let mut writer = self.store.trial_writer(&trial.trial_id)?;
        let limit = provider.spec().max_concurrency as usize;
        let mut predictions = stream::iter(pending)
            .map(|example| self.predict(&ctx, example))
            .buffered(limit);
        while let Some(record) = predictions.next().await {
            if self.stopped.load(Ordering::SeqCst) {
                break;
            }
            let record = record?;
            writer.append(&record)?;
            records.push(record);
            let written = self.written.fetch_add(1, Ordering::SeqCst) + 1;
            if self.stop_after.is_some_and(|n| written >= n) {
                self.stopped.store(true, Ordering::SeqCst);
            }
        }
        self.update_index(&trial.trial_id, status(records.len()))?;
        if records.len() < test.len() {
            return Err(RunnerError::Interrupted);
        }
        Ok(order_by(records, &test))
    }

    async fn predict(&self, ctx: &TrialContext<'_>, example: &Example) -> Result<PredictionRecord, RunnerError> {
        let schema = ctx.dataset.data.schema();
        let prompt = match ctx.knowledge {
            Some(kb) => self.template.render_agka(schema, kb, &ctx.shots.shots, &example.text)?,
            None => self.template.render_vanilla(schema, &example.text)?,
        };
        for lint in &prompt.lints {
            log::warn!("{} / {}: {lint:?}", ctx.trial.trial_id, example.id);
        }
        let outcome = match &self.cache {
            Some(cache) => {
                self.client
                    .cached_complete(ctx.provider, &prompt, &self.plan.decoding, cache)
                    .await?
            }
            None => self.client.complete(ctx.provider, &prompt, &self.plan.decoding).await?,
        };
        if !outcome.from_cache {
            self.calls.fetch_add(1, Ordering::SeqCst);
        }
        let parsed = outcome.raw_text.as_deref().map(|raw| parse::normalize(raw, schema));
        let error_class = parse::classify_error(parsed.as_ref(), &example.gold);
        let scored_label = parse::scoring_label(parsed.as_ref()).to_owned();
        debug_assert!(scored_label == INVALID_LABEL || schema.contains(&scored_label));
        Ok(PredictionRecord {
            run_id: self.plan.run_id.clone(),
            trial_id: ctx.trial.trial_id.clone(),
            dataset: ctx.trial.dataset.clone(),
            provider: ctx.trial.provider.clone(),
            model_id: ctx.provider.spec().model_id.clone(),
            variant: ctx.trial.variant.kind().into(),
            shots: ShotCount::Count(ctx.trial.variant.shots()),
            seed: ctx.trial.seed,
            example_id: example.id.clone(),
            gold: example.gold.clone(),
            prompt_hash: Some(prompt.hash()),
            raw_output: outcome.raw_text,
            parse_kind: parsed.map(|p| p.kind),
            scored_label,
            error_class,
            latency_ms: outcome.latency_ms,
            from_cache: outcome.from_cache,
            failure: outcome.failure.map(|f| f.to_string()),
            completed_at: Some(chrono::Utc::now().to_rfc3339()),
        })
    }
}

fn order_by(mut records: Vec<PredictionRecord>, test: &Dataset) -> Vec<PredictionRecord> {
    let position: std::collections::HashMap<&str, usize> =
        test.examples().iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    records.sort_by_key(|r| position.get(r.example_id.as_str()).copied().unwrap_or(usize::MAX));
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(datasets: usize, providers: usize, variants: &[&str], seeds: usize) -> RunConfig {
        let mut src = String::new();
        src.push_str(&format!(
            "seeds = [{}]\n[prompt]\nvariants = [{}]\nshot_counts = [0, 1, 5, 10]\n",
            (0..seeds).map(|s| s.to_string()).collect::<Vec<_>>().join(", "),
            variants.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
        ));
        for d in 0..datasets {
            src.push_str(&format!("[[dataset]]\nname = \"d{d}\"\npath = \"x.jsonl\"\nschema = \"s.json\"\n"));
        }
        for p in 0..providers {
            src.push_str(&format!("[[provider]]\nname = \"p{p}\"\nkind = \"mock\"\nmock = {{ rule = \"gold_echo\" }}\n"));
        }
        RunConfig::from_toml_str(&src, ".").unwrap()
    }

    #[test]
    fn full_matrix_has_900_trials() {
        let plan = plan_experiments(&cfg(6, 6, &["vanilla", "agka"], 5)).unwrap();
        assert_eq!(plan.variants.len(), 5);
        assert_eq!(plan.trials.len(), 900);
        let ids: HashSet<&str> = plan.trials.iter().map(|t| t.trial_id.as_str()).collect();
        assert_eq!(ids.len(), 900);
        assert_eq!(plan, plan_experiments(&cfg(6, 6, &["vanilla", "agka"], 5)).unwrap());
    }

    #[test]
    fn single_trial_and_vanilla_with_shots() {
        assert_eq!(plan_experiments(&cfg(1, 1, &["agka-0"], 1)).unwrap().trials.len(), 1);
        let mut c = cfg(1, 1, &["agka-0"], 1);
        c.prompt.variants = vec!["vanilla-5".into()];
        assert!(matches!(plan_experiments(&c), Err(RunnerError::Config(_))));
    }

    #[test]
    fn config_rejects_bad_values() {
        for src in [
            "seeds = []",
            "seeds = [1, 1]",
            "test_fraction = \"0\"",
            "bogus = 1",
            "[[provider]]\nname = \"x\"\nkind = \"http\"",
            "[[provider]]\nname = \"x\"\nkind = \"mock\"",
        ] {
            assert!(RunConfig::from_toml_str(src, ".").is_err(), "{src}");
        }
        let c = RunConfig::from_toml_str("", ".").unwrap();
        assert_eq!(c.seeds, DEFAULT_SEEDS);
        assert_eq!(c.test_fraction, Fraction::new(3, 20).unwrap());
    }

    #[test]
    fn shot_count_serde() {
        assert_eq!(serde_json::to_string(&ShotCount::Count(5)).unwrap(), "5");
        assert_eq!(serde_json::to_string(&ShotCount::Full).unwrap(), "\"full\"");
        assert_eq!(serde_json::from_str::<ShotCount>("\"full\"").unwrap(), ShotCount::Full);
        assert_eq!(serde_json::from_str::<ShotCount>("10").unwrap(), ShotCount::Count(10));
        assert!(ShotCount::Count(1000) < ShotCount::Full);
    }

    #[test]
    fn minimal_external_record() {
        let line = r#"{"run_id":"bert","dataset":"urgency","provider":"bert-base","variant":"finetuned","shots":"full","seed":1,"example_id":"e1","gold":"High_urgency","scored_label":"High_urgency","error_class":"none"}"#;
        let r: PredictionRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.variant, RecordVariant::Finetuned);
        assert_eq!(r.shots, ShotCount::Full);
        assert!(r.prompt_hash.is_none());
    }
}
