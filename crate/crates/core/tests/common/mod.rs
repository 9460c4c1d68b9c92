#![allow(dead_code)]

pub mod welch;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use lecbench::corpus::{self, Dataset, Example, LabelSchema};
use lecbench::knowledge::{self, KnowledgeBase};
use lecbench::llm::{MockRule, MockTransport, Provider, ProviderSpec, RetryPolicy};
use lecbench::runner::{plan_experiments, Harness, LoadedDataset, ResultsStore, RunConfig, TrialSpec};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn schema(name: &str) -> Arc<LabelSchema> {
    Arc::new(LabelSchema::load(data_dir().join("schemas").join(format!("{name}.json"))).unwrap())
}

pub fn epistemic_knowledge() -> KnowledgeBase {
    knowledge::load_knowledge(data_dir().join("knowledge/epistemic.json"), &schema("epistemic")).unwrap()
}

pub fn toy_epistemic() -> Dataset {
    corpus::load_dataset(data_dir().join("toy/epistemic.jsonl"), schema("epistemic")).unwrap()
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("golden").join(name)).unwrap()
}

/// The five exemplars of the worked epistemic prompt, in prompt order.
pub fn worked_shots() -> Vec<Example> {
    [
        ("Care to share your thought process ?", "Curiosity"),
        ("Someone tell me how to feel about this.", "Confusion"),
        ("I know a couple of people who are. It's amazing to watch.", "Enjoyment"),
        ("I wonder what he's up to these days.", "Surprise"),
        ("I\u{2019}m kind of scared to talk to my manager about it.", "Anxiety"),
    ]
    .iter()
    .enumerate()
    .map(|(i, (text, gold))| Example::new(format!("shot-{i}"), *text, *gold))
    .collect()
}

pub const WORKED_QUERY: &str = "Actually maybe the OP is not an INTP, have you thought about that?";

/// A config without datasets or providers; [`harness`] supplies both.
pub fn mock_config(run_id: &str, variants: &[&str], shot_counts: &[u32], seeds: &[u64]) -> RunConfig {
    let mut cfg = RunConfig::empty(data_dir());
    cfg.run_id = run_id.into();
    cfg.prompt.variants = variants.iter().map(|v| v.to_string()).collect();
    cfg.prompt.shot_counts = shot_counts.to_vec();
    cfg.seeds = seeds.to_vec();
    cfg
}

pub fn loaded(name: &str, data: Dataset, knowledge: Option<KnowledgeBase>) -> LoadedDataset {
    LoadedDataset::new(name, data, knowledge)
}

/// Harness over in-memory datasets with explicit mock transports and
/// `(name, transport, max_concurrency)` providers.
pub fn harness(
    cfg: &RunConfig,
    datasets: Vec<LoadedDataset>,
    transports: Vec<(&str, Arc<MockTransport>, u32)>,
    results: &Path,
) -> Harness {
    let mut providers = IndexMap::new();
    let mut plan = plan_experiments(cfg).unwrap();
    for (name, transport, concurrency) in transports {
        let mut spec = ProviderSpec::mock(name);
        spec.max_concurrency = concurrency;
        plan.providers.push(spec.clone());
        providers.insert(name.to_owned(), Provider::new(spec, transport).unwrap());
    }
    plan.datasets = datasets.iter().map(|d| d.name.clone()).collect();
    for d in &plan.datasets {
        for p in &plan.providers {
            for &v in &plan.variants {
                for &seed in &plan.seeds {
                    plan.trials.push(TrialSpec::new(d, &p.name, v, seed));
                }
            }
        }
    }
    let store = ResultsStore::open(results, &cfg.run_id).unwrap();
    Harness::new(plan, datasets, providers, store)
        .unwrap()
        .with_retry(RetryPolicy::immediate(2))
}

/// Gold-echo mock over `datasets`.
pub fn gold_echo<'a>(datasets: impl IntoIterator<Item = &'a Dataset>) -> Arc<MockTransport> {
    MockTransport::new(MockRule::gold_echo(datasets)).shared()
}
