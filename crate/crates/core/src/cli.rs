//! Command-line subcommands.
//!
//! Each subcommand is a library function returning a summary, so it can be
//! driven in-process. [`dispatch`] runs a parsed command and prints its summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::knowledge::{self, KnowledgeBase};
use crate::llm::{LlmClient, ResponseCache, RetryPolicy};
use crate::prompt::PromptTemplate;
use crate::report::{self, LabelSets, ReportFiles};
use crate::runner::{
    self, read_records, ExperimentPlan, Harness, PredictionRecord, ResultsStore, RunConfig, RunManifest, RunSummary,
};

#[derive(Debug, Parser)]
#[command(name = "lecbench", version, about = "Learning-engagement classification benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load every configured dataset, schema and knowledge file and report
    /// label counts.
    ValidateData(ValidateArgs),
    /// Ask a model to define each label of a dataset from guideline text.
    ExtractKnowledge(ExtractArgs),
    /// Execute (or resume) a benchmark run.
    Run(RunArgs),
    /// Build tables, curves and confusion matrices from a run's records.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Restrict to these datasets.
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub provider: String,
    /// Plain-text annotation guidelines.
    #[arg(long)]
    pub guidelines: PathBuf,
    /// Where to write the knowledge file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory holding results and cache.
    #[arg(long, default_value = ".")]
    pub workspace: PathBuf,
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    #[arg(long = "provider")]
    pub providers: Vec<String>,
    /// Print the plan without calling any provider.
    #[arg(long)]
    pub dry_run: bool,
    /// Comma-separated seeds overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = ".")]
    pub workspace: PathBuf,
    #[arg(long)]
    pub run_id: String,
    /// Read the results directory from this config instead of `results`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prediction-record JSONL files from external baselines.
    #[arg(long = "baseline")]
    pub baselines: Vec<PathBuf>,
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    /// Output directory; defaults to `reports/<run_id>` in the workspace.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetCheck {
    pub name: String,
    pub task_name: String,
    pub n_examples: usize,
    pub label_counts: Vec<(String, usize)>,
    pub has_knowledge: bool,
    pub dropped_on_threshold: usize,
}

pub fn validate_data(args: &ValidateArgs) -> Result<Vec<DatasetCheck>> {
    let mut cfg = RunConfig::load(&args.config)?;
    if !args.datasets.is_empty() {
        cfg.retain_datasets(&args.datasets)?;
    }
    let loaded = runner::load_datasets(&cfg)?;
    Ok(loaded
        .iter()
        .map(|d| DatasetCheck {
            name: d.name.clone(),
            task_name: d.data.schema().task_name().to_owned(),
            n_examples: d.data.len(),
            label_counts: d.data.label_counts(),
            has_knowledge: d.knowledge.is_some(),
            dropped_on_threshold: d.preprocess.as_ref().map_or(0, |p| p.dropped_on_threshold),
        })
        .collect())
}

fn template_for(cfg: &RunConfig) -> Result<PromptTemplate> {
    Ok(match &cfg.prompt.template {
        Some(path) => PromptTemplate::load(cfg.resolve(path))?,
        None => PromptTemplate::default(),
    })
}

pub async fn extract_knowledge(args: &ExtractArgs) -> Result<KnowledgeBase> {
    let mut cfg = RunConfig::load(&args.config)?;
    cfg.retain_datasets(std::slice::from_ref(&args.dataset))?;
    cfg.retain_providers(std::slice::from_ref(&args.provider))?;
    // the target knowledge file may not exist yet
    for d in &mut cfg.datasets {
        d.knowledge = None;
    }
    let loaded = runner::load_datasets(&cfg)?;
    let providers = runner::build_providers(&cfg, &loaded)?;
    let guidelines = fs::read_to_string(&args.guidelines)
        .with_context(|| format!("reading guidelines {}", args.guidelines.display()))?;
    let client = LlmClient::new(RetryPolicy {
        max_attempts: cfg.execution.max_attempts,
        ..RetryPolicy::default()
    });
    let kb = knowledge::extract_knowledge(
        &client,
        &providers[&args.provider],
        &template_for(&cfg)?,
        loaded[0].data.schema(),
        &guidelines,
    )
    .await?;
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent)?;
    }
    knowledge::store_knowledge(&kb, &args.out)?;
    Ok(kb)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunOutcome {
    Planned(ExperimentPlan),
    Executed { run_dir: PathBuf, summary: RunSummary },
}

pub async fn run(args: &RunArgs) -> Result<RunOutcome> {
    let mut cfg = RunConfig::load(&args.config)?;
    if !args.datasets.is_empty() {
        cfg.retain_datasets(&args.datasets)?;
    }
    if !args.providers.is_empty() {
        cfg.retain_providers(&args.providers)?;
    }
    if let Some(seeds) = &args.seed_list {
        cfg.seeds = seeds.clone();
    }
    if let Some(id) = &args.run_id {
        cfg.run_id = id.clone();
    }
    cfg.validate()?;
    let plan = runner::plan_experiments(&cfg)?;
    let template = template_for(&cfg)?;
    let datasets = runner::load_datasets(&cfg)?;
    if args.dry_run {
        return Ok(RunOutcome::Planned(plan));
    }
    let providers = runner::build_providers(&cfg, &datasets)?;
    let results_root = args.workspace.join(&cfg.execution.results_dir);
    let cache_dir = args.workspace.join(&cfg.execution.cache_dir);
    let store = ResultsStore::open(&results_root, &cfg.run_id)?;
    let cache = ResponseCache::open(&cache_dir).with_context(|| format!("opening cache {}", cache_dir.display()))?;
    let harness = Harness::new(plan, datasets, providers, store)?
        .with_template(template)
        .with_retry(RetryPolicy {
            max_attempts: cfg.execution.max_attempts,
            ..RetryPolicy::default()
        })
        .with_cache(Arc::new(cache))
        .with_trial_concurrency(cfg.execution.trial_concurrency);
    let summary = harness.execute().await?;
    Ok(RunOutcome::Executed {
        run_dir: harness.store().dir().to_owned(),
        summary,
    })
}

/// Reads JSONL prediction records written outside the harness.
pub fn load_baseline(path: &Path) -> Result<Vec<PredictionRecord>> {
    read_records(path).with_context(|| format!("reading baseline {}", path.display()))
}

pub fn report(args: &ReportArgs) -> Result<ReportFiles> {
    let results_dir = match &args.config {
        Some(c) => RunConfig::load(c)?.execution.results_dir,
        None => PathBuf::from("results"),
    };
    let run_dir = args.workspace.join(results_dir).join(&args.run_id);
    if !run_dir.is_dir() {
        bail!("no results for run {:?} under {}", args.run_id, run_dir.display());
    }
    let store = ResultsStore::existing(&run_dir)?;
    let manifest: Option<RunManifest> = match fs::read_to_string(store.manifest_path()) {
        Ok(body) => Some(serde_json::from_str(&body).context("parsing run manifest")?),
        Err(_) => {
            log::warn!("{} has no manifest; label lists are inferred from records", run_dir.display());
            None
        }
    };
    if manifest.as_ref().is_some_and(|m| m.finished_at.is_none()) {
        log::warn!("run {:?} did not finish; reporting the records written so far", args.run_id);
    }
    let keep = |r: &PredictionRecord| args.datasets.is_empty() || args.datasets.contains(&r.dataset);
    let records: Vec<PredictionRecord> = store.load_all()?.into_iter().filter(keep).collect();
    let mut baseline = Vec::new();
    for path in &args.baselines {
        baseline.extend(load_baseline(path)?.into_iter().filter(keep));
    }
    let labels: LabelSets = manifest.as_ref().map(report::labels_from_manifest).unwrap_or_default();
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.workspace.join("reports").join(&args.run_id));
    Ok(report::write_report(&records, &baseline, &labels, manifest.as_ref(), &out)?)
}

/// Runs a parsed command and prints its summary.
pub async fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ValidateData(args) => {
            for c in validate_data(&args)? {
                println!(
                    "{}: task {:?}, {} examples, knowledge {}",
                    c.name,
                    c.task_name,
                    c.n_examples,
                    if c.has_knowledge { "present" } else { "absent" }
                );
                for (label, n) in &c.label_counts {
                    println!("  {label}: {n}");
                }
                if c.dropped_on_threshold > 0 {
                    println!("  dropped on threshold: {}", c.dropped_on_threshold);
                }
            }
        }
        Command::ExtractKnowledge(args) => {
            let kb = extract_knowledge(&args).await?;
            println!("wrote {} definitions to {}", kb.entries().len(), args.out.display());
        }
        Command::Run(args) => match run(&args).await? {
            RunOutcome::Planned(plan) => {
                println!(
                    "run {:?}: {} datasets x {} providers x {} variants x {} seeds = {} trials",
                    plan.run_id,
                    plan.datasets.len(),
                    plan.providers.len(),
                    plan.variants.len(),
                    plan.seeds.len(),
                    plan.trials.len()
                );
                for t in &plan.trials {
                    println!("  {}", t.trial_id);
                }
            }
            RunOutcome::Executed { run_dir, summary } => {
                println!(
                    "{}: {}/{} trials complete, {} records written, {} resumed, {} provider calls",
                    run_dir.display(),
                    summary.trials_completed,
                    summary.trials_total,
                    summary.records_written,
                    summary.records_skipped,
                    summary.provider_calls
                );
                for (trial, err) in &summary.trials_failed {
                    println!("  failed {trial}: {err}");
                }
                if !summary.trials_failed.is_empty() {
                    bail!("{} trials failed", summary.trials_failed.len());
                }
            }
        },
        Command::Report(args) => {
            let files = report(&args)?;
            for f in &files.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(())
}
