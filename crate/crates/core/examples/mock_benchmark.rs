//! Runs the toy benchmark against mock models and writes a report.
//!
//! cargo run --example mock_benchmark -- [workspace]

use std::path::{Path, PathBuf};

use lecbench::cli::{self, ReportArgs, RunArgs, RunOutcome};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let workspace = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lecbench-toy"));
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/configs/toy-mock.toml");

    let outcome = cli::run(&RunArgs {
        config,
        workspace: workspace.clone(),
        datasets: Vec::new(),
        providers: Vec::new(),
        dry_run: false,
        seed_list: None,
        run_id: None,
    })
    .await?;
    if let RunOutcome::Executed { run_dir, summary } = outcome {
        println!(
            "{}: {} records written, {} resumed, {} provider calls",
            run_dir.display(),
            summary.records_written,
            summary.records_skipped,
            summary.provider_calls
        );
    }

    let files = cli::report(&ReportArgs {
        workspace: workspace.clone(),
        run_id: "toy".into(),
        config: None,
        baselines: Vec::new(),
        datasets: Vec::new(),
        out: None,
    })?;
    println!("{}", std::fs::read_to_string(workspace.join("reports/toy/results.md"))?);
    println!("{} report files under {}", files.files.len(), workspace.join("reports/toy").display());
    Ok(())
}
