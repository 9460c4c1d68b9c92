mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use lecbench::cli::{self, Cli, Command, ReportArgs, RunArgs, RunOutcome, ValidateArgs};

fn toy_config() -> PathBuf {
    common::data_dir().join("configs/toy-mock.toml")
}

fn run_args(workspace: &Path) -> RunArgs {
    RunArgs {
        config: toy_config(),
        workspace: workspace.to_owned(),
        datasets: Vec::new(),
        providers: Vec::new(),
        dry_run: false,
        seed_list: None,
        run_id: None,
    }
}

fn report_args(workspace: &Path, run_id: &str) -> ReportArgs {
    ReportArgs {
        workspace: workspace.to_owned(),
        run_id: run_id.into(),
        config: None,
        baselines: Vec::new(),
        datasets: Vec::new(),
        out: None,
    }
}

fn relative(files: &[PathBuf], root: &Path) -> Vec<String> {
    let mut out: Vec<String> = files
        .iter()
        .map(|f| f.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/"))
        .collect();
    out.sort();
    out
}

#[test]
fn validate_reports_label_counts() {
    let checks = cli::validate_data(&ValidateArgs {
        config: toy_config(),
        datasets: Vec::new(),
    })
    .unwrap();
    assert_eq!(checks.len(), 2);
    assert_eq!((checks[0].name.as_str(), checks[0].n_examples), ("epistemic", 60));
    assert!(checks[0].label_counts.iter().all(|(_, n)| *n == 10));
    assert_eq!((checks[1].name.as_str(), checks[1].n_examples), ("urgency", 40));
    assert!(checks.iter().all(|c| c.has_knowledge));
}

#[tokio::test]
async fn dry_run_expands_the_plan() {
    let ws = tempfile::tempdir().unwrap();
    let mut args = run_args(ws.path());
    args.dry_run = true;
    let RunOutcome::Planned(plan) = cli::run(&args).await.unwrap() else {
        panic!("dry run executed");
    };
    // 2 datasets x 3 providers x (vanilla + agka 0/1/5) x 3 seeds
    assert_eq!(plan.trials.len(), 2 * 3 * 4 * 3);
    assert!(!ws.path().join("results").exists());

    args.seed_list = Some(vec![1, 2]);
    args.datasets = vec!["urgency".into()];
    let RunOutcome::Planned(plan) = cli::run(&args).await.unwrap() else {
        panic!("dry run executed");
    };
    assert_eq!(plan.seeds, vec![1, 2]);
    assert_eq!(plan.trials.len(), 3 * 4 * 2);
    assert!(plan.trials.iter().all(|t| t.dataset == "urgency"));
}

#[tokio::test]
async fn run_then_report_writes_every_artifact() {
    let ws = tempfile::tempdir().unwrap();
    let RunOutcome::Executed { run_dir, summary } = cli::run(&run_args(ws.path())).await.unwrap() else {
        panic!("run did not execute");
    };
    assert_eq!(run_dir, ws.path().join("results/toy"));
    assert_eq!(summary.trials_completed, 72);
    assert!(summary.trials_failed.is_empty());
    assert_eq!(summary.records_written, 540);

    let files = cli::report(&report_args(ws.path(), "toy")).unwrap();
    let out = ws.path().join("reports/toy");
    let mut expected = vec![
        "ablation.csv".to_owned(),
        "curves/epistemic.csv".into(),
        "curves/urgency.csv".into(),
        "errors.csv".into(),
        "manifest.json".into(),
        "results.csv".into(),
        "results.json".into(),
        "results.md".into(),
    ];
    for model in ["oracle", "confuser", "rambler"] {
        for dataset in ["epistemic", "urgency"] {
            expected.push(format!("confusion/{model}_{dataset}.csv"));
        }
    }
    expected.sort();
    assert_eq!(relative(&files.files, &out), expected);
    for f in &files.files {
        assert!(fs::metadata(f).unwrap().len() > 0, "{} is empty", f.display());
    }

    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let oracle_rows: Vec<&str> = results.lines().filter(|l| l.starts_with("oracle,")).collect();
    assert_eq!(oracle_rows.len(), 8);
    assert!(oracle_rows.iter().all(|l| l.matches("100.00").count() == 2));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    let oracle = errors.lines().find(|l| l.starts_with("oracle,")).unwrap();
    assert!(oracle.starts_with("oracle,0,"));

    // a second report is byte-identical
    let before: Vec<Vec<u8>> = files.files.iter().map(|f| fs::read(f).unwrap()).collect();
    let again = cli::report(&report_args(ws.path(), "toy")).unwrap();
    assert_eq!(again, files);
    let after: Vec<Vec<u8>> = again.files.iter().map(|f| fs::read(f).unwrap()).collect();
    assert_eq!(before, after);

    // rerunning resumes everything
    let RunOutcome::Executed { summary, .. } = cli::run(&run_args(ws.path())).await.unwrap() else {
        panic!("run did not execute");
    };
    assert_eq!((summary.provider_calls, summary.records_skipped, summary.records_written), (0, 540, 0));
}

#[tokio::test]
async fn dataset_filter_limits_run_and_report() {
    let ws = tempfile::tempdir().unwrap();
    let mut args = run_args(ws.path());
    args.datasets = vec!["urgency".into()];
    args.run_id = Some("urgent".into());
    cli::run(&args).await.unwrap();
    let trials: Vec<String> = fs::read_dir(ws.path().join("results/urgent/trials"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(trials.len(), 36);
    assert!(trials.iter().all(|t| t.starts_with("urgency__")));

    let files = cli::report(&report_args(ws.path(), "urgent")).unwrap();
    let names = relative(&files.files, &ws.path().join("reports/urgent"));
    assert!(names.contains(&"curves/urgency.csv".to_owned()));
    assert!(names.iter().all(|n| !n.contains("epistemic")));
}

#[tokio::test]
async fn report_without_manifest_infers_labels() {
    let ws = tempfile::tempdir().unwrap();
    let mut args = run_args(ws.path());
    args.providers = vec!["oracle".into()];
    args.seed_list = Some(vec![13]);
    cli::run(&args).await.unwrap();
    fs::remove_file(ws.path().join("results/toy/manifest.json")).unwrap();

    let mut rargs = report_args(ws.path(), "toy");
    rargs.out = Some(ws.path().join("out"));
    let files = cli::report(&rargs).unwrap();
    let names = relative(&files.files, &ws.path().join("out"));
    assert!(names.contains(&"results.md".to_owned()));
    assert!(!names.contains(&"manifest.json".to_owned()));
}

#[tokio::test]
async fn report_on_unknown_run_fails() {
    let ws = tempfile::tempdir().unwrap();
    assert!(cli::report(&report_args(ws.path(), "nope")).is_err());
}

#[test]
fn arguments_parse() {
    let cli = Cli::try_parse_from([
        "lecbench",
        "run",
        "--config",
        "c.toml",
        "--seed-list",
        "1,2,3",
        "--dataset",
        "urgency",
        "--dataset",
        "epistemic",
        "--dry-run",
    ])
    .unwrap();
    let Command::Run(args) = cli.command else {
        panic!("not a run command");
    };
    assert_eq!(args.seed_list, Some(vec![1, 2, 3]));
    assert_eq!(args.datasets, vec!["urgency", "epistemic"]);
    assert!(args.dry_run);
    assert_eq!(args.workspace, PathBuf::from("."));

    let cli = Cli::try_parse_from(["lecbench", "report", "--run-id", "x", "--baseline", "a.jsonl"]).unwrap();
    assert!(matches!(cli.command, Command::Report(ReportArgs { ref baselines, .. }) if baselines.len() == 1));
    assert!(Cli::try_parse_from(["lecbench", "run"]).is_err());
}

#[test]
fn binary_validates_and_reports_errors() {
    let exe = env!("CARGO_BIN_EXE_lecbench");
    let ok = Process::new(exe)
        .args(["validate-data", "--config"])
        .arg(toy_config())
        .output()
        .unwrap();
    assert!(ok.status.success());
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.contains("epistemic: task \"Epistemic Emotion Classification\", 60 examples, knowledge present"));

    let bad = Process::new(exe)
        .args(["validate-data", "--config", "/definitely/missing.toml"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8(bad.stderr).unwrap().contains("error:"));
}
