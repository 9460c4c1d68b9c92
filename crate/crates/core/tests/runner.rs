mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use lecbench::corpus::Dataset;
use lecbench::llm::{MockRule, MockTransport, ResponseCache};
use lecbench::metrics::{self, ConfusionMatrix, EvalSummary};
use lecbench::parse::ErrorClass;
use lecbench::report::{self, LabelSets, RowKey};
use lecbench::runner::{Harness, PredictionRecord, RecordVariant, RunConfig, ShotCount};
use lecbench::INVALID_LABEL;

fn confuser(data: &Dataset) -> Arc<MockTransport> {
    MockTransport::new(MockRule::noisy_echo(
        [data],
        [
            ("Curiosity".to_owned(), vec![("Confusion".to_owned(), 0.4)]),
            ("Anxiety".to_owned(), vec![("Surprise".to_owned(), 0.3), ("Neutral".to_owned(), 0.2)]),
        ],
        7,
    ))
    .shared()
}

fn toy_harness(cfg: &RunConfig, dir: &std::path::Path, providers: Vec<(&str, Arc<MockTransport>, u32)>) -> Harness {
    let data = common::toy_epistemic();
    common::harness(
        cfg,
        vec![common::loaded("epistemic", data, Some(common::epistemic_knowledge()))],
        providers,
        dir,
    )
}

#[tokio::test]
async fn every_trial_scores_the_same_subset_for_its_seed() {
    let data = common::toy_epistemic();
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::mock_config("subsets", &["vanilla", "agka"], &[0, 5], &[13, 42]);
    let h = toy_harness(&cfg, dir.path(), vec![("echo", common::gold_echo([&data]), 4), ("noisy", confuser(&data), 4)]);
    let summary = h.execute().await.unwrap();
    assert!(summary.trials_failed.is_empty());
    assert_eq!(summary.trials_total, 2 * 3 * 2);

    let records = h.store().load_all().unwrap();
    let mut by_trial: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in &records {
        by_trial.entry(&r.trial_id).or_default().push(r);
    }
    assert_eq!(by_trial.len(), 12);
    for seed in [13, 42] {
        let subset = h.test_subset("epistemic", seed).unwrap();
        let expected: BTreeSet<&str> = subset.ids().collect();
        assert_eq!(expected.len(), cfg.test_fraction.floor_of(data.len()));
        for recs in by_trial.values().filter(|rs| rs[0].seed == seed) {
            let ids: BTreeSet<&str> = recs.iter().map(|r| r.example_id.as_str()).collect();
            assert_eq!(recs.len(), expected.len());
            assert_eq!(ids, expected);
        }
    }
    let subsets: HashSet<Vec<String>> = [13, 42]
        .iter()
        .map(|&s| h.test_subset("epistemic", s).unwrap().ids().map(str::to_owned).collect())
        .collect();
    assert_eq!(subsets.len(), 2, "different seeds drew the same subset");
}

#[tokio::test]
async fn shots_never_come_from_the_test_subset() {
    let data = common::toy_epistemic();
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::mock_config("shots", &["agka"], &[0, 1, 5], &[13, 42, 101]);
    let h = toy_harness(&cfg, dir.path(), vec![("echo", common::gold_echo([&data]), 1)]);
    for trial in &h.plan().trials {
        let test = h.test_subset(&trial.dataset, trial.seed).unwrap();
        let shots = h.shots_for(trial, &test).unwrap();
        let test_ids: HashSet<&str> = test.ids().collect();
        assert_eq!(shots.shots.len(), trial.variant.shots() as usize);
        assert!(shots.shots.iter().all(|s| !test_ids.contains(s.id.as_str())));
        // the same trial always gets the same shots
        assert_eq!(shots.shots, h.shots_for(trial, &test).unwrap().shots);
    }
}

#[tokio::test]
async fn reruns_produce_identical_records() {
    let data = common::toy_epistemic();
    let cfg = common::mock_config("repeat", &["vanilla", "agka"], &[0, 1], &[13, 42, 101]);
    let mut stores = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let h = toy_harness(&cfg, dir.path(), vec![("noisy", confuser(&data), 3)]).with_trial_concurrency(3);
        h.execute().await.unwrap();
        let recs: Vec<PredictionRecord> = h.store().load_all().unwrap().iter().map(PredictionRecord::without_volatile).collect();
        stores.push(recs);
    }
    assert!(!stores[0].is_empty());
    assert_eq!(stores[0], stores[1]);
    assert!(stores[0].iter().any(|r| r.error_class == ErrorClass::IncorrectAnswer));
}

#[tokio::test]
async fn warm_cache_needs_no_provider_calls() {
    let data = common::toy_epistemic();
    let dir = tempfile::tempdir().unwrap();
    let cache = Arc::new(ResponseCache::open(dir.path().join("cache")).unwrap());

    let cold_cfg = common::mock_config("cold", &["vanilla", "agka"], &[0, 5], &[13, 42]);
    let cold_mock = confuser(&data);
    let cold = toy_harness(&cold_cfg, &dir.path().join("results"), vec![("noisy", cold_mock.clone(), 4)])
        .with_cache(cache.clone());
    let cold_summary = cold.execute().await.unwrap();
    assert!(cold_summary.provider_calls > 0);
    assert_eq!(cold_summary.provider_calls, cold_mock.calls());

    let warm_cfg = common::mock_config("warm", &["vanilla", "agka"], &[0, 5], &[13, 42]);
    let warm_mock = confuser(&data);
    let warm = toy_harness(&warm_cfg, &dir.path().join("results"), vec![("noisy", warm_mock.clone(), 4)])
        .with_cache(cache);
    let warm_summary = warm.execute().await.unwrap();
    assert_eq!(warm_summary.provider_calls, 0);
    assert_eq!(warm_mock.calls(), 0);
    assert_eq!(warm_summary.records_written, cold_summary.records_written);

    let cold_records = cold.store().load_all().unwrap();
    let warm_records = warm.store().load_all().unwrap();
    assert!(warm_records.iter().all(|r| r.from_cache && r.run_id == "warm"));
    let strip = |r: &PredictionRecord| PredictionRecord {
        run_id: String::new(),
        ..r.without_volatile()
    };
    let a: Vec<_> = cold_records.iter().map(strip).collect();
    let b: Vec<_> = warm_records.iter().map(strip).collect();
    assert_eq!(a, b);
}

#[tokio::test]
async fn table_cells_aggregate_per_seed_summaries() {
    let data = common::toy_epistemic();
    let labels = data.schema().labels().to_vec();
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::mock_config("cells", &["vanilla", "agka"], &[0, 1], &[13, 42, 101]);
    let h = toy_harness(&cfg, dir.path(), vec![("noisy", confuser(&data), 4)]);
    h.execute().await.unwrap();
    let records = h.store().load_all().unwrap();
    let mut sets = LabelSets::new();
    sets.insert("epistemic".into(), labels.clone());
    let table = report::results_table(&records, &sets).unwrap();
    assert_eq!(table.rows.len(), 3);

    for row in &table.rows {
        let mut per_seed = Vec::new();
        for seed in [13, 42, 101] {
            let mut cm = ConfusionMatrix::new(labels.iter().cloned());
            for r in records.iter().filter(|r| RowKey::new(&r.provider, r.variant, r.shots) == row.key && r.seed == seed) {
                cm.record(&r.gold, &r.scored_label).unwrap();
            }
            per_seed.push(EvalSummary::from_matrix(&cm).unwrap());
        }
        let agg = metrics::aggregate(&per_seed).unwrap();
        let cell = row.cells["epistemic"].as_ref().unwrap();
        assert_eq!(cell.accuracy, agg.accuracy);
        assert_eq!(cell.weighted_f1, agg.weighted_f1);
        assert_eq!(cell.seeds, vec![13, 42, 101]);
        assert_eq!(cell.n_records, 3 * cfg.test_fraction.floor_of(data.len()));
    }
    let zero_shot = RowKey::new("noisy", RecordVariant::Agka, ShotCount::Count(0));
    assert!(table.cell(&zero_shot, "epistemic").is_some());
}

#[tokio::test]
async fn provider_failures_become_invalid_records() {
    let data = common::toy_epistemic();
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::mock_config("broken", &["vanilla"], &[], &[13]);
    // scripted mock without entries fails every call
    let broken = MockTransport::new(MockRule::script(Vec::<(String, String)>::new())).shared();
    let h = toy_harness(&cfg, dir.path(), vec![("broken", broken, 2)]);
    let summary = h.execute().await.unwrap();
    assert!(summary.trials_failed.is_empty());
    let records = h.store().load_all().unwrap();
    assert_eq!(records.len(), cfg.test_fraction.floor_of(data.len()));
    for r in &records {
        assert_eq!(r.error_class, ErrorClass::ProviderFailure);
        assert_eq!(r.scored_label, INVALID_LABEL);
        assert!(r.raw_output.is_none() && r.failure.is_some());
    }
}

#[tokio::test]
async fn agka_without_knowledge_fails_only_its_trials() {
    let data = common::toy_epistemic();
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::mock_config("noknow", &["vanilla", "agka"], &[0], &[13]);
    let h = common::harness(
        &cfg,
        vec![common::loaded("epistemic", data.clone(), None)],
        vec![("echo", common::gold_echo([&data]), 2)],
        dir.path(),
    );
    let summary = h.execute().await.unwrap();
    assert_eq!(summary.trials_completed, 1);
    assert_eq!(summary.trials_failed.len(), 1);
    assert!(summary.trials_failed[0].0.contains("agka"));
}
