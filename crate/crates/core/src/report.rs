//! Tables, curves, confusion matrices and error breakdowns computed from
//! prediction records.
//!
//! Every artifact is a pure function of the records plus each dataset's
//! label list. Metrics are aggregated at full precision and rounded half-up
//! to two decimals only when rendered.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, ConfusionMatrix, EvalSummary, MetricsError, SeedStat, WelchResult, INVALID_LABEL};
use crate::parse::ErrorClass;
use crate::runner::{PredictionRecord, RecordVariant, RunManifest, ShotCount};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no prediction records")]
    Empty,
    #[error("model {0:?} has AGKA results but no vanilla baseline")]
    MissingBaseline(String),
    #[error("no records for model {model:?} on dataset {dataset:?}")]
    MissingKey { model: String, dataset: String },
    #[error("dataset {0:?}: {1}")]
    Metrics(String, MetricsError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// Ordered label list per dataset.
pub type LabelSets = IndexMap<String, Vec<String>>;

/// Label lists recorded in a run manifest.
pub fn labels_from_manifest(manifest: &RunManifest) -> LabelSets {
    manifest
        .datasets
        .iter()
        .map(|(name, d)| (name.clone(), d.labels.clone()))
        .collect()
}

/// Label lists inferred from records: every gold or predicted label, in
/// order of first appearance. Labels never seen are necessarily missing.
pub fn labels_from_records(records: &[PredictionRecord]) -> LabelSets {
    let mut out: LabelSets = IndexMap::new();
    for r in records {
        let labels = out.entry(r.dataset.clone()).or_default();
        for l in [&r.gold, &r.scored_label] {
            if l != INVALID_LABEL && !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    out
}

/// Half-up rounding to two decimals.
pub fn fmt2(x: f64) -> String {
    let negative = x < 0.0;
    // Rounding at 1e-10 first absorbs binary noise such as 4.18999999...
    let scaled = (x.abs() * 1e10).round() as u128;
    let mut hundredths = scaled / 100_000_000;
    if scaled % 100_000_000 >= 50_000_000 {
        hundredths += 1;
    }
    let sign = if negative && hundredths != 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}

/// [`fmt2`] with an explicit `+` for non-negative values.
pub fn fmt2_signed(x: f64) -> String {
    let s = fmt2(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

/// A results-table row: one system under one prompt setting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub model: String,
    pub variant: RecordVariant,
    pub shots: ShotCount,
}

impl RowKey {
    pub fn new(model: impl Into<String>, variant: RecordVariant, shots: ShotCount) -> Self {
        Self {
            model: model.into(),
            variant,
            shots,
        }
    }

    fn of(r: &PredictionRecord) -> Self {
        Self::new(&r.provider, r.variant, r.shots)
    }

    pub fn label(&self) -> String {
        match self.variant {
            RecordVariant::Vanilla => format!("{} vanilla", self.model),
            RecordVariant::Agka => format!("{} agka-{}", self.model, self.shots),
            RecordVariant::Finetuned => format!("{} finetuned-{}", self.model, self.shots),
        }
    }
}

/// Seed-aggregated metrics for one (row, dataset) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub accuracy: SeedStat,
    pub weighted_f1: SeedStat,
    pub seeds: Vec<u64>,
    pub n_records: usize,
}

impl Cell {
    /// A cell holding given means, e.g. values quoted from a table.
    pub fn from_means(accuracy: f64, weighted_f1: f64) -> Self {
        Self {
            accuracy: SeedStat::from_values(vec![accuracy]).expect("one value"),
            weighted_f1: SeedStat::from_values(vec![weighted_f1]).expect("one value"),
            seeds: Vec::new(),
            n_records: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub key: RowKey,
    /// `None` where the row has no records for a dataset.
    pub cells: IndexMap<String, Option<Cell>>,
}

/// Best and runner-up rows of one column, with Welch's test between them
/// on per-seed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub best: usize,
    pub second: usize,
    pub test: Option<WelchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRanking {
    pub accuracy: Option<Ranking>,
    pub weighted_f1: Option<Ranking>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub datasets: Vec<String>,
    pub rows: Vec<ResultsRow>,
    pub rankings: IndexMap<String, ColumnRanking>,
}

fn rank(rows: &[ResultsRow], dataset: &str, metric: impl Fn(&Cell) -> &SeedStat) -> Option<Ranking> {
    let mut scored: Vec<(usize, &SeedStat)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.cells.get(dataset)?.as_ref().map(|c| (i, metric(c))))
        .collect();
    if scored.len() < 2 {
        return None;
    }
    // stable sort keeps row order among ties, so there is exactly one best
    scored.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean));
    let (best, a) = scored[0];
    let (second, b) = scored[1];
    let test = metrics::welch_t_test(&a.per_seed, &b.per_seed).ok();
    Some(Ranking { best, second, test })
}

impl ResultsTable {
    /// Builds a table from already aggregated rows and ranks each column.
    pub fn from_rows(datasets: Vec<String>, rows: Vec<ResultsRow>) -> Self {
        let rankings = datasets
            .iter()
            .map(|d| {
                (
                    d.clone(),
                    ColumnRanking {
                        accuracy: rank(&rows, d, |c| &c.accuracy),
                        weighted_f1: rank(&rows, d, |c| &c.weighted_f1),
                    },
                )
            })
            .collect();
        Self {
            datasets,
            rows,
            rankings,
        }
    }

    pub fn row(&self, key: &RowKey) -> Option<&ResultsRow> {
        self.rows.iter().find(|r| &r.key == key)
    }

    pub fn cell(&self, key: &RowKey, dataset: &str) -> Option<&Cell> {
        self.row(key)?.cells.get(dataset)?.as_ref()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| System |");
        for d in &self.datasets {
            let _ = write!(out, " {d} Acc | {d} F1 |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.datasets.len() * 2));
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "| {} |", row.key.label());
            for d in &self.datasets {
                let ranking = &self.rankings[d];
                for (cell_value, r) in [
                    (row.cells[d].as_ref().map(|c| c.accuracy.mean), &ranking.accuracy),
                    (row.cells[d].as_ref().map(|c| c.weighted_f1.mean), &ranking.weighted_f1),
                ] {
                    let text = match cell_value {
                        None => String::new(),
                        Some(v) => decorate(fmt2(v), i, r.as_ref()),
                    };
                    let _ = write!(out, " {text} |");
                }
            }
            out.push('\n');
        }
        out.push_str(
            "\nBest per column in **bold**, second in _italics_; † marks a best value that is \
             significantly above the second (Welch's t-test on per-seed values, p < 0.05).\n",
        );
        out
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model", "variant", "shots", "dataset", "accuracy", "accuracy_sd", "weighted_f1", "weighted_f1_sd", "n_seeds", "n_records", "best_f1", "second_f1",
            "f1_p_value",
        ])?;
        for (i, row) in self.rows.iter().enumerate() {
            for d in &self.datasets {
                let Some(cell) = &row.cells[d] else { continue };
                let r = self.rankings[d].weighted_f1.as_ref();
                w.write_record([
                    row.key.model.clone(),
                    row.key.variant.as_str().to_owned(),
                    row.key.shots.to_string(),
                    d.clone(),
                    fmt2(cell.accuracy.mean),
                    fmt2(cell.accuracy.sd),
                    fmt2(cell.weighted_f1.mean),
                    fmt2(cell.weighted_f1.sd),
                    cell.accuracy.per_seed.len().to_string(),
                    cell.n_records.to_string(),
                    r.is_some_and(|r| r.best == i).to_string(),
                    r.is_some_and(|r| r.second == i).to_string(),
                    r.filter(|r| r.best == i)
                        .and_then(|r| r.test)
                        .map(|t| format!("{:.6}", t.p))
                        .unwrap_or_default(),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
    }
}

fn decorate(text: String, row: usize, ranking: Option<&Ranking>) -> String {
    match ranking {
        Some(r) if r.best == row => {
            let dagger = if r.test.is_some_and(|t| t.significant_at_05 && t.t > 0.0) { "†" } else { "" };
            format!("**{text}**{dagger}")
        }
        Some(r) if r.second == row => format!("_{text}_"),
        _ => text,
    }
}

fn row_order(key: &RowKey, model_rank: &HashMap<String, usize>) -> (usize, RecordVariant, ShotCount) {
    (model_rank[&key.model], key.variant, key.shots)
}

fn summary_for(
    dataset: &str,
    labels: &[String],
    records: &[&PredictionRecord],
) -> Result<EvalSummary, ReportError> {
    let cm = ConfusionMatrix::from_pairs(labels.iter().cloned(), records.iter().map(|r| (&r.gold, &r.scored_label)))
        .map_err(|e| ReportError::Metrics(dataset.to_owned(), e))?;
    EvalSummary::from_matrix(&cm).map_err(|e| ReportError::Metrics(dataset.to_owned(), e))
}

fn dataset_order(records: &[PredictionRecord], labels: &LabelSets) -> Vec<String> {
    let mut out: Vec<String> = labels
        .keys()
        .filter(|d| records.iter().any(|r| &r.dataset == *d))
        .cloned()
        .collect();
    for r in records {
        if !out.contains(&r.dataset) {
            out.push(r.dataset.clone());
        }
    }
    out
}

fn labels_for<'a>(labels: &'a LabelSets, inferred: &'a LabelSets, dataset: &str) -> &'a [String] {
    labels
        .get(dataset)
        .or_else(|| inferred.get(dataset))
        .map_or(&[], Vec::as_slice)
}

/// Per-(row, dataset) cells: per-seed summaries aggregated over seeds.
pub fn results_table(records: &[PredictionRecord], labels: &LabelSets) -> Result<ResultsTable, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let inferred = labels_from_records(records);
    let datasets = dataset_order(records, labels);
    let mut model_rank: HashMap<String, usize> = HashMap::new();
    let mut groups: BTreeMap<(RowKey, String), BTreeMap<u64, Vec<&PredictionRecord>>> = BTreeMap::new();
    for r in records {
        let next = model_rank.len();
        model_rank.entry(r.provider.clone()).or_insert(next);
        groups
            .entry((RowKey::of(r), r.dataset.clone()))
            .or_default()
            .entry(r.seed)
            .or_default()
            .push(r);
    }

    let mut rows: IndexMap<RowKey, IndexMap<String, Option<Cell>>> = IndexMap::new();
    for ((key, dataset), by_seed) in &groups {
        let ds_labels = labels_for(labels, &inferred, dataset);
        let summaries = by_seed
            .values()
            .map(|recs| summary_for(dataset, ds_labels, recs))
            .collect::<Result<Vec<_>, _>>()?;
        let agg = metrics::aggregate(&summaries).map_err(|e| ReportError::Metrics(dataset.clone(), e))?;
        let cell = Cell {
            accuracy: agg.accuracy,
            weighted_f1: agg.weighted_f1,
            seeds: by_seed.keys().copied().collect(),
            n_records: by_seed.values().map(Vec::len).sum(),
        };
        rows.entry(key.clone()).or_default().insert(dataset.clone(), Some(cell));
    }
    let mut rows: Vec<ResultsRow> = rows
        .into_iter()
        .map(|(key, mut cells)| {
            for d in &datasets {
                if !cells.contains_key(d) {
                    log::warn!("no results for {} on {d}; leaving the cell blank", key.label());
                    cells.insert(d.clone(), None);
                }
            }
            cells.sort_by_cached_key(|d, _| datasets.iter().position(|x| x == d));
            ResultsRow { key, cells }
        })
        .collect();
    rows.sort_by_key(|r| row_order(&r.key, &model_rank));
    Ok(ResultsTable::from_rows(datasets, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    /// Zero-shot AGKA against vanilla.
    Knowledge,
    /// The best few-shot AGKA setting (by weighted F1, per dataset) against
    /// vanilla.
    FewShot,
}

/// Metric pair for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub weighted_f1: f64,
}

impl Scores {
    fn of(cell: &Cell) -> Self {
        Self {
            accuracy: cell.accuracy.mean,
            weighted_f1: cell.weighted_f1.mean,
        }
    }
}

/// `augmented - base`, metric by metric.
pub fn gain(base: Scores, augmented: Scores) -> Scores {
    Scores {
        accuracy: augmented.accuracy - base.accuracy,
        weighted_f1: augmented.weighted_f1 - base.weighted_f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub kind: AblationKind,
    pub base: IndexMap<String, Scores>,
    pub augmented: IndexMap<String, Scores>,
    /// Shot count behind each augmented value.
    pub augmented_shots: IndexMap<String, ShotCount>,
    pub gain: IndexMap<String, Scores>,
    /// Mean gain over the datasets in `gain`.
    pub average_gain: Scores,
}

fn mean_scores<'a>(values: impl Iterator<Item = &'a Scores>) -> Scores {
    let (mut acc, mut f1, mut n) = (0.0, 0.0, 0usize);
    for s in values {
        acc += s.accuracy;
        f1 += s.weighted_f1;
        n += 1;
    }
    if n == 0 {
        return Scores {
            accuracy: 0.0,
            weighted_f1: 0.0,
        };
    }
    Scores {
        accuracy: acc / n as f64,
        weighted_f1: f1 / n as f64,
    }
}

/// Knowledge and few-shot gains over vanilla for every prompted model.
pub fn ablation_table(table: &ResultsTable) -> Result<Vec<AblationRow>, ReportError> {
    let mut models: Vec<&str> = Vec::new();
    for r in &table.rows {
        if r.key.variant != RecordVariant::Finetuned && !models.contains(&r.key.model.as_str()) {
            models.push(&r.key.model);
        }
    }
    let mut out = Vec::new();
    for model in models {
        let agka: Vec<&ResultsRow> = table
            .rows
            .iter()
            .filter(|r| r.key.model == model && r.key.variant == RecordVariant::Agka)
            .collect();
        if agka.is_empty() {
            continue;
        }
        let vanilla = table
            .row(&RowKey::new(model, RecordVariant::Vanilla, ShotCount::Count(0)))
            .ok_or_else(|| ReportError::MissingBaseline(model.to_owned()))?;

        for kind in [AblationKind::Knowledge, AblationKind::FewShot] {
            let candidates: Vec<&ResultsRow> = agka
                .iter()
                .copied()
                .filter(|r| match kind {
                    AblationKind::Knowledge => r.key.shots == ShotCount::Count(0),
                    AblationKind::FewShot => r.key.shots != ShotCount::Count(0),
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let mut row = AblationRow {
                model: model.to_owned(),
                kind,
                base: IndexMap::new(),
                augmented: IndexMap::new(),
                augmented_shots: IndexMap::new(),
                gain: IndexMap::new(),
                average_gain: mean_scores(std::iter::empty()),
            };
            for d in &table.datasets {
                let Some(base) = vanilla.cells.get(d).and_then(Option::as_ref) else {
                    continue;
                };
                let best = candidates
                    .iter()
                    .filter_map(|r| r.cells.get(d)?.as_ref().map(|c| (r.key.shots, c)))
                    .fold(None::<(ShotCount, &Cell)>, |acc, (shots, c)| match acc {
                        Some((_, b)) if b.weighted_f1.mean >= c.weighted_f1.mean => acc,
                        _ => Some((shots, c)),
                    });
                let Some((shots, aug)) = best else { continue };
                let (b, a) = (Scores::of(base), Scores::of(aug));
                row.base.insert(d.clone(), b);
                row.augmented.insert(d.clone(), a);
                row.augmented_shots.insert(d.clone(), shots);
                row.gain.insert(d.clone(), gain(b, a));
            }
            row.average_gain = mean_scores(row.gain.values());
            out.push(row);
        }
    }
    Ok(out)
}

pub fn ablation_csv(rows: &[AblationRow], datasets: &[String]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_owned(), "row".to_owned()];
    for d in datasets {
        header.push(format!("{d}_acc"));
        header.push(format!("{d}_f1"));
    }
    header.extend(["avg_acc".to_owned(), "avg_f1".to_owned()]);
    w.write_record(&header)?;
    for row in rows {
        let kind = match row.kind {
            AblationKind::Knowledge => "knowledge",
            AblationKind::FewShot => "few_shot",
        };
        let lines: [(&str, &IndexMap<String, Scores>, bool); 3] = [
            ("vanilla", &row.base, false),
            (kind, &row.augmented, false),
            ("gain", &row.gain, true),
        ];
        for (name, values, signed) in lines {
            let render = |x: f64| if signed { fmt2_signed(x) } else { fmt2(x) };
            let mut rec = vec![row.model.clone(), format!("{kind}:{name}")];
            for d in datasets {
                match values.get(d) {
                    Some(s) => {
                        rec.push(render(s.accuracy));
                        rec.push(render(s.weighted_f1));
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            if signed {
                rec.push(fmt2_signed(row.average_gain.accuracy));
                rec.push(fmt2_signed(row.average_gain.weighted_f1));
            } else {
                rec.extend([String::new(), String::new()]);
            }
            w.write_record(&rec)?;
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// One point of a few-shot curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: String,
    pub model: String,
    pub variant: RecordVariant,
    pub shots: ShotCount,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub weighted_f1_sd: f64,
    pub n_seeds: usize,
}

/// Per-dataset F1 by shot count for AGKA prompts (`series = "prompt"`) and
/// fine-tuned baselines (`series = "baseline"`), ordered by series, model
/// and shots.
pub fn fewshot_curve(
    records: &[PredictionRecord],
    baseline_records: &[PredictionRecord],
    labels: &LabelSets,
) -> Result<IndexMap<String, Vec<CurvePoint>>, ReportError> {
    let mut curves: IndexMap<String, Vec<CurvePoint>> = IndexMap::new();
    let prompt: Vec<PredictionRecord> = records
        .iter()
        .filter(|r| r.variant == RecordVariant::Agka)
        .cloned()
        .collect();
    let baseline: Vec<PredictionRecord> = records
        .iter()
        .chain(baseline_records)
        .filter(|r| r.variant == RecordVariant::Finetuned)
        .cloned()
        .collect();
    for (series, recs) in [("prompt", prompt), ("baseline", baseline)] {
        if recs.is_empty() {
            continue;
        }
        let table = results_table(&recs, labels)?;
        for row in &table.rows {
            for (d, cell) in &row.cells {
                let Some(cell) = cell else { continue };
                curves.entry(d.clone()).or_default().push(CurvePoint {
                    series: series.to_owned(),
                    model: row.key.model.clone(),
                    variant: row.key.variant,
                    shots: row.key.shots,
                    accuracy: cell.accuracy.mean,
                    weighted_f1: cell.weighted_f1.mean,
                    weighted_f1_sd: cell.weighted_f1.sd,
                    n_seeds: cell.seeds.len().max(cell.weighted_f1.per_seed.len()),
                });
            }
        }
    }
    for points in curves.values_mut() {
        points.sort_by(|a, b| {
            (a.series != "prompt", &a.model, a.shots).cmp(&(b.series != "prompt", &b.model, b.shots))
        });
    }
    Ok(curves)
}

pub fn curve_csv(points: &[CurvePoint]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "model", "variant", "shots", "accuracy", "weighted_f1", "weighted_f1_sd", "n_seeds"])?;
    for p in points {
        w.write_record([
            p.series.clone(),
            p.model.clone(),
            p.variant.as_str().to_owned(),
            p.shots.to_string(),
            fmt2(p.accuracy),
            fmt2(p.weighted_f1),
            fmt2(p.weighted_f1_sd),
            p.n_seeds.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// Shares of each failure class among records that are not correct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub total_errors: usize,
    pub counts: IndexMap<ErrorClass, usize>,
    pub percentages: IndexMap<ErrorClass, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn error_breakdown<'a>(records: impl IntoIterator<Item = &'a PredictionRecord>) -> ErrorBreakdown {
    let mut counts: IndexMap<ErrorClass, usize> = ErrorClass::FAILURES.iter().map(|&c| (c, 0)).collect();
    for r in records {
        if let Some(c) = counts.get_mut(&r.error_class) {
            *c += 1;
        }
    }
    let total: usize = counts.values().sum();
    let percentages = counts
        .iter()
        .map(|(&c, &n)| (c, if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 }))
        .collect();
    ErrorBreakdown {
        total_errors: total,
        counts,
        percentages,
        note: (total == 0).then(|| "no error records".to_owned()),
    }
}

/// Breakdown over all records, then per model.
pub fn errors_csv(records: &[PredictionRecord]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scope".to_owned(), "total_errors".to_owned()];
    for c in ErrorClass::FAILURES {
        header.push(format!("{}_pct", c.as_str()));
    }
    w.write_record(&header)?;
    let mut scopes: Vec<(String, ErrorBreakdown)> = vec![("all".into(), error_breakdown(records))];
    let mut models: Vec<&str> = Vec::new();
    for r in records {
        if !models.contains(&r.provider.as_str()) {
            models.push(&r.provider);
        }
    }
    for m in models {
        scopes.push((m.to_owned(), error_breakdown(records.iter().filter(|r| r.provider == m))));
    }
    for (scope, b) in scopes {
        let mut rec = vec![scope, b.total_errors.to_string()];
        rec.extend(b.percentages.values().map(|&p| fmt2(p)));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
}

/// Confusion matrix of a model's best prompt setting on a dataset, summed
/// over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub model: String,
    pub dataset: String,
    pub setting: RowKey,
    pub matrix: ConfusionMatrix,
}

impl ConfusionReport {
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        self.matrix.row_normalized()
    }

    /// Row-normalized percentage for one cell.
    pub fn percent(&self, gold: &str, predicted: &str) -> Option<f64> {
        let g = self.matrix.labels().iter().position(|l| l == gold)?;
        let p = self.matrix.predicted_axis().iter().position(|l| *l == predicted)?;
        Some(self.row_percentages()[g][p])
    }

    /// Long format: `gold,predicted,count,row_percent`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["gold", "predicted", "count", "row_percent"])?;
        let pct = self.row_percentages();
        let axis = self.matrix.predicted_axis();
        for (g, gold) in self.matrix.labels().iter().enumerate() {
            for (p, predicted) in axis.iter().enumerate() {
                w.write_record([
                    gold.as_str(),
                    predicted,
                    &self.matrix.counts()[g][p].to_string(),
                    &fmt2(pct[g][p]),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8"))
    }
}

pub fn confusion_report(
    records: &[PredictionRecord],
    model: &str,
    dataset: &str,
    labels: &LabelSets,
) -> Result<ConfusionReport, ReportError> {
    let missing = || ReportError::MissingKey {
        model: model.to_owned(),
        dataset: dataset.to_owned(),
    };
    let subset: Vec<PredictionRecord> = records
        .iter()
        .filter(|r| r.provider == model && r.dataset == dataset)
        .cloned()
        .collect();
    if subset.is_empty() {
        return Err(missing());
    }
    let table = results_table(&subset, labels)?;
    let best = table
        .rows
        .iter()
        .filter_map(|r| r.cells.get(dataset)?.as_ref().map(|c| (&r.key, c.weighted_f1.mean)))
        .fold(None::<(&RowKey, f64)>, |acc, (k, f1)| match acc {
            Some((_, b)) if b >= f1 => acc,
            _ => Some((k, f1)),
        })
        .ok_or_else(missing)?
        .0
        .clone();
    let inferred = labels_from_records(&subset);
    let ds_labels = labels_for(labels, &inferred, dataset);
    let matrix = ConfusionMatrix::from_pairs(
        ds_labels.iter().cloned(),
        subset.iter().filter(|r| RowKey::of(r) == best).map(|r| (&r.gold, &r.scored_label)),
    )
    .map_err(|e| ReportError::Metrics(dataset.to_owned(), e))?;
    Ok(ConfusionReport {
        model: model.to_owned(),
        dataset: dataset.to_owned(),
        setting: best,
        matrix,
    })
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub files: Vec<PathBuf>,
}

fn write_file(files: &mut ReportFiles, path: PathBuf, body: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| ReportError::Io {
            path: parent.to_owned(),
            message: e.to_string(),
        })?;
    }
    fs::write(&path, body).map_err(|e| ReportError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    files.files.push(path);
    Ok(())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ReportError + '_ {
    move |e| ReportError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes the full report directory:
///
/// ```text
/// results.md  results.csv  results.json  ablation.csv  errors.csv  manifest.json
/// curves/<dataset>.csv  confusion/<model>_<dataset>.csv
/// ```
///
/// `manifest` is copied verbatim when given.
pub fn write_report(
    records: &[PredictionRecord],
    baseline_records: &[PredictionRecord],
    labels: &LabelSets,
    manifest: Option<&RunManifest>,
    out_dir: &Path,
) -> Result<ReportFiles, ReportError> {
    let all: Vec<PredictionRecord> = records.iter().chain(baseline_records).cloned().collect();
    if all.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut files = ReportFiles::default();
    let table = results_table(&all, labels)?;

    let md = format!("# Results\n\n{}", table.to_markdown());
    write_file(&mut files, out_dir.join("results.md"), &md)?;
    let path = out_dir.join("results.csv");
    write_file(&mut files, path.clone(), &table.to_csv().map_err(csv_err(&path))?)?;
    let json = serde_json::to_string_pretty(&table).expect("table serializes");
    write_file(&mut files, out_dir.join("results.json"), &json)?;

    let ablation = match ablation_table(&table) {
        Ok(rows) => rows,
        Err(e @ ReportError::MissingBaseline(_)) => {
            log::warn!("skipping ablation: {e}");
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let path = out_dir.join("ablation.csv");
    write_file(&mut files, path.clone(), &ablation_csv(&ablation, &table.datasets).map_err(csv_err(&path))?)?;

    for (dataset, points) in fewshot_curve(records, baseline_records, labels)? {
        let path = out_dir.join("curves").join(format!("{}.csv", file_stem(&dataset)));
        write_file(&mut files, path.clone(), &curve_csv(&points).map_err(csv_err(&path))?)?;
    }

    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in &all {
        let pair = (r.provider.clone(), r.dataset.clone());
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    for (model, dataset) in pairs {
        let report = confusion_report(&all, &model, &dataset, labels)?;
        let path = out_dir
            .join("confusion")
            .join(format!("{}_{}.csv", file_stem(&model), file_stem(&dataset)));
        write_file(&mut files, path.clone(), &report.to_csv().map_err(csv_err(&path))?)?;
    }

    let path = out_dir.join("errors.csv");
    write_file(&mut files, path.clone(), &errors_csv(&all).map_err(csv_err(&path))?)?;

    if let Some(m) = manifest {
        let body = serde_json::to_string_pretty(m).expect("manifest serializes");
        write_file(&mut files, out_dir.join("manifest.json"), &body)?;
    }
    Ok(files)
}
