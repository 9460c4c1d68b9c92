//! Label schemas, labeled datasets, preprocessing rules and seeded splits.
//!
//! Datasets are JSONL files with one `{"id", "text", "label"}` record per
//! line. Raw score files (`{"id", "text", "score"}`) are turned into labeled
//! datasets by [`load_scored`] using the urgency or sentiment threshold rules.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use num_rational::Ratio;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stream};

pub const HIGH_URGENCY: &str = "High_urgency";
pub const LOW_URGENCY: &str = "Low_urgency";
pub const POSITIVE: &str = "Positive";
pub const NEGATIVE: &str = "Negative";

/// Scores at or above this value are high urgency; sentiment scores strictly
/// below are negative and strictly above are positive.
pub const SCORE_THRESHOLD: f64 = 4.0;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: no records")]
    NoRecords { path: PathBuf },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: label {label:?} is not in the schema")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: empty text")]
    EmptyText { line: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("score is not finite: {0}")]
    NonFiniteScore(f64),
    #[error("invalid fraction: {0}")]
    InvalidFraction(String),
    #[error("dataset of {size} examples is too small for non-empty {splits} splits")]
    TooSmall { size: usize, splits: usize },
}

/// Which learning-engagement aspect a task covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Behavior,
    Emotion,
    Cognition,
}

impl TaskKind {
    /// Noun used in the task claim ("assign a <noun> label").
    pub fn label_noun(self) -> &'static str {
        match self {
            TaskKind::Behavior => "behavior",
            TaskKind::Emotion => "emotion",
            TaskKind::Cognition => "cognitive",
        }
    }
}

/// Case- and separator-insensitive form of a label used for matching:
/// lowercase, `_`/`-` read as spaces, runs of whitespace collapsed.
pub fn fold_label(label: &str) -> String {
    label
        .to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Deserialize)]
struct RawSchema {
    task_name: String,
    task_kind: TaskKind,
    labels: Vec<String>,
    #[serde(default)]
    definitions: Option<IndexMap<String, String>>,
    #[serde(default)]
    subject: Option<String>,
}

/// A task's name, its ordered label list and optional label definitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct LabelSchema {
    task_name: String,
    task_kind: TaskKind,
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    definitions: Option<IndexMap<String, String>>,
    /// What the definitions describe, e.g. "Epistemic Emotions". Defaults to
    /// the task name.
    #[serde(skip_serializing_if = "Option::is_none")]
    subject: Option<String>,
}

impl TryFrom<RawSchema> for LabelSchema {
    type Error = CorpusError;

    fn try_from(raw: RawSchema) -> Result<Self, Self::Error> {
        let mut schema = LabelSchema::new(raw.task_name, raw.task_kind, raw.labels)?;
        schema.subject = raw.subject;
        if let Some(defs) = raw.definitions {
            schema = schema.with_definitions(defs)?;
        }
        Ok(schema)
    }
}

impl LabelSchema {
    pub fn new(
        task_name: impl Into<String>,
        task_kind: TaskKind,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, CorpusError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(CorpusError::InvalidSchema("label list is empty".into()));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.trim().is_empty() {
                return Err(CorpusError::InvalidSchema("empty label name".into()));
            }
            if !seen.insert(fold_label(label)) {
                return Err(CorpusError::InvalidSchema(format!(
                    "label {label:?} is not distinct after case-folding"
                )));
            }
        }
        Ok(Self {
            task_name: task_name.into(),
            task_kind,
            labels,
            definitions: None,
            subject: None,
        })
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn with_definitions(mut self, definitions: IndexMap<String, String>) -> Result<Self, CorpusError> {
        let keys: HashSet<&str> = definitions.keys().map(String::as_str).collect();
        let labels: HashSet<&str> = self.labels.iter().map(String::as_str).collect();
        if keys != labels {
            return Err(CorpusError::InvalidSchema(
                "definition keys must equal the label set".into(),
            ));
        }
        let ordered = self
            .labels
            .iter()
            .map(|l| (l.clone(), definitions[l.as_str()].clone()))
            .collect();
        self.definitions = Some(ordered);
        Ok(self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        serde_json::from_str(&raw).map_err(|e| CorpusError::InvalidSchema(format!("{}: {e}", path.display())))
    }

    pub fn task_name(&self) -> &str {
        &self.task_name
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task_kind
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn definitions(&self) -> Option<&IndexMap<String, String>> {
        self.definitions.as_ref()
    }

    pub fn subject(&self) -> &str {
        self.subject.as_deref().unwrap_or(&self.task_name)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Maps a case/separator variant of a label to its canonical spelling.
    pub fn resolve(&self, candidate: &str) -> Option<&str> {
        let folded = fold_label(candidate);
        self.labels
            .iter()
            .find(|l| fold_label(l) == folded)
            .map(String::as_str)
    }
}

/// One text with its gold label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub gold: String,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold: gold.into(),
        }
    }
}

/// An ordered collection of examples sharing one schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    schema: Arc<LabelSchema>,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(schema: impl Into<Arc<LabelSchema>>, examples: Vec<Example>) -> Result<Self, CorpusError> {
        let schema = schema.into();
        let mut ids = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            let line = i + 1;
            if ex.text.trim().is_empty() {
                return Err(CorpusError::EmptyText { line });
            }
            if !schema.contains(&ex.gold) {
                return Err(CorpusError::UnknownLabel {
                    line,
                    label: ex.gold.clone(),
                });
            }
            if !ids.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line,
                    id: ex.id.clone(),
                });
            }
        }
        Ok(Self { schema, examples })
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<LabelSchema> {
        Arc::clone(&self.schema)
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    /// Per-label counts in schema order.
    pub fn label_counts(&self) -> Vec<(String, usize)> {
        self.schema
            .labels()
            .iter()
            .map(|l| (l.clone(), self.examples.iter().filter(|e| &e.gold == l).count()))
            .collect()
    }

    fn with_indices(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Examples whose id is not in `exclude`, in original order.
    pub fn without(&self, exclude: &Dataset) -> Dataset {
        let ids: HashSet<&str> = exclude.ids().collect();
        Dataset {
            schema: Arc::clone(&self.schema),
            examples: self
                .examples
                .iter()
                .filter(|e| !ids.contains(e.id.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Writes the dataset in the JSONL record format read by [`load_dataset`].
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let io = |source| CorpusError::Io {
            path: path.to_owned(),
            source,
        };
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
        for ex in &self.examples {
            let line = serde_json::to_string(&LabeledRecord {
                id: Some(ex.id.clone()),
                text: ex.text.clone(),
                label: ex.gold.clone(),
            })
            .expect("record serializes");
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabeledRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    text: String,
    label: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoredRecord {
    #[serde(default)]
    id: Option<String>,
    text: String,
    score: f64,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(CorpusError::NoRecords { path: path.to_owned() });
    }
    Ok(lines)
}

fn check_and_push(
    ids: &mut HashSet<String>,
    examples: &mut Vec<Example>,
    line: usize,
    id: Option<String>,
    text: String,
    gold: String,
) -> Result<(), CorpusError> {
    let id = id.unwrap_or_else(|| line.to_string());
    let text = text.trim().to_owned();
    if text.is_empty() {
        return Err(CorpusError::EmptyText { line });
    }
    if !ids.insert(id.clone()) {
        return Err(CorpusError::DuplicateId { line, id });
    }
    examples.push(Example { id, text, gold });
    Ok(())
}

/// Loads a labeled JSONL dataset, preserving file order. Records without an
/// `id` get their 1-based line number as id.
pub fn load_dataset(path: impl AsRef<Path>, schema: impl Into<Arc<LabelSchema>>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let schema = schema.into();
    let mut ids = HashSet::new();
    let mut examples = Vec::new();
    for (line, raw) in read_lines(path)? {
        let record: LabeledRecord = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let gold = record.label.trim().to_owned();
        if !schema.contains(&gold) {
            return Err(CorpusError::UnknownLabel { line, label: gold });
        }
        check_and_push(&mut ids, &mut examples, line, record.id, record.text, gold)?;
    }
    Ok(Dataset { schema, examples })
}

/// Threshold rule for the urgency task.
pub fn apply_urgency_rule(score: f64) -> Result<&'static str, CorpusError> {
    if !score.is_finite() {
        return Err(CorpusError::NonFiniteScore(score));
    }
    Ok(if score >= SCORE_THRESHOLD { HIGH_URGENCY } else { LOW_URGENCY })
}

/// Threshold rule for the binary sentiment task. A score of exactly the
/// threshold has no label and the example is dropped.
pub fn apply_sentiment_rule(score: f64) -> Result<Option<&'static str>, CorpusError> {
    if !score.is_finite() {
        return Err(CorpusError::NonFiniteScore(score));
    }
    Ok(if score < SCORE_THRESHOLD {
        Some(NEGATIVE)
    } else if score > SCORE_THRESHOLD {
        Some(POSITIVE)
    } else {
        None
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreRule {
    Urgency,
    Sentiment,
}

impl ScoreRule {
    pub fn apply(self, score: f64) -> Result<Option<&'static str>, CorpusError> {
        match self {
            ScoreRule::Urgency => apply_urgency_rule(score).map(Some),
            ScoreRule::Sentiment => apply_sentiment_rule(score),
        }
    }
}

/// What [`load_scored`] did with the raw records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub records_read: usize,
    pub kept: usize,
    /// Records whose score fell exactly on the threshold (sentiment only).
    pub dropped_on_threshold: usize,
    pub dropped_ids: Vec<String>,
}

/// Loads a raw-score JSONL file and labels it with `rule`.
pub fn load_scored(
    path: impl AsRef<Path>,
    schema: impl Into<Arc<LabelSchema>>,
    rule: ScoreRule,
) -> Result<(Dataset, PreprocessReport), CorpusError> {
    let path = path.as_ref();
    let schema = schema.into();
    let mut ids = HashSet::new();
    let mut examples = Vec::new();
    let mut report = PreprocessReport::default();
    for (line, raw) in read_lines(path)? {
        report.records_read += 1;
        let record: ScoredRecord = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let Some(label) = rule.apply(record.score)? else {
            report.dropped_on_threshold += 1;
            report
                .dropped_ids
                .push(record.id.unwrap_or_else(|| line.to_string()));
            continue;
        };
        if !schema.contains(label) {
            return Err(CorpusError::UnknownLabel {
                line,
                label: label.to_owned(),
            });
        }
        check_and_push(&mut ids, &mut examples, line, record.id, record.text, label.to_owned())?;
    }
    report.kept = examples.len();
    Ok((Dataset { schema, examples }, report))
}

/// A non-negative rational, parsed from `"0.15"`, `"3/20"` or a TOML/JSON
/// number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self, CorpusError> {
        if denom == 0 {
            return Err(CorpusError::InvalidFraction(format!("{numer}/0")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn ratio(self) -> Ratio<u64> {
        self.0
    }

    /// `⌊self · n⌋`, computed exactly.
    pub fn floor_of(self, n: usize) -> usize {
        let n = n as u128;
        (n * *self.0.numer() as u128 / *self.0.denom() as u128) as usize
    }

    pub fn is_unit_interval_open(self) -> bool {
        *self.0.numer() > 0 && self.0 < Ratio::from_integer(1)
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for Fraction {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || CorpusError::InvalidFraction(s.to_owned());
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Fraction::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || (int.is_empty() && frac.is_empty()) {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Fraction::new(numer, denom)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        let text = match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s,
            // shortest round-trip formatting recovers the decimal literal
            Repr::Number(v) => format!("{v}"),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Train/validation/test fractions and the permutation seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Fraction,
    pub val: Fraction,
    pub test: Fraction,
    pub seed: u64,
    /// Split each class separately. Off by default.
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train: Fraction, val: Fraction, test: Fraction, seed: u64) -> Result<Self, CorpusError> {
        for f in [train, val, test] {
            if !f.is_unit_interval_open() {
                return Err(CorpusError::InvalidFraction(format!("{f} is not in (0, 1)")));
            }
        }
        if train.0 + val.0 + test.0 != Ratio::from_integer(1) {
            return Err(CorpusError::InvalidFraction(format!(
                "{train} + {val} + {test} does not sum to 1"
            )));
        }
        Ok(Self {
            train,
            val,
            test,
            seed,
            stratified: false,
        })
    }

    /// The 70/15/15 split.
    pub fn standard(seed: u64) -> Self {
        Self::new(
            Fraction::new(70, 100).unwrap(),
            Fraction::new(15, 100).unwrap(),
            Fraction::new(15, 100).unwrap(),
            seed,
        )
        .expect("70/15/15 is valid")
    }

    pub fn stratified(mut self, on: bool) -> Self {
        self.stratified = on;
        self
    }

    /// `(train, val, test)` sizes for `n` examples: floors for validation
    /// and test, remainder to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = self.val.floor_of(n);
        let test = self.test.floor_of(n);
        (n - val - test, val, test)
    }
}

/// Splits a dataset into disjoint train/validation/test parts.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset), CorpusError> {
    let n = dataset.len();
    let mut rng = rng::seeded(spec.seed, Stream::Split);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    if spec.stratified {
        for label in dataset.schema().labels() {
            let mut idx: Vec<usize> = (0..n).filter(|&i| &dataset.examples[i].gold == label).collect();
            idx.shuffle(&mut rng);
            let (tr, va, _) = spec.sizes(idx.len());
            train.extend_from_slice(&idx[..tr]);
            val.extend_from_slice(&idx[tr..tr + va]);
            test.extend_from_slice(&idx[tr + va..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let (tr, va, _) = spec.sizes(n);
        train.extend_from_slice(&idx[..tr]);
        val.extend_from_slice(&idx[tr..tr + va]);
        test.extend_from_slice(&idx[tr + va..]);
    }
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(CorpusError::TooSmall { size: n, splits: 3 });
    }
    Ok((
        dataset.with_indices(&train),
        dataset.with_indices(&val),
        dataset.with_indices(&test),
    ))
}

/// Draws `⌊fraction · N⌋` examples without replacement. The draw depends only
/// on `(seed, N)`, so every model evaluated with the same seed sees the same
/// subset.
pub fn sample_test_subset(dataset: &Dataset, fraction: Fraction, seed: u64) -> Result<Dataset, CorpusError> {
    if *fraction.0.numer() == 0 || fraction.0 > Ratio::from_integer(1) {
        return Err(CorpusError::InvalidFraction(format!("{fraction} is not in (0, 1]")));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng::seeded(seed, Stream::TestSubset));
    idx.truncate(fraction.floor_of(dataset.len()));
    Ok(dataset.with_indices(&idx))
}
