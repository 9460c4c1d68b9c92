//! Confusion matrices, accuracy, per-class precision/recall/F1, weighted
//! F1, cross-seed aggregation and Welch's t-test.
//!
//! Percentages are kept at full precision; rounding happens when rendering.
//! Precision, recall and F1 use the 0/0 = 0 convention.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Predicted-side label for outputs that yield no usable label. Never a
/// gold label.
pub const INVALID_LABEL: &str = "<invalid>";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("gold label {0:?} is not in the schema")]
    UnknownGold(String),
    #[error("predicted label {0:?} is neither a schema label nor {INVALID_LABEL}")]
    UnknownPrediction(String),
    #[error("no records")]
    Empty,
    #[error("label sets differ")]
    LabelMismatch,
    #[error("each sample needs at least two values, got {0} and {1}")]
    SampleTooSmall(usize, usize),
    #[error("samples contain a non-finite value")]
    NonFinite,
}

/// Counts indexed `[gold][predicted]`. The predicted axis has one extra
/// column, last, for [`INVALID_LABEL`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let k = labels.len();
        Self {
            labels,
            counts: vec![vec![0; k + 1]; k],
        }
    }

    /// Builds a matrix from `(gold, predicted)` pairs.
    pub fn from_pairs<G, P, S>(
        labels: impl IntoIterator<Item = S>,
        pairs: impl IntoIterator<Item = (G, P)>,
    ) -> Result<Self, MetricsError>
    where
        G: AsRef<str>,
        P: AsRef<str>,
        S: Into<String>,
    {
        let mut cm = Self::new(labels);
        for (gold, predicted) in pairs {
            cm.record(gold.as_ref(), predicted.as_ref())?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, gold: &str, predicted: &str) -> Result<(), MetricsError> {
        let g = self.position(gold).ok_or_else(|| MetricsError::UnknownGold(gold.to_owned()))?;
        let p = if predicted == INVALID_LABEL {
            self.labels.len()
        } else {
            self.position(predicted)
                .ok_or_else(|| MetricsError::UnknownPrediction(predicted.to_owned()))?
        };
        self.counts[g][p] += 1;
        Ok(())
    }

    /// Adds `other` cell by cell.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if self.labels != other.labels {
            return Err(MetricsError::LabelMismatch);
        }
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, add) in row.iter_mut().zip(other_row) {
                *cell += add;
            }
        }
        Ok(())
    }

    fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Schema labels followed by [`INVALID_LABEL`].
    pub fn predicted_axis(&self) -> Vec<&str> {
        self.labels
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(INVALID_LABEL))
            .collect()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, gold: &str, predicted: &str) -> Option<u64> {
        let g = self.position(gold)?;
        let p = if predicted == INVALID_LABEL {
            self.labels.len()
        } else {
            self.position(predicted)?
        };
        Some(self.counts[g][p])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn invalid_count(&self) -> u64 {
        let k = self.labels.len();
        self.counts.iter().map(|row| row[k]).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Each row as percentages of its support; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let support: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if support == 0 { 0.0 } else { 100.0 * c as f64 / support as f64 })
                    .collect()
            })
            .collect()
    }
}

/// `100 * correct / n`.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = cm.total();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(100.0 * cm.trace() as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-class scores as fractions in `[0, 1]`, in label order.
pub fn per_class_prf(cm: &ConfusionMatrix) -> IndexMap<String, ClassScores> {
    cm.labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let tp = cm.counts[i][i] as f64;
            let predicted: u64 = cm.counts.iter().map(|row| row[i]).sum();
            let support = cm.support(i);
            let precision = ratio(tp, predicted as f64);
            let recall = ratio(tp, support as f64);
            let f1 = ratio(2.0 * precision * recall, precision + recall);
            (
                label.clone(),
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support,
                },
            )
        })
        .collect()
}

/// Support-weighted mean of per-class F1, as a percentage.
pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = cm.total();
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    let sum: f64 = per_class_prf(cm)
        .values()
        .map(|s| s.support as f64 * s.f1)
        .sum();
    Ok(100.0 * sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class: IndexMap<String, ClassScores>,
    pub n: u64,
}

impl EvalSummary {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Result<Self, MetricsError> {
        Ok(Self {
            accuracy: accuracy(cm)?,
            weighted_f1: weighted_f1(cm)?,
            per_class: per_class_prf(cm),
            n: cm.total(),
        })
    }
}

/// Mean and sample standard deviation of one metric over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStat {
    pub mean: f64,
    pub sd: f64,
    pub per_seed: Vec<f64>,
}

impl SeedStat {
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self {
            mean,
            sd,
            per_seed: values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub accuracy: SeedStat,
    pub weighted_f1: SeedStat,
    pub n_seeds: usize,
    /// Set when only one seed contributed, so `sd` is 0 by convention.
    pub single_seed: bool,
}

pub fn aggregate(per_seed: &[EvalSummary]) -> Result<AggregateSummary, MetricsError> {
    let acc = SeedStat::from_values(per_seed.iter().map(|s| s.accuracy).collect()).ok_or(MetricsError::Empty)?;
    let f1 = SeedStat::from_values(per_seed.iter().map(|s| s.weighted_f1).collect()).ok_or(MetricsError::Empty)?;
    Ok(AggregateSummary {
        accuracy: acc,
        weighted_f1: f1,
        n_seeds: per_seed.len(),
        single_seed: per_seed.len() == 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
    pub significant_at_05: bool,
    /// Both samples have zero variance; `t` is 0 or infinite and `p` is 1
    /// or 0.
    pub degenerate: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult, MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::SampleTooSmall(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let diff = ma - mb;

    if sa + sb == 0.0 {
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(WelchResult {
            t,
            p,
            df: na + nb - 2.0,
            significant_at_05: p < 0.05,
            degenerate: true,
        });
    }

    let t = diff / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa.powi(2) / (na - 1.0) + sb.powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive and finite");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult {
        t,
        p,
        df,
        significant_at_05: p < 0.05,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> ConfusionMatrix {
        let mut pairs = Vec::new();
        pairs.extend(std::iter::repeat_n(("A", "A"), 8));
        pairs.extend(std::iter::repeat_n(("A", "B"), 2));
        pairs.extend(std::iter::repeat_n(("B", "A"), 1));
        pairs.extend(std::iter::repeat_n(("B", "B"), 9));
        ConfusionMatrix::from_pairs(["A", "B"], pairs).unwrap()
    }

    #[test]
    fn hand_checked_two_by_two() {
        let cm = two_by_two();
        assert_eq!(accuracy(&cm).unwrap(), 85.0);
        let prf = per_class_prf(&cm);
        let a = prf["A"];
        assert!((a.precision - 8.0 / 9.0).abs() < 1e-12);
        assert!((a.recall - 0.8).abs() < 1e-12);
        assert!((a.f1 - 16.0 / 19.0).abs() < 1e-12);
        // B: precision 9/11, recall 0.9, F1 = 6/7
        let expected = 100.0 * (0.5 * 16.0 / 19.0 + 0.5 * 6.0 / 7.0);
        assert!((weighted_f1(&cm).unwrap() - expected).abs() < 1e-9);
        assert_eq!(format!("{:.2}", weighted_f1(&cm).unwrap()), "84.96");
    }

    #[test]
    fn invalid_column() {
        let cm = ConfusionMatrix::from_pairs(["Curiosity", "Confusion"], [("Curiosity", INVALID_LABEL), ("Confusion", "Confusion")]).unwrap();
        assert_eq!(cm.invalid_count(), 1);
        assert_eq!(cm.predicted_axis().last(), Some(&INVALID_LABEL));
        let all_invalid = ConfusionMatrix::from_pairs(["A", "B"], [("A", INVALID_LABEL), ("B", INVALID_LABEL)]).unwrap();
        assert_eq!(accuracy(&all_invalid).unwrap(), 0.0);
        assert_eq!(weighted_f1(&all_invalid).unwrap(), 0.0);
    }

    #[test]
    fn absent_class_and_errors() {
        let cm = ConfusionMatrix::from_pairs(["A", "B"], [("A", "A")]).unwrap();
        let b = per_class_prf(&cm)["B"];
        assert_eq!((b.precision, b.recall, b.f1, b.support), (0.0, 0.0, 0.0, 0));
        assert_eq!(weighted_f1(&cm).unwrap(), 100.0);
        assert_eq!(accuracy(&ConfusionMatrix::new(["A"])), Err(MetricsError::Empty));
        assert!(matches!(
            ConfusionMatrix::from_pairs(["A"], [(INVALID_LABEL, "A")]),
            Err(MetricsError::UnknownGold(_))
        ));
        assert!(matches!(
            ConfusionMatrix::from_pairs(["A"], [("A", "Z")]),
            Err(MetricsError::UnknownPrediction(_))
        ));
    }

    #[test]
    fn row_normalization() {
        let cm = ConfusionMatrix::from_pairs(["A", "B", "C"], [("A", "A"), ("A", "B"), ("A", INVALID_LABEL), ("B", "B")]).unwrap();
        let rows = cm.row_normalized();
        assert!((rows[0][0] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(rows[1], vec![0.0, 100.0, 0.0, 0.0]);
        assert_eq!(rows[2], vec![0.0; 4]);
    }

    #[test]
    fn aggregation() {
        let summary = |v: f64| EvalSummary {
            accuracy: v,
            weighted_f1: v,
            per_class: IndexMap::new(),
            n: 1,
        };
        let agg = aggregate(&[1.0, 2.0, 3.0, 4.0, 5.0].map(summary)).unwrap();
        assert_eq!(agg.accuracy.mean, 3.0);
        assert!((agg.accuracy.sd - 1.5811388300841898).abs() < 1e-12);
        let same = aggregate(&vec![summary(70.0); 5]).unwrap();
        assert_eq!((same.weighted_f1.mean, same.weighted_f1.sd), (70.0, 0.0));
        let one = aggregate(&[summary(70.0)]).unwrap();
        assert!(one.single_seed);
        assert_eq!(one.accuracy.sd, 0.0);
        assert_eq!(aggregate(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn welch_basics() {
        let a = [90.47, 94.37, 91.93, 94.47, 90.4];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let b = [83.6, 85.8, 87.8, 89.8, 90.4];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
        assert!(ab.significant_at_05);
    }

    #[test]
    fn welch_degenerate() {
        let r = welch_t_test(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p, 1.0);
        let r = welch_t_test(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!(r.degenerate && r.significant_at_05);
        assert_eq!(r.p, 0.0);
        assert_eq!(welch_t_test(&[1.0], &[1.0, 2.0]), Err(MetricsError::SampleTooSmall(1, 2)));
        assert_eq!(welch_t_test(&[1.0, f64::NAN], &[1.0, 2.0]), Err(MetricsError::NonFinite));
    }
}
