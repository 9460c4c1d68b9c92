//! Computes accuracy, weighted F1 and per-class scores, aggregates over
//! seeds and compares two systems with Welch's t-test.
//!
//! cargo run --example metrics_and_ttest

use lecbench::metrics::{self, ConfusionMatrix, EvalSummary};

fn main() -> anyhow::Result<()> {
    let labels = ["Positive", "Negative"];
    let pairs = [
        ("Positive", "Positive"),
        ("Positive", "Positive"),
        ("Positive", "Negative"),
        ("Negative", "Negative"),
        ("Negative", "<invalid>"),
        ("Negative", "Negative"),
    ];
    let cm = ConfusionMatrix::from_pairs(labels, pairs)?;
    let summary = EvalSummary::from_matrix(&cm)?;
    println!("accuracy {:.2}  weighted F1 {:.2}", summary.accuracy, summary.weighted_f1);
    for (label, s) in &summary.per_class {
        println!("  {label}: P {:.3} R {:.3} F1 {:.3} (support {})", s.precision, s.recall, s.f1, s.support);
    }

    let prompt_f1 = [69.8, 71.2, 68.9, 70.4, 70.1];
    let baseline_f1 = [64.3, 66.0, 63.5, 65.2, 64.9];
    let per_seed: Vec<EvalSummary> = prompt_f1
        .iter()
        .map(|&f1| EvalSummary {
            accuracy: f1,
            weighted_f1: f1,
            per_class: Default::default(),
            n: 100,
        })
        .collect();
    let agg = metrics::aggregate(&per_seed)?;
    println!("\nprompt F1 over seeds: {:.2} +/- {:.2}", agg.weighted_f1.mean, agg.weighted_f1.sd);
    let t = metrics::welch_t_test(&prompt_f1, &baseline_f1)?;
    println!("Welch t = {:.3}, df = {:.2}, p = {:.2e}, significant: {}", t.t, t.df, t.p, t.significant_at_05);
    Ok(())
}
