//! Turns raw urgency scores into labels and draws a seeded test subset.
//!
//! cargo run --example preprocess_scores

use std::path::Path;

use lecbench::corpus::{self, Fraction, LabelSchema, ScoreRule, SplitSpec};

fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = LabelSchema::load(data.join("schemas/urgency.json"))?;
    for score in [1.0, 3.5, 4.0, 6.5] {
        println!("urgency score {score} -> {}", corpus::apply_urgency_rule(score)?);
    }
    for score in [2.5, 4.0, 5.5] {
        println!("sentiment score {score} -> {:?}", corpus::apply_sentiment_rule(score)?);
    }

    let (dataset, report) = corpus::load_scored(data.join("toy/urgency_scores.jsonl"), schema, ScoreRule::Urgency)?;
    println!("\n{report:?}");
    println!("labels: {:?}", dataset.label_counts());

    let (train, val, test) = corpus::split(&dataset, &SplitSpec::standard(42))?;
    println!("split: {} train / {} val / {} test", train.len(), val.len(), test.len());
    let subset = corpus::sample_test_subset(&dataset, Fraction::new(3, 20)?, 42)?;
    println!("15% test subset, seed 42: {:?}", subset.ids().collect::<Vec<_>>());
    Ok(())
}
