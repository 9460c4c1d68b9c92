//! Draws class-balanced few-shot exemplars from an imbalanced pool.
//!
//! cargo run --example balanced_shots

use lecbench::corpus::{Dataset, Example, LabelSchema, TaskKind};
use lecbench::sampler;

fn main() -> anyhow::Result<()> {
    let schema = LabelSchema::new(
        "Cognitive Presence Classification",
        TaskKind::Cognition,
        ["Triggering Event", "Exploration", "Integration", "Resolution", "Other"],
    )?;
    // 120 / 60 / 15 / 3 / 2 examples per class
    let stock = [120, 60, 15, 3, 2];
    let mut examples = Vec::new();
    for (label, n) in schema.labels().iter().zip(stock) {
        for i in 0..n {
            examples.push(Example::new(format!("{label}-{i}"), format!("{label} post {i}"), label.as_str()));
        }
    }
    let pool = Dataset::new(schema, examples)?;
    println!("pool: {:?}", pool.label_counts());

    for n in [1, 5, 12, 20] {
        println!("\n{n} shots, quotas {:?}", sampler::quotas(&stock, n));
        for seed in [13, 42] {
            let set = sampler::rus_select(&pool, n, seed)?;
            let ids: Vec<&str> = set.ids().collect();
            println!("  seed {seed}: {ids:?}");
        }
    }
    Ok(())
}
