//! Renders the vanilla and AGKA prompts for one epistemic-emotion query.
//!
//! cargo run --example render_prompts

use std::path::Path;

use lecbench::corpus::{self, LabelSchema};
use lecbench::knowledge;
use lecbench::prompt::PromptTemplate;
use lecbench::sampler;

fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let schema = LabelSchema::load(data.join("schemas/epistemic.json"))?;
    let kb = knowledge::load_knowledge(data.join("knowledge/epistemic.json"), &schema)?;
    let dataset = corpus::load_dataset(data.join("toy/epistemic.jsonl"), schema.clone())?;
    let template = PromptTemplate::load(data.join("templates/agka-v1.toml"))?;

    let query = &dataset.examples()[0];
    let pool = dataset.without(&corpus::Dataset::new(schema.clone(), vec![query.clone()])?);
    let shots = sampler::rus_select(&pool, 5, 42)?;

    let vanilla = template.render_vanilla(&schema, &query.text)?;
    let agka = template.render_agka(&schema, &kb, &shots.shots, &query.text)?;
    println!("=== vanilla ({} chars) ===\n{}", vanilla.text.len(), vanilla.text);
    println!("\n=== AGKA 5-shot ({} chars) ===\n{}", agka.text.len(), agka.text);
    println!("\ncomponents: {:?}", agka.components());
    println!("prompt hash: {}", agka.hash());
    Ok(())
}
