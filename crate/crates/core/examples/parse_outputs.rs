//! Normalizes raw model outputs and classifies the resulting errors.
//!
//! cargo run --example parse_outputs

use std::path::Path;

use lecbench::corpus::LabelSchema;
use lecbench::parse;

fn main() -> anyhow::Result<()> {
    let schema = LabelSchema::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/schemas/epistemic.json"))?;
    let gold = "Curiosity";
    let outputs = [
        "Curiosity",
        "  curiosity.",
        "Label: Curiosity",
        "The emotion expressed here is Curiosity because the author asks a question.",
        "Curiosity, Confusion",
        "Confusion\nText: I can't believe!\nLabel: Surprise",
        "I would say this is mostly wonder.",
        "Confusion",
    ];
    println!("{:<70} {:<18} {:<12} error", "raw output", "parse", "scored");
    for raw in outputs {
        let outcome = parse::normalize(raw, &schema);
        let error = parse::classify_error(Some(&outcome), gold);
        println!(
            "{:<70} {:<18} {:<12} {}",
            format!("{raw:?}"),
            outcome.kind.as_str(),
            parse::scoring_label(Some(&outcome)),
            error.as_str()
        );
    }
    println!("{:<70} {:<18} {:<12} {}", "(provider failure)", "-", parse::scoring_label(None), parse::classify_error(None, gold).as_str());
    Ok(())
}
