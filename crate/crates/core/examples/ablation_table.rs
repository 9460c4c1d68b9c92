//! Builds a knowledge-gain ablation from quoted zero-shot scores.
//!
//! cargo run --example ablation_table

use lecbench::report::{self, Cell, ResultsRow, ResultsTable, RowKey};
use lecbench::runner::{RecordVariant, ShotCount};

fn main() -> anyhow::Result<()> {
    let datasets = ["urgency", "epistemic", "opinion"];
    let row = |variant, scores: [(f64, f64); 3]| ResultsRow {
        key: RowKey::new("GPT 4.0", variant, ShotCount::Count(0)),
        cells: datasets
            .iter()
            .zip(scores)
            .map(|(d, (acc, f1))| (d.to_string(), Some(Cell::from_means(acc, f1))))
            .collect(),
    };
    let table = ResultsTable::from_rows(
        datasets.iter().map(|d| d.to_string()).collect(),
        vec![
            row(RecordVariant::Vanilla, [(83.60, 78.18), (19.60, 19.83), (63.40, 62.08)]),
            row(RecordVariant::Agka, [(85.80, 82.37), (30.00, 34.97), (70.00, 69.79)]),
        ],
    );
    println!("{}", table.to_markdown());
    let rows = report::ablation_table(&table)?;
    print!("{}", report::ablation_csv(&rows, &table.datasets)?);
    for r in &rows {
        println!(
            "average gain for {}: {} Acc / {} F1",
            r.model,
            report::fmt2_signed(r.average_gain.accuracy),
            report::fmt2_signed(r.average_gain.weighted_f1)
        );
    }
    Ok(())
}
