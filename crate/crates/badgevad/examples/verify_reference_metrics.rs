//! Re-derive balanced accuracy and F1 from the shipped reference confusion
//! matrices and diff them against the published metrics table.
//!
//! Four published F1 values are internally inconsistent with their own
//! confusion matrices (three subject cells where the F1 column repeats the
//! balanced accuracy, and one pooled row); this tool finds exactly those.
//!
//! Run: `cargo run --release --example verify_reference_metrics`

use std::path::Path;

use badgevad::pipeline::{verify_metrics, ConfusionMatrix, ProvidedMetrics};

fn main() -> badgevad::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");

    let mut confusions = Vec::new();
    let mut reader = csv::Reader::from_path(data.join("reference_confusion.csv"))?;
    for record in reader.records() {
        let r = record?;
        confusions.push((
            r[0].to_string(),
            r[1].to_string(),
            ConfusionMatrix::new(
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
                r[4].parse().unwrap(),
                r[5].parse().unwrap(),
            ),
        ));
    }

    let mut provided = Vec::new();
    let mut reader = csv::Reader::from_path(data.join("reference_metrics.csv"))?;
    for record in reader.records() {
        let r = record?;
        provided.push(ProvidedMetrics {
            scenario: r[0].to_string(),
            subject: r[1].to_string(),
            balanced_accuracy: r[2].parse().unwrap(),
            f1: r[3].parse().unwrap(),
        });
    }

    let checks = verify_metrics(&confusions, &provided, 5e-4)?;
    let mut mismatches = 0;
    for check in &checks {
        if !check.passed {
            mismatches += 1;
            println!(
                "MISMATCH {:<28} {:<8} {:<18} published {:.3}, recomputed {:.6}",
                check.scenario, check.subject, check.metric, check.provided, check.recomputed
            );
        }
    }
    println!(
        "{} of {} values consistent within ±0.0005; {mismatches} mismatches found",
        checks.len() - mismatches,
        checks.len()
    );
    Ok(())
}
