//! Evaluate a trained model phase by phase, the way a held-out test meeting
//! is scored: per (scenario, subject) balanced accuracy, F1 and confusion
//! counts, pooled "Overall" rows and whole-recording rows.
//!
//! Run: `cargo run --release --example evaluate_phases`

use badgevad::features::{assemble_features, make_windows, FeatureSetId, WINDOW_FRAMES};
use badgevad::ingest::{pivot_volumes, rasterize_labels};
use badgevad::models::{build_model, Arch, ArchSpec};
use badgevad::pipeline::{class_weights, evaluate_phases, train, PhaseAnnotations};
use badgevad::simulate::{simulate_phased, Scenario, SimConfig};

fn main() -> badgevad::Result<()> {
    // one continuous recording: a normal phase, then pairwise discussions,
    // then pairwise discussions with television noise
    let config = SimConfig { n_badges: 4, seed: 21, ..SimConfig::default() };
    let (output, spans) = simulate_phased(
        &config,
        &[
            (Scenario::Normal, 180.0),
            (Scenario::OneOnOne, 180.0),
            (Scenario::OneOnOneTv, 180.0),
        ],
    )?;
    let volumes = pivot_volumes(&output.samples)?;
    let labels = rasterize_labels(&output.labels, &volumes)?;

    // quick training pass on the first badge's windows
    let primary = volumes.badge_ids[0].clone();
    let features = assemble_features(&volumes, &primary, FeatureSetId::SetB)?;
    let label_col = labels.column(labels.badge_index(&primary).unwrap());
    let train_set = make_windows(&features, &label_col, WINDOW_FRAMES, 4)?;
    let weights = class_weights(&train_set.labels)?;
    let mut model = build_model(ArchSpec {
        arch: Arch::CnnLstm,
        feature_set: FeatureSetId::SetB,
        normalized: false,
        seed: 9,
    });
    train(&mut model, &train_set, 10, 4000, weights, 13)?;

    // every subject shares the same phase timeline here
    let subjects: Vec<String> = volumes.badge_ids.clone();
    let annotations: PhaseAnnotations =
        subjects.iter().map(|s| (s.clone(), spans.clone())).collect();
    let table = evaluate_phases(&model, &volumes, &labels, &annotations, &subjects, 0.5)?;

    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "{:<16} {:<8} {:>9} {:>7} {:>7} {:>6} {:>6} {:>6}",
        "scenario", "subject", "bal. acc", "f1", "tn", "fp", "fn", "tp"
    );
    for cell in &table.cells {
        println!(
            "{:<16} {:<8} {:>9.3} {:>7.3} {:>7} {:>6} {:>6} {:>6}",
            cell.scenario,
            cell.subject,
            cell.metrics.balanced_accuracy,
            cell.metrics.f1,
            cell.cm.true_negatives,
            cell.cm.false_positives,
            cell.cm.false_negatives,
            cell.cm.true_positives,
        );
    }
    Ok(())
}
