//! Train one configuration to convergence on simulated data, save the model,
//! reload it and run it over a fresh meeting.
//!
//! Run: `cargo run --release --example train_and_predict`

use badgevad::features::{assemble_features, make_windows, FeatureSetId, WindowDataset, WINDOW_FRAMES};
use badgevad::ingest::{pivot_volumes, rasterize_labels};
use badgevad::models::{build_model, Arch, ArchSpec, TrainedModel};
use badgevad::pipeline::{class_weights, confusion, metrics, train_to_convergence, ConvergenceConfig};
use badgevad::simulate::{simulate_meeting, Scenario, SimConfig};

fn windows_for(seed: u64, primary: &str) -> badgevad::Result<WindowDataset> {
    let config = SimConfig {
        n_badges: 4,
        duration_s: 240.0,
        seed,
        scenario: Scenario::Normal,
        ..SimConfig::default()
    };
    let output = simulate_meeting(&config)?;
    let volumes = pivot_volumes(&output.samples)?;
    let labels = rasterize_labels(&output.labels, &volumes)?;
    let features = assemble_features(&volumes, primary, FeatureSetId::SetB)?;
    let label_col = labels.column(labels.badge_index(primary).unwrap());
    make_windows(&features, &label_col, WINDOW_FRAMES, 4)
}

fn main() -> badgevad::Result<()> {
    let train_set = windows_for(1, "b00")?;
    println!("training windows: {}", train_set.len());

    let weights = class_weights(&train_set.labels)?;
    println!("class weights: negative {:.3}, positive {:.3}", weights.0, weights.1);

    let mut model = build_model(ArchSpec {
        arch: Arch::CnnLstm2,
        feature_set: FeatureSetId::SetB,
        normalized: false,
        seed: 5,
    });
    let config = ConvergenceConfig { max_epochs: 25, ..ConvergenceConfig::default() };
    let report = train_to_convergence(&mut model, &train_set, weights, 11, &config)?;
    println!(
        "converged after {} epochs (best training accuracy {:.4})",
        report.history.len(),
        model.meta.final_train_accuracy
    );

    let path = std::env::temp_dir().join("badgevad_example_model.bvm");
    model.save(std::fs::File::create(&path)?)?;
    let reloaded = TrainedModel::load(std::fs::File::open(&path)?)?;
    println!("model saved and reloaded: {}", path.display());

    // fresh meeting, unseen during training
    let test_set = windows_for(2, "b00")?;
    let probs = reloaded.forward(&test_set.samples)?;
    let cm = confusion(&probs, &test_set.labels, 0.5)?;
    let row = metrics(&cm)?;
    println!(
        "held-out meeting: balanced accuracy {:.3}, F1 {:.3} (tn={} fp={} fn={} tp={})",
        row.balanced_accuracy,
        row.f1,
        cm.true_negatives,
        cm.false_positives,
        cm.false_negatives,
        cm.true_positives
    );
    Ok(())
}
