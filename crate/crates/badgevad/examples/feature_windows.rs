//! Turn a raw amplitude stream into model-ready windows: leave-one-out
//! difference features with 3-second rolling means, sliced into labeled
//! 60-frame windows, optionally L2-normalized, and stored in the binary
//! dataset container.
//!
//! Run: `cargo run --release --example feature_windows`

use badgevad::features::{
    assemble_features, make_windows, normalize_l2, read_dataset, write_dataset, FeatureSetId,
    WINDOW_FRAMES,
};
use badgevad::ingest::{pivot_volumes, rasterize_labels};
use badgevad::simulate::{simulate_meeting, Scenario, SimConfig};

fn main() -> badgevad::Result<()> {
    let config = SimConfig {
        n_badges: 4,
        duration_s: 180.0,
        seed: 7,
        scenario: Scenario::Normal,
        ..SimConfig::default()
    };
    let output = simulate_meeting(&config)?;
    let volumes = pivot_volumes(&output.samples)?;
    let labels = rasterize_labels(&output.labels, &volumes)?;

    let primary = &volumes.badge_ids[0];
    let features = assemble_features(&volumes, primary, FeatureSetId::SetB)?;
    println!(
        "feature matrix for {primary}: {} frames x {} features {:?}",
        features.rows(),
        features.feature_count(),
        FeatureSetId::SetB.feature_names()
    );

    let label_col = labels.column(labels.badge_index(primary).unwrap());
    let windows = make_windows(&features, &label_col, WINDOW_FRAMES, 1)?;
    let positives = windows.labels.iter().filter(|&&l| l == 1).count();
    println!(
        "windows: {} ({} labeled speech, {:.1}%)",
        windows.len(),
        positives,
        100.0 * positives as f64 / windows.len() as f64
    );

    let normalized = normalize_l2(windows.clone());
    let sample = normalized.sample(0);
    let norm0: f64 = sample
        .iter()
        .step_by(normalized.feature_count)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    println!("first window, channel 0 norm after L2: {norm0:.12}");

    let path = std::env::temp_dir().join("badgevad_windows.bvw");
    write_dataset(&windows, std::fs::File::create(&path)?)?;
    let reloaded = read_dataset(std::fs::File::open(&path)?)?;
    assert_eq!(reloaded, windows);
    println!("container round-trip OK: {}", path.display());
    Ok(())
}
