//! Run the 16-configuration model-selection sweep (4 architectures ×
//! feature sets A/B × no/L2 normalization) with stratified 5-fold
//! cross-validation and print the scored table.
//!
//! This example shrinks the training recipe (3 epochs, coarse window stride)
//! so it finishes in a couple of minutes; the `badgevad crossval` command
//! runs the full 15-epoch recipe.
//!
//! Run: `cargo run --release --example crossval_sweep`

use badgevad::ingest::{pivot_volumes, rasterize_labels};
use badgevad::pipeline::{crossval_sweep, SweepConfig, SweepInputs};
use badgevad::simulate::{simulate_phased, Scenario, SimConfig};

fn main() -> badgevad::Result<()> {
    let config = SimConfig { n_badges: 6, seed: 3, ..SimConfig::default() };
    let (output, _phases) =
        simulate_phased(&config, &[(Scenario::Normal, 240.0), (Scenario::OneOnOne, 240.0)])?;
    let volumes = pivot_volumes(&output.samples)?;
    let labels = rasterize_labels(&output.labels, &volumes)?;
    let inputs = SweepInputs::build(&volumes, &labels, &volumes.badge_ids.clone(), 400)?;
    println!("pooled windows: {}", inputs.sample_count());

    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let sweep = SweepConfig { epochs: 3, seed: 17, jobs, ..SweepConfig::default() };
    let report = crossval_sweep(&inputs, &sweep)?;

    println!("{:<16} {:<8} {:<6} {:>10} {:>10}", "arch", "features", "norm", "val", "train");
    for (idx, row) in report.rows.iter().enumerate() {
        let marker = if idx == report.selected { " <- selected" } else { "" };
        println!(
            "{:<16} {:<8} {:<6} {:>10.4} {:>10.4}{marker}",
            row.arch.name(),
            row.feature_set.name().to_uppercase(),
            if row.normalized { "l2" } else { "no" },
            row.cv_val_score,
            row.cv_train_score,
        );
    }
    Ok(())
}
