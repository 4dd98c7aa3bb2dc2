//! Causal streaming prediction over a live frame feed: warmup, per-frame
//! decisions, out-of-order rejection and gap resets.
//!
//! Run: `cargo run --release --example stream_predict`

use badgevad::features::FeatureSetId;
use badgevad::ingest::pivot_volumes_unfilled;
use badgevad::models::{build_model, Arch, ArchSpec};
use badgevad::pipeline::{StreamEvent, StreamPredictor};
use badgevad::simulate::{simulate_meeting, Scenario, SimConfig};

fn main() -> badgevad::Result<()> {
    let config = SimConfig {
        n_badges: 3,
        duration_s: 30.0,
        seed: 8,
        scenario: Scenario::Normal,
        ..SimConfig::default()
    };
    let output = simulate_meeting(&config)?;
    // raw grid rows, with unobserved cells left missing: the predictor owns
    // the forward-fill budget
    let matrix = pivot_volumes_unfilled(&output.samples)?;

    let model = build_model(ArchSpec {
        arch: Arch::CnnLstm,
        feature_set: FeatureSetId::SetB,
        normalized: false,
        seed: 4,
    });
    let mut predictor = StreamPredictor::new(&model, &matrix.badge_ids, "b00", 0.5)?;

    let mut warmups = 0;
    let mut decisions = Vec::new();
    for row in 0..matrix.rows() {
        let values: Vec<Option<f64>> = matrix.frame(row).to_vec();
        let started = std::time::Instant::now();
        for event in predictor.push_frame(matrix.frame_start_ms(row), &values)? {
            match event {
                StreamEvent::Warmup => warmups += 1,
                StreamEvent::Decision(d) => decisions.push((d, started.elapsed())),
                StreamEvent::Reset => println!("stream reset at frame {row}"),
                StreamEvent::Rejected(why) => println!("rejected: {why}"),
            }
        }
    }

    println!("warmup frames: {warmups} (3 s window fills before the first decision)");
    println!("decisions:     {}", decisions.len());
    for (d, latency) in decisions.iter().take(5) {
        println!(
            "  t={:>6} ms  p={:.4}  speaking={}  ({latency:?} after arrival)",
            d.timestamp_ms, d.probability, d.decision
        );
    }
    let worst = decisions.iter().map(|(_, l)| *l).max().unwrap();
    println!("worst decision latency: {worst:?} (budget: 10 s)");

    // a stale frame is rejected and changes nothing
    let events = predictor.push_frame(0, &[Some(1.0); 3])?;
    println!("stale frame outcome: {:?}", events[0]);
    Ok(())
}
