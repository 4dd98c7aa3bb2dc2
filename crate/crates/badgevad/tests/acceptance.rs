//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see the details).
//!
//! 1. metric oracle against the published reference tables
//! 2. finite-difference gradient verification of every layer
//! 3. end-to-end 16-row selection sweep on a simulated meeting
//! 4. byte-level determinism of every artifact, sequential and parallel
//! 5. streaming/batch equivalence, causality and decision latency
//! 6. structural oracles (folds, shapes, counts, round-trips, alignment)

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// The compute-heavy criteria (3, 4, 5) serialize on this lock so the timed
/// sweep is not starved by its sibling tests on small machines.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy_guard() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

use badgevad::features::{
    assemble_features, make_windows, normalize_l2, FeatureSetId, WINDOW_FRAMES,
};
use badgevad::ingest::{
    pivot_volumes, pivot_volumes_unfilled, rasterize_labels, validate_alignment,
    AlignmentViolation, BadgeSampleRecord, LabelIntervals, VolumeMatrix,
};
use badgevad::models::{build_model, Arch, ArchSpec, TrainedModel};
use badgevad::nn::layers;
use badgevad::nn::{grad_check, DetRng, Tensor};
use badgevad::pipeline::{
    crossval_sweep, metrics, pooled_metrics, stratified_kfold,
    verify_metrics, ConfusionMatrix, ProvidedMetrics, StreamEvent, StreamPredictor, SweepConfig,
    SweepInputs,
};
use badgevad::simulate::{simulate_meeting, simulate_phased, Scenario, SimConfig};

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn read_reference_confusions() -> Vec<(String, String, ConfusionMatrix)> {
    let mut reader = csv::Reader::from_path(data_file("reference_confusion.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].to_string(),
                r[1].to_string(),
                ConfusionMatrix::new(
                    r[2].parse().unwrap(),
                    r[3].parse().unwrap(),
                    r[4].parse().unwrap(),
                    r[5].parse().unwrap(),
                ),
            )
        })
        .collect()
}

fn read_reference_metrics() -> Vec<ProvidedMetrics> {
    let mut reader = csv::Reader::from_path(data_file("reference_metrics.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            ProvidedMetrics {
                scenario: r[0].to_string(),
                subject: r[1].to_string(),
                balanced_accuracy: r[2].parse().unwrap(),
                f1: r[3].parse().unwrap(),
            }
        })
        .collect()
}

/// Criterion 1: the metric implementations reproduce the published reference
/// tables. The reference tables carry four internally inconsistent F1 values
/// (three subject cells where F1 duplicates the balanced accuracy, plus one
/// pooled row); those must be detected and reported, and every other value
/// must reproduce within ±0.0005 before rounding.
#[test]
fn c1_metric_oracle_reference_tables() {
    let started = Instant::now();
    let confusions = read_reference_confusions();
    let provided = read_reference_metrics();
    assert_eq!(confusions.len(), 18);
    assert_eq!(provided.len(), 24);

    let checks = verify_metrics(&confusions, &provided, 5e-4).unwrap();
    assert_eq!(checks.len(), 48);

    // (scenario, subject, recomputed) for the four known-bad F1 values
    let expected_mismatches = [
        ("1 on 1 TV on", "z", 0.490954),
        ("1 on 1 seats switched", "Overall", 0.440846),
        ("Whole meeting", "y", 0.449538),
        ("Whole meeting", "z", 0.422336),
    ];
    let mismatches: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    assert_eq!(mismatches.len(), 4, "unexpected mismatch set: {mismatches:?}");
    for (scenario, subject, recomputed) in expected_mismatches {
        let hit = mismatches
            .iter()
            .find(|c| c.scenario == scenario && c.subject == subject && c.metric == "f1")
            .unwrap_or_else(|| panic!("{scenario}/{subject} f1 not flagged"));
        assert!(
            (hit.recomputed - recomputed).abs() < 5e-6,
            "{scenario}/{subject}: recomputed {} vs expected {recomputed}",
            hit.recomputed
        );
    }
    // the two F1 cells singled out by the release contract are among them
    assert!(mismatches.iter().any(|c| c.scenario == "Whole meeting" && c.subject == "y"));
    assert!(mismatches.iter().any(|c| c.scenario == "Whole meeting" && c.subject == "z"));

    // every balanced accuracy reproduces; all but the four flagged F1s too
    assert!(checks.iter().filter(|c| c.metric == "balanced_accuracy").all(|c| c.passed));
    assert_eq!(checks.iter().filter(|c| c.passed).count(), 44);

    // spot-check the named example cells through the direct API
    let x_normal = metrics(&ConfusionMatrix::new(16909, 2236, 553, 1862)).unwrap();
    assert!((x_normal.balanced_accuracy - 0.827).abs() <= 5e-4);
    assert!((x_normal.f1 - 0.572).abs() <= 5e-4);
    let z_normal = metrics(&ConfusionMatrix::new(19371, 574, 218, 1397)).unwrap();
    assert!((z_normal.balanced_accuracy - 0.918).abs() <= 5e-4);
    assert!((z_normal.f1 - 0.779).abs() <= 5e-4);
    let whole_overall = pooled_metrics(&[
        ConfusionMatrix::new(43765, 6011, 5624, 7660),
        ConfusionMatrix::new(46015, 531, 11572, 4942),
        ConfusionMatrix::new(47337, 3496, 8018, 4209),
    ])
    .unwrap();
    assert!((whole_overall.balanced_accuracy - 0.666).abs() <= 5e-4);
    assert!((whole_overall.f1 - 0.488).abs() <= 5e-4);

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 1 (metric oracle): PASS — 44/48 reference values reproduce within 5e-4, \
         4 published F1 inconsistencies detected, in {elapsed:?}"
    );
}

fn random_tensor(rng: &mut DetRng, shape: &[usize], scale: f64) -> Tensor {
    let len: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.uniform_symmetric(scale)).collect()).unwrap()
}

fn coefficients(rng: &mut DetRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.uniform_symmetric(1.0)).collect()
}

fn weighted_sum(y: &Tensor, coeff: &[f64]) -> f64 {
    y.data().iter().zip(coeff).map(|(a, b)| a * b).sum()
}

fn check_dense(rng: &mut DetRng, cin: usize, cout: usize) -> f64 {
    let x = random_tensor(rng, &[cin], 1.0);
    let w = random_tensor(rng, &[cin, cout], 1.0);
    let b = random_tensor(rng, &[cout], 1.0);
    let coeff = coefficients(rng, cout);
    grad_check(
        &[x, w, b],
        &mut |ins| weighted_sum(&layers::dense(&ins[0], &ins[1], &ins[2]).unwrap(), &coeff),
        &mut |ins| {
            let dy = Tensor::from_vec(&[cout], coeff.clone()).unwrap();
            let (dx, dw, db) = layers::dense_backward(&ins[0], &ins[1], &dy);
            vec![dx, dw, db]
        },
    )
}

fn check_conv(rng: &mut DetRng, t_len: usize, cin: usize, cout: usize, k: usize) -> f64 {
    let x = random_tensor(rng, &[t_len, cin], 1.0);
    let w = random_tensor(rng, &[k, cin, cout], 1.0);
    let b = random_tensor(rng, &[cout], 1.0);
    let coeff = coefficients(rng, t_len * cout);
    grad_check(
        &[x, w, b],
        &mut |ins| weighted_sum(&layers::conv1d_same(&ins[0], &ins[1], &ins[2]).unwrap(), &coeff),
        &mut |ins| {
            let dy = Tensor::from_vec(&[t_len, cout], coeff.clone()).unwrap();
            let (dx, dw, db) = layers::conv1d_same_backward(&ins[0], &ins[1], &dy);
            vec![dx, dw, db]
        },
    )
}

fn check_lstm(rng: &mut DetRng, t_len: usize, cin: usize, h: usize, seq: bool) -> f64 {
    let x = random_tensor(rng, &[t_len, cin], 1.0);
    let wx = random_tensor(rng, &[cin, 4 * h], 0.4);
    let wh = random_tensor(rng, &[h, 4 * h], 0.4);
    let b = random_tensor(rng, &[4 * h], 0.4);
    let coeff = coefficients(rng, if seq { t_len * h } else { h });
    grad_check(
        &[x, wx, wh, b],
        &mut |ins| {
            let (y, _) = layers::lstm_forward(&ins[0], &ins[1], &ins[2], &ins[3], seq).unwrap();
            weighted_sum(&y, &coeff)
        },
        &mut |ins| {
            let (y, cache) = layers::lstm_forward(&ins[0], &ins[1], &ins[2], &ins[3], seq).unwrap();
            let dy = Tensor::from_vec(y.shape(), coeff.clone()).unwrap();
            let (dx, dwx, dwh, db) = layers::lstm_backward(&cache, &ins[1], &ins[2], &dy);
            vec![dx, dwx, dwh, db]
        },
    )
}

fn check_batchnorm(rng: &mut DetRng, b: usize, t: usize, c: usize) -> f64 {
    let x = random_tensor(rng, &[b, t, c], 2.0);
    let gamma = random_tensor(rng, &[c], 1.0);
    let beta = random_tensor(rng, &[c], 1.0);
    let coeff = coefficients(rng, b * t * c);
    let run = |ins: &[Tensor]| {
        let mut rm = Tensor::zeros(&[c]);
        let mut rv = Tensor::zeros(&[c]);
        layers::batchnorm_forward_train(&ins[0], &ins[1], &ins[2], &mut rm, &mut rv).unwrap()
    };
    grad_check(
        &[x, gamma, beta],
        &mut |ins| weighted_sum(&run(ins).0, &coeff),
        &mut |ins| {
            let (y, cache) = run(ins);
            let dy = Tensor::from_vec(y.shape(), coeff.clone()).unwrap();
            let (dx, dgamma, dbeta) = layers::batchnorm_backward(&cache, &ins[1], &dy);
            vec![dx, dgamma, dbeta]
        },
    )
}

/// Input with no value close to a ReLU kink.
fn relu_safe_tensor(rng: &mut DetRng, shape: &[usize]) -> Tensor {
    loop {
        let t = random_tensor(rng, shape, 1.0);
        if t.data().iter().all(|v| v.abs() > 1e-4) {
            return t;
        }
    }
}

fn check_relu(rng: &mut DetRng, t_len: usize, c: usize) -> f64 {
    let x = relu_safe_tensor(rng, &[t_len, c]);
    let coeff = coefficients(rng, t_len * c);
    grad_check(
        &[x],
        &mut |ins| weighted_sum(&layers::relu(&ins[0]), &coeff),
        &mut |ins| {
            let dy = Tensor::from_vec(&[t_len, c], coeff.clone()).unwrap();
            vec![layers::relu_backward(&ins[0], &dy)]
        },
    )
}

fn check_sigmoid(rng: &mut DetRng, len: usize) -> f64 {
    let x = random_tensor(rng, &[len], 2.0);
    let coeff = coefficients(rng, len);
    grad_check(
        &[x],
        &mut |ins| weighted_sum(&layers::sigmoid(&ins[0]), &coeff),
        &mut |ins| {
            let y = layers::sigmoid(&ins[0]);
            let dy = Tensor::from_vec(&[len], coeff.clone()).unwrap();
            vec![layers::sigmoid_backward(&y, &dy)]
        },
    )
}

/// Max-pool input whose pairs are never near-tied (kink avoidance).
fn pool_safe_tensor(rng: &mut DetRng, t_len: usize, c: usize) -> Tensor {
    loop {
        let t = random_tensor(rng, &[t_len, c], 1.0);
        let mut ok = true;
        'outer: for pair in 0..t_len / 2 {
            for ch in 0..c {
                if (t.row(2 * pair)[ch] - t.row(2 * pair + 1)[ch]).abs() < 1e-4 {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return t;
        }
    }
}

fn check_maxpool(rng: &mut DetRng, t_len: usize, c: usize) -> f64 {
    let x = pool_safe_tensor(rng, t_len, c);
    let out_len = (t_len / 2) * c;
    let coeff = coefficients(rng, out_len);
    grad_check(
        &[x],
        &mut |ins| weighted_sum(&layers::maxpool1d(&ins[0], 2).unwrap().0, &coeff),
        &mut |ins| {
            let (y, argmax) = layers::maxpool1d(&ins[0], 2).unwrap();
            let dy = Tensor::from_vec(y.shape(), coeff.clone()).unwrap();
            vec![layers::maxpool1d_backward(&argmax, t_len, &dy)]
        },
    )
}

fn check_gap(rng: &mut DetRng, t_len: usize, c: usize) -> f64 {
    let x = random_tensor(rng, &[t_len, c], 1.0);
    let coeff = coefficients(rng, c);
    grad_check(
        &[x],
        &mut |ins| weighted_sum(&layers::global_avg_pool(&ins[0]), &coeff),
        &mut |_ins| {
            let dy = Tensor::from_vec(&[c], coeff.clone()).unwrap();
            vec![layers::global_avg_pool_backward(t_len, &dy)]
        },
    )
}

/// Criterion 2: every layer's analytic gradients agree with central finite
/// differences at 1e-4 (1e-6 for the affine head) across random seeds and
/// shapes, including the production shapes (kernel 3 with 254 filters,
/// kernel 4 with 64 filters, LSTM with 100 units checked over 5 steps).
#[test]
fn c2_gradient_verification() {
    let started = Instant::now();
    let mut checked = 0usize;
    let mut worst: (f64, &'static str) = (0.0, "none");
    let mut track = |err: f64, what: &'static str, tol: f64| {
        assert!(err <= tol, "{what}: relative error {err} > {tol}");
        checked += 1;
        if err > worst.0 {
            worst = (err, what);
        }
    };

    for seed in 0..6u64 {
        let mut rng = DetRng::derive(1000, &[seed]);
        track(check_dense(&mut rng, 1 + seed as usize, 1 + (seed as usize % 3)), "dense", 1e-6);
        track(
            check_conv(&mut rng, 3 + seed as usize, 1 + seed as usize % 3, 2, 1 + seed as usize % 5),
            "conv",
            1e-4,
        );
        track(check_lstm(&mut rng, 2 + seed as usize % 4, 1 + seed as usize % 3, 3, seed % 2 == 0), "lstm", 1e-4);
        track(check_batchnorm(&mut rng, 2 + seed as usize % 3, 3, 2), "batchnorm", 1e-4);
        track(check_relu(&mut rng, 4, 3), "relu", 1e-4);
        track(check_sigmoid(&mut rng, 6), "sigmoid", 1e-4);
        track(check_maxpool(&mut rng, 6 + (seed as usize % 2), 2), "maxpool", 1e-4);
        track(check_gap(&mut rng, 5, 3), "global_avg_pool", 1e-4);
    }

    // production shapes
    let mut rng = DetRng::derive(2000, &[]);
    track(check_conv(&mut rng, 7, 3, 254, 3), "conv k3 x 254 filters", 1e-4);
    track(check_conv(&mut rng, 7, 3, 64, 4), "conv k4 x 64 filters", 1e-4);
    track(check_lstm(&mut rng, 5, 3, 100, false), "lstm 100 units", 1e-4);
    track(check_dense(&mut rng, 254, 1), "dense 254 -> 1", 1e-6);
    track(check_dense(&mut rng, 100, 1), "dense 100 -> 1", 1e-6);

    let elapsed = started.elapsed();
    assert!(checked >= 20, "only {checked} gradient checks ran");
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "criterion 2 (gradient verification): PASS — {checked} checks, worst {:.2e} ({}), in {elapsed:?}",
        worst.0, worst.1
    );
}

/// Criterion 3: the full 16-row selection sweep on a simulated six-badge,
/// twenty-minute normal + one-on-one meeting finishes within 15 minutes and
/// at least one configuration reaches mean validation balanced accuracy 0.90
/// (a separability sanity bound; the original study's exact scores came from
/// a private dataset).
#[test]
fn c3_end_to_end_sweep() {
    let _lock = heavy_guard();
    let started = Instant::now();
    let config = SimConfig { n_badges: 6, seed: 20_260_811, ..SimConfig::default() };
    let (out, _) =
        simulate_phased(&config, &[(Scenario::Normal, 600.0), (Scenario::OneOnOne, 600.0)]).unwrap();
    let volumes = pivot_volumes(&out.samples).unwrap();
    let labels = rasterize_labels(&out.labels, &volumes).unwrap();
    let inputs = SweepInputs::build(&volumes, &labels, &volumes.badge_ids.clone(), 1000).unwrap();

    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let sweep_config = SweepConfig { k: 5, epochs: 15, batch_size: 4000, seed: 7, jobs };
    let report = crossval_sweep(&inputs, &sweep_config).unwrap();

    assert_eq!(report.rows.len(), 16);
    let grid: HashSet<(&str, &str, bool)> = report
        .rows
        .iter()
        .map(|r| (r.arch.name(), r.feature_set.name(), r.normalized))
        .collect();
    assert_eq!(grid.len(), 16, "report must cover the full grid");
    for row in &report.rows {
        assert!(row.cv_val_score.is_finite() && (0.0..=1.0).contains(&row.cv_val_score));
    }

    let best = report
        .rows
        .iter()
        .map(|r| r.cv_val_score)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best >= 0.90, "best mean validation balanced accuracy {best} < 0.90");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(900), "sweep took {elapsed:?}, budget 15 min");
    println!(
        "criterion 3 (end-to-end sweep): PASS — 16 rows on {} windows, best val {:.3} \
         (selected {} / set {} / normalized={}), in {elapsed:?} with {jobs} jobs",
        inputs.sample_count(),
        best,
        report.selected_row().arch.name(),
        report.selected_row().feature_set.name(),
        report.selected_row().normalized
    );
}

fn run_cli(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("badgevad".to_string())
        .chain(args.iter().map(|s| s.to_string()))
        .collect();
    badgevad::cli::run(argv)
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Criterion 4: identical seeds give byte-identical simulator output, sweep
/// report, trained model file and prediction CSV on the sequential path, and
/// the parallel sweep matches the sequential report bit for bit.
#[test]
fn c4_determinism() {
    let _lock = heavy_guard();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    // two identical simulate runs
    for run in ["sim_a", "sim_b"] {
        let code = run_cli(&[
            "simulate",
            "--seed",
            "11",
            "--out-dir",
            &path(run),
            "--badges",
            "3",
            "--duration-s",
            "60",
            "--scenario",
            "normal",
            "--clap",
            "--clap-onset-s",
            "10",
        ]);
        assert_eq!(code, 0);
    }
    for artifact in ["samples.csv", "labels.json", "phases.json", "manifest.json"] {
        assert_eq!(
            read_bytes(&dir.path().join("sim_a").join(artifact)),
            read_bytes(&dir.path().join("sim_b").join(artifact)),
            "{artifact} differs between identical runs"
        );
    }

    let samples = path("sim_a/samples.csv");
    let labels = path("sim_a/labels.json");

    // sweep: sequential twice, then parallel
    let sweep = |report: &str, selected: &str, jobs: &str| {
        let code = run_cli(&[
            "crossval",
            "--samples",
            &samples,
            "--labels",
            &labels,
            "--seed",
            "3",
            "--stride",
            "30",
            "--epochs",
            "1",
            "--jobs",
            jobs,
            "--report-out",
            &path(report),
            "--selected-out",
            &path(selected),
        ]);
        assert_eq!(code, 0);
    };
    sweep("report_a.csv", "selected_a.json", "1");
    sweep("report_b.csv", "selected_b.json", "1");
    sweep("report_par.csv", "selected_par.json", "2");
    let report_a = read_bytes(&dir.path().join("report_a.csv"));
    let report_lines = String::from_utf8(report_a.clone()).unwrap().lines().count();
    assert_eq!(report_lines, 17, "header plus exactly 16 configuration rows");
    assert_eq!(report_a, read_bytes(&dir.path().join("report_b.csv")), "sequential reruns differ");
    assert_eq!(
        report_a,
        read_bytes(&dir.path().join("report_par.csv")),
        "parallel sweep differs from sequential"
    );
    assert_eq!(
        read_bytes(&dir.path().join("selected_a.json")),
        read_bytes(&dir.path().join("selected_par.json"))
    );

    // training twice
    let train = |out: &str| {
        let code = run_cli(&[
            "train",
            "--samples",
            &samples,
            "--labels",
            &labels,
            "--arch",
            "cnn-lstm",
            "--feature-set",
            "b",
            "--seed",
            "5",
            "--stride",
            "10",
            "--max-epochs",
            "2",
            "--out",
            &path(out),
        ]);
        assert_eq!(code, 0);
    };
    train("model_a.bvm");
    train("model_b.bvm");
    let model_bytes = read_bytes(&dir.path().join("model_a.bvm"));
    assert_eq!(model_bytes, read_bytes(&dir.path().join("model_b.bvm")), "model files differ");

    // prediction twice
    let predict = |out: &str| {
        let code = run_cli(&[
            "predict",
            "--samples",
            &samples,
            "--model",
            &path("model_a.bvm"),
            "--out",
            &path(out),
        ]);
        assert_eq!(code, 0);
    };
    predict("pred_a.csv");
    predict("pred_b.csv");
    let pred = read_bytes(&dir.path().join("pred_a.csv"));
    assert_eq!(pred, read_bytes(&dir.path().join("pred_b.csv")), "prediction runs differ");
    assert!(pred.starts_with(b"timestamp_ms,badge_id,probability,decision\n"));

    println!(
        "criterion 4 (determinism): PASS — simulator, sweep (sequential twice + parallel), \
         model file and predictions byte-identical, in {:?}",
        started.elapsed()
    );
}

/// Criterion 5: the streaming predictor reproduces the batch pipeline
/// probability for probability, a prefix-truncation sweep confirms no
/// future-frame dependence, and per-decision latency stays far inside the
/// 10-second budget.
#[test]
fn c5_streaming_equivalence_and_causality() {
    let _lock = heavy_guard();
    let started = Instant::now();
    let config = SimConfig { n_badges: 3, duration_s: 12.0, seed: 77, ..SimConfig::default() };
    let out = simulate_meeting(&config).unwrap();
    // drop one badge's readings for 400 ms to exercise the gap/reset path
    let records: Vec<BadgeSampleRecord> = out
        .samples
        .iter()
        .filter(|r| !(r.badge_id == "b01" && (6_000..6_400).contains(&r.timestamp_ms)))
        .cloned()
        .collect();

    let batch_pipeline = |records: &[BadgeSampleRecord], model: &TrainedModel| {
        let volumes = pivot_volumes(records).unwrap();
        let features = assemble_features(&volumes, "b00", model.spec.feature_set).unwrap();
        let labels = vec![0u8; features.rows()];
        let mut windows = make_windows(&features, &labels, WINDOW_FRAMES, 1).unwrap();
        if model.spec.normalized {
            windows = normalize_l2(windows);
        }
        let probs = model.forward(&windows.samples).unwrap();
        (probs, windows.end_timestamps_ms)
    };

    for normalized in [false, true] {
        let model = build_model(ArchSpec {
            arch: Arch::CnnLstm,
            feature_set: FeatureSetId::SetB,
            normalized,
            seed: 13,
        });

        let raw = pivot_volumes_unfilled(&records).unwrap();
        let mut predictor = StreamPredictor::new(&model, &raw.badge_ids, "b00", 0.5).unwrap();
        let mut decisions = Vec::new();
        let mut max_latency = Duration::ZERO;
        for row in 0..raw.rows() {
            let values: Vec<Option<f64>> = raw.frame(row).to_vec();
            let push_started = Instant::now();
            let events = predictor.push_frame(raw.frame_start_ms(row), &values).unwrap();
            let latency = push_started.elapsed();
            if events.iter().any(|e| matches!(e, StreamEvent::Decision(_))) {
                max_latency = max_latency.max(latency);
            }
            for event in events {
                if let StreamEvent::Decision(d) = event {
                    decisions.push(d);
                }
            }
        }

        let (probs, timestamps) = batch_pipeline(&records, &model);
        assert_eq!(decisions.len(), probs.len(), "normalized={normalized}");
        for (d, (&p, &ts)) in decisions.iter().zip(probs.iter().zip(&timestamps)) {
            assert_eq!(d.timestamp_ms, ts, "normalized={normalized}");
            assert_eq!(d.probability, p, "at {ts}, normalized={normalized}");
        }

        assert!(
            max_latency < Duration::from_secs(10),
            "decision latency {max_latency:?} over budget"
        );
        assert!(max_latency < Duration::from_secs(1), "latency {max_latency:?} above desk scale");

        // causality: recompute the batch pipeline on every prefix; decisions
        // inside the prefix must be identical (no future-frame dependence)
        if !normalized {
            let full: std::collections::BTreeMap<i64, f64> = probs
                .iter()
                .zip(&timestamps)
                .map(|(&p, &ts)| (ts, p))
                .collect();
            let grid_end = records.iter().map(|r| r.timestamp_ms).max().unwrap();
            let mut prefixes_checked = 0;
            for cut in (0..=grid_end).step_by(50) {
                let prefix: Vec<BadgeSampleRecord> =
                    records.iter().filter(|r| r.timestamp_ms <= cut).cloned().collect();
                if prefix.is_empty() {
                    continue;
                }
                let (p_probs, p_ts) = batch_pipeline(&prefix, &model);
                for (&p, &ts) in p_probs.iter().zip(&p_ts) {
                    assert_eq!(full.get(&ts), Some(&p), "prefix {cut}: value at {ts} changed");
                }
                prefixes_checked += 1;
            }
            assert!(prefixes_checked >= 200, "only {prefixes_checked} prefixes");
        }

        println!(
            "criterion 5 (streaming, normalized={normalized}): {} decisions equal batch, \
             max decision latency {max_latency:?}",
            decisions.len()
        );
    }
    println!(
        "criterion 5 (streaming equivalence and causality): PASS — in {:?}",
        started.elapsed()
    );
}

/// Criterion 6: structural oracles — stratified fold balance over randomized
/// labels, length-preserving convolution, analytic parameter counts,
/// bit-exact model round-trip and the two alignment regressions.
#[test]
fn c6_structural_oracles() {
    let started = Instant::now();

    // stratified folds: ±1 sample class balance over >= 1000 random vectors
    let mut rng = DetRng::new(606);
    let mut trials = 0;
    while trials < 1000 {
        let n = 20 + rng.index(150);
        let labels: Vec<u8> = (0..n).map(|_| (rng.uniform() < 0.35) as u8).collect();
        let positives = labels.iter().filter(|&&l| l == 1).count();
        let k = 2 + rng.index(6);
        if positives < k || n - positives < k {
            continue;
        }
        let folds = stratified_kfold(&labels, k, trials as u64).unwrap();
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>(), "folds must partition the indices");
        for fold in &folds {
            let fold_pos = fold.iter().filter(|&&i| labels[i] == 1).count() as f64;
            assert!((fold_pos - positives as f64 / k as f64).abs() <= 1.0);
        }
        trials += 1;
    }

    // convolution preserves length for K in 1..=5
    for k in 1..=5usize {
        for t_len in 1..=64usize {
            let x = Tensor::zeros(&[t_len, 2]);
            let w = Tensor::zeros(&[k, 2, 3]);
            let b = Tensor::zeros(&[3]);
            assert_eq!(layers::conv1d_same(&x, &w, &b).unwrap().shape(), &[t_len, 3]);
        }
    }

    // analytic parameter counts for every architecture and feature count
    let conv = |k: usize, cin: usize, cout: usize| k * cin * cout + cout;
    let lstm = |cin: usize, h: usize| 4 * (h * (cin + h) + h);
    for fs in [FeatureSetId::OneChannel, FeatureSetId::SetB, FeatureSetId::SetA] {
        let f = fs.feature_count();
        let expected = [
            (Arch::Cnn, conv(3, f, 254) + 3 * conv(3, 254, 254) + 4 * (2 * 254) + 255),
            (Arch::Lstm2, lstm(f, 100) + lstm(100, 100) + 101),
            (Arch::CnnLstm, conv(4, f, 64) + lstm(64, 100) + 101),
            (Arch::CnnLstm2, conv(4, f, 64) + lstm(64, 100) + lstm(100, 100) + 101),
        ];
        for (arch, count) in expected {
            let model = build_model(ArchSpec { arch, feature_set: fs, normalized: false, seed: 1 });
            assert_eq!(model.parameter_count(), count, "{} F={f}", arch.name());
        }
    }

    // bit-exact save/load round trip
    let model = build_model(ArchSpec {
        arch: Arch::CnnLstm2,
        feature_set: FeatureSetId::SetA,
        normalized: true,
        seed: 99,
    });
    let mut bytes = Vec::new();
    model.save(&mut bytes).unwrap();
    let loaded = TrainedModel::load(bytes.as_slice()).unwrap();
    for (a, b) in model.parameters().iter().zip(loaded.parameters()) {
        assert_eq!(a.value.data(), b.value.data());
    }
    let mut bytes2 = Vec::new();
    loaded.save(&mut bytes2).unwrap();
    assert_eq!(bytes, bytes2, "save -> load -> save must be byte-stable");

    // alignment guard: column permutation and a twenty-minute offset
    let records: Vec<BadgeSampleRecord> = ["a", "b", "c", "d"]
        .iter()
        .flat_map(|badge| {
            (0..200i64).map(move |row| BadgeSampleRecord {
                badge_id: badge.to_string(),
                timestamp_ms: row * 50,
                amplitude: 1.0,
            })
        })
        .collect();
    let volumes: VolumeMatrix = pivot_volumes(&records).unwrap();
    let labels = rasterize_labels(&LabelIntervals::new(), &volumes).unwrap();
    let mut permuted = labels.clone();
    permuted.badge_ids = vec!["c".into(), "d".into(), "a".into(), "b".into()];
    let report = validate_alignment(&volumes, &permuted, None);
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, AlignmentViolation::ColumnOrderMismatch { .. })));
    let mut shifted = labels.clone();
    shifted.t0_ms += 20 * 60 * 1000;
    let report = validate_alignment(&volumes, &shifted, None);
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, AlignmentViolation::TimeRangeMismatch { .. })));
    assert!(validate_alignment(&volumes, &labels, None).passed());

    println!(
        "criterion 6 (structural oracles): PASS — 1000 fold trials, conv lengths, parameter \
         counts, round-trip, alignment regressions, in {:?}",
        started.elapsed()
    );
}
