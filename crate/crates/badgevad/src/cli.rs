//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
//! invariant violation. Every subcommand is a pure function of its flags,
//! input files and seed, so identical invocations produce byte-identical
//! artifacts.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::features::{
    assemble_features, make_windows, normalize_l2, write_dataset, FeatureSetId, WindowDataset,
    WINDOW_FRAMES,
};
use crate::ingest::{
    parse_samples, pivot_volumes, pivot_volumes_unfilled, rasterize_labels, read_labels_json,
    validate_alignment, write_labels_json, write_samples_csv, LabelMatrix, VolumeMatrix,
};
use crate::models::{build_model, Arch, ArchSpec, TrainedModel};
use crate::pipeline::{
    class_weights, crossval_sweep, evaluate_phases, read_phases_json, train_to_convergence,
    verify_metrics, write_evaluation_csv, write_phases_json, write_sweep_csv, ConfusionMatrix,
    ConvergenceConfig, PhaseAnnotations, ProvidedMetrics, StreamEvent, StreamPredictor,
    SweepConfig, SweepInputs,
};
use crate::simulate::{manifest, simulate_meeting, simulate_phased, Scenario, SimConfig};

/// Flag-level errors exit with 1; data errors with 2.
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(
    name = "badgevad",
    version,
    about = "Voice activity detection for downsampled (20 Hz) badge amplitude streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic meeting (samples CSV + labels JSON).
    Simulate(SimulateArgs),
    /// Build a windowed feature dataset from samples and labels.
    Features(FeaturesArgs),
    /// Run the 16-configuration cross-validation selection sweep.
    Crossval(CrossvalArgs),
    /// Train one configuration to convergence on the full dataset.
    Train(TrainArgs),
    /// Evaluate a trained model phase by phase.
    Evaluate(EvaluateArgs),
    /// Stream per-frame speech probabilities for each badge.
    Predict(PredictArgs),
    /// Recompute metrics from confusion counts and diff a metrics table.
    VerifyMetrics(VerifyMetricsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Cnn,
    CnnLstm,
    CnnLstm2,
    Lstm2,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Arch {
        match a {
            ArchArg::Cnn => Arch::Cnn,
            ArchArg::CnnLstm => Arch::CnnLstm,
            ArchArg::CnnLstm2 => Arch::CnnLstm2,
            ArchArg::Lstm2 => Arch::Lstm2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureSetArg {
    OneChannel,
    A,
    B,
}

impl From<FeatureSetArg> for FeatureSetId {
    fn from(f: FeatureSetArg) -> FeatureSetId {
        match f {
            FeatureSetArg::OneChannel => FeatureSetId::OneChannel,
            FeatureSetArg::A => FeatureSetId::SetA,
            FeatureSetArg::B => FeatureSetId::SetB,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Normal,
    OneOnOne,
    OneOnOneTv,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::Normal => Scenario::Normal,
            ScenarioArg::OneOnOne => Scenario::OneOnOne,
            ScenarioArg::OneOnOneTv => Scenario::OneOnOneTv,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Seed for every random draw (mandatory: no wall-clock default).
    #[arg(long)]
    seed: u64,
    /// Directory for samples.csv, labels.json, phases.json, manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 6)]
    badges: usize,
    #[arg(long, default_value_t = 600.0)]
    duration_s: f64,
    #[arg(long, value_enum, default_value_t = ScenarioArg::Normal, conflicts_with = "phases")]
    scenario: ScenarioArg,
    /// Comma-separated phase list, e.g. `normal:600,one-on-one:600`.
    #[arg(long)]
    phases: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    base_noise: f64,
    #[arg(long, default_value_t = 30.0)]
    speech_gain: f64,
    #[arg(long, default_value_t = 1.5)]
    attenuation: f64,
    #[arg(long, default_value_t = 0.05)]
    jitter_sigma: f64,
    /// Inject the 15 s synchronization clap burst.
    #[arg(long)]
    clap: bool,
    #[arg(long, default_value_t = 5.0)]
    clap_onset_s: f64,
}

#[derive(Args)]
struct InputArgs {
    /// Samples CSV (`timestamp_ms,badge_id,amplitude`).
    #[arg(long)]
    samples: PathBuf,
    /// Labels JSON (badge id -> [{start_ms, end_ms}, ...]).
    #[arg(long)]
    labels: PathBuf,
    /// Declared sync-spike onset (ms) to cross-check against the detected
    /// clap; mismatch beyond 500 ms is a data error.
    #[arg(long)]
    declared_spike_ms: Option<i64>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Primary badge whose voice activity is the label.
    #[arg(long)]
    primary: String,
    #[arg(long, value_enum, default_value_t = FeatureSetArg::B)]
    feature_set: FeatureSetArg,
    /// Apply per-channel L2 normalization inside each window.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    /// Output dataset container path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated primary badges to pool windows from, or `all`.
    #[arg(long, default_value = "all")]
    primary: String,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    /// Worker threads; 1 is the bit-exact sequential reference path.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// 16-row report CSV path.
    #[arg(long)]
    report_out: PathBuf,
    /// Selected-configuration JSON path.
    #[arg(long)]
    selected_out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "all")]
    primary: String,
    #[arg(long, value_enum)]
    arch: ArchArg,
    #[arg(long, value_enum, default_value_t = FeatureSetArg::B)]
    feature_set: FeatureSetArg,
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,
    #[arg(long, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    max_epochs: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    patience: u64,
    #[arg(long, default_value_t = 1e-3)]
    min_delta: f64,
    /// Output model path (`.bvm`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    model: PathBuf,
    /// Phase annotations JSON (subject -> [{name, start_ms, end_ms}, ...]).
    #[arg(long)]
    phases: PathBuf,
    /// Comma-separated subject badges.
    #[arg(long)]
    subjects: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Evaluation table CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// One badge id, or `all` for a per-badge timeline of every badge.
    #[arg(long, default_value = "all")]
    primary: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Prediction CSV path (`timestamp_ms,badge_id,probability,decision`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyMetricsArgs {
    /// Confusion CSV (`scenario,subject,tn,fp,fn,tp`).
    #[arg(long)]
    confusion: PathBuf,
    /// Metrics CSV to verify (`scenario,subject,balanced_accuracy,f1`);
    /// `Overall` subject rows are checked against pooled matrices.
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long, default_value_t = 5e-4)]
    tolerance: f64,
    /// Optional diff CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses and dispatches; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(CliError::Usage(message))) => {
            eprintln!("usage error: {message}");
            1
        }
        Ok(Err(CliError::Data(e))) => {
            eprintln!("error: {e}");
            2
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            eprintln!("internal invariant violation: {message}");
            3
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Features(args) => cmd_features(args),
        Command::Crossval(args) => cmd_crossval(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::VerifyMetrics(args) => cmd_verify_metrics(args),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    Ok(BufReader::new(File::open(path)?))
}

fn parse_phase_list(text: &str) -> Result<Vec<(Scenario, f64)>, CliError> {
    text.split(',')
        .map(|part| {
            let (name, secs) = part.split_once(':').ok_or_else(|| {
                CliError::Usage(format!("phase `{part}` must look like `scenario:seconds`"))
            })?;
            let scenario = Scenario::parse(name.trim())
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let secs: f64 = secs
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad phase duration `{secs}`")))?;
            if secs <= 0.0 {
                return Err(CliError::Usage("phase durations must be positive".into()));
            }
            Ok((scenario, secs))
        })
        .collect()
}

fn cmd_simulate(args: SimulateArgs) -> CliResult {
    let config = SimConfig {
        n_badges: args.badges,
        duration_s: args.duration_s,
        seed: args.seed,
        scenario: args.scenario.into(),
        base_noise: args.base_noise,
        speech_gain: args.speech_gain,
        attenuation_exponent: args.attenuation,
        jitter_sigma: args.jitter_sigma,
        clap: args.clap,
        clap_onset_s: args.clap_onset_s,
    };

    let (output, spans, config) = match &args.phases {
        Some(spec) => {
            let phases = parse_phase_list(spec)?;
            let total: f64 = phases.iter().map(|(_, d)| d).sum();
            let config = SimConfig { duration_s: total, ..config };
            let (output, spans) = simulate_phased(&config, &phases)?;
            (output, spans, config)
        }
        None => {
            let output = simulate_meeting(&config)?;
            let spans = vec![crate::pipeline::PhaseSpan {
                name: config.scenario.name().to_string(),
                start_ms: 0,
                end_ms: (config.duration_s * 1000.0).round() as i64,
            }];
            (output, spans, config)
        }
    };

    std::fs::create_dir_all(&args.out_dir).map_err(Error::Io)?;
    write_samples_csv(&output.samples, create(&args.out_dir.join("samples.csv"))?)?;
    write_labels_json(&output.labels, create(&args.out_dir.join("labels.json"))?)?;
    let annotations: PhaseAnnotations = output
        .badge_ids
        .iter()
        .map(|badge| (badge.clone(), spans.clone()))
        .collect();
    write_phases_json(&annotations, create(&args.out_dir.join("phases.json"))?)?;
    let mut manifest_out = create(&args.out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut manifest_out, &manifest(&config, &output))
        .map_err(Error::Json)?;
    manifest_out.flush().map_err(Error::Io)?;
    println!(
        "simulated {} badges x {:.0}s ({} samples, {} turns) -> {}",
        output.badge_ids.len(),
        config.duration_s,
        output.samples.len(),
        output.schedule.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Loads samples + labels and rasterizes onto the pivot grid, enforcing the
/// alignment guard.
fn load_aligned(input: &InputArgs) -> Result<(VolumeMatrix, LabelMatrix), CliError> {
    let records = parse_samples(open(&input.samples)?)?;
    let volumes = pivot_volumes(&records)?;
    let intervals = read_labels_json(open(&input.labels)?)?;
    let labels = rasterize_labels(&intervals, &volumes)?;
    let report = validate_alignment(&volumes, &labels, input.declared_spike_ms);
    if !report.passed() {
        let lines: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(CliError::Data(Error::InvalidInput(format!(
            "alignment validation failed: {}",
            lines.join("; ")
        ))));
    }
    Ok((volumes, labels))
}

fn resolve_primaries(spec: &str, volumes: &VolumeMatrix) -> Result<Vec<String>, CliError> {
    if spec == "all" {
        return Ok(volumes.badge_ids.clone());
    }
    let list: Vec<String> = spec.split(',').map(|s| s.trim().to_string()).collect();
    for badge in &list {
        if volumes.badge_index(badge).is_none() {
            return Err(CliError::Data(Error::InvalidInput(format!(
                "unknown badge `{badge}` (known: {})",
                volumes.badge_ids.join(", ")
            ))));
        }
    }
    Ok(list)
}

fn pooled_windows(
    volumes: &VolumeMatrix,
    labels: &LabelMatrix,
    primaries: &[String],
    feature_set: FeatureSetId,
    stride: usize,
) -> Result<WindowDataset, Error> {
    let mut pooled: Option<WindowDataset> = None;
    for primary in primaries {
        let col = labels
            .badge_index(primary)
            .ok_or_else(|| Error::InvalidInput(format!("no labels for `{primary}`")))?;
        let features = assemble_features(volumes, primary, feature_set)?;
        let windows = make_windows(&features, &labels.column(col), WINDOW_FRAMES, stride)?;
        match &mut pooled {
            None => pooled = Some(windows),
            Some(p) => p.extend(&windows)?,
        }
    }
    Ok(pooled.expect("at least one primary"))
}

fn cmd_features(args: FeaturesArgs) -> CliResult {
    let (volumes, labels) = load_aligned(&args.input)?;
    let mut dataset = pooled_windows(
        &volumes,
        &labels,
        std::slice::from_ref(&args.primary),
        args.feature_set.into(),
        args.stride as usize,
    )?;
    if args.normalize {
        dataset = normalize_l2(dataset);
    }
    write_dataset(&dataset, create(&args.out)?)?;
    println!(
        "wrote {} windows ({} features, normalized={}) -> {}",
        dataset.len(),
        dataset.feature_count,
        dataset.normalized,
        args.out.display()
    );
    Ok(())
}

fn cmd_crossval(args: CrossvalArgs) -> CliResult {
    let (volumes, labels) = load_aligned(&args.input)?;
    let primaries = resolve_primaries(&args.primary, &volumes)?;
    let inputs = SweepInputs::build(&volumes, &labels, &primaries, args.stride as usize)?;
    let config = SweepConfig {
        k: args.folds as usize,
        epochs: args.epochs as usize,
        batch_size: args.batch_size as usize,
        seed: args.seed,
        jobs: args.jobs as usize,
    };
    let report = crossval_sweep(&inputs, &config)?;
    write_sweep_csv(&report, create(&args.report_out)?)?;

    let selected = report.selected_row();
    let selected_json = serde_json::json!({
        "arch": selected.arch.name(),
        "feature_set": selected.feature_set.name(),
        "normalized": selected.normalized,
        "cv_val_score": selected.cv_val_score,
        "cv_train_score": selected.cv_train_score,
    });
    let mut out = create(&args.selected_out)?;
    serde_json::to_writer_pretty(&mut out, &selected_json).map_err(Error::Json)?;
    out.flush().map_err(Error::Io)?;
    println!(
        "sweep over {} windows: selected {} / set {} / {} (val {:.3})",
        inputs.sample_count(),
        selected.arch.name(),
        selected.feature_set.name().to_uppercase(),
        if selected.normalized { "l2" } else { "no-norm" },
        selected.cv_val_score
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let (volumes, labels) = load_aligned(&args.input)?;
    let primaries = resolve_primaries(&args.primary, &volumes)?;
    let mut dataset = pooled_windows(
        &volumes,
        &labels,
        &primaries,
        args.feature_set.into(),
        args.stride as usize,
    )?;
    if args.normalize {
        dataset = normalize_l2(dataset);
    }
    let weights = class_weights(&dataset.labels)?;
    let mut model = build_model(ArchSpec {
        arch: args.arch.into(),
        feature_set: args.feature_set.into(),
        normalized: args.normalize,
        seed: args.seed,
    });
    let config = ConvergenceConfig {
        patience: args.patience as usize,
        min_delta: args.min_delta,
        max_epochs: args.max_epochs as usize,
        batch_size: args.batch_size as usize,
    };
    train_to_convergence(&mut model, &dataset, weights, args.seed, &config)?;
    let mut out = create(&args.out)?;
    model.save(&mut out)?;
    out.flush().map_err(Error::Io)?;
    println!(
        "trained {} on {} windows: {} epochs, best accuracy {:.4} -> {}",
        model.spec.arch.name(),
        dataset.len(),
        model.meta.epochs_run,
        model.meta.final_train_accuracy,
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let (volumes, labels) = load_aligned(&args.input)?;
    let model = TrainedModel::load(open(&args.model)?)?;
    let phases = read_phases_json(open(&args.phases)?)?;
    let subjects: Vec<String> = args.subjects.split(',').map(|s| s.trim().to_string()).collect();
    let table = evaluate_phases(&model, &volumes, &labels, &phases, &subjects, args.threshold)?;
    for warning in &table.warnings {
        eprintln!("warning: {warning}");
    }
    write_evaluation_csv(&table, create(&args.out)?)?;
    println!("wrote {} evaluation rows -> {}", table.cells.len(), args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> CliResult {
    let records = parse_samples(open(&args.samples)?)?;
    // raw rows: the streaming predictor applies the forward-fill rule itself
    let matrix = pivot_volumes_unfilled(&records)?;
    let model = TrainedModel::load(open(&args.model)?)?;
    let primaries = resolve_primaries(&args.primary, &matrix)?;

    let mut rows: Vec<(i64, String, f64, bool)> = Vec::new();
    for primary in &primaries {
        let mut predictor = StreamPredictor::new(&model, &matrix.badge_ids, primary, args.threshold)?;
        for row in 0..matrix.rows() {
            let values: Vec<Option<f64>> = matrix.frame(row).to_vec();
            for event in predictor.push_frame(matrix.frame_start_ms(row), &values)? {
                if let StreamEvent::Decision(d) = event {
                    rows.push((d.timestamp_ms, primary.clone(), d.probability, d.decision));
                }
            }
        }
    }
    rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));

    let mut out = csv::WriterBuilder::new().from_writer(create(&args.out)?);
    out.write_record(["timestamp_ms", "badge_id", "probability", "decision"])
        .map_err(Error::Csv)?;
    for (ts, badge, prob, decision) in &rows {
        out.write_record(&[
            ts.to_string(),
            badge.clone(),
            prob.to_string(),
            (*decision as u8).to_string(),
        ])
        .map_err(Error::Csv)?;
    }
    out.flush().map_err(Error::Io)?;
    println!("wrote {} decisions for {} badges -> {}", rows.len(), primaries.len(), args.out.display());
    Ok(())
}

/// Finds the named columns in a CSV header; extra columns are allowed so the
/// `evaluate` output feeds straight back into `verify-metrics`.
fn column_indices(headers: &csv::StringRecord, wanted: &[&str], path: &Path) -> Result<Vec<usize>, Error> {
    wanted
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "{}: missing column `{name}` (found: {})",
                    path.display(),
                    headers.iter().collect::<Vec<_>>().join(", ")
                ))
            })
        })
        .collect()
}

fn read_confusion_csv(path: &Path) -> Result<Vec<(String, String, ConfusionMatrix)>, Error> {
    let mut reader = csv::ReaderBuilder::new().from_reader(open(path)?);
    let cols = column_indices(reader.headers()?, &["scenario", "subject", "tn", "fp", "fn", "tp"], path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<u64, Error> {
            record[cols[i]]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad count `{}`", &record[cols[i]])))
        };
        out.push((
            record[cols[0]].to_string(),
            record[cols[1]].to_string(),
            ConfusionMatrix::new(parse(2)?, parse(3)?, parse(4)?, parse(5)?),
        ));
    }
    Ok(out)
}

fn read_metrics_csv(path: &Path) -> Result<Vec<ProvidedMetrics>, Error> {
    let mut reader = csv::ReaderBuilder::new().from_reader(open(path)?);
    let cols = column_indices(
        reader.headers()?,
        &["scenario", "subject", "balanced_accuracy", "f1"],
        path,
    )?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> Result<f64, Error> {
            record[cols[i]]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad metric `{}`", &record[cols[i]])))
        };
        out.push(ProvidedMetrics {
            scenario: record[cols[0]].to_string(),
            subject: record[cols[1]].to_string(),
            balanced_accuracy: parse(2)?,
            f1: parse(3)?,
        });
    }
    Ok(out)
}

fn cmd_verify_metrics(args: VerifyMetricsArgs) -> CliResult {
    let confusions = read_confusion_csv(&args.confusion)?;
    let provided = read_metrics_csv(&args.metrics)?;
    let checks = verify_metrics(&confusions, &provided, args.tolerance)?;

    let mismatches: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    for check in &mismatches {
        println!(
            "MISMATCH {} / {} / {}: provided {:.3}, recomputed {:.6}",
            check.scenario, check.subject, check.metric, check.provided, check.recomputed
        );
    }
    println!(
        "verified {} values: {} consistent, {} mismatched (tolerance {})",
        checks.len(),
        checks.len() - mismatches.len(),
        mismatches.len(),
        args.tolerance
    );

    if let Some(path) = &args.out {
        let mut out = csv::WriterBuilder::new().from_writer(create(path)?);
        out.write_record(["scenario", "subject", "metric", "provided", "recomputed", "passed"])
            .map_err(Error::Csv)?;
        for check in &checks {
            out.write_record(&[
                check.scenario.clone(),
                check.subject.clone(),
                check.metric.clone(),
                format!("{:.6}", check.provided),
                format!("{:.6}", check.recomputed),
                check.passed.to_string(),
            ])
            .map_err(Error::Csv)?;
        }
        out.flush().map_err(Error::Io)?;
    }
    Ok(())
}
