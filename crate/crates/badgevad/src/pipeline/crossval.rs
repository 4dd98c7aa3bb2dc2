//! Stratified cross-validation and the 16-configuration model-selection
//! sweep: {4 architectures} × {feature sets A, B} × {no normalization, L2}.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{
    assemble_features, make_windows, normalize_l2, FeatureSetId, WindowDataset, WINDOW_FRAMES,
};
use crate::ingest::{LabelMatrix, VolumeMatrix};
use crate::models::{build_model, Arch, ArchSpec};
use crate::nn::DetRng;
use crate::pipeline::metrics::{confusion, metrics};
use crate::pipeline::train::{class_weights, train};

const KFOLD_STREAM: u64 = 0x4b46;
const SWEEP_SEED_STREAM: u64 = 0x5357;

/// Derives an independent 64-bit seed from `(seed, path)`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    DetRng::derive(seed, path).random_u64()
}

/// Stratified k-fold split: returns `k` disjoint validation index sets that
/// partition `0..labels.len()` with per-fold class counts within one sample
/// of `N_c / k`.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput("stratified k-fold needs k >= 2".into()));
    }
    for class in [0u8, 1] {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < k {
            return Err(Error::InvalidInput(format!(
                "class {class} has {count} samples, fewer than k = {k}"
            )));
        }
    }

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in [0u8, 1] {
        let mut indices: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let mut rng = DetRng::derive(seed, &[KFOLD_STREAM, class as u64]);
        rng.shuffle(&mut indices);
        let base = indices.len() / k;
        let extra = indices.len() % k;
        let mut cursor = 0;
        for (fold_idx, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(fold_idx < extra);
            fold.extend_from_slice(&indices[cursor..cursor + size]);
            cursor += size;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// The four window-dataset variants the sweep trains on. All variants share
/// the same windows and labels; they differ in feature columns and
/// normalization.
pub struct SweepInputs {
    set_a: WindowDataset,
    set_a_norm: WindowDataset,
    set_b: WindowDataset,
    set_b_norm: WindowDataset,
}

impl SweepInputs {
    /// Assembles features per primary badge, windows them and pools the
    /// samples across badges (in the given badge order).
    pub fn build(
        volumes: &VolumeMatrix,
        labels: &LabelMatrix,
        primaries: &[String],
        stride: usize,
    ) -> Result<Self> {
        if primaries.is_empty() {
            return Err(Error::InvalidInput("no primary badges given".into()));
        }
        let mut pooled: Option<(WindowDataset, WindowDataset)> = None;
        for primary in primaries {
            let col = labels
                .badge_index(primary)
                .ok_or_else(|| Error::InvalidInput(format!("no labels for badge `{primary}`")))?;
            let label_col = labels.column(col);
            let features_a = assemble_features(volumes, primary, FeatureSetId::SetA)?;
            let features_b = assemble_features(volumes, primary, FeatureSetId::SetB)?;
            let windows_a = make_windows(&features_a, &label_col, WINDOW_FRAMES, stride)?;
            let windows_b = make_windows(&features_b, &label_col, WINDOW_FRAMES, stride)?;
            match &mut pooled {
                None => pooled = Some((windows_a, windows_b)),
                Some((a, b)) => {
                    a.extend(&windows_a)?;
                    b.extend(&windows_b)?;
                }
            }
        }
        let (set_a, set_b) = pooled.unwrap();
        Ok(SweepInputs {
            set_a_norm: normalize_l2(set_a.clone()),
            set_b_norm: normalize_l2(set_b.clone()),
            set_a,
            set_b,
        })
    }

    pub fn get(&self, feature_set: FeatureSetId, normalized: bool) -> Result<&WindowDataset> {
        match (feature_set, normalized) {
            (FeatureSetId::SetA, false) => Ok(&self.set_a),
            (FeatureSetId::SetA, true) => Ok(&self.set_a_norm),
            (FeatureSetId::SetB, false) => Ok(&self.set_b),
            (FeatureSetId::SetB, true) => Ok(&self.set_b_norm),
            (FeatureSetId::OneChannel, _) => Err(Error::InvalidInput(
                "the selection sweep covers feature sets A and B only".into(),
            )),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.set_a.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.set_a.labels
    }
}

/// One sweep-grid configuration with its cross-validation scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub arch: Arch,
    pub feature_set: FeatureSetId,
    pub normalized: bool,
    pub cv_val_score: f64,
    pub cv_train_score: f64,
}

/// The 16-row model-selection report.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Index of the selected row (highest mean validation balanced accuracy;
    /// ties prefer fewer features, then no normalization, then architecture
    /// order).
    pub selected: usize,
}

impl SweepReport {
    pub fn selected_row(&self) -> &SweepRow {
        &self.rows[self.selected]
    }
}

/// Sweep parameters; epochs and batch size default to the training recipe
/// (15 epochs, batch 4000).
#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Worker threads; 1 forces the sequential reference path. Parallel runs
    /// produce bit-identical reports because every (row, fold) task derives
    /// its own seed.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { k: 5, epochs: 15, batch_size: 4000, seed: 0, jobs: 1 }
    }
}

/// The 16 grid configurations in report order.
pub fn sweep_grid() -> Vec<(Arch, FeatureSetId, bool)> {
    let mut grid = Vec::with_capacity(16);
    for arch in Arch::ALL {
        for feature_set in [FeatureSetId::SetA, FeatureSetId::SetB] {
            for normalized in [false, true] {
                grid.push((arch, feature_set, normalized));
            }
        }
    }
    grid
}

struct FoldScore {
    row: usize,
    val_balanced_accuracy: f64,
    train_binary_accuracy: f64,
}

fn run_fold_task(
    inputs: &SweepInputs,
    config: &SweepConfig,
    row_idx: usize,
    arch: Arch,
    feature_set: FeatureSetId,
    normalized: bool,
    fold_idx: usize,
    folds: &[Vec<usize>],
) -> Result<FoldScore> {
    let dataset = inputs.get(feature_set, normalized)?;
    let val_indices = &folds[fold_idx];
    let in_val: std::collections::HashSet<usize> = val_indices.iter().copied().collect();
    let train_indices: Vec<usize> =
        (0..dataset.len()).filter(|i| !in_val.contains(i)).collect();

    let train_set = dataset.subset(&train_indices);
    let val_set = dataset.subset(val_indices);
    // class weights come from this fold's training split only
    let weights = class_weights(&train_set.labels)?;

    let mut model = build_model(ArchSpec {
        arch,
        feature_set,
        normalized,
        seed: derive_seed(config.seed, &[SWEEP_SEED_STREAM, row_idx as u64, fold_idx as u64, 0]),
    });
    let report = train(
        &mut model,
        &train_set,
        config.epochs,
        config.batch_size,
        weights,
        derive_seed(config.seed, &[SWEEP_SEED_STREAM, row_idx as u64, fold_idx as u64, 1]),
    )?;

    let probs = model.forward(&val_set.samples)?;
    let cm = confusion(&probs, &val_set.labels, 0.5)?;
    let row = metrics(&cm)?;
    Ok(FoldScore {
        row: row_idx,
        val_balanced_accuracy: row.balanced_accuracy,
        train_binary_accuracy: report.history.last().map(|s| s.binary_accuracy).unwrap_or(0.0),
    })
}

/// Runs the full 16-configuration sweep with stratified k-fold
/// cross-validation and returns the scored report.
///
/// Per fold: fresh seeded model, class weights from the fold's training
/// split, fixed-epoch training, balanced accuracy on the held-out fold.
pub fn crossval_sweep(inputs: &SweepInputs, config: &SweepConfig) -> Result<SweepReport> {
    let grid = sweep_grid();
    let folds = stratified_kfold(inputs.labels(), config.k, derive_seed(config.seed, &[KFOLD_STREAM]))?;

    let tasks: Vec<(usize, Arch, FeatureSetId, bool, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(row_idx, &(arch, fs, norm))| {
            (0..config.k).map(move |fold| (row_idx, arch, fs, norm, fold))
        })
        .collect();

    let scores: Vec<FoldScore> = if config.jobs <= 1 {
        let mut out = Vec::with_capacity(tasks.len());
        for &(row_idx, arch, fs, norm, fold) in &tasks {
            out.push(run_fold_task(inputs, config, row_idx, arch, fs, norm, fold, &folds)?);
        }
        out
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(row_idx, arch, fs, norm, fold)| {
                    run_fold_task(inputs, config, row_idx, arch, fs, norm, fold, &folds)
                })
                .collect::<Result<Vec<_>>>()
        })?
    };

    let mut rows = Vec::with_capacity(grid.len());
    for (row_idx, &(arch, feature_set, normalized)) in grid.iter().enumerate() {
        let fold_scores: Vec<&FoldScore> = scores.iter().filter(|s| s.row == row_idx).collect();
        let val = fold_scores.iter().map(|s| s.val_balanced_accuracy).sum::<f64>()
            / fold_scores.len() as f64;
        let tr = fold_scores.iter().map(|s| s.train_binary_accuracy).sum::<f64>()
            / fold_scores.len() as f64;
        rows.push(SweepRow { arch, feature_set, normalized, cv_val_score: val, cv_train_score: tr });
    }

    let selected = select_row(&rows);
    Ok(SweepReport { rows, selected })
}

/// Tie-break key: fewer features first, then unnormalized, then architecture
/// report order.
fn tie_break_key(row: &SweepRow) -> (usize, u8, usize) {
    let arch_order = Arch::ALL.iter().position(|a| *a == row.arch).unwrap();
    (row.feature_set.feature_count(), row.normalized as u8, arch_order)
}

fn select_row(rows: &[SweepRow]) -> usize {
    let mut best = 0;
    for idx in 1..rows.len() {
        let better = rows[idx].cv_val_score > rows[best].cv_val_score
            || (rows[idx].cv_val_score == rows[best].cv_val_score
                && tie_break_key(&rows[idx]) < tie_break_key(&rows[best]));
        if better {
            best = idx;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Report CSV
// ---------------------------------------------------------------------------

/// Writes the sweep report CSV with columns
/// `arch,feature_set,normalized,cv_val_score,cv_train_score`.
pub fn write_sweep_csv<W: std::io::Write>(report: &SweepReport, writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().from_writer(writer);
    out.write_record(["arch", "feature_set", "normalized", "cv_val_score", "cv_train_score"])?;
    for row in &report.rows {
        out.write_record(&[
            row.arch.name().to_string(),
            row.feature_set.name().to_uppercase(),
            if row.normalized { "l2".to_string() } else { "no".to_string() },
            format!("{:.6}", row.cv_val_score),
            format!("{:.6}", row.cv_train_score),
        ])?;
    }
    out.flush()?;
    Ok(())
}
