//! Feature engineering over the pivoted volume matrix.
//!
//! The multi-channel features are leave-one-out differences: a statistic over
//! all badges' simultaneous amplitudes minus the same statistic excluding the
//! primary badge. When the primary badge's wearer speaks, removing that badge
//! moves the statistics a lot, so the differences light up. Each difference
//! is smoothed with a trailing 3-second rolling mean and windowed into 60
//! frame samples labeled by their final frame.
//!
//! Everything here is causal: a value at frame `t` depends only on frames
//! `<= t`, and a frame gap restarts both the rolling means and the windows.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ingest::VolumeMatrix;

/// Window length: 60 frames = 3 s at 20 Hz.
pub const WINDOW_FRAMES: usize = 60;

/// Which feature columns a model consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSetId {
    /// Raw primary-badge volume only.
    OneChannel,
    /// Volume plus rolling mean/std/variance differences.
    SetA,
    /// Set A without the variance difference.
    SetB,
}

impl FeatureSetId {
    pub fn feature_count(&self) -> usize {
        match self {
            FeatureSetId::OneChannel => 1,
            FeatureSetId::SetA => 4,
            FeatureSetId::SetB => 3,
        }
    }

    pub fn feature_names(&self) -> &'static [&'static str] {
        match self {
            FeatureSetId::OneChannel => &["volume"],
            FeatureSetId::SetA => &[
                "volume",
                "rolling_mean_diff",
                "rolling_std_diff",
                "rolling_var_diff",
            ],
            FeatureSetId::SetB => &["volume", "rolling_mean_diff", "rolling_std_diff"],
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            FeatureSetId::OneChannel => 0,
            FeatureSetId::SetA => 1,
            FeatureSetId::SetB => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(FeatureSetId::OneChannel),
            1 => Ok(FeatureSetId::SetA),
            2 => Ok(FeatureSetId::SetB),
            other => Err(Error::ModelFormat(format!("unknown feature set code {other}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureSetId::OneChannel => "one-channel",
            FeatureSetId::SetA => "a",
            FeatureSetId::SetB => "b",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "one-channel" | "one_channel" | "onechannel" => Ok(FeatureSetId::OneChannel),
            "a" | "set-a" | "set_a" => Ok(FeatureSetId::SetA),
            "b" | "set-b" | "set_b" => Ok(FeatureSetId::SetB),
            other => Err(Error::InvalidInput(format!(
                "unknown feature set `{other}` (valid: one-channel, a, b)"
            ))),
        }
    }
}

/// Per-frame feature rows for one primary badge; invalid rows mark gaps.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub primary_badge: String,
    pub t0_ms: i64,
    pub frame_ms: i64,
    pub feature_set: FeatureSetId,
    rows: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn feature_count(&self) -> usize {
        self.feature_set.feature_count()
    }

    pub fn is_valid(&self, row: usize) -> bool {
        self.valid[row]
    }

    /// Feature row `row`; meaningful only when `is_valid(row)`.
    pub fn row(&self, row: usize) -> &[f64] {
        let f = self.feature_count();
        &self.values[row * f..(row + 1) * f]
    }

    pub fn frame_start_ms(&self, row: usize) -> i64 {
        self.t0_ms + row as i64 * self.frame_ms
    }
}

/// Leave-one-out difference series; `None` where any badge is missing.
#[derive(Debug, Clone)]
pub struct LooSeries {
    pub mean_diff: Vec<Option<f64>>,
    pub std_diff: Vec<Option<f64>>,
    pub var_diff: Vec<Option<f64>>,
}

/// Leave-one-out statistics for a single complete frame.
///
/// Returns `(mean_diff, std_diff, var_diff)`: each is the population
/// statistic over all badges minus the statistic excluding `primary_idx`.
pub fn loo_frame(values: &[f64], primary_idx: usize) -> (f64, f64, f64) {
    let d = values.len() as f64;
    let sum_all: f64 = values.iter().sum();
    let mean_all = sum_all / d;
    let var_all: f64 =
        values.iter().map(|v| (v - mean_all) * (v - mean_all)).sum::<f64>() / d;

    let d_rest = d - 1.0;
    let sum_rest = sum_all - values[primary_idx];
    let mean_rest = sum_rest / d_rest;
    let var_rest: f64 = values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != primary_idx)
        .map(|(_, v)| (v - mean_rest) * (v - mean_rest))
        .sum::<f64>()
        / d_rest;

    (
        mean_all - mean_rest,
        var_all.sqrt() - var_rest.sqrt(),
        var_all - var_rest,
    )
}

/// Per-frame leave-one-out differences of `primary` against the other badges.
///
/// Frames where any badge is missing produce missing values. Statistics are
/// population (not sample) form, so two badges are enough.
pub fn loo_differences(volumes: &VolumeMatrix, primary: &str) -> Result<LooSeries> {
    let primary_idx = volumes
        .badge_index(primary)
        .ok_or_else(|| Error::InvalidInput(format!("unknown primary badge `{primary}`")))?;
    if volumes.badge_count() < 2 {
        return Err(Error::InvalidInput(
            "leave-one-out differences need at least two badges".into(),
        ));
    }

    let rows = volumes.rows();
    let mut series = LooSeries {
        mean_diff: vec![None; rows],
        std_diff: vec![None; rows],
        var_diff: vec![None; rows],
    };
    let mut frame = vec![0.0; volumes.badge_count()];
    for row in 0..rows {
        let mut complete = true;
        for (slot, value) in frame.iter_mut().zip(volumes.frame(row)) {
            match value {
                Some(v) => *slot = *v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            let (m, s, v) = loo_frame(&frame, primary_idx);
            series.mean_diff[row] = Some(m);
            series.std_diff[row] = Some(s);
            series.var_diff[row] = Some(v);
        }
    }
    Ok(series)
}

/// Trailing rolling mean with expanding warmup: the value at index `t` is
/// the mean of `series[max(0, t-window+1) ..= t]`. Causal by construction.
pub fn rolling_mean(series: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    for t in 0..series.len() {
        let start = (t + 1).saturating_sub(window);
        let slice = &series[start..=t];
        let sum: f64 = slice.iter().sum();
        out.push(sum / slice.len() as f64);
    }
    out
}

/// Assembles the feature matrix for `primary` over the grid of `volumes`.
///
/// Gap frames stay invalid and the rolling means restart at the beginning of
/// each contiguous valid run, so no feature value ever reaches across a gap.
pub fn assemble_features(
    volumes: &VolumeMatrix,
    primary: &str,
    set: FeatureSetId,
) -> Result<FeatureMatrix> {
    let primary_idx = volumes
        .badge_index(primary)
        .ok_or_else(|| Error::InvalidInput(format!("unknown primary badge `{primary}`")))?;
    let rows = volumes.rows();
    let f = set.feature_count();
    let mut values = vec![0.0; rows * f];
    let mut valid = vec![false; rows];

    match set {
        FeatureSetId::OneChannel => {
            for row in 0..rows {
                if let Some(v) = volumes.get(row, primary_idx) {
                    values[row] = v;
                    valid[row] = true;
                }
            }
        }
        FeatureSetId::SetA | FeatureSetId::SetB => {
            let loo = loo_differences(volumes, primary)?;
            // contiguous runs of complete frames
            let mut row = 0;
            while row < rows {
                if loo.mean_diff[row].is_none() {
                    row += 1;
                    continue;
                }
                let start = row;
                while row < rows && loo.mean_diff[row].is_some() {
                    row += 1;
                }
                let end = row;
                let mean_run: Vec<f64> =
                    loo.mean_diff[start..end].iter().map(|v| v.unwrap()).collect();
                let std_run: Vec<f64> =
                    loo.std_diff[start..end].iter().map(|v| v.unwrap()).collect();
                let var_run: Vec<f64> =
                    loo.var_diff[start..end].iter().map(|v| v.unwrap()).collect();
                let rm_mean = rolling_mean(&mean_run, WINDOW_FRAMES);
                let rm_std = rolling_mean(&std_run, WINDOW_FRAMES);
                let rm_var = rolling_mean(&var_run, WINDOW_FRAMES);
                for (offset, r) in (start..end).enumerate() {
                    let base = r * f;
                    values[base] = volumes.get(r, primary_idx).expect("complete frame");
                    values[base + 1] = rm_mean[offset];
                    values[base + 2] = rm_std[offset];
                    if set == FeatureSetId::SetA {
                        values[base + 3] = rm_var[offset];
                    }
                    valid[r] = true;
                }
            }
        }
    }

    Ok(FeatureMatrix {
        primary_badge: primary.to_string(),
        t0_ms: volumes.t0_ms,
        frame_ms: volumes.frame_ms,
        feature_set: set,
        rows,
        values,
        valid,
    })
}

/// Fixed-length windows with binary labels; the sample tensor is
/// `N × window × F` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    pub window: usize,
    pub feature_count: usize,
    pub feature_set: FeatureSetId,
    pub normalized: bool,
    pub samples: Vec<f64>,
    pub labels: Vec<u8>,
    pub end_timestamps_ms: Vec<i64>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample `i` as a `window × F` slice.
    pub fn sample(&self, i: usize) -> &[f64] {
        let stride = self.window * self.feature_count;
        &self.samples[i * stride..(i + 1) * stride]
    }

    /// Copies the given samples (by index, in order) into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> WindowDataset {
        let stride = self.window * self.feature_count;
        let mut out = WindowDataset {
            window: self.window,
            feature_count: self.feature_count,
            feature_set: self.feature_set,
            normalized: self.normalized,
            samples: Vec::with_capacity(indices.len() * stride),
            labels: Vec::with_capacity(indices.len()),
            end_timestamps_ms: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            out.samples.extend_from_slice(self.sample(i));
            out.labels.push(self.labels[i]);
            out.end_timestamps_ms.push(self.end_timestamps_ms[i]);
        }
        out
    }

    /// Appends all samples of `other`; shapes and flags must agree.
    pub fn extend(&mut self, other: &WindowDataset) -> Result<()> {
        if self.window != other.window
            || self.feature_count != other.feature_count
            || self.feature_set != other.feature_set
            || self.normalized != other.normalized
        {
            return Err(Error::ShapeMismatch("incompatible window datasets".into()));
        }
        self.samples.extend_from_slice(&other.samples);
        self.labels.extend_from_slice(&other.labels);
        self.end_timestamps_ms.extend_from_slice(&other.end_timestamps_ms);
        Ok(())
    }
}

/// Slices sliding windows out of contiguous valid runs.
///
/// One sample per stride step within each run of at least `window` valid
/// frames; sample `i` covers frames `[e-window+1 ..= e]` and takes the label
/// of its final frame `e`.
pub fn make_windows(
    features: &FeatureMatrix,
    labels: &[u8],
    window: usize,
    stride: usize,
) -> Result<WindowDataset> {
    if labels.len() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} label frames for {} feature frames",
            labels.len(),
            features.rows()
        )));
    }
    if window == 0 || stride == 0 {
        return Err(Error::InvalidInput("window and stride must be >= 1".into()));
    }
    let f = features.feature_count();
    let mut dataset = WindowDataset {
        window,
        feature_count: f,
        feature_set: features.feature_set,
        normalized: false,
        samples: Vec::new(),
        labels: Vec::new(),
        end_timestamps_ms: Vec::new(),
    };

    let rows = features.rows();
    let mut row = 0;
    while row < rows {
        if !features.is_valid(row) {
            row += 1;
            continue;
        }
        let start = row;
        while row < rows && features.is_valid(row) {
            row += 1;
        }
        let end = row; // run is [start, end)
        if end - start < window {
            continue;
        }
        let mut e = start + window - 1;
        while e < end {
            for r in (e + 1 - window)..=e {
                dataset.samples.extend_from_slice(features.row(r));
            }
            dataset.labels.push(labels[e]);
            dataset.end_timestamps_ms.push(features.frame_start_ms(e));
            e += stride;
        }
    }
    Ok(dataset)
}

/// Scales one feature channel (length-`window` slice with stride `f`) to unit
/// Euclidean norm; all-zero channels stay zero.
pub fn normalize_channel(sample: &mut [f64], channel: usize, feature_count: usize) {
    let mut norm_sq = 0.0;
    let mut idx = channel;
    while idx < sample.len() {
        norm_sq += sample[idx] * sample[idx];
        idx += feature_count;
    }
    if norm_sq == 0.0 {
        return;
    }
    let norm = norm_sq.sqrt();
    let mut idx = channel;
    while idx < sample.len() {
        sample[idx] /= norm;
        idx += feature_count;
    }
}

/// L2-normalizes every feature channel of every sample independently.
///
/// Labels and timestamps are untouched; the `normalized` flag is set. The
/// input must not already be normalized.
pub fn normalize_l2(mut dataset: WindowDataset) -> WindowDataset {
    assert!(!dataset.normalized, "dataset is already normalized");
    let stride = dataset.window * dataset.feature_count;
    let f = dataset.feature_count;
    for sample in dataset.samples.chunks_exact_mut(stride) {
        for channel in 0..f {
            normalize_channel(sample, channel, f);
        }
    }
    dataset.normalized = true;
    dataset
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

const DATASET_MAGIC: &[u8; 4] = b"BVWD";
const DATASET_VERSION: u32 = 1;

/// Writes the dataset container: fixed header (magic, version, N, F, window,
/// feature set, normalized flag), then row-major little-endian f64 samples,
/// labels as bytes, and little-endian i64 end timestamps.
pub fn write_dataset<W: Write>(dataset: &WindowDataset, mut writer: W) -> Result<()> {
    writer.write_all(DATASET_MAGIC)?;
    writer.write_all(&DATASET_VERSION.to_le_bytes())?;
    writer.write_all(&(dataset.len() as u64).to_le_bytes())?;
    writer.write_all(&(dataset.feature_count as u32).to_le_bytes())?;
    writer.write_all(&(dataset.window as u32).to_le_bytes())?;
    writer.write_all(&[dataset.feature_set.code(), dataset.normalized as u8])?;
    for v in &dataset.samples {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.write_all(&dataset.labels)?;
    for t in &dataset.end_timestamps_ms {
        writer.write_all(&t.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_or(reader: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|_| Error::ModelFormat(format!("truncated payload: {what}")))
}

/// Reads a dataset container written by [`write_dataset`].
pub fn read_dataset<R: Read>(mut reader: R) -> Result<WindowDataset> {
    let mut magic = [0u8; 4];
    read_exact_or(&mut reader, &mut magic, "magic")?;
    if &magic != DATASET_MAGIC {
        return Err(Error::ModelFormat("bad magic: not a window dataset".into()));
    }
    let mut u32buf = [0u8; 4];
    read_exact_or(&mut reader, &mut u32buf, "version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != DATASET_VERSION {
        return Err(Error::ModelFormat(format!("unsupported dataset version {version}")));
    }
    let mut u64buf = [0u8; 8];
    read_exact_or(&mut reader, &mut u64buf, "sample count")?;
    let n = u64::from_le_bytes(u64buf) as usize;
    read_exact_or(&mut reader, &mut u32buf, "feature count")?;
    let f = u32::from_le_bytes(u32buf) as usize;
    read_exact_or(&mut reader, &mut u32buf, "window")?;
    let window = u32::from_le_bytes(u32buf) as usize;
    let mut flags = [0u8; 2];
    read_exact_or(&mut reader, &mut flags, "flags")?;
    let feature_set = FeatureSetId::from_code(flags[0])?;
    if feature_set.feature_count() != f {
        return Err(Error::ModelFormat(format!(
            "feature set {} implies {} features, header says {f}",
            feature_set.name(),
            feature_set.feature_count()
        )));
    }

    let mut samples = vec![0.0f64; n * window * f];
    let mut f64buf = [0u8; 8];
    for v in &mut samples {
        read_exact_or(&mut reader, &mut f64buf, "samples")?;
        *v = f64::from_le_bytes(f64buf);
    }
    let mut labels = vec![0u8; n];
    read_exact_or(&mut reader, &mut labels, "labels")?;
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::ModelFormat("labels must be 0 or 1".into()));
    }
    let mut end_timestamps_ms = vec![0i64; n];
    for t in &mut end_timestamps_ms {
        read_exact_or(&mut reader, &mut f64buf, "timestamps")?;
        *t = i64::from_le_bytes(f64buf);
    }

    Ok(WindowDataset {
        window,
        feature_count: f,
        feature_set,
        normalized: flags[1] != 0,
        samples,
        labels,
        end_timestamps_ms,
    })
}
