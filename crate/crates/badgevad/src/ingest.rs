//! Badge sample ingestion: CSV parsing, the time-gridded volume matrix,
//! label rasterization, sync-spike detection and alignment validation.
//!
//! Badges emit one average-amplitude reading per 50 ms frame. The pivoted
//! matrix has one row per frame and one column per badge; cells with no
//! reading are carried forward for short radio dropouts (≤ 250 ms) and stay
//! missing for longer gaps, which later breaks window continuity.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid resolution: one frame every 50 ms (20 Hz).
pub const FRAME_MS: i64 = 50;
/// Longest gap (between consecutive readings of one badge) bridged by
/// carrying the last value forward: 250 ms, i.e. at most 4 missing frames.
pub const MAX_FILL_GAP_MS: i64 = 250;
const MAX_FILL_FRAMES: i64 = MAX_FILL_GAP_MS / FRAME_MS - 1;

/// One badge reading: average amplitude over one 50 ms frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BadgeSampleRecord {
    pub badge_id: String,
    pub timestamp_ms: i64,
    pub amplitude: f64,
}

/// Time-gridded amplitude matrix; badges as columns, frames as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMatrix {
    pub t0_ms: i64,
    pub frame_ms: i64,
    pub badge_ids: Vec<String>,
    rows: usize,
    values: Vec<Option<f64>>,
}

impl VolumeMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn badge_count(&self) -> usize {
        self.badge_ids.len()
    }

    /// Start time of frame `row`.
    pub fn frame_start_ms(&self, row: usize) -> i64 {
        self.t0_ms + row as i64 * self.frame_ms
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row * self.badge_ids.len() + col]
    }

    /// All badge values of one frame.
    pub fn frame(&self, row: usize) -> &[Option<f64>] {
        let d = self.badge_ids.len();
        &self.values[row * d..(row + 1) * d]
    }

    pub fn badge_index(&self, badge_id: &str) -> Option<usize> {
        self.badge_ids.iter().position(|b| b == badge_id)
    }

    /// Column `col` as a vector of optional values.
    pub fn column(&self, col: usize) -> Vec<Option<f64>> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }
}

/// Half-open voice-activity interval `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Voice-activity intervals per badge.
pub type LabelIntervals = BTreeMap<String, Vec<LabelInterval>>;

/// Per-frame binary labels on the same grid as a [`VolumeMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub t0_ms: i64,
    pub frame_ms: i64,
    pub badge_ids: Vec<String>,
    rows: usize,
    values: Vec<u8>,
}

impl LabelMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.values[row * self.badge_ids.len() + col]
    }

    pub fn badge_index(&self, badge_id: &str) -> Option<usize> {
        self.badge_ids.iter().position(|b| b == badge_id)
    }

    pub fn column(&self, col: usize) -> Vec<u8> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    /// Converts the rasterized frames back to merged half-open intervals.
    pub fn to_intervals(&self) -> LabelIntervals {
        let mut out = LabelIntervals::new();
        for (col, badge) in self.badge_ids.iter().enumerate() {
            let mut intervals = Vec::new();
            let mut run_start: Option<i64> = None;
            for row in 0..self.rows {
                let active = self.get(row, col) == 1;
                let start = self.t0_ms + row as i64 * self.frame_ms;
                match (active, run_start) {
                    (true, None) => run_start = Some(start),
                    (false, Some(s)) => {
                        intervals.push(LabelInterval { start_ms: s, end_ms: start });
                        run_start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = run_start {
                intervals.push(LabelInterval {
                    start_ms: s,
                    end_ms: self.t0_ms + self.rows as i64 * self.frame_ms,
                });
            }
            out.insert(badge.clone(), intervals);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Samples CSV
// ---------------------------------------------------------------------------

const SAMPLES_HEADER: [&str; 3] = ["timestamp_ms", "badge_id", "amplitude"];

/// Parses the samples CSV (`timestamp_ms,badge_id,amplitude`).
///
/// Records come back sorted by `(badge_id, timestamp_ms)` regardless of the
/// input row order.
pub fn parse_samples<R: Read>(reader: R) -> Result<Vec<BadgeSampleRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    {
        let headers = csv_reader.headers()?;
        let fields: Vec<&str> = headers.iter().collect();
        if fields != SAMPLES_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header `{}`, got `{}`",
                    SAMPLES_HEADER.join(","),
                    fields.join(",")
                ),
            });
        }
    }

    let mut records = Vec::new();
    for row in csv_reader.records() {
        let row = row.map_err(|e| match e.position() {
            Some(pos) => Error::Parse { line: pos.line(), message: e.to_string() },
            None => Error::Csv(e),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 columns, got {}", row.len()),
            });
        }
        let timestamp_ms: i64 = row[0].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-numeric timestamp_ms `{}`", &row[0]),
        })?;
        let amplitude: f64 = row[2].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("non-numeric amplitude `{}`", &row[2]),
        })?;
        if timestamp_ms < 0 {
            return Err(Error::InvalidInput(format!(
                "line {line}: negative timestamp {timestamp_ms}"
            )));
        }
        if !amplitude.is_finite() || amplitude < 0.0 {
            return Err(Error::InvalidInput(format!(
                "line {line}: amplitude must be a non-negative finite number, got {amplitude}"
            )));
        }
        records.push(BadgeSampleRecord {
            badge_id: row[1].to_string(),
            timestamp_ms,
            amplitude,
        });
    }
    records.sort_by(|a, b| {
        (a.badge_id.as_str(), a.timestamp_ms).cmp(&(b.badge_id.as_str(), b.timestamp_ms))
    });
    Ok(records)
}

/// Writes the samples CSV with the canonical header, LF line endings.
pub fn write_samples_csv<W: Write>(records: &[BadgeSampleRecord], writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().from_writer(writer);
    out.write_record(SAMPLES_HEADER)?;
    for r in records {
        out.write_record(&[r.timestamp_ms.to_string(), r.badge_id.clone(), r.amplitude.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Labels JSON
// ---------------------------------------------------------------------------

/// Reads the labels JSON: an object mapping badge_id to intervals.
pub fn read_labels_json<R: Read>(reader: R) -> Result<LabelIntervals> {
    let intervals: LabelIntervals = serde_json::from_reader(reader)?;
    for (badge, spans) in &intervals {
        for span in spans {
            if span.start_ms >= span.end_ms {
                return Err(Error::InvalidInput(format!(
                    "badge {badge}: interval [{}, {}) is empty or inverted",
                    span.start_ms, span.end_ms
                )));
            }
        }
    }
    Ok(intervals)
}

pub fn write_labels_json<W: Write>(intervals: &LabelIntervals, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, intervals)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Pivot
// ---------------------------------------------------------------------------

/// Builds the time-gridded volume matrix from raw records.
///
/// The grid starts at the earliest timestamp rounded down to a 50 ms
/// boundary; each cell is the mean of the records falling inside its frame.
/// Gaps of at most 250 ms are bridged by carrying the last value forward.
pub fn pivot_volumes(records: &[BadgeSampleRecord]) -> Result<VolumeMatrix> {
    let mut matrix = pivot_volumes_unfilled(records)?;
    forward_fill(&mut matrix);
    Ok(matrix)
}

/// Like [`pivot_volumes`] but leaves every unobserved cell missing.
///
/// Streaming replay feeds these rows to the predictor, which applies the
/// identical forward-fill rule itself; filling here too would double the
/// 250 ms budget.
pub fn pivot_volumes_unfilled(records: &[BadgeSampleRecord]) -> Result<VolumeMatrix> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to pivot".into()));
    }
    let min_ts = records.iter().map(|r| r.timestamp_ms).min().unwrap();
    let max_ts = records.iter().map(|r| r.timestamp_ms).max().unwrap();
    let t0_ms = min_ts.div_euclid(FRAME_MS) * FRAME_MS;
    let rows = ((max_ts - t0_ms) / FRAME_MS + 1) as usize;

    let mut badge_ids: Vec<String> = records.iter().map(|r| r.badge_id.clone()).collect();
    badge_ids.sort();
    badge_ids.dedup();
    let d = badge_ids.len();

    let mut sums = vec![0.0f64; rows * d];
    let mut counts = vec![0u32; rows * d];
    for r in records {
        let col = badge_ids.binary_search(&r.badge_id).unwrap();
        let row = ((r.timestamp_ms - t0_ms) / FRAME_MS) as usize;
        sums[row * d + col] += r.amplitude;
        counts[row * d + col] += 1;
    }

    let mut values = vec![None; rows * d];
    for (idx, value) in values.iter_mut().enumerate() {
        if counts[idx] > 0 {
            *value = Some(sums[idx] / counts[idx] as f64);
        }
    }
    Ok(VolumeMatrix { t0_ms, frame_ms: FRAME_MS, badge_ids, rows, values })
}

/// Carries the last observed value of each badge forward for at most 4
/// consecutive missing frames (250 ms).
fn forward_fill(matrix: &mut VolumeMatrix) {
    let d = matrix.badge_ids.len();
    for col in 0..d {
        let mut last: Option<f64> = None;
        let mut fills_since_observed = 0i64;
        for row in 0..matrix.rows {
            let idx = row * d + col;
            match matrix.values[idx] {
                Some(v) => {
                    last = Some(v);
                    fills_since_observed = 0;
                }
                None => {
                    if let Some(v) = last {
                        if fills_since_observed < MAX_FILL_FRAMES {
                            matrix.values[idx] = Some(v);
                            fills_since_observed += 1;
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Label rasterization
// ---------------------------------------------------------------------------

/// Rounds to the nearest multiple of 50 ms; exact halves round up.
fn round_half_up(t: i64) -> i64 {
    (t + FRAME_MS / 2).div_euclid(FRAME_MS) * FRAME_MS
}

/// Rasterizes labeled intervals onto the grid of `volumes`.
///
/// Interval endpoints are rounded to the nearest frame boundary (ties up);
/// frames inside the rounded half-open interval are set to 1. An interval
/// that rounds to nothing contributes no frames.
pub fn rasterize_labels(intervals: &LabelIntervals, volumes: &VolumeMatrix) -> Result<LabelMatrix> {
    let unknown: Vec<&String> = intervals
        .keys()
        .filter(|badge| volumes.badge_index(badge).is_none())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::InvalidInput(format!(
            "label badges not present in volume grid: {}",
            unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }

    let d = volumes.badge_count();
    let rows = volumes.rows();
    let mut values = vec![0u8; rows * d];
    for (badge, spans) in intervals {
        let col = volumes.badge_index(badge).unwrap();
        for span in spans {
            let start = round_half_up(span.start_ms);
            let end = round_half_up(span.end_ms);
            if end <= start {
                continue;
            }
            let first_row = ((start - volumes.t0_ms).div_euclid(FRAME_MS)).max(0);
            let last_row = ((end - volumes.t0_ms).div_euclid(FRAME_MS)).min(rows as i64);
            for row in first_row..last_row {
                values[row as usize * d + col] = 1;
            }
        }
    }
    Ok(LabelMatrix {
        t0_ms: volumes.t0_ms,
        frame_ms: volumes.frame_ms,
        badge_ids: volumes.badge_ids.clone(),
        rows,
        values,
    })
}

// ---------------------------------------------------------------------------
// Sync-spike detection
// ---------------------------------------------------------------------------

/// Sync-spike detector thresholds. The clap protocol gives a simultaneous
/// high-amplitude burst on every badge; these defaults are validated against
/// the simulator.
#[derive(Debug, Clone, Copy)]
pub struct SpikeConfig {
    /// Per-badge amplitude percentile a frame must exceed.
    pub percentile: f64,
    /// Fraction of badges that must exceed their percentile simultaneously.
    pub badge_quorum: f64,
    /// Fraction of window frames that must qualify.
    pub frame_fraction: f64,
    /// Length of the burst, seconds.
    pub expected_duration_s: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            percentile: 0.95,
            badge_quorum: 0.8,
            frame_fraction: 0.5,
            expected_duration_s: 15.0,
        }
    }
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Finds the onset of the clap sync spike.
///
/// Returns the start time of the earliest window of the expected duration in
/// which the per-frame amplitude strictly exceeds each badge's own
/// `percentile` on at least `badge_quorum` of badges, for at least
/// `frame_fraction` of the window's frames.
pub fn detect_sync_spike_with(matrix: &VolumeMatrix, config: &SpikeConfig) -> Result<i64> {
    let window = (config.expected_duration_s * 1000.0 / matrix.frame_ms as f64).round() as usize;
    if window == 0 || matrix.rows() < window {
        return Err(Error::InvalidInput(format!(
            "matrix spans {} frames, expected at least {}",
            matrix.rows(),
            window
        )));
    }
    let d = matrix.badge_count();

    let thresholds: Vec<Option<f64>> = (0..d)
        .map(|col| {
            let mut present: Vec<f64> = matrix.column(col).into_iter().flatten().collect();
            if present.is_empty() {
                return None;
            }
            present.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(percentile_sorted(&present, config.percentile))
        })
        .collect();

    let quorum = (config.badge_quorum * d as f64).ceil() as usize;
    let needed_frames = (config.frame_fraction * window as f64).ceil() as usize;

    let qualifying: Vec<bool> = (0..matrix.rows())
        .map(|row| {
            let exceeding = matrix
                .frame(row)
                .iter()
                .zip(&thresholds)
                .filter(|(v, th)| match (v, th) {
                    (Some(v), Some(th)) => v > th,
                    _ => false,
                })
                .count();
            exceeding >= quorum.max(1)
        })
        .collect();

    // Earliest window with enough qualifying frames, then the first
    // qualifying frame inside it: the window alone can start up to half a
    // burst early, while the badge quorum makes stray frames negligible.
    let mut in_window = qualifying[..window].iter().filter(|&&q| q).count();
    let mut found = None;
    if in_window >= needed_frames {
        found = Some(0);
    } else {
        for start in 1..=(matrix.rows() - window) {
            in_window -= qualifying[start - 1] as usize;
            in_window += qualifying[start + window - 1] as usize;
            if in_window >= needed_frames {
                found = Some(start);
                break;
            }
        }
    }
    match found {
        Some(start) => {
            let onset = (start..start + window).find(|&f| qualifying[f]).unwrap_or(start);
            Ok(matrix.frame_start_ms(onset))
        }
        None => Err(Error::NoSpikeFound),
    }
}

/// Spike detection with default thresholds and the given burst duration.
pub fn detect_sync_spike(matrix: &VolumeMatrix, expected_duration_s: f64) -> Result<i64> {
    detect_sync_spike_with(matrix, &SpikeConfig { expected_duration_s, ..SpikeConfig::default() })
}

// ---------------------------------------------------------------------------
// Alignment validation
// ---------------------------------------------------------------------------

/// One failed alignment check.
#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentViolation {
    BadgeSetMismatch { only_in_volumes: Vec<String>, only_in_labels: Vec<String> },
    ColumnOrderMismatch { volume_order: Vec<String>, label_order: Vec<String> },
    TimeRangeMismatch { volume_t0_ms: i64, volume_rows: usize, label_t0_ms: i64, label_rows: usize },
    SpikeOffset { detected_ms: i64, declared_ms: i64 },
}

impl std::fmt::Display for AlignmentViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlignmentViolation::BadgeSetMismatch { only_in_volumes, only_in_labels } => write!(
                f,
                "badge set mismatch: only in volumes [{}], only in labels [{}]",
                only_in_volumes.join(", "),
                only_in_labels.join(", ")
            ),
            AlignmentViolation::ColumnOrderMismatch { volume_order, label_order } => write!(
                f,
                "column order mismatch: volumes [{}] vs labels [{}]",
                volume_order.join(", "),
                label_order.join(", ")
            ),
            AlignmentViolation::TimeRangeMismatch {
                volume_t0_ms,
                volume_rows,
                label_t0_ms,
                label_rows,
            } => write!(
                f,
                "time range mismatch: volumes start {volume_t0_ms} ({volume_rows} frames) vs labels start {label_t0_ms} ({label_rows} frames)"
            ),
            AlignmentViolation::SpikeOffset { detected_ms, declared_ms } => write!(
                f,
                "sync spike offset: detected {detected_ms} vs declared {declared_ms}"
            ),
        }
    }
}

/// Structured result of [`validate_alignment`]; diagnostics, not exceptions.
#[derive(Debug, Clone, Default)]
pub struct AlignmentReport {
    pub violations: Vec<AlignmentViolation>,
}

impl AlignmentReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Spike agreement tolerance between detected and declared onsets.
pub const SPIKE_AGREEMENT_MS: i64 = 500;

/// Checks that a volume matrix and a label matrix describe the same grid.
///
/// Verifies badge sets, column order, time range, and (when a declared spike
/// time is available and a spike is detectable) clap-spike agreement within
/// 500 ms.
pub fn validate_alignment(
    volumes: &VolumeMatrix,
    labels: &LabelMatrix,
    declared_spike_ms: Option<i64>,
) -> AlignmentReport {
    let mut report = AlignmentReport::default();

    let mut vol_sorted = volumes.badge_ids.clone();
    vol_sorted.sort();
    let mut lab_sorted = labels.badge_ids.clone();
    lab_sorted.sort();
    if vol_sorted != lab_sorted {
        let only_in_volumes =
            vol_sorted.iter().filter(|b| !lab_sorted.contains(b)).cloned().collect();
        let only_in_labels =
            lab_sorted.iter().filter(|b| !vol_sorted.contains(b)).cloned().collect();
        report
            .violations
            .push(AlignmentViolation::BadgeSetMismatch { only_in_volumes, only_in_labels });
    } else if volumes.badge_ids != labels.badge_ids {
        report.violations.push(AlignmentViolation::ColumnOrderMismatch {
            volume_order: volumes.badge_ids.clone(),
            label_order: labels.badge_ids.clone(),
        });
    }

    if volumes.t0_ms != labels.t0_ms || volumes.rows() != labels.rows() {
        report.violations.push(AlignmentViolation::TimeRangeMismatch {
            volume_t0_ms: volumes.t0_ms,
            volume_rows: volumes.rows(),
            label_t0_ms: labels.t0_ms,
            label_rows: labels.rows(),
        });
    }

    if let Some(declared) = declared_spike_ms {
        if let Ok(detected) = detect_sync_spike(volumes, SpikeConfig::default().expected_duration_s)
        {
            if (detected - declared).abs() > SPIKE_AGREEMENT_MS {
                report
                    .violations
                    .push(AlignmentViolation::SpikeOffset { detected_ms: detected, declared_ms: declared });
            }
        }
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(badge: &str, ts: i64, amp: f64) -> BadgeSampleRecord {
        BadgeSampleRecord { badge_id: badge.into(), timestamp_ms: ts, amplitude: amp }
    }

    #[test]
    fn parse_single_row() {
        let records = parse_samples("timestamp_ms,badge_id,amplitude\n1000,b1,3.5\n".as_bytes())
            .unwrap();
        assert_eq!(records, vec![rec("b1", 1000, 3.5)]);
    }

    #[test]
    fn parse_sorts_by_badge_then_time() {
        let csv = "timestamp_ms,badge_id,amplitude\n1050,b1,1\n1000,b1,2\n";
        let records = parse_samples(csv.as_bytes()).unwrap();
        assert_eq!(records[0].timestamp_ms, 1000);
        assert_eq!(records[1].timestamp_ms, 1050);
    }

    #[test]
    fn parse_rejects_negative_amplitude() {
        let err = parse_samples("timestamp_ms,badge_id,amplitude\n1000,b1,-2\n".as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    }

    #[test]
    fn parse_names_offending_line() {
        let csv = "timestamp_ms,badge_id,amplitude\n1000,b1,1.0\n1050,b1,abc\n";
        let err = parse_samples(csv.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn parse_rejects_wrong_column_count() {
        let csv = "timestamp_ms,badge_id,amplitude\n1000,b1\n";
        assert!(parse_samples(csv.as_bytes()).is_err());
    }

    #[test]
    fn parse_rejects_wrong_header() {
        let csv = "time,badge,amp\n1000,b1,1.0\n";
        let err = parse_samples(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn pivot_direct_placement() {
        let m = pivot_volumes(&[rec("b1", 1000, 2.0), rec("b2", 1000, 4.0)]).unwrap();
        assert_eq!(m.t0_ms, 1000);
        assert_eq!(m.rows(), 1);
        assert_eq!(m.badge_ids, vec!["b1", "b2"]);
        assert_eq!(m.get(0, 0), Some(2.0));
        assert_eq!(m.get(0, 1), Some(4.0));
    }

    #[test]
    fn pivot_means_in_frame_records() {
        // 1000 and 1020 land in the same frame; the cell is their mean.
        let m = pivot_volumes(&[rec("b1", 1000, 2.0), rec("b1", 1020, 4.0)]).unwrap();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.get(0, 0), Some(3.0));
    }

    #[test]
    fn pivot_forward_fills_short_gap() {
        // Readings at 1000 and 1100 only; the empty frame at 1050 is carried
        // forward (gap 100 ms ≤ 250 ms).
        let m = pivot_volumes(&[rec("b1", 1000, 2.0), rec("b1", 1100, 5.0)]).unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.get(0, 0), Some(2.0));
        assert_eq!(m.get(1, 0), Some(2.0));
        assert_eq!(m.get(2, 0), Some(5.0));
    }

    #[test]
    fn pivot_leaves_long_gap_missing() {
        // Gap of 300 ms: at most 4 of the 5 empty frames may be filled, so at
        // least one stays missing and the stream breaks.
        let m = pivot_volumes(&[rec("b1", 1000, 2.0), rec("b1", 1300, 5.0)]).unwrap();
        assert_eq!(m.rows(), 7);
        assert_eq!(m.get(4, 0), Some(2.0)); // 4th fill
        assert_eq!(m.get(5, 0), None); // beyond the 250 ms budget
        assert_eq!(m.get(6, 0), Some(5.0));
    }

    #[test]
    fn pivot_row_count_formula() {
        // T = ceil((max_ts − floor(min_ts/50)·50 + 1)/50)
        for &(min_ts, max_ts) in &[(1000i64, 1000i64), (1010, 1049), (1010, 1050), (999, 1651)] {
            let m = pivot_volumes(&[rec("b1", min_ts, 1.0), rec("b1", max_ts, 1.0)]).unwrap();
            let t0 = min_ts.div_euclid(50) * 50;
            let expected = ((max_ts - t0 + 1) as f64 / 50.0).ceil() as usize;
            assert_eq!(m.rows(), expected, "range {min_ts}..{max_ts}");
        }
    }

    #[test]
    fn pivot_empty_input_is_error() {
        assert!(pivot_volumes(&[]).is_err());
    }

    fn grid_1000_frames() -> VolumeMatrix {
        let records: Vec<BadgeSampleRecord> =
            (0..1000).map(|i| rec("b1", i * 50, 1.0)).collect();
        pivot_volumes(&records).unwrap()
    }

    #[test]
    fn rasterize_rounds_endpoints_half_up() {
        // [130, 410) rounds to [150, 400): frames 150..350 on.
        let grid = grid_1000_frames();
        let mut intervals = LabelIntervals::new();
        intervals.insert("b1".into(), vec![LabelInterval { start_ms: 130, end_ms: 410 }]);
        let labels = rasterize_labels(&intervals, &grid).unwrap();
        let on: Vec<i64> = (0..labels.rows())
            .filter(|&r| labels.get(r, 0) == 1)
            .map(|r| grid.frame_start_ms(r))
            .collect();
        assert_eq!(on, vec![150, 200, 250, 300, 350]);
    }

    #[test]
    fn rasterize_degenerate_interval_sets_nothing() {
        // [1000, 1010) rounds to [1000, 1000).
        let grid = grid_1000_frames();
        let mut intervals = LabelIntervals::new();
        intervals.insert("b1".into(), vec![LabelInterval { start_ms: 1000, end_ms: 1010 }]);
        let labels = rasterize_labels(&intervals, &grid).unwrap();
        assert!(labels.column(0).iter().all(|&v| v == 0));
    }

    #[test]
    fn rasterize_no_intervals_all_zero() {
        let grid = grid_1000_frames();
        let labels = rasterize_labels(&LabelIntervals::new(), &grid).unwrap();
        assert!(labels.column(0).iter().all(|&v| v == 0));
    }

    #[test]
    fn rasterize_unknown_badge_is_error() {
        let grid = grid_1000_frames();
        let mut intervals = LabelIntervals::new();
        intervals.insert("ghost".into(), vec![LabelInterval { start_ms: 0, end_ms: 100 }]);
        let err = rasterize_labels(&intervals, &grid).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn rasterize_is_idempotent() {
        let grid = grid_1000_frames();
        let mut intervals = LabelIntervals::new();
        intervals.insert(
            "b1".into(),
            vec![
                LabelInterval { start_ms: 130, end_ms: 410 },
                LabelInterval { start_ms: 380, end_ms: 900 }, // overlaps previous
                LabelInterval { start_ms: 2000, end_ms: 2220 },
            ],
        );
        let first = rasterize_labels(&intervals, &grid).unwrap();
        let second = rasterize_labels(&first.to_intervals(), &grid).unwrap();
        assert_eq!(first, second);
    }

    fn spike_matrix(n_badges: usize, burst_badges: usize, onset_row: usize) -> VolumeMatrix {
        // 10 min of quiet with a 15 s burst on `burst_badges` badges; the
        // burst must stay well under 5% of the recording so it does not
        // dominate its own 95th percentile.
        let rows = 12_000;
        let mut records = Vec::new();
        for b in 0..n_badges {
            for row in 0..rows {
                let in_burst = row >= onset_row && row < onset_row + 300 && b < burst_badges;
                let amp = if in_burst { 100.0 } else { 1.0 + (row % 7) as f64 * 0.01 };
                records.push(rec(&format!("b{b}"), row as i64 * 50, amp));
            }
        }
        pivot_volumes(&records).unwrap()
    }

    #[test]
    fn spike_detected_at_burst_onset() {
        let m = spike_matrix(6, 6, 600); // burst at t = 30 s
        let onset = detect_sync_spike(&m, 15.0).unwrap();
        assert!((onset - 30_000).abs() <= 250, "onset {onset}");
    }

    #[test]
    fn constant_stream_has_no_spike() {
        let records: Vec<BadgeSampleRecord> = (0..400)
            .flat_map(|row| {
                (0..4).map(move |b| rec(&format!("b{b}"), row * 50, 2.0))
            })
            .collect();
        let m = pivot_volumes(&records).unwrap();
        assert!(matches!(detect_sync_spike(&m, 15.0), Err(Error::NoSpikeFound)));
    }

    #[test]
    fn burst_below_quorum_is_not_a_spike() {
        // Burst on 2 of 6 badges: below the 80% quorum.
        let m = spike_matrix(6, 2, 600);
        assert!(matches!(detect_sync_spike(&m, 15.0), Err(Error::NoSpikeFound)));
    }

    #[test]
    fn spike_is_translation_equivariant() {
        let m = spike_matrix(6, 6, 600);
        let shifted: Vec<BadgeSampleRecord> = (0..6)
            .flat_map(|b| {
                let m = &m;
                (0..m.rows()).filter_map(move |row| {
                    m.get(row, b).map(|amp| BadgeSampleRecord {
                        badge_id: m.badge_ids[b].clone(),
                        timestamp_ms: m.frame_start_ms(row) + 7_350,
                        amplitude: amp,
                    })
                })
            })
            .collect();
        let shifted_matrix = pivot_volumes(&shifted).unwrap();
        let base = detect_sync_spike(&m, 15.0).unwrap();
        let moved = detect_sync_spike(&shifted_matrix, 15.0).unwrap();
        assert_eq!(moved - base, 7_350);
    }

    #[test]
    fn alignment_passes_on_matching_grids() {
        let grid = grid_1000_frames();
        let labels = rasterize_labels(&LabelIntervals::new(), &grid).unwrap();
        assert!(validate_alignment(&grid, &labels, None).passed());
    }

    #[test]
    fn alignment_flags_column_permutation() {
        let mut records = Vec::new();
        for b in ["a", "b", "c", "d"] {
            for row in 0..100i64 {
                records.push(rec(b, row * 50, 1.0));
            }
        }
        let grid = pivot_volumes(&records).unwrap();
        let mut labels = rasterize_labels(&LabelIntervals::new(), &grid).unwrap();
        labels.badge_ids = vec!["c".into(), "d".into(), "a".into(), "b".into()];
        let report = validate_alignment(&grid, &labels, None);
        assert!(!report.passed());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AlignmentViolation::ColumnOrderMismatch { .. })));
        assert!(report.violations[0].to_string().contains("column order mismatch"));
    }

    #[test]
    fn alignment_flags_time_offset() {
        let grid = grid_1000_frames();
        let mut labels = rasterize_labels(&LabelIntervals::new(), &grid).unwrap();
        labels.t0_ms += 20 * 60 * 1000; // twenty minutes later
        let report = validate_alignment(&grid, &labels, None);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AlignmentViolation::TimeRangeMismatch { .. })));
        assert!(report.violations[0].to_string().contains("time range mismatch"));
    }

    #[test]
    fn alignment_checks_declared_spike() {
        let m = spike_matrix(6, 6, 600);
        let labels = rasterize_labels(&LabelIntervals::new(), &m).unwrap();
        assert!(validate_alignment(&m, &labels, Some(30_000)).passed());
        let report = validate_alignment(&m, &labels, Some(31_000));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AlignmentViolation::SpikeOffset { .. })));
    }
}
