//! Causal streaming prediction.
//!
//! The predictor consumes 50 ms grid frames as they arrive and reproduces the
//! batch pipeline decision-for-decision: the same forward-fill rule, the same
//! per-run rolling means (restarted after gaps), the same per-window
//! normalization and the same forward pass. A decision stamped `t` depends
//! only on frames at or before `t`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::features::{loo_frame, normalize_channel, FeatureSetId, WINDOW_FRAMES};
use crate::ingest::FRAME_MS;
use crate::models::TrainedModel;
use crate::nn::Tensor;

/// Consecutive missing frames bridged per badge before the stream breaks.
const MAX_FILL_FRAMES: u8 = 4;

/// One emitted prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub timestamp_ms: i64,
    pub probability: f64,
    pub decision: bool,
}

/// Outcome for one processed grid frame.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamEvent {
    /// A full window ended at this frame.
    Decision(Decision),
    /// Valid frame, but the 60-frame warmup is not complete yet.
    Warmup,
    /// The frame was missing or unfillable; window state restarted.
    Reset,
    /// The frame was not processed (out of order or off grid).
    Rejected(String),
}

struct BadgeFill {
    last: Option<f64>,
    fills: u8,
}

/// Stateful causal predictor over a live frame feed.
pub struct StreamPredictor<'m> {
    model: &'m TrainedModel,
    threshold: f64,
    badge_count: usize,
    primary_idx: usize,
    grid_t0_ms: Option<i64>,
    last_ts_ms: Option<i64>,
    fill: Vec<BadgeFill>,
    // per-run state
    run_len: usize,
    diff_history: [VecDeque<f64>; 3],
    window_rows: VecDeque<Vec<f64>>,
}

impl<'m> StreamPredictor<'m> {
    /// Builds a predictor for `primary` over a fixed badge column order.
    ///
    /// The model's feature set and normalization flag drive preprocessing.
    pub fn new(
        model: &'m TrainedModel,
        badge_ids: &[String],
        primary: &str,
        threshold: f64,
    ) -> Result<Self> {
        let primary_idx = badge_ids
            .iter()
            .position(|b| b == primary)
            .ok_or_else(|| Error::InvalidInput(format!("unknown primary badge `{primary}`")))?;
        if model.spec.feature_set != FeatureSetId::OneChannel && badge_ids.len() < 2 {
            return Err(Error::InvalidInput(
                "difference features need at least two badges".into(),
            ));
        }
        Ok(StreamPredictor {
            model,
            threshold,
            badge_count: badge_ids.len(),
            primary_idx,
            grid_t0_ms: None,
            last_ts_ms: None,
            fill: badge_ids.iter().map(|_| BadgeFill { last: None, fills: 0 }).collect(),
            run_len: 0,
            diff_history: [VecDeque::new(), VecDeque::new(), VecDeque::new()],
            window_rows: VecDeque::new(),
        })
    }

    fn reset_run(&mut self) {
        self.run_len = 0;
        for d in &mut self.diff_history {
            d.clear();
        }
        self.window_rows.clear();
    }

    /// Feeds one frame; missing badge values are `None`.
    ///
    /// Returns one event per grid frame processed: a time jump first yields
    /// the synthesized in-between frames (forward-filled where the 250 ms
    /// budget allows), then the arrived frame. Out-of-order or off-grid
    /// frames are rejected with a warning and leave the state untouched.
    pub fn push_frame(
        &mut self,
        timestamp_ms: i64,
        values: &[Option<f64>],
    ) -> Result<Vec<StreamEvent>> {
        if values.len() != self.badge_count {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} badges",
                values.len(),
                self.badge_count
            )));
        }
        let t0 = *self.grid_t0_ms.get_or_insert_with(|| timestamp_ms.div_euclid(FRAME_MS) * FRAME_MS);
        if (timestamp_ms - t0).rem_euclid(FRAME_MS) != 0 {
            return Ok(vec![StreamEvent::Rejected(format!(
                "timestamp {timestamp_ms} is off the 50 ms grid anchored at {t0}"
            ))]);
        }
        if let Some(last) = self.last_ts_ms {
            if timestamp_ms <= last {
                return Ok(vec![StreamEvent::Rejected(format!(
                    "out-of-order frame {timestamp_ms} after {last}"
                ))]);
            }
        }

        let mut events = Vec::new();
        let start = self.last_ts_ms.map(|last| last + FRAME_MS).unwrap_or(timestamp_ms);
        let empty = vec![None; self.badge_count];
        let mut ts = start;
        while ts < timestamp_ms {
            events.push(self.process_grid_frame(ts, &empty));
            ts += FRAME_MS;
        }
        events.push(self.process_grid_frame(timestamp_ms, values));
        self.last_ts_ms = Some(timestamp_ms);
        Ok(events)
    }

    fn process_grid_frame(&mut self, ts: i64, values: &[Option<f64>]) -> StreamEvent {
        // per-badge forward fill, at most 4 consecutive misses
        let mut resolved = vec![0.0; self.badge_count];
        let mut resolvable = vec![true; self.badge_count];
        for (idx, value) in values.iter().enumerate() {
            let slot = &mut self.fill[idx];
            match value {
                Some(v) => {
                    slot.last = Some(*v);
                    slot.fills = 0;
                    resolved[idx] = *v;
                }
                None => match slot.last {
                    Some(last) if slot.fills < MAX_FILL_FRAMES => {
                        slot.fills += 1;
                        resolved[idx] = last;
                    }
                    _ => resolvable[idx] = false,
                },
            }
        }

        let needs_all = self.model.spec.feature_set != FeatureSetId::OneChannel;
        let valid = if needs_all {
            resolvable.iter().all(|&ok| ok)
        } else {
            resolvable[self.primary_idx]
        };
        if !valid {
            self.reset_run();
            return StreamEvent::Reset;
        }

        // feature row, identical to the batch path
        let f = self.model.spec.feature_set.feature_count();
        let mut row = Vec::with_capacity(f);
        row.push(resolved[self.primary_idx]);
        if needs_all {
            let (m, s, v) = loo_frame(&resolved, self.primary_idx);
            for (history, value) in self.diff_history.iter_mut().zip([m, s, v]) {
                if history.len() == WINDOW_FRAMES {
                    history.pop_front();
                }
                history.push_back(value);
            }
            let channels = if self.model.spec.feature_set == FeatureSetId::SetA { 3 } else { 2 };
            for history in self.diff_history.iter().take(channels) {
                let sum: f64 = history.iter().sum();
                row.push(sum / history.len() as f64);
            }
        }

        if self.window_rows.len() == WINDOW_FRAMES {
            self.window_rows.pop_front();
        }
        self.window_rows.push_back(row);
        self.run_len += 1;

        if self.run_len < WINDOW_FRAMES {
            return StreamEvent::Warmup;
        }

        let mut sample = Vec::with_capacity(WINDOW_FRAMES * f);
        for r in &self.window_rows {
            sample.extend_from_slice(r);
        }
        if self.model.spec.normalized {
            for channel in 0..f {
                normalize_channel(&mut sample, channel, f);
            }
        }
        let tensor = Tensor::from_vec(&[WINDOW_FRAMES, f], sample).expect("window shape");
        match self.model.infer_single(tensor) {
            Ok(probability) => StreamEvent::Decision(Decision {
                timestamp_ms: ts,
                probability,
                decision: probability >= self.threshold,
            }),
            Err(e) => StreamEvent::Rejected(format!("inference failed: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assemble_features, make_windows, normalize_l2};
    use crate::ingest::{pivot_volumes, pivot_volumes_unfilled, BadgeSampleRecord, VolumeMatrix};
    use crate::models::{build_model, Arch, ArchSpec};

    fn toy_records(rows: i64, drop_b: std::ops::Range<i64>) -> Vec<BadgeSampleRecord> {
        let mut records = Vec::new();
        for row in 0..rows {
            records.push(BadgeSampleRecord {
                badge_id: "a".into(),
                timestamp_ms: row * 50,
                amplitude: 1.0 + ((row * 37) % 11) as f64,
            });
            if !drop_b.contains(&row) {
                records.push(BadgeSampleRecord {
                    badge_id: "b".into(),
                    timestamp_ms: row * 50,
                    amplitude: 2.0 + ((row * 13) % 7) as f64,
                });
            }
        }
        records
    }

    fn toy_matrix(rows: i64, drop_b: std::ops::Range<i64>) -> VolumeMatrix {
        // raw (unfilled) rows: the predictor applies the fill rule itself
        pivot_volumes_unfilled(&toy_records(rows, drop_b)).unwrap()
    }

    fn model(normalized: bool) -> TrainedModel {
        build_model(ArchSpec {
            arch: Arch::CnnLstm,
            feature_set: FeatureSetId::SetB,
            normalized,
            seed: 31,
        })
    }

    fn replay(model: &TrainedModel, matrix: &VolumeMatrix) -> Vec<Decision> {
        let mut predictor =
            StreamPredictor::new(model, &matrix.badge_ids, "a", 0.5).unwrap();
        let mut decisions = Vec::new();
        for row in 0..matrix.rows() {
            let values: Vec<Option<f64>> = matrix.frame(row).to_vec();
            for event in predictor.push_frame(matrix.frame_start_ms(row), &values).unwrap() {
                if let StreamEvent::Decision(d) = event {
                    decisions.push(d);
                }
            }
        }
        decisions
    }

    fn batch_probs(model: &TrainedModel, records: &[BadgeSampleRecord]) -> (Vec<f64>, Vec<i64>) {
        let matrix = pivot_volumes(records).unwrap(); // batch path fills
        let features = assemble_features(&matrix, "a", model.spec.feature_set).unwrap();
        let labels = vec![0u8; features.rows()];
        let mut windows = make_windows(&features, &labels, WINDOW_FRAMES, 1).unwrap();
        if model.spec.normalized {
            windows = normalize_l2(windows);
        }
        (model.forward(&windows.samples).unwrap(), windows.end_timestamps_ms)
    }

    #[test]
    fn warmup_then_one_decision_per_frame() {
        let m = toy_matrix(64, 0..0);
        let model = model(false);
        let decisions = replay(&model, &m);
        assert_eq!(decisions.len(), 64 - 59);
        assert_eq!(decisions[0].timestamp_ms, 59 * 50);
        assert_eq!(decisions.last().unwrap().timestamp_ms, 63 * 50);
    }

    #[test]
    fn replay_equals_batch_bit_for_bit() {
        for normalized in [false, true] {
            let records = toy_records(220, 80..90); // includes a stream-breaking gap
            let m = pivot_volumes_unfilled(&records).unwrap();
            let model = model(normalized);
            let decisions = replay(&model, &m);
            let (probs, timestamps) = batch_probs(&model, &records);
            assert_eq!(decisions.len(), probs.len(), "normalized={normalized}");
            for (d, (&p, &ts)) in decisions.iter().zip(probs.iter().zip(&timestamps)) {
                assert_eq!(d.timestamp_ms, ts);
                assert_eq!(d.probability, p, "at {ts} normalized={normalized}");
            }
        }
    }

    #[test]
    fn out_of_order_frame_rejected_without_state_change() {
        let m = toy_matrix(100, 0..0);
        let model = model(false);
        let mut predictor = StreamPredictor::new(&model, &m.badge_ids, "a", 0.5).unwrap();
        let mut clean = Vec::new();
        for row in 0..m.rows() {
            let values: Vec<Option<f64>> = m.frame(row).to_vec();
            if row == 70 {
                // stale frame: must be rejected and change nothing
                let events = predictor.push_frame(m.frame_start_ms(5), &values).unwrap();
                assert!(matches!(events.as_slice(), [StreamEvent::Rejected(_)]));
            }
            for event in predictor.push_frame(m.frame_start_ms(row), &values).unwrap() {
                if let StreamEvent::Decision(d) = event {
                    clean.push(d);
                }
            }
        }
        let reference = replay(&model, &m);
        assert_eq!(clean, reference);
    }

    #[test]
    fn long_gap_resets_and_rewarms() {
        let m = toy_matrix(200, 0..0);
        let model = model(false);
        let mut predictor = StreamPredictor::new(&model, &m.badge_ids, "a", 0.5).unwrap();
        let mut decisions = Vec::new();
        for row in 0..m.rows() {
            // skip frames 100..110 entirely: a 500 ms hole in wall time
            if (100..110).contains(&row) {
                continue;
            }
            let values: Vec<Option<f64>> = m.frame(row).to_vec();
            for event in predictor.push_frame(m.frame_start_ms(row), &values).unwrap() {
                if let StreamEvent::Decision(d) = event {
                    decisions.push(d);
                }
            }
        }
        // the fill budget keeps frames 100..103 alive, then the run breaks
        // and frames 110..169 warm up again
        assert!(decisions.iter().any(|d| d.timestamp_ms == 103 * 50));
        assert!(!decisions.iter().any(|d| d.timestamp_ms > 103 * 50 && d.timestamp_ms < 169 * 50));
        assert!(decisions.iter().any(|d| d.timestamp_ms == 169 * 50));
    }

    #[test]
    fn short_gap_is_bridged_by_forward_fill() {
        // all badges silent for 3 grid frames: fills keep the run alive
        let m = toy_matrix(150, 0..0);
        let model = model(false);
        let mut predictor = StreamPredictor::new(&model, &m.badge_ids, "a", 0.5).unwrap();
        let mut count = 0;
        for row in 0..m.rows() {
            if (80..83).contains(&row) {
                continue; // 150 ms silence, within the fill budget
            }
            let values: Vec<Option<f64>> = m.frame(row).to_vec();
            for event in predictor.push_frame(m.frame_start_ms(row), &values).unwrap() {
                match event {
                    StreamEvent::Decision(_) => count += 1,
                    StreamEvent::Reset => panic!("short gap must not reset"),
                    _ => {}
                }
            }
        }
        assert_eq!(count, 150 - 59);
    }
}
