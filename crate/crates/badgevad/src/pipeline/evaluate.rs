//! Phase-wise test evaluation: per (scenario, subject) confusion matrices
//! and metrics, pooled "Overall" rows, between-phase and whole-recording
//! rows.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assemble_features, make_windows, normalize_l2, WINDOW_FRAMES};
use crate::ingest::{LabelMatrix, VolumeMatrix};
use crate::models::TrainedModel;
use crate::pipeline::metrics::{metrics, ConfusionMatrix, MetricsRow};

/// One named phase of a recording, `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub name: String,
    pub start_ms: i64,
    pub end_ms: i64,
}

/// Phase annotations per subject.
pub type PhaseAnnotations = BTreeMap<String, Vec<PhaseSpan>>;

pub fn read_phases_json<R: Read>(reader: R) -> Result<PhaseAnnotations> {
    let phases: PhaseAnnotations = serde_json::from_reader(reader)?;
    for (subject, spans) in &phases {
        for (i, a) in spans.iter().enumerate() {
            if a.start_ms >= a.end_ms {
                return Err(Error::InvalidInput(format!(
                    "subject {subject}: phase `{}` is empty or inverted",
                    a.name
                )));
            }
            for b in spans.iter().skip(i + 1) {
                if a.start_ms < b.end_ms && b.start_ms < a.end_ms {
                    return Err(Error::InvalidInput(format!(
                        "subject {subject}: phases `{}` and `{}` overlap",
                        a.name, b.name
                    )));
                }
            }
        }
    }
    Ok(phases)
}

pub fn write_phases_json<W: Write>(phases: &PhaseAnnotations, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, phases)?;
    Ok(())
}

/// Bucket for windows whose end timestamp falls outside every phase.
pub const BETWEEN_PHASES: &str = "between_phases";
/// Synthetic scenario covering every window of the recording.
pub const WHOLE_MEETING: &str = "whole_meeting";

/// One `(scenario, subject)` evaluation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub scenario: String,
    pub subject: String,
    pub cm: ConfusionMatrix,
    pub metrics: MetricsRow,
}

/// The full evaluation table plus non-fatal warnings (empty or single-class
/// cells are omitted with a warning, not an error).
#[derive(Debug, Clone, Default)]
pub struct EvaluationTable {
    pub cells: Vec<EvalCell>,
    pub warnings: Vec<String>,
}

/// Evaluates a trained model phase by phase for each subject.
///
/// Every window is assigned to the phase containing its end timestamp;
/// windows outside all phases land in the `between_phases` bucket. "Overall"
/// rows pool the subjects' confusion matrices; `whole_meeting` rows cover
/// every window of the recording.
pub fn evaluate_phases(
    model: &TrainedModel,
    volumes: &VolumeMatrix,
    labels: &LabelMatrix,
    phases: &PhaseAnnotations,
    subjects: &[String],
    threshold: f64,
) -> Result<EvaluationTable> {
    if subjects.is_empty() {
        return Err(Error::InvalidInput("no subjects to evaluate".into()));
    }

    // phase names in first-appearance order
    let mut phase_order: Vec<String> = Vec::new();
    for subject in subjects {
        if let Some(spans) = phases.get(subject) {
            for span in spans {
                if !phase_order.contains(&span.name) {
                    phase_order.push(span.name.clone());
                }
            }
        }
    }

    // (scenario, subject) -> confusion counts
    let mut buckets: BTreeMap<(String, String), ConfusionMatrix> = BTreeMap::new();
    for subject in subjects {
        let col = labels
            .badge_index(subject)
            .ok_or_else(|| Error::InvalidInput(format!("no labels for subject `{subject}`")))?;
        let label_col = labels.column(col);
        let features = assemble_features(volumes, subject, model.spec.feature_set)?;
        let mut windows = make_windows(&features, &label_col, WINDOW_FRAMES, 1)?;
        if model.spec.normalized {
            windows = normalize_l2(windows);
        }
        let probs = model.forward(&windows.samples)?;
        let spans = phases.get(subject).cloned().unwrap_or_default();
        for ((&prob, &label), &end_ts) in
            probs.iter().zip(&windows.labels).zip(&windows.end_timestamps_ms)
        {
            let phase = spans
                .iter()
                .find(|s| s.start_ms <= end_ts && end_ts < s.end_ms)
                .map(|s| s.name.clone())
                .unwrap_or_else(|| BETWEEN_PHASES.to_string());
            let predicted = prob >= threshold;
            let actual = label == 1;
            buckets
                .entry((phase.clone(), subject.clone()))
                .or_default()
                .record(predicted, actual);
            buckets
                .entry((WHOLE_MEETING.to_string(), subject.clone()))
                .or_default()
                .record(predicted, actual);
        }
    }

    let mut table = EvaluationTable::default();
    let mut scenario_order = phase_order;
    if buckets.keys().any(|(s, _)| s == BETWEEN_PHASES) {
        scenario_order.push(BETWEEN_PHASES.to_string());
    }
    scenario_order.push(WHOLE_MEETING.to_string());

    for scenario in &scenario_order {
        let mut pool: Vec<ConfusionMatrix> = Vec::new();
        for subject in subjects {
            match buckets.get(&(scenario.clone(), subject.clone())) {
                None => {
                    table
                        .warnings
                        .push(format!("{scenario}/{subject}: no windows, row omitted"));
                }
                Some(cm) => {
                    pool.push(*cm);
                    match metrics(cm) {
                        Ok(row) => table.cells.push(EvalCell {
                            scenario: scenario.clone(),
                            subject: subject.clone(),
                            cm: *cm,
                            metrics: row,
                        }),
                        Err(e) => table
                            .warnings
                            .push(format!("{scenario}/{subject}: {e}, row omitted")),
                    }
                }
            }
        }
        if pool.len() > 1 {
            let mut pooled = ConfusionMatrix::default();
            for cm in &pool {
                pooled.add(cm);
            }
            match metrics(&pooled) {
                Ok(row) => table.cells.push(EvalCell {
                    scenario: scenario.clone(),
                    subject: "Overall".to_string(),
                    cm: pooled,
                    metrics: row,
                }),
                Err(e) => table.warnings.push(format!("{scenario}/Overall: {e}, row omitted")),
            }
        }
    }
    Ok(table)
}

/// Writes the evaluation CSV with columns
/// `scenario,subject,balanced_accuracy,f1,tn,fp,fn,tp`.
pub fn write_evaluation_csv<W: Write>(table: &EvaluationTable, writer: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().from_writer(writer);
    out.write_record(["scenario", "subject", "balanced_accuracy", "f1", "tn", "fp", "fn", "tp"])?;
    for cell in &table.cells {
        out.write_record(&[
            cell.scenario.clone(),
            cell.subject.clone(),
            format!("{:.6}", cell.metrics.balanced_accuracy),
            format!("{:.6}", cell.metrics.f1),
            cell.cm.true_negatives.to_string(),
            cell.cm.false_positives.to_string(),
            cell.cm.false_negatives.to_string(),
            cell.cm.true_positives.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
