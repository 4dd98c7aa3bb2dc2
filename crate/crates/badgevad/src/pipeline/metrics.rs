//! Confusion matrices and the derived classification metrics.
//!
//! Balanced accuracy is the mean of recall and specificity, which keeps the
//! score honest under heavy class imbalance; "overall" rows across subjects
//! pool confusion matrices element-wise before computing metrics, never
//! average the metrics themselves.

use crate::error::{Error, Result};

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_positives: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_count: u64, tp: u64) -> Self {
        ConfusionMatrix {
            true_negatives: tn,
            false_positives: fp,
            false_negatives: fn_count,
            true_positives: tp,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_negatives + self.false_positives + self.false_negatives + self.true_positives
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.true_negatives += other.true_negatives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.true_positives += other.true_positives;
    }

    /// Tallies one prediction.
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (false, false) => self.true_negatives += 1,
            (true, false) => self.false_positives += 1,
            (false, true) => self.false_negatives += 1,
            (true, true) => self.true_positives += 1,
        }
    }
}

/// Derived metrics, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub binary_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Tallies predictions against labels; a probability equal to the threshold
/// counts as positive (`>=` rule).
pub fn confusion(probs: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &y) in probs.iter().zip(labels) {
        cm.record(p >= threshold, y == 1);
    }
    Ok(cm)
}

/// Computes the metric row for one confusion matrix.
///
/// Balanced accuracy needs at least one sample of each true class; precision
/// and F1 degrade to 0 when undefined rather than erroring.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsRow> {
    if cm.total() == 0 {
        return Err(Error::InvalidInput("metrics over an empty confusion matrix".into()));
    }
    let positives = cm.true_positives + cm.false_negatives;
    let negatives = cm.true_negatives + cm.false_positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::InvalidInput(
            "balanced accuracy undefined: one of the classes has no samples".into(),
        ));
    }
    let recall = cm.true_positives as f64 / positives as f64;
    let specificity = cm.true_negatives as f64 / negatives as f64;
    let predicted_positive = cm.true_positives + cm.false_positives;
    let precision = if predicted_positive == 0 {
        0.0
    } else {
        cm.true_positives as f64 / predicted_positive as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricsRow {
        balanced_accuracy: (recall + specificity) / 2.0,
        f1,
        binary_accuracy: (cm.true_positives + cm.true_negatives) as f64 / cm.total() as f64,
        precision,
        recall,
    })
}

/// Metrics of the element-wise sum of several confusion matrices.
pub fn pooled_metrics(cms: &[ConfusionMatrix]) -> Result<MetricsRow> {
    if cms.is_empty() {
        return Err(Error::InvalidInput("pooled metrics over an empty list".into()));
    }
    let mut pooled = ConfusionMatrix::default();
    for cm in cms {
        pooled.add(cm);
    }
    metrics(&pooled)
}

// ---------------------------------------------------------------------------
// Metric verification against published tables
// ---------------------------------------------------------------------------

/// A claimed `(scenario, subject)` metric pair to verify.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvidedMetrics {
    pub scenario: String,
    pub subject: String,
    pub balanced_accuracy: f64,
    pub f1: f64,
}

/// Outcome of re-deriving one metric value from confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCheck {
    pub scenario: String,
    pub subject: String,
    pub metric: String,
    pub provided: f64,
    pub recomputed: f64,
    pub passed: bool,
}

/// Recomputes metrics from confusion matrices and diffs them against claimed
/// values.
///
/// Subject rows use their own matrix; rows whose subject is `Overall` pool
/// every subject matrix of the same scenario. Each claimed value passes when
/// `|recomputed - provided| <= tolerance`.
pub fn verify_metrics(
    confusions: &[(String, String, ConfusionMatrix)],
    provided: &[ProvidedMetrics],
    tolerance: f64,
) -> Result<Vec<MetricCheck>> {
    let mut checks = Vec::new();
    for claim in provided {
        let row = if claim.subject == "Overall" {
            // pool the subject matrices; an Overall row in the confusion
            // input is itself a pool and must not be double-counted
            let pool: Vec<ConfusionMatrix> = confusions
                .iter()
                .filter(|(scenario, subject, _)| {
                    *scenario == claim.scenario && subject != "Overall"
                })
                .map(|(_, _, cm)| *cm)
                .collect();
            if pool.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "no confusion matrices for scenario `{}`",
                    claim.scenario
                )));
            }
            pooled_metrics(&pool)?
        } else {
            let cm = confusions
                .iter()
                .find(|(scenario, subject, _)| {
                    *scenario == claim.scenario && *subject == claim.subject
                })
                .map(|(_, _, cm)| cm)
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "no confusion matrix for ({}, {})",
                        claim.scenario, claim.subject
                    ))
                })?;
            metrics(cm)?
        };
        for (name, provided_value, recomputed) in [
            ("balanced_accuracy", claim.balanced_accuracy, row.balanced_accuracy),
            ("f1", claim.f1, row.f1),
        ] {
            checks.push(MetricCheck {
                scenario: claim.scenario.clone(),
                subject: claim.subject.clone(),
                metric: name.to_string(),
                provided: provided_value,
                recomputed,
                passed: (recomputed - provided_value).abs() <= tolerance,
            });
        }
    }
    Ok(checks)
}
