use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::training::predict_all;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Counts,
    pub threshold: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        let c = &self.counts;
        c.tp + c.fp + c.tn + c.fn_
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty set".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Contract(format!("invalid label {l}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("score is NaN".into()));
    }
    Ok(())
}

/// Counts outcomes with prediction `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMatrix> {
    check_inputs(scores, labels)?;
    let mut c = Counts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(ConfusionMatrix {
        counts: c,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricFlags {
    /// No sample was predicted positive; precision is reported as 0.
    pub no_positive_predictions: bool,
    /// Precision and recall are both 0; F1 is reported as 0.
    pub zero_f1_denominator: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flags: MetricFlags,
}

/// Accuracy, precision, recall and F1 from confusion counts. Recall is
/// undefined without positive ground truth and is reported as an error.
pub fn metrics(cm: &ConfusionMatrix) -> Result<CoreMetrics> {
    let c = cm.counts;
    let total = cm.total();
    if total == 0 {
        return Err(Error::Contract("confusion matrix is empty".into()));
    }
    if c.tp + c.fn_ == 0 {
        return Err(Error::Contract(
            "recall undefined: no positive samples in ground truth".into(),
        ));
    }
    let mut flags = MetricFlags::default();
    let accuracy = (c.tp + c.tn) as f64 / total as f64;
    let precision = if c.tp + c.fp == 0 {
        flags.no_positive_predictions = true;
        0.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = c.tp as f64 / (c.tp + c.fn_) as f64;
    let f1 = if precision + recall == 0.0 {
        flags.zero_f1_denominator = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(CoreMetrics {
        accuracy,
        precision,
        recall,
        f1,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this value are predicted positive.
    pub threshold: f64,
}

/// ROC curve over every distinct score (equal scores form one step) and
/// its trapezoidal area. The curve starts at (0, 0) with threshold +∞.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<(f64, Vec<RocPoint>)> {
    check_inputs(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Contract(
            "AUC undefined: labels contain a single class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("non-empty");
        let p = RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok((auc, points))
}

/// Everything reported for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc_roc: f64,
    pub confusion: ConfusionMatrix,
    pub roc_points: Vec<RocPoint>,
    pub n_samples: usize,
    pub flags: MetricFlags,
}

impl MetricsReport {
    pub fn summary(&self) -> MetricsSummary {
        MetricsSummary {
            accuracy: self.accuracy,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
            auc_roc: self.auc_roc,
        }
    }
}

/// The five headline numbers of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc_roc: f64,
}

/// Full report for precomputed scores at threshold 0.5.
pub fn evaluate_scores(scores: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    let cm = confusion(scores, labels, DEFAULT_THRESHOLD)?;
    let (auc_roc, roc_points) = roc_auc(scores, labels)?;
    let m = metrics(&cm)?;
    Ok(MetricsReport {
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        auc_roc,
        confusion: cm,
        roc_points,
        n_samples: scores.len(),
        flags: m.flags,
    })
}

/// Scores every sample with `model` and reports at threshold 0.5.
pub fn evaluate_model(model: &Model, samples: &[&Sample]) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::Contract("cannot evaluate an empty set".into()));
    }
    let scores = predict_all(model, samples)?;
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
    evaluate_scores(&scores, &labels)
}
