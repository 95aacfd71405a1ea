use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor};
use crate::error::{Error, Result};

/// Bounds applied to predictions before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Per-class loss multipliers for the negative (0) and positive (1) class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub negative: f64,
    pub positive: f64,
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights {
        negative: 1.0,
        positive: 1.0,
    };

    pub fn for_label(&self, label: u8) -> f64 {
        if label == 1 {
            self.positive
        } else {
            self.negative
        }
    }

    /// Weights for a label sequence, counting classes directly.
    pub fn from_labels(labels: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut counts = BTreeMap::from([(0u8, 0usize), (1u8, 0usize)]);
        let mut total = 0;
        for l in labels {
            *counts.entry(l).or_insert(0) += 1;
            total += 1;
        }
        class_weights(&counts, total)
    }
}

/// Inverse-frequency weights: `total / (num_classes · count(c))` with two classes.
pub fn class_weights(counts: &BTreeMap<u8, usize>, total_samples: usize) -> Result<ClassWeights> {
    if counts.len() != 2 || !counts.contains_key(&0) || !counts.contains_key(&1) {
        return Err(Error::Contract(format!(
            "class weights need exactly classes 0 and 1, got {:?}",
            counts.keys().collect::<Vec<_>>()
        )));
    }
    if let Some((class, _)) = counts.iter().find(|(_, &n)| n == 0) {
        return Err(Error::DegenerateData(format!(
            "class {class} has no samples; cannot weight an absent class"
        )));
    }
    let sum: usize = counts.values().sum();
    if sum != total_samples {
        return Err(Error::Contract(format!(
            "class counts sum to {sum} but total_samples is {total_samples}"
        )));
    }
    let num_classes = counts.len() as f64;
    let w = |c: u8| total_samples as f64 / (num_classes * counts[&c] as f64);
    Ok(ClassWeights {
        negative: w(0),
        positive: w(1),
    })
}

/// `−weight · (y·ln p + (1−y)·ln(1−p))` with `p` clamped to `[1e-12, 1−1e-12]`.
pub fn weighted_bce(prediction: f64, label: u8, weight: f64) -> f64 {
    let p = prediction.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = f64::from(label);
    -weight * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Graph form of [`weighted_bce`] for a `[1]` prediction node. The clamp is
/// applied by the graph's `log`.
pub fn weighted_bce_node(g: &mut Graph, prediction: Tensor, label: u8, weight: f64) -> Result<Tensor> {
    let y = f64::from(label);
    let one = g.scalar(1.0);
    let log_p = g.log(prediction);
    let complement = g.sub(one, prediction)?;
    let log_q = g.log(complement);
    let y_t = g.scalar(y);
    let not_y = g.scalar(1.0 - y);
    let pos = g.mul(log_p, y_t)?;
    let neg = g.mul(log_q, not_y)?;
    let ll = g.add(pos, neg)?;
    let w = g.scalar(-weight);
    g.mul(ll, w)
}
