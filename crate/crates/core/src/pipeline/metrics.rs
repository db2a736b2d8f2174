//! Pixel confusion counts, recall and specificity.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imagegrid::MaskMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `tp / (tp + fn)`; 1.0 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio_or_one(self.tp, self.tp + self.fn_)
    }

    /// `tn / (tn + fp)`; 1.0 when there are no negatives.
    pub fn specificity(&self) -> f64 {
        ratio_or_one(self.tn, self.tn + self.fp)
    }

    pub fn merge(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    pub recall: f64,
    pub specificity: f64,
}

impl From<ConfusionCounts> for Evaluation {
    fn from(counts: ConfusionCounts) -> Self {
        Self {
            counts,
            recall: counts.recall(),
            specificity: counts.specificity(),
        }
    }
}

/// Compares a predicted mask with the truth, pixel by pixel.
pub fn evaluate(pred: &MaskMap, truth: &MaskMap) -> Result<Evaluation> {
    pred.check_same_dims(truth.dims())?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    // padding bits are zero in both masks, so whole bytes can be compared
    for (&p, &t) in pred.packed_rows().iter().zip(truth.packed_rows()) {
        tp += u64::from((p & t).count_ones());
        fp += u64::from((p & !t).count_ones());
        fn_ += u64::from((!p & t).count_ones());
    }
    let total = pred.len() as u64;
    let counts = ConfusionCounts {
        tp,
        fp,
        tn: total - tp - fp - fn_,
        fn_,
    };
    Ok(counts.into())
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
