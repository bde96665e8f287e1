//! Confusion counts and rates under the convention used throughout this
//! project: FP counts *undetected real* events and FN counts *undetected
//! noise* events. In conventional terms, this FP is a miss (false negative
//! of the real class) and this FN is a false alarm; the naming is kept for
//! direct comparability with published tables.

use serde::{Deserialize, Serialize};

use crate::detect::LabelVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// Detected real events (predicted real, truly real).
    pub tp: usize,
    /// Undetected real events (predicted noise, truly real).
    pub fp: usize,
    /// Detected noise events (predicted noise, truly noise).
    pub tn: usize,
    /// Undetected noise events (predicted real, truly noise).
    pub fn_: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub acc: f64,
    pub ct_seconds: f64,
    /// Set when a rate had an empty denominator (defined as 1).
    pub degenerate_rate: bool,
}

fn rate(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (1.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Confusion counts of a prediction against ground truth.
pub fn evaluate(pred: &LabelVector, truth: &LabelVector, elapsed: f64) -> Result<ConfusionReport> {
    if pred.y.len() != truth.y.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.y.len(),
            got: pred.y.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.y.iter().zip(&truth.y) {
        match (p, t) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let (tpr, d1) = rate(tp, tp + fp);
    let (tnr, d2) = rate(tn, tn + fn_);
    let (acc, d3) = rate(tp + tn, tp + tn + fp + fn_);
    Ok(ConfusionReport {
        tp,
        fp,
        tn,
        fn_,
        tpr,
        tnr,
        acc,
        ct_seconds: elapsed,
        degenerate_rate: d1 || d2 || d3,
    })
}

impl ConfusionReport {
    /// Flat key-value text block.
    pub fn to_text(&self) -> String {
        format!(
            "tp {}\nfp {}\ntn {}\nfn {}\ntpr {:.6}\ntnr {:.6}\nacc {:.6}\nct_seconds {:.6}\n",
            self.tp, self.fp, self.tn, self.fn_, self.tpr, self.tnr, self.acc, self.ct_seconds
        )
    }
}
