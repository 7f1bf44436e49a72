//! Scalar losses on logits together with their gradient.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which scalar loss to backpropagate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    CrossEntropy,
    /// Carlini-Wagner margin clamped at `-kappa`. With a target the loss
    /// pushes towards that class instead of away from the label.
    CwMargin { kappa: f64, target: Option<usize> },
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &DVector<f64>, label: usize) -> (f64, DVector<f64>) {
    let max = logits.max();
    let exps = logits.map(|z| (z - max).exp());
    let total = exps.sum();
    let loss = total.ln() + max - logits[label];
    let mut grad = exps / total;
    grad[label] -= 1.0;
    (loss, grad)
}

fn max_excluding(logits: &DVector<f64>, skip: usize) -> usize {
    let mut best = usize::MAX;
    for j in 0..logits.len() {
        if j != skip && (best == usize::MAX || logits[j] > logits[best]) {
            best = j;
        }
    }
    best
}

/// Untargeted: `max{-κ, Z_t − max_{j≠t} Z_j}`.
/// Targeted at `t'`: `max{-κ, max_{j≠t'} Z_j − Z_t'}`.
pub fn cw_margin(logits: &DVector<f64>, label: usize, kappa: f64, target: Option<usize>) -> Result<(f64, DVector<f64>)> {
    if kappa < 0.0 || !kappa.is_finite() {
        return Err(Error::Invalid(format!("kappa must be >= 0, got {kappa}")));
    }
    let c = logits.len();
    if label >= c || target.is_some_and(|t| t >= c) {
        return Err(Error::Invalid("class index out of range".into()));
    }
    let mut grad = DVector::zeros(c);
    let (pos, neg) = match target {
        None => (label, max_excluding(logits, label)),
        Some(t) if t == label => {
            return Err(Error::Invalid("target class equals the true label".into()));
        }
        Some(t) => (max_excluding(logits, t), t),
    };
    let margin = logits[pos] - logits[neg];
    if margin > -kappa {
        grad[pos] = 1.0;
        grad[neg] = -1.0;
        Ok((margin, grad))
    } else {
        Ok((-kappa, grad))
    }
}

impl LossSpec {
    pub fn eval(&self, logits: &DVector<f64>, label: usize) -> Result<(f64, DVector<f64>)> {
        match *self {
            LossSpec::CrossEntropy => {
                if label >= logits.len() {
                    return Err(Error::Invalid("label out of range".into()));
                }
                Ok(cross_entropy(logits, label))
            }
            LossSpec::CwMargin { kappa, target } => cw_margin(logits, label, kappa, target),
        }
    }
}
