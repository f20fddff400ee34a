//! Accuracy, confusion matrices and the multiclass Matthews correlation
//! coefficient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]` = nodes with true class `t` predicted as `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let classes = counts.len();
        if counts.iter().any(|r| r.len() != classes) {
            return Err(Error::dim("ConfusionMatrix::from_counts", "square matrix", "ragged rows"));
        }
        Ok(Self {
            classes,
            counts: counts.into_iter().flatten().collect(),
        })
    }

    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::dim("confusion matrix", truth.len(), pred.len()));
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes || p >= classes {
                return Err(Error::InvalidQuery(format!("class id out of range 0..{classes}")));
            }
            cm.counts[t * classes + p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// `t_k`: nodes whose true class is `k`.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|t| (0..self.classes).map(|p| self.get(t, p)).sum())
            .collect()
    }

    /// `p_k`: nodes predicted as `k`.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|p| (0..self.classes).map(|t| self.get(t, p)).sum())
            .collect()
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::InvalidQuery("accuracy of an empty confusion matrix".into()));
        }
        Ok(self.trace() as f64 / total as f64)
    }
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::dim("accuracy", truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::InvalidQuery("accuracy over zero nodes".into()));
    }
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Multiclass MCC in covariance form:
/// `(c·s − Σ p_k t_k) / sqrt((s² − Σ p_k²)(s² − Σ t_k²))`.
///
/// Returns 0 when either factor under the root vanishes.
pub fn mcc(cm: &ConfusionMatrix) -> Result<f64> {
    let s = cm.total();
    if s == 0 {
        return Err(Error::InvalidQuery("MCC of an empty confusion matrix".into()));
    }
    let t = cm.row_sums();
    let p = cm.col_sums();
    // integer arithmetic keeps small cases exact
    let s = s as i128;
    let c = cm.trace() as i128;
    let pt: i128 = p.iter().zip(&t).map(|(&a, &b)| a as i128 * b as i128).sum();
    let pp: i128 = p.iter().map(|&a| a as i128 * a as i128).sum();
    let tt: i128 = t.iter().map(|&a| a as i128 * a as i128).sum();
    let num = c * s - pt;
    let left = s * s - pp;
    let right = s * s - tt;
    if left == 0 || right == 0 {
        return Ok(0.0);
    }
    Ok(num as f64 / ((left as f64) * (right as f64)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub mcc: f64,
    /// Nodes scored.
    pub count: usize,
}

impl MetricsReport {
    pub fn from_predictions(truth: &[usize], pred: &[usize], classes: usize) -> Result<Self> {
        let cm = ConfusionMatrix::from_predictions(truth, pred, classes)?;
        Ok(Self {
            accuracy: accuracy(truth, pred)?,
            mcc: mcc(&cm)?,
            count: truth.len(),
        })
    }
}
