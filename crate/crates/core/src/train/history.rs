use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of `history.csv`. Validation columns are empty when the
/// split has no scoreable validation nodes.
pub const HISTORY_HEADER: &str =
    "epoch,label_loss,feature_loss,kl_loss,total_loss,accepted_pseudo,val_accuracy,val_mcc";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub label_loss: f64,
    pub feature_loss: f64,
    pub kl_loss: f64,
    pub total_loss: f64,
    /// Unlabeled training nodes carrying a pseudo label this epoch.
    pub accepted_pseudo: usize,
    pub val_accuracy: Option<f64>,
    pub val_mcc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn push(&mut self, record: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.epoch <= last.epoch {
                return Err(Error::InvalidState(format!(
                    "epoch {} recorded after epoch {}",
                    record.epoch, last.epoch
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_val_accuracy(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.val_accuracy)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.epoch,
                r.label_loss,
                r.feature_loss,
                r.kl_loss,
                r.total_loss,
                r.accepted_pseudo,
                opt(r.val_accuracy),
                opt(r.val_mcc)
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
