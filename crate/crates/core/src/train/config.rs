use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelDims;
use crate::slam::{PseudoLabelMode, SlamSettings};
use crate::train::optimizer::OptimizerKind;

/// Component switches for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    /// Drop the feature reconstruction term.
    pub no_feature: bool,
    /// Generate pseudo labels on the unmasked graph (`p = 1`).
    pub no_mask: bool,
    /// Never augment: `Ỹ = Y` at every epoch.
    pub no_pseudo: bool,
    /// No label rows in the encoder input; targets are the true labels.
    pub no_label: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Fixed at 2; present so configs state the architecture explicitly.
    pub gcn_layers: usize,
    /// Fixed at 3.
    pub ffn_layers: usize,
    pub lambda_feat: f64,
    /// SLAM generation rounds.
    pub k: usize,
    /// SLAM unmasking probability.
    pub p: f64,
    /// Pseudo-label confidence threshold.
    pub theta: f64,
    pub lr: f64,
    pub warm_up_epochs: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub optimizer: OptimizerKind,
    pub pseudo_label_mode: PseudoLabelMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 512,
            latent_dim: 512,
            gcn_layers: 2,
            ffn_layers: 3,
            lambda_feat: 0.1,
            k: 2,
            p: 0.7,
            theta: 0.9,
            lr: 0.001,
            warm_up_epochs: 1,
            max_epochs: 500,
            patience: 30,
            seed: 0,
            ablation: Ablation::default(),
            optimizer: OptimizerKind::Adam,
            pseudo_label_mode: PseudoLabelMode::Soft,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.hidden_dim == 0 || self.latent_dim == 0 {
            return bad(format!(
                "hidden_dim and latent_dim must be >= 1 (got {} and {})",
                self.hidden_dim, self.latent_dim
            ));
        }
        if self.gcn_layers != 2 {
            return bad(format!("only 2 GCN layers are supported, got {}", self.gcn_layers));
        }
        if self.ffn_layers != 3 {
            return bad(format!("only 3 FFN layers are supported, got {}", self.ffn_layers));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lambda_feat.is_finite() && self.lambda_feat >= 0.0) {
            return bad(format!("lambda_feat must be >= 0, got {}", self.lambda_feat));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        Ok(())
    }

    pub fn model_dims(&self, features: usize, classes: usize) -> ModelDims {
        ModelDims {
            features,
            classes,
            hidden: self.hidden_dim,
            latent: self.latent_dim,
            label_input: !self.ablation.no_label,
        }
    }

    pub fn slam_settings(&self) -> SlamSettings {
        SlamSettings {
            rounds: self.k,
            unmask_prob: if self.ablation.no_mask { 1.0 } else { self.p },
            threshold: self.theta,
            mode: self.pseudo_label_mode,
        }
    }

    /// Weight on the feature term after ablation.
    pub fn effective_lambda(&self) -> f64 {
        if self.ablation.no_feature {
            0.0
        } else {
            self.lambda_feat
        }
    }

    /// Whether epoch `epoch` (1-based) trains on SLAM-augmented labels.
    pub fn augments_at(&self, epoch: usize) -> bool {
        epoch > self.warm_up_epochs && !self.ablation.no_pseudo && !self.ablation.no_label
    }
}
