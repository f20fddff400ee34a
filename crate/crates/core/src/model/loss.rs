//! Label cross entropy, feature MSE and the Gaussian KL term.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::matrix::DenseMatrix;
use crate::model::forward::{decode_features_on_tape, decode_labels_on_tape, encode_on_tape, EncoderVars, Noise};
use crate::model::labels::LabelMatrix;
use crate::model::params::ParamVars;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossComponents<T> {
    pub label: T,
    pub feature: T,
    pub kl: T,
}

/// `L = L_lab + λ_feat · L_feat + KL`.
pub fn total_loss<T: Scalar>(c: LossComponents<T>, lambda_feat: T) -> T {
    c.label + lambda_feat * c.feature + c.kl
}

/// `-(1/|S|) Σ_{i∈S} Σ_c ỹ_ic ln ŷ_ic` over the counted rows `S`.
pub fn label_loss_on_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    targets: &LabelMatrix<T>,
    y_hat: Var,
    counted_rows: &[usize],
) -> Result<Var> {
    if counted_rows.is_empty() {
        return Err(Error::InvalidState("label loss needs at least one labeled row".into()));
    }
    if tape.value(y_hat).shape() != targets.as_matrix().shape() {
        return Err(Error::dim(
            "label_loss",
            format!("{:?}", targets.as_matrix().shape()),
            format!("{:?}", tape.value(y_hat).shape()),
        ));
    }
    if let Some(&r) = counted_rows.iter().find(|&&r| r >= targets.node_count() || !targets.is_labeled(r)) {
        return Err(Error::InvalidState(format!("counted row {r} has no target label")));
    }
    let target_rows = DenseMatrix::from_fn(counted_rows.len(), targets.class_count(), |i, j| {
        targets.as_matrix()[(counted_rows[i], j)]
    });
    let picked = tape.masked_row_select(y_hat, counted_rows)?;
    let logp = tape.log(picked)?;
    let t = tape.constant(target_rows);
    let weighted = tape.mul(t, logp)?;
    let total = tape.reduce_sum(weighted)?;
    tape.scale(total, -T::one() / T::of(counted_rows.len() as f64))
}

/// Mean of `(x - x̂)²` over all entries.
pub fn feature_loss_on_tape<'a, T: Scalar>(tape: &mut Tape<'a, T>, x: Var, x_hat: Var) -> Result<Var> {
    let diff = tape.sub(x, x_hat)?;
    let sq = tape.mul(diff, diff)?;
    tape.reduce_mean(sq)
}

/// `(1/n) Σ_i Σ_k ½(μ² + σ² − 2 ln σ − 1)` against the standard normal prior.
pub fn kl_on_tape<'a, T: Scalar>(tape: &mut Tape<'a, T>, mu: Var, log_sigma: Var) -> Result<Var> {
    let n = tape.value(mu).rows();
    if tape.value(mu).shape() != tape.value(log_sigma).shape() {
        return Err(Error::dim(
            "kl_divergence",
            format!("{:?}", tape.value(mu).shape()),
            format!("{:?}", tape.value(log_sigma).shape()),
        ));
    }
    if n == 0 {
        return Ok(tape.constant(DenseMatrix::scalar(T::zero())));
    }
    let mu2 = tape.mul(mu, mu)?;
    let two_ls = tape.scale(log_sigma, T::of(2.0))?;
    let var = tape.exp(two_ls)?;
    let a = tape.add(mu2, var)?;
    let b = tape.sub(a, two_ls)?;
    let c = tape.add_scalar(b, -T::one())?;
    let s = tape.reduce_sum(c)?;
    tape.scale(s, T::half() / T::of(n as f64))
}

/// Everything the composite loss needs besides the parameters.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'d, T> {
    /// Features for every node (reconstruction target).
    pub features: &'d DenseMatrix<T>,
    /// Label targets Ỹ.
    pub targets: &'d LabelMatrix<T>,
    /// Rows entering the label loss.
    pub counted_rows: &'d [usize],
    /// Rows entering the feature and KL terms; `None` means every row.
    pub scope_rows: Option<&'d [usize]>,
    pub lambda_feat: T,
}

#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub encoder: EncoderVars,
    pub y_hat: Var,
    pub x_hat: Var,
    pub label: Var,
    pub feature: Var,
    pub kl: Var,
    pub total: Var,
}

impl LossVars {
    pub fn components<T: Scalar>(&self, tape: &Tape<'_, T>) -> LossComponents<T> {
        LossComponents {
            label: tape.value(self.label).item(),
            feature: tape.value(self.feature).item(),
            kl: tape.value(self.kl).item(),
        }
    }
}

/// Full forward pass plus composite loss.
pub fn objective_on_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    adj: &'a NormalizedAdjacency<T>,
    h0: Var,
    p: &ParamVars,
    noise: Noise<'_, T>,
    obj: &Objective<'_, T>,
) -> Result<LossVars> {
    let encoder = encode_on_tape(tape, adj, h0, p, noise)?;
    let y_hat = decode_labels_on_tape(tape, encoder.z, p)?;
    let x_hat = decode_features_on_tape(tape, encoder.z, p)?;
    let label = label_loss_on_tape(tape, obj.targets, y_hat, obj.counted_rows)?;

    let x = tape.constant(obj.features.clone());
    let (x_s, x_hat_s, mu_s, ls_s) = match obj.scope_rows {
        Some(rows) => (
            tape.masked_row_select(x, rows)?,
            tape.masked_row_select(x_hat, rows)?,
            tape.masked_row_select(encoder.mu, rows)?,
            tape.masked_row_select(encoder.log_sigma, rows)?,
        ),
        None => (x, x_hat, encoder.mu, encoder.log_sigma),
    };
    let feature = feature_loss_on_tape(tape, x_s, x_hat_s)?;
    let kl = kl_on_tape(tape, mu_s, ls_s)?;

    let weighted = tape.scale(feature, obj.lambda_feat)?;
    let partial = tape.add(label, weighted)?;
    let total = tape.add(partial, kl)?;
    Ok(LossVars {
        encoder,
        y_hat,
        x_hat,
        label,
        feature,
        kl,
        total,
    })
}

pub fn label_loss<T: Scalar>(y_aug: &LabelMatrix<T>, y_hat: &LabelMatrix<T>, counted_rows: &[usize]) -> Result<T> {
    let mut tape = Tape::new();
    let y = tape.constant(y_hat.as_matrix().clone());
    let l = label_loss_on_tape(&mut tape, y_aug, y, counted_rows)?;
    Ok(tape.value(l).item())
}

pub fn feature_loss<T: Scalar>(x: &DenseMatrix<T>, x_hat: &DenseMatrix<T>) -> Result<T> {
    let mut tape = Tape::new();
    let a = tape.constant(x.clone());
    let b = tape.constant(x_hat.clone());
    let l = feature_loss_on_tape(&mut tape, a, b)?;
    Ok(tape.value(l).item())
}

pub fn kl_divergence<T: Scalar>(mu: &DenseMatrix<T>, log_sigma: &DenseMatrix<T>) -> Result<T> {
    let mut tape = Tape::new();
    let a = tape.constant(mu.clone());
    let b = tape.constant(log_sigma.clone());
    let l = kl_on_tape(&mut tape, a, b)?;
    Ok(tape.value(l).item())
}
