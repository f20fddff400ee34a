//! Self-label augmentation: pseudo labels from K node-masked stochastic
//! passes of the frozen model, averaged per node and confidence filtered.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_node_mask, normalize_adjacency, sample_node_mask, MaskVector, SparseGraph};
use crate::matrix::DenseMatrix;
use crate::model::{model_input, predict_proba, standard_normal, LabelMatrix, ModelParams, Noise};
use crate::scalar::Scalar;
use crate::split::{NodeRole, SplitAssignment};

/// Whether accepted pseudo labels stay soft or are sharpened to one-hot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoLabelMode {
    #[default]
    Soft,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlamSettings {
    /// Number of masked generation rounds.
    pub rounds: usize,
    /// Per-node unmasking probability.
    pub unmask_prob: f64,
    /// Confidence threshold on the max class probability.
    pub threshold: f64,
    pub mode: PseudoLabelMode,
}

/// One generation round: the mask used and the full prediction matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SlamRound<T> {
    pub mask: MaskVector,
    pub predictions: LabelMatrix<T>,
}

/// Runs the K masked rounds and returns each round's mask and predictions.
///
/// Per-round seeds are drawn up front, masks from `mask_rng` and latent
/// noise from `noise_rng`, so rounds are independent and evaluated in
/// parallel with a fixed merge order.
#[allow(clippy::too_many_arguments)]
pub fn generate_rounds<T, RM, RN>(
    params: &ModelParams<T>,
    g: &SparseGraph,
    x: &DenseMatrix<T>,
    y: &LabelMatrix<T>,
    k: usize,
    p: f64,
    mask_rng: &mut RM,
    noise_rng: &mut RN,
) -> Result<Vec<SlamRound<T>>>
where
    T: Scalar,
    RM: Rng + ?Sized,
    RN: Rng + ?Sized,
{
    if k == 0 {
        return Err(Error::InvalidConfig("SLAM needs at least one generation round".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "unmasking probability must lie in [0, 1], got {p}"
        )));
    }
    let n = g.node_count();
    if x.rows() != n || y.node_count() != n {
        return Err(Error::dim("generate_pseudo_labels", n, format!("{} / {}", x.rows(), y.node_count())));
    }
    let h0 = model_input(params, x, y)?;
    let seeds: Vec<(u64, u64)> = (0..k).map(|_| (mask_rng.next_u64(), noise_rng.next_u64())).collect();

    seeds
        .into_par_iter()
        .map(|(mask_seed, noise_seed)| {
            let mask = sample_node_mask(n, p, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
            let masked = apply_node_mask(g, &mask)?;
            let adj = normalize_adjacency::<T>(&masked);
            let eps = standard_normal(n, params.dims.latent, &mut ChaCha8Rng::seed_from_u64(noise_seed));
            let predictions = predict_proba(&adj, &h0, params, Noise::Sample(&eps))?;
            Ok(SlamRound { mask, predictions })
        })
        .collect()
}

/// Per-node mean over the rounds in which the node was unmasked; nodes
/// never unmasked get a zero row.
pub fn average_rounds<T: Scalar>(rounds: &[SlamRound<T>]) -> Result<LabelMatrix<T>> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::InvalidConfig("no SLAM rounds to average".into()))?;
    let (n, c) = first.predictions.as_matrix().shape();
    let mut sum = DenseMatrix::<T>::zeros(n, c);
    let mut count = vec![0usize; n];
    for round in rounds {
        for i in 0..n {
            if round.mask.is_visible(i) {
                count[i] += 1;
                for (s, &v) in sum.row_mut(i).iter_mut().zip(round.predictions.row(i)) {
                    *s += v;
                }
            }
        }
    }
    for (i, &cnt) in count.iter().enumerate() {
        if cnt > 0 {
            let denom = T::of(cnt as f64);
            for v in sum.row_mut(i) {
                *v /= denom;
            }
        }
    }
    Ok(LabelMatrix::from_matrix_unchecked(sum))
}

/// Averaged pseudo labels from `k` masked stochastic rounds.
#[allow(clippy::too_many_arguments)]
pub fn generate_pseudo_labels<T, RM, RN>(
    params: &ModelParams<T>,
    g: &SparseGraph,
    x: &DenseMatrix<T>,
    y: &LabelMatrix<T>,
    k: usize,
    p: f64,
    mask_rng: &mut RM,
    noise_rng: &mut RN,
) -> Result<LabelMatrix<T>>
where
    T: Scalar,
    RM: Rng + ?Sized,
    RN: Rng + ?Sized,
{
    average_rounds(&generate_rounds(params, g, x, y, k, p, mask_rng, noise_rng)?)
}

/// Ground truth on labeled training nodes; otherwise the pseudo row when
/// the node is an unlabeled training node whose max class probability
/// exceeds `threshold`; otherwise a zero row.
pub fn confidence_filter<T: Scalar>(
    y_pseudo: &LabelMatrix<T>,
    y_true: &LabelMatrix<T>,
    splits: &SplitAssignment,
    threshold: f64,
    mode: PseudoLabelMode,
) -> Result<LabelMatrix<T>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidConfig(format!(
            "confidence threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let n = y_true.node_count();
    if y_pseudo.node_count() != n || splits.len() != n || y_pseudo.class_count() != y_true.class_count() {
        return Err(Error::dim("confidence_filter", n, y_pseudo.node_count()));
    }
    let theta = T::of(threshold);
    let mut out = LabelMatrix::zeros(n, y_true.class_count());
    for i in 0..n {
        match splits.role(i) {
            NodeRole::TrainLabeled => out.set_row(i, y_true.row(i)),
            NodeRole::TrainUnlabeled => {
                let row = y_pseudo.row(i);
                let Some(best) = y_pseudo.as_matrix().row_argmax(i) else { continue };
                if row[best] > theta {
                    match mode {
                        PseudoLabelMode::Soft => out.set_row(i, row),
                        PseudoLabelMode::Hard => {
                            out.clear_row(i);
                            let mut one_hot = vec![T::zero(); row.len()];
                            one_hot[best] = T::one();
                            out.set_row(i, &one_hot);
                        }
                    }
                }
            }
            NodeRole::Validation | NodeRole::Test => {}
        }
    }
    Ok(out)
}

/// Result of one augmentation step.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented<T> {
    pub labels: LabelMatrix<T>,
    /// Unlabeled training nodes that received a pseudo label.
    pub accepted: usize,
}

/// `confidence_filter(generate_pseudo_labels(..))`: the augmented Ỹ.
#[allow(clippy::too_many_arguments)]
pub fn augment<T, RM, RN>(
    params: &ModelParams<T>,
    g: &SparseGraph,
    x: &DenseMatrix<T>,
    y: &LabelMatrix<T>,
    splits: &SplitAssignment,
    settings: &SlamSettings,
    mask_rng: &mut RM,
    noise_rng: &mut RN,
) -> Result<Augmented<T>>
where
    T: Scalar,
    RM: Rng + ?Sized,
    RN: Rng + ?Sized,
{
    let pseudo = generate_pseudo_labels(params, g, x, y, settings.rounds, settings.unmask_prob, mask_rng, noise_rng)?;
    let labels = confidence_filter(&pseudo, y, splits, settings.threshold, settings.mode)?;
    let accepted = (0..labels.node_count())
        .filter(|&i| splits.role(i) == NodeRole::TrainUnlabeled && labels.is_labeled(i))
        .count();
    Ok(Augmented { labels, accepted })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> LabelMatrix<f64> {
        LabelMatrix::new(DenseMatrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()).unwrap()
    }

    fn splits(roles: &[NodeRole]) -> SplitAssignment {
        SplitAssignment::new(roles.to_vec()).unwrap()
    }

    #[test]
    fn uniform_row_rejected_at_high_threshold() {
        let u = LabelMatrix::from_matrix_unchecked(DenseMatrix::filled(2, 7, 1.0 / 7.0));
        let truth = LabelMatrix::<f64>::from_class_ids(&[0, -1], 7).unwrap();
        let s = splits(&[NodeRole::TrainLabeled, NodeRole::TrainUnlabeled]);
        let out = confidence_filter(&u, &truth, &s, 0.9, PseudoLabelMode::Soft).unwrap();
        assert!(!out.is_labeled(1));
        assert_eq!(out.row(0), truth.row(0));
    }

    #[test]
    fn threshold_boundary_cases() {
        let pseudo = rows(&[&[0.2, 0.5, 0.3], &[0.95, 0.03, 0.02]]);
        let truth = rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let s = splits(&[NodeRole::TrainLabeled, NodeRole::TrainUnlabeled]);
        let kept = confidence_filter(&pseudo, &truth, &s, 0.9, PseudoLabelMode::Soft).unwrap();
        assert_eq!(kept.row(1), &[0.95, 0.03, 0.02]);
        assert_eq!(kept.row(0), truth.row(0));
        let dropped = confidence_filter(&pseudo, &truth, &s, 0.96, PseudoLabelMode::Soft).unwrap();
        assert!(!dropped.is_labeled(1));
        let hard = confidence_filter(&pseudo, &truth, &s, 0.9, PseudoLabelMode::Hard).unwrap();
        assert_eq!(hard.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn held_out_rows_never_receive_pseudo_labels() {
        let pseudo = rows(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let truth = LabelMatrix::<f64>::from_class_ids(&[0, -1, -1], 2).unwrap();
        let s = splits(&[NodeRole::TrainLabeled, NodeRole::Validation, NodeRole::Test]);
        let out = confidence_filter(&pseudo, &truth, &s, 0.0, PseudoLabelMode::Soft).unwrap();
        assert!(!out.is_labeled(1) && !out.is_labeled(2));
    }

    #[test]
    fn theta_one_returns_truth() {
        let pseudo = rows(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let truth = LabelMatrix::<f64>::from_class_ids(&[1, -1], 2).unwrap();
        let s = splits(&[NodeRole::TrainLabeled, NodeRole::TrainUnlabeled]);
        let out = confidence_filter(&pseudo, &truth, &s, 1.0, PseudoLabelMode::Soft).unwrap();
        assert_eq!(out, truth);
        assert!(confidence_filter(&pseudo, &truth, &s, 1.5, PseudoLabelMode::Soft).is_err());
    }

    #[test]
    fn average_uses_presence_counts() {
        let r1 = SlamRound {
            mask: MaskVector::from_bits(vec![true, false, false]),
            predictions: rows(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]),
        };
        let r2 = SlamRound {
            mask: MaskVector::from_bits(vec![true, true, false]),
            predictions: rows(&[&[0.0, 1.0], &[0.25, 0.75], &[1.0, 0.0]]),
        };
        let avg = average_rounds(&[r1, r2]).unwrap();
        assert_eq!(avg.row(0), &[0.5, 0.5]);
        assert_eq!(avg.row(1), &[0.25, 0.75]);
        assert_eq!(avg.row(2), &[0.0, 0.0]);
    }
}
