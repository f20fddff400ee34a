//! Small random problems for checking the composite objective's gradient.

use rand::Rng;

use crate::autodiff::{grad_check, GradCheckReport};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, SparseGraph};
use crate::matrix::DenseMatrix;
use crate::model::forward::{model_input, standard_normal, Noise};
use crate::model::labels::LabelMatrix;
use crate::model::loss::{objective_on_tape, Objective};
use crate::model::params::{ModelDims, ModelParams, ParamVars};
use crate::scalar::Scalar;

/// Inclusive upper bounds for a random instance, plus a floor on the node
/// count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InstanceLimits {
    pub min_nodes: usize,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub hidden: usize,
    pub latent: usize,
}

impl Default for InstanceLimits {
    fn default() -> Self {
        Self {
            min_nodes: 2,
            nodes: 16,
            features: 6,
            classes: 4,
            hidden: 8,
            latent: 8,
        }
    }
}

/// Everything the objective depends on, with the reparameterization noise
/// drawn once and frozen.
#[derive(Clone, Debug)]
pub struct ObjectiveInstance<T> {
    pub graph: SparseGraph,
    pub features: DenseMatrix<T>,
    pub targets: LabelMatrix<T>,
    pub counted_rows: Vec<usize>,
    pub scope_rows: Option<Vec<usize>>,
    pub lambda_feat: T,
    pub params: ModelParams<T>,
    pub noise: DenseMatrix<T>,
}

impl<T: Scalar> ObjectiveInstance<T> {
    /// Random graph (edge probability 0.3), Gaussian features, a mix of
    /// one-hot and soft target rows with at least one counted row, Glorot
    /// weights and uniform biases. `label_input` toggles the label columns of the
    /// encoder input.
    pub fn random<R: Rng + ?Sized>(limits: InstanceLimits, label_input: bool, rng: &mut R) -> Result<Self> {
        let pick = |rng: &mut R, lo: usize, hi: usize| rng.random_range(lo..=hi.max(lo));
        let n = pick(rng, limits.min_nodes.max(1), limits.nodes);
        let d = pick(rng, 1, limits.features);
        let c = pick(rng, 2, limits.classes);
        let dims = ModelDims {
            features: d,
            classes: c,
            hidden: pick(rng, 1, limits.hidden),
            latent: pick(rng, 1, limits.latent),
            label_input,
        };
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        let graph = SparseGraph::from_edges(n, &edges)?;
        let features = standard_normal(n, d, rng);

        let mut targets = DenseMatrix::<T>::zeros(n, c);
        let mut counted = Vec::new();
        for i in 0..n {
            let kind = if i == 0 { 0 } else { rng.random_range(0..3) };
            match kind {
                0 => targets[(i, rng.random_range(0..c))] = T::one(),
                1 => {
                    let w: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 0.05).collect();
                    let s: f64 = w.iter().sum();
                    for (k, v) in w.iter().enumerate() {
                        targets[(i, k)] = T::of(v / s);
                    }
                }
                _ => continue,
            }
            counted.push(i);
        }
        let scope_rows = if rng.random::<bool>() {
            Some((0..n).filter(|&i| i == 0 || rng.random::<f64>() < 0.7).collect())
        } else {
            None
        };
        // random biases keep pre-activations off the relu kink even when an
        // upstream layer is dead
        let mut params = ModelParams::glorot(dims, rng)?;
        for t in params.tensors_mut().into_iter().skip(1).step_by(2) {
            for v in t.as_mut_slice() {
                *v = T::of(rng.random_range(-0.5..0.5));
            }
        }
        let noise = standard_normal(n, dims.latent, rng);
        Ok(Self {
            graph,
            features,
            targets: LabelMatrix::new(targets)?,
            counted_rows: counted,
            scope_rows,
            lambda_feat: T::of(rng.random_range(0.0..1.0)),
            params,
            noise,
        })
    }

    /// Total loss at the current parameters.
    pub fn loss(&self) -> Result<T> {
        let adj = normalize_adjacency::<T>(&self.graph);
        let h0 = model_input(&self.params, &self.features, &self.targets)?;
        let mut tape = crate::autodiff::Tape::new();
        let vars = self.params.register(&mut tape);
        let h0v = tape.constant(h0);
        let lv = objective_on_tape(&mut tape, &adj, h0v, &vars, Noise::Sample(&self.noise), &self.objective())?;
        Ok(tape.value(lv.total).item())
    }

    fn objective(&self) -> Objective<'_, T> {
        Objective {
            features: &self.features,
            targets: &self.targets,
            counted_rows: &self.counted_rows,
            scope_rows: self.scope_rows.as_deref(),
            lambda_feat: self.lambda_feat,
        }
    }

    /// Taped gradient of the total loss against central differences for
    /// every parameter coordinate.
    pub fn grad_check(&self, eps: T, tol: T) -> Result<GradCheckReport> {
        if self.counted_rows.is_empty() {
            return Err(Error::InvalidState("instance has no counted rows".into()));
        }
        let adj = normalize_adjacency::<T>(&self.graph);
        let h0 = model_input(&self.params, &self.features, &self.targets)?;
        let obj = self.objective();
        grad_check(
            |tape, vars| {
                let p = ParamVars::from_slice(vars);
                let h0v = tape.constant(h0.clone());
                Ok(objective_on_tape(tape, &adj, h0v, &p, Noise::Sample(&self.noise), &obj)?.total)
            },
            &self.params.to_tensors(),
            eps,
            tol,
        )
    }
}
