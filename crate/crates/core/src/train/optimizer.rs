use serde::{Deserialize, Serialize};

use crate::autodiff::Gradients;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::model::ModelParams;
use crate::scalar::Scalar;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Per-run optimizer state; Adam keeps first and second moments per tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    kind: OptimizerKind,
    step: u64,
    m: Vec<DenseMatrix<T>>,
    v: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// State shaped after `shapes`, one entry per parameter tensor.
    pub fn new(kind: OptimizerKind, shapes: &[(usize, usize)]) -> Self {
        let zeros = || match kind {
            OptimizerKind::Adam => shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            OptimizerKind::Sgd => Vec::new(),
        };
        Self {
            kind,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn for_params(kind: OptimizerKind, params: &ModelParams<T>) -> Self {
        let shapes: Vec<_> = params.tensors().iter().map(|t| t.shape()).collect();
        Self::new(kind, &shapes)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates `params` in place from matching `grads`.
    ///
    /// SGD: `w ← w − η g`. Adam: bias-corrected moments,
    /// `w ← w − η m̂ / (√v̂ + ε)`.
    pub fn apply(&mut self, params: Vec<&mut DenseMatrix<T>>, grads: &[&DenseMatrix<T>], lr: f64) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::dim("optimizer tensors", params.len(), grads.len()));
        }
        for (i, (w, g)) in params.iter().zip(grads).enumerate() {
            if w.shape() != g.shape() {
                return Err(Error::dim(
                    "optimizer tensor",
                    format!("{:?}", w.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            if self.kind == OptimizerKind::Adam && self.m.get(i).map(DenseMatrix::shape) != Some(w.shape()) {
                return Err(Error::dim("optimizer state", format!("{:?}", w.shape()), format!("slot {i}")));
            }
        }
        self.step += 1;
        let eta = T::of(lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (w, g) in params.into_iter().zip(grads) {
                    for (wv, &gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *wv -= eta * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
                let t = self.step as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                let eps = T::of(ADAM_EPSILON);
                for (i, (w, g)) in params.into_iter().zip(grads).enumerate() {
                    let m = self.m[i].as_mut_slice();
                    let v = self.v[i].as_mut_slice();
                    for (((wv, &gv), mv), vv) in w.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                        *mv = b1 * *mv + (T::one() - b1) * gv;
                        *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *wv -= eta * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

/// One optimizer update of every model tensor.
pub fn optimizer_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &Gradients<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
) -> Result<()> {
    let g: Vec<&DenseMatrix<T>> = grads.iter().collect();
    state.apply(params.tensors_mut(), &g, lr)
}
