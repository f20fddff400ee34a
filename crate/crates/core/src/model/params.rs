use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Layer widths of one model instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Node feature dimension `d` (may be 0).
    pub features: usize,
    /// Class count `C`.
    pub classes: usize,
    /// Hidden width shared by the first GCN layer and both FFN decoders.
    pub hidden: usize,
    /// Latent dimension.
    pub latent: usize,
    /// Whether label rows are concatenated onto the encoder input.
    pub label_input: bool,
}

impl ModelDims {
    pub fn input_dim(&self) -> usize {
        self.features + if self.label_input { self.classes } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.hidden == 0 || self.latent == 0 {
            return Err(Error::InvalidConfig(format!(
                "classes, hidden and latent dims must be >= 1, got {self:?}"
            )));
        }
        if self.input_dim() == 0 {
            return Err(Error::InvalidConfig(
                "encoder input is empty: no features and label input disabled".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: DenseMatrix<T>,
    /// `1×out` row.
    pub bias: DenseMatrix<T>,
}

impl<T: Scalar> Linear<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(fan_in, fan_out),
            bias: DenseMatrix::zeros(1, fan_out),
        }
    }

    fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = if fan_in + fan_out == 0 {
            0.0
        } else {
            (6.0 / (fan_in + fan_out) as f64).sqrt()
        };
        Self {
            weight: DenseMatrix::from_fn(fan_in, fan_out, |_, _| T::of(rng.random_range(-1.0..=1.0) * limit)),
            bias: DenseMatrix::zeros(1, fan_out),
        }
    }
}

/// Every encoder/decoder weight. Tensor order (see [`TENSOR_NAMES`]) is the
/// gradient-slot order and the checkpoint order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub dims: ModelDims,
    pub gcn1: Linear<T>,
    pub gcn_mu: Linear<T>,
    pub gcn_sigma: Linear<T>,
    pub ffn_y: [Linear<T>; 3],
    pub ffn_x: [Linear<T>; 3],
}

pub const TENSOR_NAMES: [&str; 18] = [
    "gcn1.weight",
    "gcn1.bias",
    "gcn_mu.weight",
    "gcn_mu.bias",
    "gcn_sigma.weight",
    "gcn_sigma.bias",
    "ffn_y.0.weight",
    "ffn_y.0.bias",
    "ffn_y.1.weight",
    "ffn_y.1.bias",
    "ffn_y.2.weight",
    "ffn_y.2.bias",
    "ffn_x.0.weight",
    "ffn_x.0.bias",
    "ffn_x.1.weight",
    "ffn_x.1.bias",
    "ffn_x.2.weight",
    "ffn_x.2.bias",
];

fn layer_shapes(d: &ModelDims) -> [(usize, usize); 9] {
    let (h, z) = (d.hidden, d.latent);
    [
        (d.input_dim(), h),
        (h, z),
        (h, z),
        (z, h),
        (h, h),
        (h, d.classes),
        (z, h),
        (h, h),
        (h, d.features),
    ]
}

impl<T: Scalar> ModelParams<T> {
    fn build(dims: ModelDims, mut make: impl FnMut(usize, usize) -> Linear<T>) -> Result<Self> {
        dims.validate()?;
        let s = layer_shapes(&dims);
        let mut next = |k: usize| make(s[k].0, s[k].1);
        Ok(Self {
            dims,
            gcn1: next(0),
            gcn_mu: next(1),
            gcn_sigma: next(2),
            ffn_y: [next(3), next(4), next(5)],
            ffn_x: [next(6), next(7), next(8)],
        })
    }

    pub fn zeros(dims: ModelDims) -> Result<Self> {
        Self::build(dims, Linear::zeros)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: ModelDims, rng: &mut R) -> Result<Self> {
        Self::build(dims, |i, o| Linear::glorot(i, o, rng))
    }

    fn layers(&self) -> [&Linear<T>; 9] {
        [
            &self.gcn1,
            &self.gcn_mu,
            &self.gcn_sigma,
            &self.ffn_y[0],
            &self.ffn_y[1],
            &self.ffn_y[2],
            &self.ffn_x[0],
            &self.ffn_x[1],
            &self.ffn_x[2],
        ]
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix<T>> {
        self.layers()
            .into_iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let [a, b, c] = &mut self.ffn_y;
        let [d, e, f] = &mut self.ffn_x;
        [&mut self.gcn1, &mut self.gcn_mu, &mut self.gcn_sigma, a, b, c, d, e, f]
            .into_iter()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn to_tensors(&self) -> Vec<DenseMatrix<T>> {
        self.tensors().into_iter().cloned().collect()
    }

    /// Rebuilds parameters from tensors in [`TENSOR_NAMES`] order.
    pub fn from_tensors(dims: ModelDims, tensors: Vec<DenseMatrix<T>>) -> Result<Self> {
        if tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::dim("ModelParams::from_tensors", TENSOR_NAMES.len(), tensors.len()));
        }
        let mut out = Self::zeros(dims)?;
        for ((slot, t), name) in out.tensors_mut().into_iter().zip(tensors).zip(TENSOR_NAMES) {
            if slot.shape() != t.shape() {
                return Err(Error::Dimension {
                    context: "ModelParams::from_tensors",
                    expected: format!("{name} {:?}", slot.shape()),
                    actual: format!("{:?}", t.shape()),
                });
            }
            *slot = t;
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Records every tensor as a differentiable leaf, slot `k` holding
    /// tensor `k`.
    pub fn register<'a>(&self, tape: &mut Tape<'a, T>) -> ParamVars {
        let vars: Vec<Var> = self
            .tensors()
            .into_iter()
            .enumerate()
            .map(|(slot, t)| tape.param(slot, t.clone()))
            .collect();
        ParamVars::from_slice(&vars)
    }

    /// Records every tensor as a constant (frozen weights).
    pub fn frozen<'a>(&self, tape: &mut Tape<'a, T>) -> ParamVars {
        let vars: Vec<Var> = self
            .tensors()
            .into_iter()
            .map(|t| tape.constant(t.clone()))
            .collect();
        ParamVars::from_slice(&vars)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

/// Tape handles mirroring [`ModelParams`].
#[derive(Clone, Copy, Debug)]
pub struct ParamVars {
    pub gcn1: LinearVars,
    pub gcn_mu: LinearVars,
    pub gcn_sigma: LinearVars,
    pub ffn_y: [LinearVars; 3],
    pub ffn_x: [LinearVars; 3],
}

impl ParamVars {
    /// Groups 18 handles given in [`TENSOR_NAMES`] order.
    pub fn from_slice(vars: &[Var]) -> Self {
        assert_eq!(vars.len(), TENSOR_NAMES.len(), "expected one Var per model tensor");
        let l = |k: usize| LinearVars {
            weight: vars[2 * k],
            bias: vars[2 * k + 1],
        };
        Self {
            gcn1: l(0),
            gcn_mu: l(1),
            gcn_sigma: l(2),
            ffn_y: [l(3), l(4), l(5)],
            ffn_x: [l(6), l(7), l(8)],
        }
    }
}
