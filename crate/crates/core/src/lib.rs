//! Variational graph auto-encoder with self-label augmentation for
//! inductive semi-supervised node classification.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common `f64` case.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod slam;
pub mod split;
pub mod train;

pub use error::{DataError, Error, Result};
pub use graph::{MaskVector, NormalizedAdjacency, SparseGraph};
pub use matrix::DenseMatrix;
pub use metrics::{ConfusionMatrix, MetricsReport};
pub use scalar::Scalar;
pub use split::{NodeRole, SplitAssignment};

pub type Matrix = DenseMatrix<f64>;
pub type Labels = model::LabelMatrix<f64>;
pub type Params = model::ModelParams<f64>;
pub type Adjacency = NormalizedAdjacency<f64>;
pub type Data = data::Dataset<f64>;
pub type Checkpoint = model::Checkpoint<f64>;

pub type Matrix32 = DenseMatrix<f32>;
pub type Params32 = model::ModelParams<f32>;
pub type Data32 = data::Dataset<f32>;
