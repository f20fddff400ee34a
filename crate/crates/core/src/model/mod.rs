//! The variational GCN encoder, label/feature decoders and the composite
//! training objective.

mod checkpoint;
mod forward;
mod instance;
mod labels;
mod loss;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use forward::{
    build_input, decode_features, decode_features_on_tape, decode_labels, decode_labels_on_tape, encode,
    encode_on_tape, encode_with, ffn_on_tape, model_input, predict_proba, reparameterize, standard_normal,
    EncoderVars, LatentState, Noise, LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};
pub use instance::{InstanceLimits, ObjectiveInstance};
pub use labels::LabelMatrix;
pub use loss::{
    feature_loss, feature_loss_on_tape, kl_divergence, kl_on_tape, label_loss, label_loss_on_tape,
    objective_on_tape, total_loss, LossComponents, LossVars, Objective,
};
pub use params::{Linear, LinearVars, ModelDims, ModelParams, ParamVars, TENSOR_NAMES};
