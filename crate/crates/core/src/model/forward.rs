//! Encoder and decoders, both as tape builders (for training) and as plain
//! functions over frozen parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::matrix::DenseMatrix;
use crate::model::labels::LabelMatrix;
use crate::model::params::{LinearVars, ModelParams, ParamVars};
use crate::scalar::Scalar;

/// Bounds applied to `log σ` before exponentiation.
pub const LOG_SIGMA_MIN: f64 = -10.0;
pub const LOG_SIGMA_MAX: f64 = 10.0;

/// How the latent sample is formed.
#[derive(Clone, Copy, Debug)]
pub enum Noise<'n, T> {
    /// `z = μ + σ ⊙ ε` with the given standard-normal draw.
    Sample(&'n DenseMatrix<T>),
    /// `z = μ`, used for evaluation and prediction.
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentState<T> {
    pub mu: DenseMatrix<T>,
    /// Clamped to `[LOG_SIGMA_MIN, LOG_SIGMA_MAX]`.
    pub log_sigma: DenseMatrix<T>,
    pub z_sample: DenseMatrix<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderVars {
    pub hidden: Var,
    pub mu: Var,
    pub log_sigma: Var,
    pub z: Var,
}

/// Standard-normal matrix drawn row-major from `rng`.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<T> {
    DenseMatrix::from_fn(rows, cols, |_, _| T::of(rng.sample::<f64, _>(StandardNormal)))
}

/// `H⁽⁰⁾ = [X | Ỹ]`.
pub fn build_input<T: Scalar>(x: &DenseMatrix<T>, y_aug: &LabelMatrix<T>) -> Result<DenseMatrix<T>> {
    let y = y_aug.as_matrix();
    if x.rows() != y.rows() {
        return Err(Error::dim("build_input", x.rows(), y.rows()));
    }
    let d = x.cols();
    Ok(DenseMatrix::from_fn(x.rows(), d + y.cols(), |i, j| {
        if j < d {
            x[(i, j)]
        } else {
            y[(i, j - d)]
        }
    }))
}

/// Encoder input honoring the model's label-input switch.
pub fn model_input<T: Scalar>(
    params: &ModelParams<T>,
    x: &DenseMatrix<T>,
    y_aug: &LabelMatrix<T>,
) -> Result<DenseMatrix<T>> {
    if params.dims.label_input {
        build_input(x, y_aug)
    } else {
        Ok(x.clone())
    }
}

fn graph_conv<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    adj: &'a NormalizedAdjacency<T>,
    h: Var,
    layer: LinearVars,
) -> Result<Var> {
    let agg = tape.spmm(adj, h)?;
    let lin = tape.matmul(agg, layer.weight)?;
    tape.add_row_bias(lin, layer.bias)
}

fn dense<'a, T: Scalar>(tape: &mut Tape<'a, T>, h: Var, layer: LinearVars) -> Result<Var> {
    let lin = tape.matmul(h, layer.weight)?;
    tape.add_row_bias(lin, layer.bias)
}

/// Two-layer variational GCN encoder on the tape.
pub fn encode_on_tape<'a, T: Scalar>(
    tape: &mut Tape<'a, T>,
    adj: &'a NormalizedAdjacency<T>,
    h0: Var,
    p: &ParamVars,
    noise: Noise<'_, T>,
) -> Result<EncoderVars> {
    let pre = graph_conv(tape, adj, h0, p.gcn1)?;
    let hidden = tape.relu(pre)?;
    let mu = graph_conv(tape, adj, hidden, p.gcn_mu)?;
    let raw_log_sigma = graph_conv(tape, adj, hidden, p.gcn_sigma)?;
    let log_sigma = tape.clamp(raw_log_sigma, T::of(LOG_SIGMA_MIN), T::of(LOG_SIGMA_MAX))?;
    let z = match noise {
        Noise::Mean => mu,
        Noise::Sample(eps) => {
            if eps.shape() != tape.value(mu).shape() {
                return Err(Error::dim(
                    "encode noise",
                    format!("{:?}", tape.value(mu).shape()),
                    format!("{:?}", eps.shape()),
                ));
            }
            let sigma = tape.exp(log_sigma)?;
            let eps = tape.constant(eps.clone());
            let spread = tape.mul(sigma, eps)?;
            tape.add(mu, spread)?
        }
    };
    Ok(EncoderVars {
        hidden,
        mu,
        log_sigma,
        z,
    })
}

/// Three dense layers: relu, relu, linear.
pub fn ffn_on_tape<'a, T: Scalar>(tape: &mut Tape<'a, T>, z: Var, layers: &[LinearVars; 3]) -> Result<Var> {
    let a = dense(tape, z, layers[0])?;
    let a = tape.relu(a)?;
    let b = dense(tape, a, layers[1])?;
    let b = tape.relu(b)?;
    dense(tape, b, layers[2])
}

pub fn decode_labels_on_tape<'a, T: Scalar>(tape: &mut Tape<'a, T>, z: Var, p: &ParamVars) -> Result<Var> {
    let logits = ffn_on_tape(tape, z, &p.ffn_y)?;
    tape.softmax_rows(logits)
}

pub fn decode_features_on_tape<'a, T: Scalar>(tape: &mut Tape<'a, T>, z: Var, p: &ParamVars) -> Result<Var> {
    ffn_on_tape(tape, z, &p.ffn_x)
}

fn check_input<T: Scalar>(adj: &NormalizedAdjacency<T>, h0: &DenseMatrix<T>, params: &ModelParams<T>) -> Result<()> {
    if h0.rows() != adj.node_count() {
        return Err(Error::dim("encode: input rows", adj.node_count(), h0.rows()));
    }
    if h0.cols() != params.dims.input_dim() {
        return Err(Error::dim("encode: input cols", params.dims.input_dim(), h0.cols()));
    }
    Ok(())
}

/// Encoder forward with explicit noise.
pub fn encode_with<T: Scalar>(
    adj: &NormalizedAdjacency<T>,
    h0: &DenseMatrix<T>,
    params: &ModelParams<T>,
    noise: Noise<'_, T>,
) -> Result<LatentState<T>> {
    check_input(adj, h0, params)?;
    let mut tape = Tape::new();
    let p = params.frozen(&mut tape);
    let h = tape.constant(h0.clone());
    let e = encode_on_tape(&mut tape, adj, h, &p, noise)?;
    Ok(LatentState {
        mu: tape.value(e.mu).clone(),
        log_sigma: tape.value(e.log_sigma).clone(),
        z_sample: tape.value(e.z).clone(),
    })
}

/// Encoder forward drawing one Monte Carlo sample from `rng`.
pub fn encode<T: Scalar, R: Rng + ?Sized>(
    adj: &NormalizedAdjacency<T>,
    h0: &DenseMatrix<T>,
    params: &ModelParams<T>,
    rng: &mut R,
) -> Result<LatentState<T>> {
    let eps = standard_normal(h0.rows(), params.dims.latent, rng);
    encode_with(adj, h0, params, Noise::Sample(&eps))
}

/// `z = μ + exp(log σ) ⊙ ε` with `log σ` clamped first.
pub fn reparameterize<T: Scalar, R: Rng + ?Sized>(
    mu: &DenseMatrix<T>,
    log_sigma: &DenseMatrix<T>,
    rng: &mut R,
) -> Result<DenseMatrix<T>> {
    if mu.shape() != log_sigma.shape() {
        return Err(Error::dim(
            "reparameterize",
            format!("{:?}", mu.shape()),
            format!("{:?}", log_sigma.shape()),
        ));
    }
    let eps: DenseMatrix<T> = standard_normal(mu.rows(), mu.cols(), rng);
    let (lo, hi) = (T::of(LOG_SIGMA_MIN), T::of(LOG_SIGMA_MAX));
    Ok(DenseMatrix::from_fn(mu.rows(), mu.cols(), |i, j| {
        mu[(i, j)] + log_sigma[(i, j)].max(lo).min(hi).exp() * eps[(i, j)]
    }))
}

fn check_latent<T: Scalar>(z: &DenseMatrix<T>, params: &ModelParams<T>) -> Result<()> {
    if z.cols() != params.dims.latent {
        return Err(Error::dim("decode: latent cols", params.dims.latent, z.cols()));
    }
    Ok(())
}

/// `Ŷ = softmax(FFN_y(Z))`.
pub fn decode_labels<T: Scalar>(z: &DenseMatrix<T>, params: &ModelParams<T>) -> Result<LabelMatrix<T>> {
    check_latent(z, params)?;
    let mut tape = Tape::new();
    let p = params.frozen(&mut tape);
    let zv = tape.constant(z.clone());
    let y = decode_labels_on_tape(&mut tape, zv, &p)?;
    Ok(LabelMatrix::from_matrix_unchecked(tape.value(y).clone()))
}

/// `X̂ = FFN_x(Z)`.
pub fn decode_features<T: Scalar>(z: &DenseMatrix<T>, params: &ModelParams<T>) -> Result<DenseMatrix<T>> {
    check_latent(z, params)?;
    let mut tape = Tape::new();
    let p = params.frozen(&mut tape);
    let zv = tape.constant(z.clone());
    let x = decode_features_on_tape(&mut tape, zv, &p)?;
    Ok(tape.value(x).clone())
}

/// Class probabilities for every node under frozen parameters.
pub fn predict_proba<T: Scalar>(
    adj: &NormalizedAdjacency<T>,
    h0: &DenseMatrix<T>,
    params: &ModelParams<T>,
    noise: Noise<'_, T>,
) -> Result<LabelMatrix<T>> {
    let latent = encode_with(adj, h0, params, noise)?;
    decode_labels(&latent.z_sample, params)
}
