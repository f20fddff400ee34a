//! JSON checkpoint container.
//!
//! ```text
//! {
//!   "format": "slavgae-checkpoint",
//!   "version": 1,
//!   "seed": <u64>,
//!   "dims": {"features": d, "classes": C, "hidden": h, "latent": z, "label_input": bool},
//!   "tensors": [{"name": "gcn1.weight", "rows": r, "cols": c, "data": [row-major f64...]}, ...]
//! }
//! ```
//!
//! Tensors appear in `TENSOR_NAMES` order. Values are written with
//! shortest round-trip formatting, so loading reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::model::params::{ModelDims, ModelParams, TENSOR_NAMES};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "slavgae-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    seed: u64,
    dims: ModelDims,
    tensors: Vec<TensorRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    pub seed: u64,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            dims: self.params.dims,
            tensors: self
                .params
                .tensors()
                .into_iter()
                .zip(TENSOR_NAMES)
                .map(|(t, name)| TensorRecord {
                    name: name.into(),
                    rows: t.rows(),
                    cols: t.cols(),
                    data: t.as_slice().iter().map(|v| v.as_f64()).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).map_err(|e| Error::InvalidState(format!("checkpoint encode: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidQuery(format!("checkpoint decode: {e}")))?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidQuery(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        let mut tensors = Vec::with_capacity(file.tensors.len());
        for (rec, expected) in file.tensors.into_iter().zip(TENSOR_NAMES) {
            if rec.name != expected {
                return Err(Error::InvalidQuery(format!(
                    "checkpoint tensor `{}` where `{expected}` was expected",
                    rec.name
                )));
            }
            let data = rec.data.into_iter().map(T::of).collect();
            tensors.push(DenseMatrix::from_vec(rec.rows, rec.cols, data)?);
        }
        Ok(Self {
            params: ModelParams::from_tensors(file.dims, tensors)?,
            seed: file.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json()?.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let dims = ModelDims {
            features: 3,
            classes: 2,
            hidden: 4,
            latent: 2,
            label_input: false,
        };
        let mut params = ModelParams::<f64>::glorot(dims, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        params.gcn1.bias[(0, 1)] = 1.0 / 3.0;
        let ck = Checkpoint { params, seed: 42 };
        let text = ck.to_json().unwrap();
        let back = Checkpoint::<f64>::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_foreign_format() {
        let err = Checkpoint::<f64>::from_json(r#"{"format":"x","version":1,"seed":0,"dims":{"features":1,"classes":1,"hidden":1,"latent":1,"label_input":true},"tensors":[]}"#);
        assert!(matches!(err, Err(Error::InvalidQuery(_))));
    }
}
