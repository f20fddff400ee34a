//! Stochastic block model datasets with Gaussian class-conditional features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub feature_dim: usize,
    /// Class `b` has mean `separation · e_(b mod d)`.
    pub separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            blocks: 4,
            nodes_per_block: 100,
            p_intra: 0.05,
            p_inter: 0.005,
            feature_dim: 16,
            separation: 1.0,
            noise_std: 1.0,
            seed: 0,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.blocks == 0 || self.nodes_per_block == 0 {
            return Err(Error::InvalidConfig("SBM needs at least one block and one node per block".into()));
        }
        if !prob(self.p_intra) || !prob(self.p_inter) {
            return Err(Error::InvalidConfig("SBM edge probabilities must lie in [0, 1]".into()));
        }
        if self.p_intra <= self.p_inter {
            return Err(Error::InvalidConfig(format!(
                "SBM intra-block probability {} must exceed inter-block {}",
                self.p_intra, self.p_inter
            )));
        }
        if !(self.noise_std >= 0.0) || !self.separation.is_finite() {
            return Err(Error::InvalidConfig("SBM noise std must be >= 0 and separation finite".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.blocks * self.nodes_per_block
    }

    pub fn block_of(&self, node: usize) -> usize {
        node / self.nodes_per_block
    }
}

/// Nodes are block-contiguous; labels are block ids. Edges are drawn for
/// each pair `i < j` in row order, then features row by row, all from one
/// seeded stream.
pub fn generate_sbm<T: Scalar>(cfg: &SbmConfig) -> Result<Dataset<T>> {
    cfg.validate()?;
    let n = cfg.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if cfg.block_of(i) == cfg.block_of(j) {
                cfg.p_intra
            } else {
                cfg.p_inter
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, &edges)?;
    let d = cfg.feature_dim;
    let features = DenseMatrix::from_fn(n, d, |i, j| {
        let mean = if d > 0 && cfg.block_of(i) % d == j { cfg.separation } else { 0.0 };
        let noise: f64 = rng.sample(StandardNormal);
        T::of(mean + cfg.noise_std * noise)
    });
    let labels = (0..n).map(|i| cfg.block_of(i) as i64).collect();
    Dataset::new(graph, features, labels, cfg.blocks)
}
