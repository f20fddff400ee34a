//! Dataset files, split files, labeling-rate subsampling and the synthetic
//! SBM generator.

mod dataset;
mod sbm;
mod splits;

pub use dataset::{
    load_dataset, save_dataset, Dataset, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE,
};
pub use sbm::{generate_sbm, SbmConfig};
pub use splits::{make_splits, read_splits, write_splits, SplitFractions};
