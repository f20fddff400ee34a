//! Seeded split generation and the `splits.csv` format
//! (header `node_id,role`, roles `train_labeled|train_unlabeled|val|test`).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{DataError, Error, Result};
use crate::scalar::Scalar;
use crate::split::{NodeRole, SplitAssignment};

/// Held-out fractions of all nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            validation: 0.25,
            test: 0.25,
        }
    }
}

/// Random validation/test selection, then a `labeling_rate` share of the
/// remaining training nodes (at least one, rounded to nearest) keeps its
/// label. Only nodes with a known class can become `train_labeled`.
pub fn make_splits<T: Scalar>(
    ds: &Dataset<T>,
    fractions: SplitFractions,
    labeling_rate: f64,
    seed: u64,
) -> Result<SplitAssignment> {
    let SplitFractions { validation, test } = fractions;
    if !(validation >= 0.0 && test >= 0.0) || validation + test > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be non-negative and sum to at most 1 (val {validation}, test {test})"
        )));
    }
    if !(labeling_rate > 0.0 && labeling_rate <= 1.0) {
        return Err(Error::InvalidConfig(format!("labeling rate must lie in (0, 1], got {labeling_rate}")));
    }
    let n = ds.node_count();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_val = (validation * n as f64).round() as usize;
    let n_test = ((test * n as f64).round() as usize).min(n - n_val.min(n));
    let mut roles = vec![NodeRole::TrainUnlabeled; n];
    for &i in &order[..n_val] {
        roles[i] = NodeRole::Validation;
    }
    for &i in &order[n_val..n_val + n_test] {
        roles[i] = NodeRole::Test;
    }
    let training = &order[n_val + n_test..];
    let candidates: Vec<usize> = training
        .iter()
        .copied()
        .filter(|&i| ds.known_label(i).is_some())
        .collect();
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no training node has a known label".into()));
    }
    let wanted = ((labeling_rate * training.len() as f64).round() as usize).max(1);
    for &i in candidates.iter().take(wanted) {
        roles[i] = NodeRole::TrainLabeled;
    }
    SplitAssignment::new(roles)
}

pub fn write_splits(splits: &SplitAssignment, path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["node_id", "role"]).map_err(io)?;
    for (i, role) in splits.roles().iter().enumerate() {
        w.write_record([i.to_string().as_str(), role.as_str()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `splits.csv`; every node in `0..n` must appear exactly once.
pub fn read_splits(path: &Path, n: usize) -> Result<SplitAssignment> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(path.to_path_buf()).into()
        } else {
            Error::io(path, e)
        }
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut roles: Vec<Option<NodeRole>> = vec![None; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            Error::from(DataError::Malformed {
                file: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(DataError::Ragged {
                file: path.to_path_buf(),
                line,
                expected: 2,
                found: rec.len(),
            }
            .into());
        }
        let node: i64 = rec[0].parse().map_err(|_| DataError::Malformed {
            file: path.to_path_buf(),
            line,
            message: format!("`{}` is not a node id", &rec[0]),
        })?;
        if node < 0 || node as usize >= n {
            return Err(DataError::IdOutOfRange {
                file: path.to_path_buf(),
                line,
                id: node,
                limit: n,
            }
            .into());
        }
        let role: NodeRole = rec[1].parse().map_err(|_| DataError::Malformed {
            file: path.to_path_buf(),
            line,
            message: format!("unknown role `{}`", &rec[1]),
        })?;
        let slot = &mut roles[node as usize];
        if slot.is_some() {
            return Err(DataError::Duplicate {
                file: path.to_path_buf(),
                line,
                node: node as usize,
            }
            .into());
        }
        *slot = Some(role);
    }
    if let Some(missing) = roles.iter().position(Option::is_none) {
        return Err(DataError::Malformed {
            file: path.to_path_buf(),
            line: 0,
            message: format!("node {missing} has no role"),
        }
        .into());
    }
    SplitAssignment::new(roles.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseGraph;
    use crate::matrix::DenseMatrix;

    fn dataset(n: usize) -> Dataset<f64> {
        let labels = (0..n as i64).map(|i| i % 3).collect();
        Dataset::new(SparseGraph::empty(n), DenseMatrix::zeros(n, 1), labels, 3).unwrap()
    }

    #[test]
    fn full_labeling_has_no_unlabeled() {
        let s = make_splits(&dataset(100), SplitFractions::default(), 1.0, 3).unwrap();
        assert_eq!(s.count(NodeRole::TrainUnlabeled), 0);
        assert_eq!(s.count(NodeRole::TrainLabeled), 50);
        assert_eq!(s.count(NodeRole::Validation), 25);
        assert_eq!(s.count(NodeRole::Test), 25);
    }

    #[test]
    fn one_percent_of_thousand_training_nodes() {
        let fr = SplitFractions {
            validation: 0.25,
            test: 0.25,
        };
        let s = make_splits(&dataset(2000), fr, 0.01, 11).unwrap();
        assert_eq!(s.count(NodeRole::TrainLabeled), 10);
        assert_eq!(s.count(NodeRole::TrainUnlabeled), 990);
    }

    #[test]
    fn at_least_one_labeled() {
        let s = make_splits(&dataset(20), SplitFractions::default(), 0.01, 0).unwrap();
        assert_eq!(s.count(NodeRole::TrainLabeled), 1);
    }

    #[test]
    fn seeded_and_validated() {
        let ds = dataset(50);
        let a = make_splits(&ds, SplitFractions::default(), 0.1, 9).unwrap();
        let b = make_splits(&ds, SplitFractions::default(), 0.1, 9).unwrap();
        assert_eq!(a, b);
        let too_much = SplitFractions {
            validation: 0.6,
            test: 0.5,
        };
        assert!(matches!(make_splits(&ds, too_much, 0.1, 0), Err(Error::InvalidConfig(_))));
        assert!(make_splits(&ds, SplitFractions::default(), 0.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip_and_missing_node() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("splits.csv");
        let s = make_splits(&dataset(30), SplitFractions::default(), 0.5, 1).unwrap();
        write_splits(&s, &path).unwrap();
        assert_eq!(read_splits(&path, 30).unwrap(), s);
        assert!(matches!(read_splits(&path, 31), Err(Error::Data(DataError::Malformed { .. }))));
        std::fs::write(&path, "node_id,role\n0,train_labeled\n0,test\n").unwrap();
        assert!(matches!(read_splits(&path, 1), Err(Error::Data(DataError::Duplicate { line: 3, .. }))));
    }
}
