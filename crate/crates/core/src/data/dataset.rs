//! On-disk dataset directory:
//!
//! * `meta.txt`: one line `n d C` (`#` comments allowed)
//! * `edges.txt`: undirected edge list, see [`crate::graph::read_edge_list`]
//! * `features.csv`: `n` rows of `d` comma-separated reals, no header
//! * `labels.csv`: header `node_id,class_id`, one row per labeled node;
//!   omitted nodes (or class `-1`) are unlabeled

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{DataError, Error, Result};
use crate::graph::{read_edge_list, write_edge_list, SparseGraph};
use crate::matrix::DenseMatrix;
use crate::model::LabelMatrix;
use crate::scalar::Scalar;

pub const META_FILE: &str = "meta.txt";
pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub graph: SparseGraph,
    /// `n×d`; `d` may be 0.
    pub features: DenseMatrix<T>,
    /// Class per node in `[0, C)`, or `-1` when unknown.
    pub labels: Vec<i64>,
    pub class_count: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(graph: SparseGraph, features: DenseMatrix<T>, labels: Vec<i64>, class_count: usize) -> Result<Self> {
        let n = graph.node_count();
        if features.rows() != n || labels.len() != n {
            return Err(Error::dim(
                "Dataset::new",
                n,
                format!("features {} / labels {}", features.rows(), labels.len()),
            ));
        }
        if let Some((i, &c)) = labels
            .iter()
            .enumerate()
            .find(|(_, &c)| c < -1 || c >= class_count as i64)
        {
            return Err(Error::InvalidState(format!("node {i} has class {c} outside [0, {class_count})")));
        }
        Ok(Self {
            graph,
            features,
            labels,
            class_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// One-hot label rows for nodes selected by `keep`; everything else zero.
    pub fn label_matrix_where(&self, keep: impl Fn(usize) -> bool) -> LabelMatrix<T> {
        LabelMatrix::from_class_ids_where(&self.labels, self.class_count, keep)
            .expect("labels validated at construction")
    }

    pub fn known_label(&self, node: usize) -> Option<usize> {
        let c = self.labels[node];
        (c >= 0).then_some(c as usize)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(path.to_path_buf()).into()
        } else {
            Error::io(path, e)
        }
    })
}

fn malformed(file: &Path, line: usize, message: impl Into<String>) -> Error {
    DataError::Malformed {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
    .into()
}

fn csv_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(file: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    malformed(file, line, e.to_string())
}

fn read_meta(path: &Path) -> Result<(usize, usize, usize)> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::MissingFile(path.to_path_buf()).into()
        } else {
            Error::io(path, e)
        }
    })?;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(DataError::Ragged {
                file: path.to_path_buf(),
                line: idx + 1,
                expected: 3,
                found: fields.len(),
            }
            .into());
        }
        let mut v = [0usize; 3];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| malformed(path, idx + 1, format!("`{f}` is not a non-negative integer")))?;
        }
        return Ok((v[0], v[1], v[2]));
    }
    Err(malformed(path, 0, "no `n d C` line found"))
}

fn read_features<T: Scalar>(path: &Path, n: usize, d: usize) -> Result<DenseMatrix<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(open(path)?));
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0usize;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = csv_line(&rec);
        if d == 0 && rec.iter().all(str::is_empty) {
            rows += 1;
            continue;
        }
        if rec.len() != d {
            return Err(DataError::Ragged {
                file: path.to_path_buf(),
                line,
                expected: d,
                found: rec.len(),
            }
            .into());
        }
        for f in rec.iter() {
            let v: f64 = f
                .parse()
                .map_err(|_| malformed(path, line, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(malformed(path, line, "non-finite feature value"));
            }
            data.push(T::of(v));
        }
        rows += 1;
    }
    if d > 0 && rows != n {
        return Err(malformed(path, rows, format!("expected {n} feature rows, found {rows}")));
    }
    DenseMatrix::from_vec(n, d, data)
}

fn read_labels(path: &Path, n: usize, classes: usize) -> Result<Vec<i64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(open(path)?));
    let mut labels = vec![-1i64; n];
    let mut seen = vec![false; n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = csv_line(&rec);
        if rec.len() != 2 {
            return Err(DataError::Ragged {
                file: path.to_path_buf(),
                line,
                expected: 2,
                found: rec.len(),
            }
            .into());
        }
        let parse = |f: &str| -> Result<i64> {
            f.parse()
                .map_err(|_| malformed(path, line, format!("`{f}` is not an integer")))
        };
        let node = parse(&rec[0])?;
        let class = parse(&rec[1])?;
        if node < 0 || node as usize >= n {
            return Err(DataError::IdOutOfRange {
                file: path.to_path_buf(),
                line,
                id: node,
                limit: n,
            }
            .into());
        }
        if class < -1 || class >= classes as i64 {
            return Err(DataError::IdOutOfRange {
                file: path.to_path_buf(),
                line,
                id: class,
                limit: classes,
            }
            .into());
        }
        let node = node as usize;
        if seen[node] {
            return Err(DataError::Duplicate {
                file: path.to_path_buf(),
                line,
                node,
            }
            .into());
        }
        seen[node] = true;
        labels[node] = class;
    }
    Ok(labels)
}

/// Loads and validates a dataset directory; the edge list is symmetrized.
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    let (n, d, classes) = read_meta(&dir.join(META_FILE))?;
    let edges_path = dir.join(EDGES_FILE);
    let edges = read_edge_list(BufReader::new(open(&edges_path)?), n, &edges_path)?;
    let graph = SparseGraph::from_edges(n, &edges)?;
    let features = read_features(&dir.join(FEATURES_FILE), n, d)?;
    let labels = read_labels(&dir.join(LABELS_FILE), n, classes)?;
    Dataset::new(graph, features, labels, classes)
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn save_dataset<T: Scalar>(ds: &Dataset<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let meta_path = dir.join(META_FILE);
    let mut meta = create(meta_path.clone())?;
    writeln!(meta, "# n d C")
        .and_then(|_| writeln!(meta, "{} {} {}", ds.node_count(), ds.feature_dim(), ds.class_count))
        .and_then(|_| meta.flush())
        .map_err(|e| Error::io(&meta_path, e))?;

    let edges_path = dir.join(EDGES_FILE);
    let mut edges = create(edges_path.clone())?;
    write_edge_list(&ds.graph, &mut edges)
        .and_then(|_| edges.flush())
        .map_err(|e| Error::io(&edges_path, e))?;

    let feat_path = dir.join(FEATURES_FILE);
    let mut feat = create(feat_path.clone())?;
    (|| -> std::io::Result<()> {
        for i in 0..ds.node_count() {
            let row: Vec<String> = ds.features.row(i).iter().map(|v| v.as_f64().to_string()).collect();
            writeln!(feat, "{}", row.join(","))?;
        }
        feat.flush()
    })()
    .map_err(|e| Error::io(&feat_path, e))?;

    let labels_path = dir.join(LABELS_FILE);
    let mut wtr = csv::Writer::from_writer(create(labels_path.clone())?);
    let csv_io = |e: csv::Error| Error::io(&labels_path, std::io::Error::other(e));
    wtr.write_record(["node_id", "class_id"]).map_err(csv_io)?;
    for (i, &c) in ds.labels.iter().enumerate() {
        if c >= 0 {
            wtr.write_record([i.to_string(), c.to_string()]).map_err(csv_io)?;
        }
    }
    wtr.flush().map_err(|e| Error::io(&labels_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    fn toy(dir: &Path) {
        write(dir, META_FILE, "2 2 2\n");
        write(dir, EDGES_FILE, "0 1\n");
        write(dir, FEATURES_FILE, "1.0,0.5\n-2,3e-1\n");
        write(dir, LABELS_FILE, "node_id,class_id\n0,1\n1,0\n");
    }

    #[test]
    fn loads_toy_directory() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        let ds = load_dataset::<f64>(tmp.path()).unwrap();
        assert_eq!(ds.node_count(), 2);
        assert!(ds.graph.has_edge(0, 1) && ds.graph.has_edge(1, 0));
        assert_eq!(ds.features.row(1), &[-2.0, 0.3]);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn omitted_label_is_unknown() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        write(tmp.path(), LABELS_FILE, "node_id,class_id\n0,1\n");
        let ds = load_dataset::<f64>(tmp.path()).unwrap();
        assert_eq!(ds.labels, vec![1, -1]);
    }

    #[test]
    fn distinct_errors() {
        let tmp = tempfile::tempdir().unwrap();
        toy(tmp.path());
        fs::remove_file(tmp.path().join(EDGES_FILE)).unwrap();
        assert!(matches!(load_dataset::<f64>(tmp.path()), Err(Error::Data(DataError::MissingFile(_)))));

        toy(tmp.path());
        write(tmp.path(), FEATURES_FILE, "1,2\n3\n");
        assert!(matches!(
            load_dataset::<f64>(tmp.path()),
            Err(Error::Data(DataError::Ragged { line: 2, expected: 2, found: 1, .. }))
        ));

        toy(tmp.path());
        write(tmp.path(), LABELS_FILE, "node_id,class_id\n0,1\n0,0\n");
        assert!(matches!(
            load_dataset::<f64>(tmp.path()),
            Err(Error::Data(DataError::Duplicate { line: 3, node: 0, .. }))
        ));

        toy(tmp.path());
        write(tmp.path(), LABELS_FILE, "node_id,class_id\n7,1\n");
        assert!(matches!(
            load_dataset::<f64>(tmp.path()),
            Err(Error::Data(DataError::IdOutOfRange { id: 7, .. }))
        ));

        toy(tmp.path());
        write(tmp.path(), EDGES_FILE, "0 2\n");
        assert!(matches!(
            load_dataset::<f64>(tmp.path()),
            Err(Error::Data(DataError::IdOutOfRange { line: 1, id: 2, .. }))
        ));
    }

    #[test]
    fn featureless_dataset_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let g = SparseGraph::from_edges(3, &[(0, 2)]).unwrap();
        let ds = Dataset::new(g, DenseMatrix::<f64>::zeros(3, 0), vec![0, -1, 1], 2).unwrap();
        save_dataset(&ds, tmp.path()).unwrap();
        assert_eq!(load_dataset::<f64>(tmp.path()).unwrap(), ds);
    }
}
