//! Compressed sparse row graph storage, GCN normalization, inductive
//! subgraphs and node-wise masking.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{DataError, Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::split::SplitAssignment;

/// Undirected binary adjacency in CSR form.
///
/// Rows are sorted and duplicate-free, every edge is stored in both
/// directions and self-loops are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
}

impl SparseGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_offsets: vec![0; n + 1],
            col_indices: Vec::new(),
        }
    }

    /// Builds a graph from undirected edges. Each pair may appear in either
    /// orientation, repeatedly; self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::dim("SparseGraph::from_edges", format!("ids < {n}"), format!("({a}, {b})")));
            }
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        Ok(Self::from_adjacency_lists(adj))
    }

    fn from_adjacency_lists(mut adj: Vec<Vec<usize>>) -> Self {
        let n = adj.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Self {
            n,
            row_offsets,
            col_indices,
        }
    }

    /// Validating constructor from raw CSR arrays.
    pub fn from_csr(n: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>) -> Result<Self> {
        if row_offsets.len() != n + 1 || row_offsets[0] != 0 || row_offsets[n] != col_indices.len() {
            return Err(Error::InvalidState("malformed CSR offsets".into()));
        }
        let g = Self {
            n,
            row_offsets,
            col_indices,
        };
        for i in 0..n {
            if g.row_offsets[i] > g.row_offsets[i + 1] {
                return Err(Error::InvalidState("CSR offsets not monotone".into()));
            }
            let row = g.neighbors(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidState(format!("row {i} not strictly sorted")));
            }
            for &j in row {
                if j >= n {
                    return Err(Error::InvalidState(format!("neighbor {j} out of range")));
                }
                if j == i {
                    return Err(Error::InvalidState(format!("self-loop on node {i}")));
                }
                if !g.has_edge(j, i) {
                    return Err(Error::InvalidState(format!("edge ({i}, {j}) not symmetric")));
                }
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_indices.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Undirected edges as `(i, j)` with `i < j`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| i < j)
                .map(move |j| (i, j))
        })
    }

    /// Keeps only edges whose endpoints are both retained.
    pub fn retain_nodes(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.n);
        let mut row_offsets = Vec::with_capacity(self.n + 1);
        let mut col_indices = Vec::with_capacity(self.col_indices.len());
        row_offsets.push(0);
        for i in 0..self.n {
            if keep[i] {
                col_indices.extend(self.neighbors(i).iter().copied().filter(|&j| keep[j]));
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            n: self.n,
            row_offsets,
            col_indices,
        }
    }

    pub fn to_dense<T: Scalar>(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                m[(i, j)] = T::one();
            }
        }
        m
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` in CSR layout, self-loop entries included.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency<T> {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> NormalizedAdjacency<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(T::zero(), |k| vals[k])
    }

    /// `Â · h`.
    pub fn spmm(&self, h: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if h.rows() != self.n {
            return Err(Error::dim("spmm", self.n, h.rows()));
        }
        let c = h.cols();
        let mut out = DenseMatrix::zeros(self.n, c);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, &v) in out_row.iter_mut().zip(h.row(j)) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    /// `Âᵀ · g`, the adjoint used by reverse-mode differentiation.
    pub fn spmm_transpose(&self, g: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if g.rows() != self.n {
            return Err(Error::dim("spmm_transpose", self.n, g.rows()));
        }
        let c = g.cols();
        let mut out = DenseMatrix::zeros(self.n, c);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let g_row = g.row(i).to_vec();
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, &v) in out.row_mut(j).iter_mut().zip(&g_row) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Symmetric renormalization with self-loops. Degrees count the stored
/// neighbors only, so masked (isolated) nodes end up with a lone entry of 1.
pub fn normalize_adjacency<T: Scalar>(g: &SparseGraph) -> NormalizedAdjacency<T> {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    // 1/sqrt(d_i d_j) in f64 keeps symmetric weights exactly symmetric
    let w = |i: usize, j: usize| T::of(1.0 / (deg[i] * deg[j]).sqrt());
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.col_indices().len() + n);
    let mut values = Vec::with_capacity(g.col_indices().len() + n);
    row_offsets.push(0);
    for i in 0..n {
        let mut self_done = false;
        for &j in g.neighbors(i) {
            if !self_done && j > i {
                col_indices.push(i);
                values.push(w(i, i));
                self_done = true;
            }
            col_indices.push(j);
            values.push(w(i, j));
        }
        if !self_done {
            col_indices.push(i);
            values.push(w(i, i));
        }
        row_offsets.push(col_indices.len());
    }
    NormalizedAdjacency {
        n,
        row_offsets,
        col_indices,
        values,
    }
}

/// Removes every edge incident to a validation or test node. Node indexing
/// is unchanged; held-out nodes become isolated.
pub fn induce_training_subgraph(g: &SparseGraph, splits: &SplitAssignment) -> Result<SparseGraph> {
    if splits.len() != g.node_count() {
        return Err(Error::dim("induce_training_subgraph", g.node_count(), splits.len()));
    }
    Ok(g.retain_nodes(&splits.training_mask()))
}

/// Node visibility flags; `true` means unmasked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskVector {
    bits: Vec<bool>,
}

impl MaskVector {
    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn is_visible(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn visible_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Self) -> Self {
        Self {
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a && b).collect(),
        }
    }
}

/// Independent Bernoulli(`p`) visibility per node.
pub fn sample_node_mask<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<MaskVector> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!(
            "unmasking probability must lie in [0, 1], got {p}"
        )));
    }
    let bits = (0..n).map(|_| rng.random::<f64>() < p).collect();
    Ok(MaskVector { bits })
}

/// Drops every edge with a masked endpoint.
pub fn apply_node_mask(g: &SparseGraph, m: &MaskVector) -> Result<SparseGraph> {
    if m.len() != g.node_count() {
        return Err(Error::dim("apply_node_mask", g.node_count(), m.len()));
    }
    Ok(g.retain_nodes(&m.bits))
}

/// Reads the edge-list format: one `i j` pair per line, 0-based, `#`
/// comments. Returns the raw pairs with their line numbers checked against
/// `n`.
pub fn read_edge_list<R: BufRead>(reader: R, n: usize, file: &Path) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(file, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(DataError::Ragged {
                file: file.to_path_buf(),
                line: lineno,
                expected: 2,
                found: fields.len(),
            }
            .into());
        }
        let mut ids = [0usize; 2];
        for (slot, f) in ids.iter_mut().zip(&fields) {
            let id: i64 = f.parse().map_err(|_| DataError::Malformed {
                file: file.to_path_buf(),
                line: lineno,
                message: format!("`{f}` is not an integer node id"),
            })?;
            if id < 0 || id as usize >= n {
                return Err(DataError::IdOutOfRange {
                    file: file.to_path_buf(),
                    line: lineno,
                    id,
                    limit: n,
                }
                .into());
            }
            *slot = id as usize;
        }
        edges.push((ids[0], ids[1]));
    }
    Ok(edges)
}

pub fn write_edge_list<W: Write>(g: &SparseGraph, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# undirected edge list: {} nodes, {} edges", g.node_count(), g.edge_count())?;
    for (i, j) in g.edges() {
        writeln!(w, "{i} {j}")?;
    }
    Ok(())
}
