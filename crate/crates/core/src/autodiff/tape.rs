//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every primitive evaluates eagerly, pushes its result onto the tape and
//! remembers its operands. [`Tape::backward`] then walks the tape once in
//! reverse, accumulating adjoints, and returns gradients for every node
//! registered with [`Tape::param`].

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<'a, T> {
    Constant,
    Param,
    MatMul(Var, Var),
    SpMM(&'a NormalizedAdjacency<T>, Var),
    AddRowBias(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    ConcatCols(Var, Var),
    Exp(Var),
    Log(Var),
    Mul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Clamp(Var, T, T),
    ReduceSum(Var),
    ReduceMean(Var),
    SelectRows(Var, Vec<usize>),
}

struct Node<'a, T> {
    value: DenseMatrix<T>,
    op: Op<'a, T>,
}

/// Gradients of a scalar output, one matrix per registered parameter slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    grads: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, slot: usize) -> &DenseMatrix<T> {
        &self.grads[slot]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DenseMatrix<T>> {
        self.grads.iter()
    }

    pub fn into_vec(self) -> Vec<DenseMatrix<T>> {
        self.grads
    }
}

/// Operation record for one forward pass.
///
/// Stochastic inputs (reparameterization noise, masks) enter as constants,
/// so gradients flow only through deterministic paths.
pub struct Tape<'a, T> {
    nodes: Vec<Node<'a, T>>,
    params: Vec<Option<Var>>,
}

impl<'a, T: Scalar> Default for Tape<'a, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> &DenseMatrix<T> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: DenseMatrix<T>) -> Var {
        self.push_unchecked(value, Op::Constant)
    }

    /// Registers a differentiable leaf in gradient slot `slot`.
    pub fn param(&mut self, slot: usize, value: DenseMatrix<T>) -> Var {
        let v = self.push_unchecked(value, Op::Param);
        if self.params.len() <= slot {
            self.params.resize(slot + 1, None);
        }
        self.params[slot] = Some(v);
        v
    }

    fn push_unchecked(&mut self, value: DenseMatrix<T>, op: Op<'a, T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: DenseMatrix<T>, op: Op<'a, T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric { op: name });
        }
        Ok(self.push_unchecked(value, op))
    }

    fn same_shape(&self, name: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(name, format!("{sa:?}"), format!("{sb:?}")));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b))
    }

    pub fn spmm(&mut self, adj: &'a NormalizedAdjacency<T>, h: Var) -> Result<Var> {
        let v = adj.spmm(self.value(h))?;
        self.push("spmm", v, Op::SpMM(adj, h))
    }

    /// Adds a `1×c` bias row to every row of an `n×c` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::dim(
                "add_row_bias",
                format!("(1, {})", xv.cols()),
                format!("{:?}", bv.shape()),
            ));
        }
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(bv.as_slice()) {
                *o += b;
            }
        }
        self.push("add_row_bias", out, Op::AddRowBias(x, bias))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(|a| a.max(T::zero()));
        self.push("relu", v, Op::Relu(x))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let v = softmax_rows(self.value(x));
        self.push("softmax_rows", v, Op::SoftmaxRows(x))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::dim("concat_cols", av.rows(), bv.rows()));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let out = DenseMatrix::from_fn(av.rows(), ca + cb, |i, j| {
            if j < ca {
                av[(i, j)]
            } else {
                bv[(i, j - ca)]
            }
        });
        self.push("concat_cols", out, Op::ConcatCols(a, b))
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x).map(T::exp);
        self.push("exp", v, Op::Exp(x))
    }

    /// Natural log with inputs floored at the smallest positive normal, so
    /// `0 · log 0` terms in cross entropy stay finite.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let floor = T::min_positive_value();
        let v = self.value(x).map(|a| a.max(floor).ln());
        self.push("log", v, Op::Log(x))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", v, Op::Mul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let v = self.value(x).map(|a| a * c);
        self.push("scale", v, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Result<Var> {
        let v = self.value(x).map(|a| a + c);
        self.push("add_scalar", v, Op::AddScalar(x))
    }

    /// Clamp to `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Result<Var> {
        let v = self.value(x).map(|a| a.max(lo).min(hi));
        self.push("clamp", v, Op::Clamp(x, lo, hi))
    }

    pub fn reduce_sum(&mut self, x: Var) -> Result<Var> {
        let v = DenseMatrix::scalar(self.value(x).sum());
        self.push("reduce_sum", v, Op::ReduceSum(x))
    }

    /// Mean of all entries; an empty matrix reduces to 0.
    pub fn reduce_mean(&mut self, x: Var) -> Result<Var> {
        let m = self.value(x);
        let mean = if m.is_empty() {
            T::zero()
        } else {
            m.sum() / T::of(m.len() as f64)
        };
        self.push("reduce_mean", DenseMatrix::scalar(mean), Op::ReduceMean(x))
    }

    /// Gathers the listed rows, in order.
    pub fn masked_row_select(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let m = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= m.rows()) {
            return Err(Error::dim("masked_row_select", format!("row < {}", m.rows()), bad));
        }
        let out = DenseMatrix::from_fn(rows.len(), m.cols(), |i, j| m[(rows[i], j)]);
        self.push("masked_row_select", out, Op::SelectRows(x, rows.to_vec()))
    }

    /// Single reverse sweep from a `1×1` output.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::dim(
                "backward",
                "(1, 1)",
                format!("{:?}", self.value(output).shape()),
            ));
        }
        let mut adj: Vec<Option<DenseMatrix<T>>> = (0..=output.0).map(|_| None).collect();
        adj[output.0] = Some(DenseMatrix::scalar(T::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param => {
                    adj[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b))?;
                    let gb = self.value(*a).t_matmul(&g)?;
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::SpMM(a, h) => {
                    accumulate(&mut adj, *h, a.spmm_transpose(&g)?);
                }
                Op::AddRowBias(x, b) => {
                    let mut gb = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, &v) in gb.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj, *b, gb);
                    accumulate(&mut adj, *x, g);
                }
                Op::Relu(x) => {
                    let gx = g.zip_map(self.value(*x), |gv, xv| if xv > T::zero() { gv } else { T::zero() });
                    accumulate(&mut adj, *x, gx);
                }
                Op::SoftmaxRows(x) => {
                    let y = &node.value;
                    let mut gx = DenseMatrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((o, &yv), &gv) in gx.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - dot);
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(*a).cols();
                    let cb = self.value(*b).cols();
                    let ga = DenseMatrix::from_fn(g.rows(), ca, |i, j| g[(i, j)]);
                    let gb = DenseMatrix::from_fn(g.rows(), cb, |i, j| g[(i, ca + j)]);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Exp(x) => {
                    accumulate(&mut adj, *x, g.zip_map(&node.value, |gv, y| gv * y));
                }
                Op::Log(x) => {
                    let floor = T::min_positive_value();
                    let gx = g.zip_map(self.value(*x), |gv, xv| if xv > floor { gv / xv } else { T::zero() });
                    accumulate(&mut adj, *x, gx);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |gv, bv| gv * bv);
                    let gb = g.zip_map(self.value(*a), |gv, av| gv * av);
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *b, g.map(|v| -v));
                    accumulate(&mut adj, *a, g);
                }
                Op::Scale(x, c) => {
                    let c = *c;
                    accumulate(&mut adj, *x, g.map(|v| v * c));
                }
                Op::AddScalar(x) => {
                    accumulate(&mut adj, *x, g);
                }
                Op::Clamp(x, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let gx = g.zip_map(self.value(*x), |gv, xv| if xv >= lo && xv <= hi { gv } else { T::zero() });
                    accumulate(&mut adj, *x, gx);
                }
                Op::ReduceSum(x) => {
                    let (r, c) = self.value(*x).shape();
                    accumulate(&mut adj, *x, DenseMatrix::filled(r, c, g.item()));
                }
                Op::ReduceMean(x) => {
                    let (r, c) = self.value(*x).shape();
                    let share = if r * c == 0 {
                        T::zero()
                    } else {
                        g.item() / T::of((r * c) as f64)
                    };
                    accumulate(&mut adj, *x, DenseMatrix::filled(r, c, share));
                }
                Op::SelectRows(x, rows) => {
                    let src = self.value(*x);
                    let mut gx = DenseMatrix::zeros(src.rows(), src.cols());
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, &v) in gx.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
            }
        }

        let grads = self
            .params
            .iter()
            .map(|slot| match slot {
                Some(v) => {
                    let (r, c) = self.value(*v).shape();
                    adj.get_mut(v.0)
                        .and_then(Option::take)
                        .unwrap_or_else(|| DenseMatrix::zeros(r, c))
                }
                None => DenseMatrix::zeros(0, 0),
            })
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<DenseMatrix<T>>], v: Var, g: DenseMatrix<T>) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}
