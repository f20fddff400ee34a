use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// `n×C` label rows: each row is all zeros (no label) or a probability
/// distribution over classes (one-hot or soft).
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix<T> {
    inner: DenseMatrix<T>,
}

pub(crate) fn row_sum_tolerance<T: Scalar>() -> T {
    T::of(1e-9).max(T::epsilon() * T::of(100.0))
}

impl<T: Scalar> LabelMatrix<T> {
    pub fn zeros(n: usize, classes: usize) -> Self {
        Self {
            inner: DenseMatrix::zeros(n, classes),
        }
    }

    /// Validates row sums and entry ranges.
    pub fn new(m: DenseMatrix<T>) -> Result<Self> {
        let tol = row_sum_tolerance::<T>();
        for i in 0..m.rows() {
            let row = m.row(i);
            if row.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
                return Err(Error::InvalidState(format!("label row {i} has entries outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if s != T::zero() && (s - T::one()).abs() > tol {
                return Err(Error::InvalidState(format!("label row {i} sums to {s}")));
            }
        }
        Ok(Self { inner: m })
    }

    pub(crate) fn from_matrix_unchecked(m: DenseMatrix<T>) -> Self {
        Self { inner: m }
    }

    /// One-hot rows for ids in `[0, classes)`; negative ids give zero rows.
    pub fn from_class_ids(ids: &[i64], classes: usize) -> Result<Self> {
        Self::from_class_ids_where(ids, classes, |_| true)
    }

    /// Like [`from_class_ids`](Self::from_class_ids) but only nodes for
    /// which `keep` holds receive their label.
    pub fn from_class_ids_where(ids: &[i64], classes: usize, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let mut m = DenseMatrix::zeros(ids.len(), classes);
        for (i, &c) in ids.iter().enumerate() {
            if c < 0 || !keep(i) {
                continue;
            }
            if c as usize >= classes {
                return Err(Error::InvalidState(format!(
                    "class id {c} for node {i} exceeds class count {classes}"
                )));
            }
            m[(i, c as usize)] = T::one();
        }
        Ok(Self { inner: m })
    }

    pub fn node_count(&self) -> usize {
        self.inner.rows()
    }

    pub fn class_count(&self) -> usize {
        self.inner.cols()
    }

    pub fn as_matrix(&self) -> &DenseMatrix<T> {
        &self.inner
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.inner
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.inner.row(i)
    }

    pub(crate) fn set_row(&mut self, i: usize, values: &[T]) {
        self.inner.row_mut(i).copy_from_slice(values);
    }

    pub(crate) fn clear_row(&mut self, i: usize) {
        self.inner.row_mut(i).fill(T::zero());
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.inner.row(i).iter().any(|&v| v != T::zero())
    }

    /// Rows carrying any label, in ascending order.
    pub fn labeled_rows(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&i| self.is_labeled(i)).collect()
    }

    /// Argmax class per row; `None` for zero rows.
    pub fn class_ids(&self) -> Vec<Option<usize>> {
        (0..self.node_count())
            .map(|i| if self.is_labeled(i) { self.inner.row_argmax(i) } else { None })
            .collect()
    }
}
