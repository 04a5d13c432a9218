use alloc::vec::Vec;

use crate::error::{ensure_dim, Result};
use crate::linalg::Matrix;
use crate::network::argmax;

/// Paired inputs and targets, one example per column.
#[derive(Clone, Debug, PartialEq)]
pub struct Examples {
    inputs: Matrix,
    targets: Matrix,
}

impl Examples {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        ensure_dim("Examples: target count", inputs.cols(), targets.cols())?;
        Ok(Self { inputs, targets })
    }

    /// Builds from per-example slices.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let (mut dx, mut dy, mut n) = (None, None, 0usize);
        for (x, y) in pairs {
            ensure_dim("Examples: input dim", *dx.get_or_insert(x.len()), x.len())?;
            ensure_dim("Examples: target dim", *dy.get_or_insert(y.len()), y.len())?;
            xs.extend_from_slice(x);
            ys.extend_from_slice(y);
            n += 1;
        }
        Self::new(
            Matrix::from_col_major(dx.unwrap_or(0), n, xs)?,
            Matrix::from_col_major(dy.unwrap_or(0), n, ys)?,
        )
    }

    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.rows()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.rows()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.inputs.column(i)
    }

    pub fn target(&self, i: usize) -> &[f64] {
        self.targets.column(i)
    }

    /// Class index of example `i` (argmax of its target).
    pub fn label(&self, i: usize) -> usize {
        argmax(self.target(i))
    }

    /// Inputs and targets of the listed examples, in order.
    pub fn gather(&self, idx: &[usize]) -> (Matrix, Matrix) {
        (gather_columns(&self.inputs, idx), gather_columns(&self.targets, idx))
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let (inputs, targets) = self.gather(idx);
        Self { inputs, targets }
    }
}

pub(crate) fn gather_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(m.rows() * idx.len());
    for &i in idx {
        data.extend_from_slice(m.column(i));
    }
    Matrix::from_col_major(m.rows(), idx.len(), data).expect("gathered columns are finite")
}
