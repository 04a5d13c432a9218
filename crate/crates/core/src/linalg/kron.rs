use alloc::vec::Vec;

use super::{Matrix, Vector};
use crate::error::{ensure_dim, Error, Result};

/// Default ceiling on the number of entries a Kronecker-style construction may
/// allocate. Lifted forms grow multiplicatively with depth.
pub const DEFAULT_ENTRY_CAP: usize = 100_000_000;

pub(crate) fn check_cap(what: &'static str, rows: usize, cols: usize, cap: usize) -> Result<()> {
    let entries = rows as u128 * cols as u128;
    if entries > cap as u128 {
        return Err(Error::EntryCapExceeded {
            what,
            rows,
            cols,
            entries,
            cap,
        });
    }
    Ok(())
}

/// Kronecker product `a ⊗ b` under [`DEFAULT_ENTRY_CAP`].
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    kron_capped(a, b, DEFAULT_ENTRY_CAP)
}

/// Kronecker product with an explicit entry cap.
///
/// Entry `(i·b.rows + k, j·b.cols + l)` of the result is `a[i,j]·b[k,l]`.
pub fn kron_capped(a: &Matrix, b: &Matrix, cap: usize) -> Result<Matrix> {
    let rows = a.rows().checked_mul(b.rows()).unwrap_or(usize::MAX);
    let cols = a.cols().checked_mul(b.cols()).unwrap_or(usize::MAX);
    check_cap("kron", rows, cols, cap)?;
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..a.cols() {
        for l in 0..b.cols() {
            let out_col = out.column_mut(j * b.cols() + l);
            let b_col = b.column(l);
            for i in 0..a.rows() {
                let aij = a[(i, j)];
                let dst = &mut out_col[i * b.rows()..(i + 1) * b.rows()];
                for (d, &bk) in dst.iter_mut().zip(b_col) {
                    *d = aij * bk;
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of two vectors: `(a ⊗ b)[i·|b| + k] = a[i]·b[k]`.
pub fn kron_vec(a: &[f64], b: &[f64], cap: usize) -> Result<Vector> {
    let n = a.len().checked_mul(b.len()).unwrap_or(usize::MAX);
    check_cap("kron_vec", n, 1, cap)?;
    let mut out = Vec::with_capacity(n);
    for &ai in a {
        out.extend(b.iter().map(|&bk| ai * bk));
    }
    Ok(Vector::from(out))
}

/// Column-major stacking of `a`.
pub fn vectorize(a: &Matrix) -> Vector {
    Vector::from(a.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    ensure_dim("unvectorize", rows * cols, v.len())?;
    Matrix::from_col_major(rows, cols, v.to_vec())
}
