use alloc::vec::Vec;

use crate::error::{ensure_dim, invalid, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `‖y_true − y_pred‖²`.
    LeastSquares,
    /// Softmax followed by negative log-likelihood of a probability target.
    SoftmaxCrossEntropy,
}

const PROBABILITY_SLACK: f64 = 1e-9;

/// Loss value and its gradient with respect to `y_pred`.
pub fn loss(kind: LossKind, y_pred: &[f64], y_true: &[f64]) -> Result<(f64, Vector)> {
    ensure_dim("loss", y_true.len(), y_pred.len())?;
    let mut grad = alloc::vec![0.0; y_pred.len()];
    let value = loss_into(kind, y_pred, y_true, &mut grad)?;
    Ok((value, Vector::from(grad)))
}

/// Summed loss over columns and the per-column gradients.
pub fn loss_batch(kind: LossKind, y_pred: &Matrix, y_true: &Matrix) -> Result<(f64, Matrix)> {
    ensure_dim("loss_batch rows", y_true.rows(), y_pred.rows())?;
    ensure_dim("loss_batch cols", y_true.cols(), y_pred.cols())?;
    let mut grad = Matrix::zeros(y_pred.rows(), y_pred.cols());
    let mut total = 0.0;
    for j in 0..y_pred.cols() {
        total += loss_into(kind, y_pred.column(j), y_true.column(j), grad.column_mut(j))?;
    }
    Ok((total, grad))
}

fn loss_into(kind: LossKind, y_pred: &[f64], y_true: &[f64], grad: &mut [f64]) -> Result<f64> {
    match kind {
        LossKind::LeastSquares => {
            let mut value = 0.0;
            for ((g, &p), &t) in grad.iter_mut().zip(y_pred).zip(y_true) {
                let r = p - t;
                value += r * r;
                *g = 2.0 * r;
            }
            Ok(value)
        }
        LossKind::SoftmaxCrossEntropy => {
            check_probability(y_true)?;
            let max = y_pred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = y_pred.iter().map(|&p| libm::exp(p - max)).collect();
            let sum: f64 = exps.iter().sum();
            let log_sum = libm::log(sum) + max;
            let mut value = 0.0;
            for (((g, &p), &t), &e) in grad.iter_mut().zip(y_pred).zip(y_true).zip(&exps) {
                if t > 0.0 {
                    value -= t * (p - log_sum);
                }
                *g = e / sum - t;
            }
            Ok(value)
        }
    }
}

fn check_probability(t: &[f64]) -> Result<()> {
    if t.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid!("cross-entropy target has a negative or non-finite entry"));
    }
    let s: f64 = t.iter().sum();
    if libm::fabs(s - 1.0) > PROBABILITY_SLACK {
        return Err(invalid!("cross-entropy target sums to {s}, not 1"));
    }
    Ok(())
}

/// Index of the largest entry (first on ties).
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
