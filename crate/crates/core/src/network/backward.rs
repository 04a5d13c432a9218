use alloc::vec::Vec;

use super::forward::{forward_batch, mask_column, BatchTrace, Gating};
use super::{MultiLayerSupport, NetworkParams};
use crate::error::{ensure_dim, Result};
use crate::linalg::{gemm, Matrix};
use crate::nonlinearity::Nonlinearity;

/// Loss gradients with respect to every materialised weight `W^(ℓ)` and every
/// threshold `β^(ℓ)`.
///
/// Threshold gradients are zero wherever the forward form does not depend
/// smoothly on `β` (hard-thresholding) and always zero for the output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub betas: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Self {
            weights: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.weight().rows(), l.weight().cols()))
                .collect(),
            betas: net
                .layers()
                .iter()
                .map(|l| alloc::vec![0.0; l.beta().dim()])
                .collect(),
        }
    }
}

/// Reverse pass over a batched trace; `upstream` is `∂loss/∂output`, one
/// column per example. Gradients are summed over the batch.
///
/// Gates act as constants, so at a unit sitting exactly on its threshold the
/// gradient is zero.
pub fn backward_batch(
    net: &NetworkParams,
    trace: &BatchTrace,
    upstream: &Matrix,
) -> Result<Gradients> {
    let depth = net.depth();
    ensure_dim("backward upstream rows", net.output_dim(), upstream.rows())?;
    ensure_dim("backward upstream cols", trace.input.cols(), upstream.cols())?;
    let mut grads = Gradients::zeros_like(net);
    let mut delta = upstream.clone();
    for l in (0..depth).rev() {
        let z_prev = if l == 0 {
            &trace.input
        } else {
            &trace.post[l - 1]
        };
        gemm(1.0, &delta, false, z_prev, true, 0.0, &mut grads.weights[l]);
        if l == 0 {
            break;
        }
        let w = net.layer(l).weight();
        let mut back = Matrix::zeros(w.cols(), delta.cols());
        gemm(1.0, w, true, &delta, false, 0.0, &mut back);
        let gate = &trace.gates[l - 1];
        for (b, &g) in back.as_mut_slice().iter_mut().zip(gate.as_slice()) {
            if g == 0.0 {
                *b = 0.0;
            }
        }
        if trace.beta_differentiable {
            let gb = &mut grads.betas[l - 1];
            for j in 0..back.cols() {
                for (g, &b) in gb.iter_mut().zip(back.column(j)) {
                    *g -= b;
                }
            }
        }
        delta = back;
    }
    Ok(grads)
}

/// Weight gradients of a single example with the support held fixed.
pub fn backward_masked(
    net: &NetworkParams,
    x: &[f64],
    s: &MultiLayerSupport,
    upstream: &[f64],
) -> Result<Gradients> {
    s.check_against(net)?;
    let masks: Vec<Matrix> = s.masks().iter().map(mask_column).collect();
    let trace = forward_batch(
        net,
        &Matrix::column_vector(x),
        Gating::Masked {
            form: Nonlinearity::Pht,
            masks: &masks,
        },
    )?;
    backward_batch(net, &trace, &Matrix::column_vector(upstream))
}

/// Weight (and, for ReLU, threshold) gradients of a single example through
/// the nonlinearity: pass-through on the active set, zero elsewhere.
pub fn backward_activation(
    net: &NetworkParams,
    x: &[f64],
    nl: Nonlinearity,
    upstream: &[f64],
) -> Result<Gradients> {
    let trace = forward_batch(net, &Matrix::column_vector(x), Gating::Activation(nl))?;
    backward_batch(net, &trace, &Matrix::column_vector(upstream))
}
