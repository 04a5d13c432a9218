use alloc::vec::Vec;

use super::{MultiLayerSupport, NetworkParams};
use crate::error::{ensure_dim, Result};
use crate::linalg::{gemm, Matrix, Vector};
use crate::nonlinearity::{support_from_preactivation, Nonlinearity, SupportMask};

/// How hidden layers are gated in a batched pass.
#[derive(Clone, Copy, Debug)]
pub enum Gating<'a> {
    /// Apply the nonlinearity; the support is whatever it produces.
    Activation(Nonlinearity),
    /// Fixed supports, one `width × batch` matrix of `0.0`/`1.0` per hidden
    /// layer. Active units pass `q − form.shift(β)`.
    Masked {
        form: Nonlinearity,
        masks: &'a [Matrix],
    },
}

impl Gating<'_> {
    fn beta_differentiable(&self) -> bool {
        matches!(
            self,
            Gating::Activation(Nonlinearity::Relu)
                | Gating::Masked {
                    form: Nonlinearity::Relu,
                    ..
                }
        )
    }
}

/// Everything a batched backward pass needs. Columns are examples.
#[derive(Clone, Debug)]
pub struct BatchTrace {
    pub input: Matrix,
    /// `q^(ℓ) = W^(ℓ)·z^(ℓ−1)` for every layer, the last one being the output.
    pub pre: Vec<Matrix>,
    /// Hidden-layer outputs `z^(ℓ)`, `ℓ = 1..L−1`.
    pub post: Vec<Matrix>,
    /// Hidden-layer gates (`1.0` where the unit passed).
    pub gates: Vec<Matrix>,
    pub(crate) beta_differentiable: bool,
}

impl BatchTrace {
    pub fn output(&self) -> &Matrix {
        self.pre.last().expect("network has at least one layer")
    }
}

/// Batched forward pass; `x` holds one example per column.
pub fn forward_batch(net: &NetworkParams, x: &Matrix, gating: Gating<'_>) -> Result<BatchTrace> {
    ensure_dim("forward input", net.input_dim(), x.rows())?;
    let hidden = net.depth() - 1;
    if let Gating::Masked { masks, .. } = gating {
        ensure_dim("masked forward depth", hidden, masks.len())?;
    }
    let batch = x.cols();
    let mut pre = Vec::with_capacity(net.depth());
    let mut post = Vec::with_capacity(hidden);
    let mut gates = Vec::with_capacity(hidden);

    for (l, layer) in net.layers().iter().enumerate() {
        let w = layer.weight();
        let z_prev = if l == 0 { x } else { &post[l - 1] };
        let mut q = Matrix::zeros(w.rows(), batch);
        gemm(1.0, w, false, z_prev, false, 0.0, &mut q);
        if l == hidden {
            pre.push(q);
            break;
        }
        let beta = layer.beta();
        let mut z = Matrix::zeros(w.rows(), batch);
        let mut g = Matrix::zeros(w.rows(), batch);
        match gating {
            Gating::Activation(nl) => {
                for j in 0..batch {
                    let (qc, zc, gc) = (q.column(j), z.column_mut(j), g.column_mut(j));
                    for i in 0..qc.len() {
                        if qc[i] > beta[i] {
                            gc[i] = 1.0;
                            zc[i] = nl.apply(qc[i], beta[i]);
                        }
                    }
                }
            }
            Gating::Masked { form, masks } => {
                let m = &masks[l];
                ensure_dim("mask rows", w.rows(), m.rows())?;
                ensure_dim("mask batch", batch, m.cols())?;
                for j in 0..batch {
                    let (qc, mc, zc) = (q.column(j), m.column(j), z.column_mut(j));
                    for i in 0..qc.len() {
                        if mc[i] != 0.0 {
                            zc[i] = qc[i] - form.shift(beta[i]);
                        }
                    }
                }
                g = m.clone();
            }
        }
        pre.push(q);
        post.push(z);
        gates.push(g);
    }
    Ok(BatchTrace {
        input: x.clone(),
        pre,
        post,
        gates,
        beta_differentiable: gating.beta_differentiable(),
    })
}

/// Per-layer record of a single-example activation pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `q^(ℓ)` for every layer; the last entry is the network output.
    pub pre: Vec<Vector>,
    /// `z^(ℓ)` for hidden layers.
    pub post: Vec<Vector>,
    /// Supports `[q^(ℓ) > β^(ℓ)]` of hidden layers.
    pub masks: MultiLayerSupport,
}

/// Activation-mode forward pass `z^(ℓ) = η(W^(ℓ)z^(ℓ−1); β^(ℓ))`.
pub fn forward_activation(
    net: &NetworkParams,
    x: &[f64],
    nl: Nonlinearity,
) -> Result<(Vector, ForwardTrace)> {
    let trace = forward_batch(net, &Matrix::column_vector(x), Gating::Activation(nl))?;
    let mut masks = Vec::with_capacity(net.depth() - 1);
    for (l, q) in trace.pre.iter().take(net.depth() - 1).enumerate() {
        masks.push(support_from_preactivation(q.as_slice(), net.layer(l).beta())?);
    }
    let pre: Vec<Vector> = trace.pre.into_iter().map(|m| Vector::from(m.into_vec())).collect();
    let post = trace.post.into_iter().map(|m| Vector::from(m.into_vec())).collect();
    let y = pre.last().expect("non-empty").clone();
    Ok((
        y,
        ForwardTrace {
            pre,
            post,
            masks: MultiLayerSupport::new(masks),
        },
    ))
}

/// Masked forward pass `z^(ℓ) = diag(m^(ℓ))·W^(ℓ)·z^(ℓ−1)`; linear in `x`.
pub fn forward_masked(net: &NetworkParams, x: &[f64], s: &MultiLayerSupport) -> Result<Vector> {
    forward_masked_as(net, x, s, Nonlinearity::Pht)
}

/// Masked forward pass in the form matching `form`: for ReLU the active
/// units carry `q − β`, for hard-thresholding they carry `q`.
pub fn forward_masked_as(
    net: &NetworkParams,
    x: &[f64],
    s: &MultiLayerSupport,
    form: Nonlinearity,
) -> Result<Vector> {
    s.check_against(net)?;
    let masks: Vec<Matrix> = s.masks().iter().map(mask_column).collect();
    let trace = forward_batch(
        net,
        &Matrix::column_vector(x),
        Gating::Masked {
            form,
            masks: &masks,
        },
    )?;
    Ok(Vector::from(trace.output().as_slice()))
}

pub(crate) fn mask_column(m: &SupportMask) -> Matrix {
    Matrix::column_vector(&m.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, LayerSpec};
    use crate::nonlinearity::ThresholdVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_net(depth: usize) -> NetworkParams {
        let layers = (0..depth)
            .map(|_| Layer::dense(Matrix::identity(2), ThresholdVector::zeros(2)).unwrap())
            .collect();
        NetworkParams::new(layers).unwrap()
    }

    #[test]
    fn single_linear_layer() {
        let (y, trace) = forward_activation(&identity_net(1), &[1.0, -1.0], Nonlinearity::Pht)
            .unwrap();
        assert_eq!(&*y, &[1.0, -1.0]);
        assert!(trace.masks.is_empty());
    }

    #[test]
    fn two_identity_layers_gate_negative_unit() {
        let (y, trace) = forward_activation(&identity_net(2), &[1.0, -1.0], Nonlinearity::Pht)
            .unwrap();
        assert_eq!(&*trace.post[0], &[1.0, 0.0]);
        assert_eq!(&*y, &[1.0, 0.0]);
        assert_eq!(trace.masks.masks()[0].bits(), &[true, false]);
    }

    #[test]
    fn all_ones_masks_give_linear_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let specs = NetworkParams::dense_specs(&[4, 3, 5, 2]);
        let net = NetworkParams::random(&specs, 1.0, &mut rng).unwrap();
        let x = [0.3, -1.2, 0.7, 2.0];
        let y = forward_masked(&net, &x, &MultiLayerSupport::all_ones(&net)).unwrap();
        let prod = net.layer(2).weight()
            .matmul(net.layer(1).weight()).unwrap()
            .matmul(net.layer(0).weight()).unwrap();
        let expected = prod.matvec(&x).unwrap();
        assert!(crate::linalg::max_abs_diff(&y, &expected) < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let net = identity_net(2);
        assert!(forward_activation(&net, &[1.0], Nonlinearity::Relu).is_err());
        let bad = MultiLayerSupport::new(alloc::vec![SupportMask::ones(3)]);
        assert!(forward_masked(&net, &[1.0, 1.0], &bad).is_err());
        let _ = LayerSpec::dense(1, 1);
    }
}
