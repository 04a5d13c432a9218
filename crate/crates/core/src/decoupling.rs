//! Bilinear separation of a support-gated network, `z^(ℓ) = U^(ℓ)·v^(ℓ)`.
//!
//! `U^(ℓ)` depends only on the input and the supports, `v^(ℓ)` only on the
//! weights. With column-major vectorisation `vec(A·X·b) = (bᵀ ⊗ A)·vec(X)`:
//!
//! * `U^(1) = xᵀ ⊗ diag(m^(1))` and `v^(1) = vec(W^(1))`;
//! * `U^(ℓ+1)` has one column block per column `p` of `U^(ℓ)`, namely
//!   `(U^(ℓ)e_p)ᵀ ⊗ diag(m^(ℓ+1))`, and `v^(ℓ+1) = v^(ℓ) ⊗ vec(W^(ℓ+1))`.
//!
//! The last layer is linear, so its support is the identity. Thresholds are
//! not part of the separation: the gated layer passes `q` unshifted.

use alloc::vec::Vec;

use crate::data::Examples;
use crate::error::{ensure_dim, invalid, Result};
use crate::linalg::{check_cap, kron_vec, Matrix, Vector, DEFAULT_ENTRY_CAP};
use crate::network::{loss, LayerSpec, LossKind, MultiLayerSupport, NetworkParams};
use crate::nonlinearity::SupportMask;

/// `U^(ℓ)` of one sample, optionally paired with the matching `v^(ℓ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoupledForm {
    /// 1-based layer index.
    pub layer_index: usize,
    pub u: Matrix,
    pub v: Option<Vector>,
}

impl DecoupledForm {
    /// `U·v`, the layer output. Needs `v`.
    pub fn output(&self) -> Result<Vector> {
        match &self.v {
            Some(v) => self.u.matvec(v),
            None => Err(invalid!("decoupled form has no weight vector attached")),
        }
    }
}

/// `U^(1) = xᵀ ⊗ diag(m1)`.
pub fn decouple_first_layer(x: &[f64], m1: &SupportMask) -> Result<DecoupledForm> {
    let n = m1.dim();
    check_cap("U^(1)", n, n * x.len(), DEFAULT_ENTRY_CAP)?;
    let mut u = Matrix::zeros(n, n * x.len());
    for (j, &xj) in x.iter().enumerate() {
        for i in 0..n {
            if m1.get(i) {
                u.column_mut(j * n + i)[i] = xj;
            }
        }
    }
    Ok(DecoupledForm {
        layer_index: 1,
        u,
        v: None,
    })
}

/// `U^(ℓ+1)` from `U^(ℓ)` under the default entry cap.
pub fn lift_next_layer(prev: &DecoupledForm, m_next: &SupportMask, spec: &LayerSpec) -> Result<Matrix> {
    lift_next_layer_capped(prev, m_next, spec, DEFAULT_ENTRY_CAP)
}

pub fn lift_next_layer_capped(
    prev: &DecoupledForm,
    m_next: &SupportMask,
    spec: &LayerSpec,
    cap: usize,
) -> Result<Matrix> {
    ensure_dim("lift_next_layer: input width", prev.u.rows(), spec.input_dim)?;
    ensure_dim("lift_next_layer: mask width", spec.output_dim, m_next.dim())?;
    let (n_in, n_out) = (spec.input_dim, spec.output_dim);
    let block = n_in * n_out;
    let cols = prev
        .u
        .cols()
        .checked_mul(block)
        .ok_or_else(|| invalid!("U^({}) column count overflows", prev.layer_index + 1))?;
    check_cap("U^(ℓ+1)", n_out, cols, cap)?;
    let mut u = Matrix::zeros(n_out, cols);
    for p in 0..prev.u.cols() {
        let up = prev.u.column(p);
        for (j, &c) in up.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for i in 0..n_out {
                if m_next.get(i) {
                    u.column_mut(p * block + j * n_out + i)[i] = c;
                }
            }
        }
    }
    Ok(u)
}

/// `v^(upto) = vec(W^(1)) ⊗ … ⊗ vec(W^(upto))`.
pub fn weight_vector(net: &NetworkParams, upto: usize) -> Result<Vector> {
    weight_vector_capped(net, upto, DEFAULT_ENTRY_CAP)
}

pub fn weight_vector_capped(net: &NetworkParams, upto: usize, cap: usize) -> Result<Vector> {
    if upto == 0 || upto > net.depth() {
        return Err(invalid!("weight_vector: layer count {upto} outside 1..={}", net.depth()));
    }
    let mut v = Vector::from(net.layer(0).weight().as_slice());
    for l in 1..upto {
        v = kron_vec(&v, net.layer(l).weight().as_slice(), cap)?;
    }
    Ok(v)
}

/// `U^(L)` of one sample; the output layer's support is the identity.
pub fn decouple_sample(specs: &[LayerSpec], x: &[f64], s: &MultiLayerSupport) -> Result<DecoupledForm> {
    decouple_sample_capped(specs, x, s, DEFAULT_ENTRY_CAP)
}

pub fn decouple_sample_capped(
    specs: &[LayerSpec],
    x: &[f64],
    s: &MultiLayerSupport,
    cap: usize,
) -> Result<DecoupledForm> {
    if specs.is_empty() {
        return Err(invalid!("decoupling needs at least one layer"));
    }
    ensure_dim("decouple: support depth", specs.len() - 1, s.len())?;
    ensure_dim("decouple: input", specs[0].input_dim, x.len())?;
    let mask = |l: usize| -> SupportMask {
        if l + 1 == specs.len() {
            SupportMask::ones(specs[l].output_dim)
        } else {
            s.masks()[l].clone()
        }
    };
    let m1 = mask(0);
    ensure_dim("decouple: layer-1 mask", specs[0].output_dim, m1.dim())?;
    let mut form = decouple_first_layer(x, &m1)?;
    for (l, spec) in specs.iter().enumerate().skip(1) {
        let u = lift_next_layer_capped(&form, &mask(l), spec, cap)?;
        form = DecoupledForm {
            layer_index: l + 1,
            u,
            v: None,
        };
    }
    Ok(form)
}

/// `U^(L)` and `v^(L)` of a concrete network; `U·v` equals the masked
/// (unshifted) forward output.
pub fn decouple_network(net: &NetworkParams, x: &[f64], s: &MultiLayerSupport) -> Result<DecoupledForm> {
    s.check_against(net)?;
    let mut form = decouple_sample(&net.specs(), x, s)?;
    form.v = Some(weight_vector(net, net.depth())?);
    Ok(form)
}

/// Samples stacked for recovery: `y` and `U` concatenated in sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedDataset {
    pub y_stacked: Vector,
    pub u_stacked: Matrix,
    /// Length of `y_stacked`.
    pub m_total: usize,
    /// Rows per sample (the output width).
    pub block_rows: usize,
}

impl LiftedDataset {
    pub fn new(y_stacked: Vector, u_stacked: Matrix, block_rows: usize) -> Result<Self> {
        ensure_dim("LiftedDataset rows", y_stacked.dim(), u_stacked.rows())?;
        if block_rows == 0 || y_stacked.dim() % block_rows != 0 {
            return Err(invalid!(
                "LiftedDataset: {} rows do not split into blocks of {block_rows}",
                y_stacked.dim()
            ));
        }
        Ok(Self {
            m_total: y_stacked.dim(),
            y_stacked,
            u_stacked,
            block_rows,
        })
    }

    pub fn samples(&self) -> usize {
        self.m_total / self.block_rows
    }

    /// Same data with `U` and `y` multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            y_stacked: self.y_stacked.scaled(scale),
            u_stacked: self.u_stacked.scaled(scale),
            m_total: self.m_total,
            block_rows: self.block_rows,
        }
    }
}

/// Stacks `U_n^(L)` and `y_n` for every sample.
pub fn assemble_lifted_dataset(
    specs: &[LayerSpec],
    samples: &Examples,
    supports: &[MultiLayerSupport],
) -> Result<LiftedDataset> {
    assemble_lifted_dataset_capped(specs, samples, supports, DEFAULT_ENTRY_CAP)
}

pub fn assemble_lifted_dataset_capped(
    specs: &[LayerSpec],
    samples: &Examples,
    supports: &[MultiLayerSupport],
    cap: usize,
) -> Result<LiftedDataset> {
    ensure_dim("assemble: one support per sample", samples.len(), supports.len())?;
    if samples.is_empty() {
        return Err(invalid!("assemble: no samples"));
    }
    let out = specs.last().map(|s| s.output_dim).unwrap_or(0);
    ensure_dim("assemble: target width", out, samples.target_dim())?;
    let cols: usize = specs
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.input_dim * s.output_dim))
        .ok_or_else(|| invalid!("assemble: lifted column count overflows"))?;
    let rows = samples.len() * out;
    check_cap("stacked U", rows, cols, cap)?;
    let mut u = Matrix::zeros(rows, cols);
    let mut y = Vec::with_capacity(rows);
    for (n, s) in supports.iter().enumerate() {
        let form = decouple_sample_capped(specs, samples.input(n), s, cap)?;
        for c in 0..cols {
            u.column_mut(c)[n * out..(n + 1) * out].copy_from_slice(form.u.column(c));
        }
        y.extend_from_slice(samples.target(n));
    }
    LiftedDataset::new(Vector::from(y), u, out)
}

/// `Σ_n loss(y_n, U_n·v)`; for least squares `‖y − U·v‖²`.
pub fn bilinear_objective(ds: &LiftedDataset, v: &[f64], kind: LossKind) -> Result<f64> {
    ensure_dim("bilinear_objective", ds.u_stacked.cols(), v.len())?;
    let pred = ds.u_stacked.matvec(v)?;
    let b = ds.block_rows;
    let mut total = 0.0;
    for n in 0..ds.samples() {
        total += loss(kind, &pred[n * b..(n + 1) * b], &ds.y_stacked[n * b..(n + 1) * b])?.0;
    }
    Ok(total)
}
