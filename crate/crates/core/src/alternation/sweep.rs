//! Support sweeps: estimate every hidden-layer mask from the current weights.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mask::{estimate_mask_batch, estimate_mask_instance, estimate_mask_majority};
use crate::error::{ensure_dim, invalid, Result};
use crate::linalg::{gemm, Matrix};
use crate::network::{MultiLayerSupport, NetworkParams};
use crate::nonlinearity::{Nonlinearity, SupportMask, ThresholdVector};

/// Instance-wise (one support per example) or batch-wise (one per batch).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    Instance,
    Batch { batch_size: usize },
}

/// Which closed form turns a layer signal into a support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskRule {
    /// Minimiser of the reconstruction objective: `[r_i² > τ_i]`
    /// (batch: `[Σ_n r_i² > τ_i]`).
    Reconstruction,
    /// The hard-threshold gate `[r_i > τ_i]` (batch: gate of the batch mean).
    Gate,
}

/// Signal the closed form is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskSignal {
    /// The shifted pre-activation `r` itself, sign included.
    PreActivation,
    /// `max(r, 0)`: only units the activation would pass can be kept.
    Rectified,
}

/// Effective threshold derived from a stored `β`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdRule {
    /// `τ = β`, as in the hard-thresholding nonlinearity.
    Beta,
    /// `τ = √(2β)`, the threshold of the exact `ℓ0` proximal minimiser.
    SqrtTwoBeta,
}

impl ThresholdRule {
    pub fn effective(self, beta: f64) -> f64 {
        match self {
            ThresholdRule::Beta => beta,
            ThresholdRule::SqrtTwoBeta => libm::sqrt(2.0 * beta.max(0.0)),
        }
    }

    /// Stored `β` whose effective threshold is `tau`.
    pub fn beta_for(self, tau: f64) -> f64 {
        match self {
            ThresholdRule::Beta => tau,
            ThresholdRule::SqrtTwoBeta => tau * tau / 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskPolicy {
    pub kind: MaskKind,
    pub rule: MaskRule,
    pub signal: MaskSignal,
    pub threshold_rule: ThresholdRule,
    /// Batch kind only: majority vote of per-example supports instead of the
    /// batch closed form.
    pub majority_vote: bool,
    /// Form of the gated layer: for ReLU the layer signal is `W·z − β`, for
    /// hard-thresholding it is `W·z`.
    pub form: Nonlinearity,
}

impl MaskPolicy {
    pub fn instance(form: Nonlinearity) -> Self {
        Self {
            kind: MaskKind::Instance,
            rule: MaskRule::Reconstruction,
            signal: MaskSignal::PreActivation,
            threshold_rule: ThresholdRule::Beta,
            majority_vote: false,
            form,
        }
    }

    pub fn batch(batch_size: usize, form: Nonlinearity) -> Self {
        Self {
            kind: MaskKind::Batch { batch_size },
            ..Self::instance(form)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let MaskKind::Batch { batch_size: 0 } = self.kind {
            return Err(invalid!("batch mask policy needs batch_size ≥ 1"));
        }
        Ok(())
    }
}

/// Per-hidden-layer thresholds used by the sweep (distinct from the network's
/// own thresholds, which stay with the forward pass).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MaskThresholds(pub Vec<ThresholdVector>);

impl MaskThresholds {
    /// Reuses the network's hidden-layer thresholds, clamping negative
    /// entries to zero because the closed forms need nonnegative thresholds.
    pub fn from_network(net: &NetworkParams) -> Self {
        Self(
            net.layers()[..net.depth() - 1]
                .iter()
                .map(|l| {
                    ThresholdVector::new(l.beta().iter().map(|&b| b.max(0.0)).collect())
                        .expect("clamped thresholds stay finite")
                })
                .collect(),
        )
    }

    /// One threshold per layer chosen so that the sweep keeps units whose
    /// signal magnitude `|r|` exceeds the `percentile`-th percentile of that
    /// layer's magnitudes over `inputs` (positive entries only for the
    /// rectified signal). Layers are calibrated in order, each
    /// on the signal produced by the masks already chosen below it. For the
    /// batch reconstruction rule the threshold is multiplied by the batch size.
    pub fn percentile(
        net: &NetworkParams,
        inputs: &Matrix,
        policy: &MaskPolicy,
        percentile: f64,
    ) -> Result<Self> {
        if !(0.0..=100.0).contains(&percentile) {
            return Err(invalid!("percentile must lie in [0, 100], got {percentile}"));
        }
        ensure_dim("percentile thresholds", net.input_dim(), inputs.rows())?;
        let hidden = net.depth() - 1;
        let mut z = inputs.clone();
        let mut out = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let r = layer_signal(net, l, &z, policy.form);
            let mut mags: Vec<f64> = match policy.signal {
                MaskSignal::PreActivation => r.as_slice().iter().map(|v| libm::fabs(*v)).collect(),
                MaskSignal::Rectified => r.as_slice().iter().copied().filter(|&v| v > 0.0).collect(),
            };
            let tau_mag = quantile(&mut mags, percentile);
            let tau = match policy.rule {
                MaskRule::Reconstruction => tau_mag * tau_mag,
                MaskRule::Gate => tau_mag,
            };
            let width = net.layer(l).weight().rows();
            let beta = ThresholdVector::constant(width, policy.threshold_rule.beta_for(tau))?;
            let mut zl = r;
            for j in 0..zl.cols() {
                let m = instance_mask(zl.column(j), &beta, policy)?;
                m.gate(zl.column_mut(j))?;
            }
            // The batch closed form sums energies over the batch, so its
            // threshold grows with the batch to compare mean energies.
            let beta = match (policy.kind, policy.rule, policy.majority_vote) {
                (MaskKind::Batch { batch_size }, MaskRule::Reconstruction, false) => {
                    ThresholdVector::constant(
                        width,
                        policy.threshold_rule.beta_for(tau * batch_size as f64),
                    )?
                }
                _ => beta,
            };
            out.push(beta);
            z = zl;
        }
        Ok(Self(out))
    }

    pub fn check_against(&self, net: &NetworkParams) -> Result<()> {
        let widths = net.hidden_widths();
        ensure_dim("mask thresholds depth", widths.len(), self.0.len())?;
        for (b, w) in self.0.iter().zip(widths) {
            ensure_dim("mask thresholds width", w, b.dim())?;
        }
        Ok(())
    }
}

fn quantile(values: &mut [f64], percentile: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let k = libm::round(percentile / 100.0 * (values.len() - 1) as f64) as usize;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// `W^(ℓ)·z − shift(β^(ℓ))` for every column of `z`.
fn layer_signal(net: &NetworkParams, l: usize, z: &Matrix, form: Nonlinearity) -> Matrix {
    let layer = net.layer(l);
    let w = layer.weight();
    let mut r = Matrix::zeros(w.rows(), z.cols());
    gemm(1.0, w, false, z, false, 0.0, &mut r);
    if form == Nonlinearity::Relu {
        let beta = layer.beta();
        for j in 0..r.cols() {
            for (v, &b) in r.column_mut(j).iter_mut().zip(beta.iter()) {
                *v -= b;
            }
        }
    }
    r
}

fn effective_thresholds(beta: &ThresholdVector, policy: &MaskPolicy) -> Result<ThresholdVector> {
    ThresholdVector::new(beta.iter().map(|&b| policy.threshold_rule.effective(b)).collect())
}

fn rectify(r: &[f64], policy: &MaskPolicy) -> Vec<f64> {
    match policy.signal {
        MaskSignal::PreActivation => r.to_vec(),
        MaskSignal::Rectified => r.iter().map(|&v| v.max(0.0)).collect(),
    }
}

fn instance_mask(r: &[f64], beta: &ThresholdVector, policy: &MaskPolicy) -> Result<SupportMask> {
    let tau = effective_thresholds(beta, policy)?;
    let r = &rectify(r, policy)[..];
    match policy.rule {
        MaskRule::Reconstruction => estimate_mask_instance(r, &tau),
        MaskRule::Gate => Ok(SupportMask::new(
            r.iter().zip(tau.iter()).map(|(&v, &t)| v > t).collect(),
        )),
    }
}

fn batch_mask(cols: &[&[f64]], beta: &ThresholdVector, policy: &MaskPolicy) -> Result<SupportMask> {
    let tau = effective_thresholds(beta, policy)?;
    let owned: Vec<Vec<f64>> = cols.iter().map(|c| rectify(c, policy)).collect();
    let cols: Vec<&[f64]> = owned.iter().map(Vec::as_slice).collect();
    let cols = &cols[..];
    if policy.majority_vote {
        return match policy.rule {
            MaskRule::Reconstruction => estimate_mask_majority(cols, &tau),
            MaskRule::Gate => {
                let mut votes = alloc::vec![0usize; tau.dim()];
                for c in cols {
                    for ((v, &x), &t) in votes.iter_mut().zip(c.iter()).zip(tau.iter()) {
                        *v += (x > t) as usize;
                    }
                }
                Ok(SupportMask::new(votes.iter().map(|&v| 2 * v > cols.len()).collect()))
            }
        };
    }
    match policy.rule {
        MaskRule::Reconstruction => estimate_mask_batch(cols, &tau),
        MaskRule::Gate => {
            if cols.is_empty() {
                return Err(invalid!("cannot estimate a batch mask from an empty batch"));
            }
            let n = cols.len() as f64;
            let mut mean = alloc::vec![0.0; tau.dim()];
            for c in cols {
                for (m, &x) in mean.iter_mut().zip(c.iter()) {
                    *m += x / n;
                }
            }
            Ok(SupportMask::new(
                mean.iter().zip(tau.iter()).map(|(&v, &t)| v > t).collect(),
            ))
        }
    }
}

/// How stored supports map onto examples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StoreLayout {
    /// Slot `i` is example `i`.
    Instance { examples: usize },
    /// Slot `b` is shared by the listed examples.
    Batches(Vec<Vec<usize>>),
}

/// Supports for every training example or batch, stored as one
/// `width × slots` bit matrix (column-major) per hidden layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskStore {
    layout: StoreLayout,
    widths: Vec<usize>,
    bits: Vec<Vec<bool>>,
    epoch: usize,
}

impl MaskStore {
    pub fn from_parts(
        layout: StoreLayout,
        widths: Vec<usize>,
        bits: Vec<Vec<bool>>,
        epoch: usize,
    ) -> Result<Self> {
        let store = Self {
            layout,
            widths,
            bits,
            epoch,
        };
        ensure_dim("MaskStore layers", store.widths.len(), store.bits.len())?;
        let slots = store.slots();
        for (w, b) in store.widths.iter().zip(&store.bits) {
            ensure_dim("MaskStore layer bits", w * slots, b.len())?;
        }
        if let StoreLayout::Batches(batches) = &store.layout {
            if batches.iter().any(|b| b.is_empty()) {
                return Err(invalid!("mask store batches must be non-empty"));
            }
        }
        Ok(store)
    }

    pub fn layout(&self) -> &StoreLayout {
        &self.layout
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layer_bits(&self, layer: usize) -> &[bool] {
        &self.bits[layer]
    }

    /// Epoch at which the sweep ran.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn slots(&self) -> usize {
        match &self.layout {
            StoreLayout::Instance { examples } => *examples,
            StoreLayout::Batches(b) => b.len(),
        }
    }

    /// Number of examples the store covers.
    pub fn coverage(&self) -> usize {
        match &self.layout {
            StoreLayout::Instance { examples } => *examples,
            StoreLayout::Batches(b) => b.iter().map(Vec::len).sum(),
        }
    }

    pub fn support(&self, slot: usize) -> MultiLayerSupport {
        MultiLayerSupport::new(
            self.widths
                .iter()
                .zip(&self.bits)
                .map(|(&w, b)| SupportMask::new(b[slot * w..(slot + 1) * w].to_vec()))
                .collect(),
        )
    }

    /// Mean density of each layer's supports.
    pub fn densities(&self) -> Vec<f64> {
        self.bits
            .iter()
            .map(|b| {
                if b.is_empty() {
                    0.0
                } else {
                    b.iter().filter(|&&x| x).count() as f64 / b.len() as f64
                }
            })
            .collect()
    }

    /// Gate matrices for a minibatch whose columns use the given slots.
    pub fn gates_for_slots(&self, slots: &[usize]) -> Vec<Matrix> {
        self.widths
            .iter()
            .zip(&self.bits)
            .map(|(&w, b)| {
                let mut data = Vec::with_capacity(w * slots.len());
                for &s in slots {
                    data.extend(b[s * w..(s + 1) * w].iter().map(|&on| if on { 1.0 } else { 0.0 }));
                }
                Matrix::from_col_major(w, slots.len(), data).expect("binary gates")
            })
            .collect()
    }

    /// Slot holding the support of each example.
    pub fn slot_of_examples(&self) -> Vec<usize> {
        match &self.layout {
            StoreLayout::Instance { examples } => (0..*examples).collect(),
            StoreLayout::Batches(batches) => {
                let n = self.coverage();
                let mut slot = alloc::vec![usize::MAX; n];
                for (b, members) in batches.iter().enumerate() {
                    for &i in members {
                        if i < n {
                            slot[i] = b;
                        }
                    }
                }
                slot
            }
        }
    }
}

const SWEEP_CHUNK: usize = 256;

/// Estimates every hidden-layer support from the current weights.
///
/// Layers are processed in order: the support of layer `ℓ` is estimated from
/// its signal `r = W^(ℓ)z^(ℓ−1) − shift(β^(ℓ))`, then applied (`z = m ⊙ r`)
/// before moving to layer `ℓ+1`. Batch policies partition the examples with a
/// permutation drawn from `seed`.
pub fn sweep_masks(
    net: &NetworkParams,
    inputs: &Matrix,
    policy: &MaskPolicy,
    thresholds: &MaskThresholds,
    seed: u64,
) -> Result<MaskStore> {
    policy.validate()?;
    thresholds.check_against(net)?;
    ensure_dim("sweep_masks input", net.input_dim(), inputs.rows())?;
    let n = inputs.cols();
    let widths = net.hidden_widths();
    let (layout, groups): (StoreLayout, Vec<Vec<usize>>) = match policy.kind {
        MaskKind::Instance => {
            let groups = (0..n)
                .collect::<Vec<_>>()
                .chunks(SWEEP_CHUNK)
                .map(<[usize]>::to_vec)
                .collect();
            (StoreLayout::Instance { examples: n }, groups)
        }
        MaskKind::Batch { batch_size } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
            (StoreLayout::Batches(batches.clone()), batches)
        }
    };
    let slots = match &layout {
        StoreLayout::Instance { examples } => *examples,
        StoreLayout::Batches(b) => b.len(),
    };
    let mut bits: Vec<Vec<bool>> = widths.iter().map(|&w| alloc::vec![false; w * slots]).collect();

    for (g, group) in groups.iter().enumerate() {
        let mut z = crate::data::gather_columns(inputs, group);
        for (l, &width) in widths.iter().enumerate() {
            let mut r = layer_signal(net, l, &z, policy.form);
            let beta = &thresholds.0[l];
            match policy.kind {
                MaskKind::Instance => {
                    for (j, &example) in group.iter().enumerate() {
                        let m = instance_mask(r.column(j), beta, policy)?;
                        m.gate(r.column_mut(j))?;
                        bits[l][example * width..(example + 1) * width].copy_from_slice(m.bits());
                    }
                }
                MaskKind::Batch { .. } => {
                    let cols: Vec<&[f64]> = (0..r.cols()).map(|j| r.column(j)).collect();
                    let m = batch_mask(&cols, beta, policy)?;
                    for j in 0..r.cols() {
                        m.gate(r.column_mut(j))?;
                    }
                    bits[l][g * width..(g + 1) * width].copy_from_slice(m.bits());
                }
            }
            z = r;
        }
    }
    MaskStore::from_parts(layout, widths, bits, 0)
}
