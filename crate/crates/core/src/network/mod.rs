//! Layered network with an activation forward pass and a support-gated
//! (masked) forward pass, their backward passes, and the training losses.
//!
//! Hidden layer `ℓ` computes `q = W·z`, then either the nonlinearity
//! (`relu(q − β)` or hard-thresholding at `β`) or, in masked mode,
//! `m ⊙ (q − shift)` with a fixed binary support `m`. The last layer is
//! always linear with `β = 0`.
//!
//! Convolutional layers are stored as their kernel and materialised as a
//! banded Toeplitz matrix, so every layer is an explicit matrix.

mod backward;
mod forward;
mod loss;

pub use backward::{backward_activation, backward_batch, backward_masked, Gradients};
pub use forward::{
    forward_activation, forward_batch, forward_masked, forward_masked_as, BatchTrace,
    ForwardTrace, Gating,
};
pub use loss::{argmax, loss, loss_batch, LossKind};

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_dim, invalid, Result};
use crate::linalg::{ConvGeometry, Matrix};
use crate::nonlinearity::{SupportMask, ThresholdVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv(ConvGeometry),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl LayerSpec {
    pub fn dense(input_dim: usize, output_dim: usize) -> Self {
        Self {
            kind: LayerKind::Dense,
            input_dim,
            output_dim,
        }
    }

    pub fn conv(geometry: ConvGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(Self {
            kind: LayerKind::Conv(geometry),
            input_dim: geometry.input_dim(),
            output_dim: geometry.output_dim(),
        })
    }

    /// Number of free parameters in the weight (kernel entries for conv).
    pub fn parameter_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.input_dim * self.output_dim,
            LayerKind::Conv(g) => {
                let (r, c) = g.kernel_shape();
                r * c
            }
        }
    }

    /// Inputs feeding each output unit.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.input_dim,
            LayerKind::Conv(g) => g.channels_in * g.kernel_height * g.kernel_width,
        }
    }

    /// Shape of the free parameter block: the weight for dense layers, the
    /// kernel for conv layers.
    pub fn parameter_shape(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Dense => (self.output_dim, self.input_dim),
            LayerKind::Conv(g) => g.kernel_shape(),
        }
    }
}

/// One affine layer: materialised weight, optional conv kernel, thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    weight: Matrix,
    kernel: Option<Matrix>,
    beta: ThresholdVector,
}

impl Layer {
    pub fn dense(weight: Matrix, beta: ThresholdVector) -> Result<Self> {
        ensure_dim("Layer::dense beta", weight.rows(), beta.dim())?;
        if !weight.is_finite() {
            return Err(crate::Error::NonFinite("Layer::dense weight"));
        }
        Ok(Self {
            spec: LayerSpec::dense(weight.cols(), weight.rows()),
            weight,
            kernel: None,
            beta,
        })
    }

    pub fn conv(geometry: ConvGeometry, kernel: Matrix, beta: ThresholdVector) -> Result<Self> {
        let spec = LayerSpec::conv(geometry)?;
        ensure_dim("Layer::conv beta", spec.output_dim, beta.dim())?;
        let weight = geometry.toeplitz(&kernel)?;
        Ok(Self {
            spec,
            weight,
            kernel: Some(kernel),
            beta,
        })
    }

    /// Builds a layer of the given spec from its free parameter block.
    pub fn from_parameters(spec: LayerSpec, params: Matrix, beta: ThresholdVector) -> Result<Self> {
        match spec.kind {
            LayerKind::Dense => {
                ensure_dim("Layer rows", spec.output_dim, params.rows())?;
                ensure_dim("Layer cols", spec.input_dim, params.cols())?;
                Self::dense(params, beta)
            }
            LayerKind::Conv(g) => Self::conv(g, params, beta),
        }
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    /// Materialised weight matrix `W`.
    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn kernel(&self) -> Option<&Matrix> {
        self.kernel.as_ref()
    }

    /// The free parameters: `W` for dense layers, the kernel for conv layers.
    pub fn parameters(&self) -> &Matrix {
        self.kernel.as_ref().unwrap_or(&self.weight)
    }

    pub fn beta(&self) -> &ThresholdVector {
        &self.beta
    }

    pub fn set_beta(&mut self, beta: ThresholdVector) -> Result<()> {
        ensure_dim("Layer::set_beta", self.spec.output_dim, beta.dim())?;
        self.beta = beta;
        Ok(())
    }

    pub(crate) fn beta_mut(&mut self) -> &mut [f64] {
        self.beta.as_mut_slice()
    }

    /// Folds a dense-weight gradient onto the free parameters.
    pub fn parameter_gradient(&self, dense_grad: &Matrix) -> Result<Matrix> {
        match self.spec.kind {
            LayerKind::Dense => Ok(dense_grad.clone()),
            LayerKind::Conv(geom) => geom.kernel_gradient(dense_grad),
        }
    }

    /// Adds `delta` to the free parameters.
    pub(crate) fn add_to_parameters(&mut self, delta: &Matrix, scale: f64) -> Result<()> {
        let target = match self.kernel.as_mut() {
            Some(k) => k,
            None => &mut self.weight,
        };
        ensure_dim("Layer::add_to_parameters", target.len(), delta.len())?;
        for (p, d) in target.as_mut_slice().iter_mut().zip(delta.as_slice()) {
            *p += scale * d;
        }
        if let LayerKind::Conv(geom) = self.spec.kind {
            self.weight = geom.toeplitz(self.kernel.as_ref().expect("conv kernel"))?;
        }
        Ok(())
    }
}

/// Weights and thresholds of an `L`-layer network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

impl NetworkParams {
    /// Validates chaining and the linear-last-layer convention (`β^(L) = 0`).
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid!("a network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            ensure_dim(
                "layer chaining",
                pair[0].spec.output_dim,
                pair[1].spec.input_dim,
            )?;
        }
        let last = layers.last().expect("non-empty");
        if last.beta.iter().any(|&b| b != 0.0) {
            return Err(invalid!("the output layer carries no threshold (β^(L) must be 0)"));
        }
        Ok(Self { layers })
    }

    /// Random weights with entries `N(0, gain²/fan_in)` and thresholds zero.
    pub fn random<R: Rng + ?Sized>(specs: &[LayerSpec], gain: f64, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let (r, c) = spec.parameter_shape();
            let std = gain / libm::sqrt(spec.fan_in() as f64);
            let params = Matrix::from_fn(r, c, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            });
            layers.push(Layer::from_parameters(
                *spec,
                params,
                ThresholdVector::zeros(spec.output_dim),
            )?);
        }
        Self::new(layers)
    }

    /// Dense network with the given widths `[d0, d1, …, dL]`.
    pub fn dense_specs(widths: &[usize]) -> Vec<LayerSpec> {
        widths
            .windows(2)
            .map(|w| LayerSpec::dense(w[0], w[1]))
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &Layer {
        &self.layers[i]
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    /// Widths of the gated (hidden) layers `1..L−1`.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.spec.output_dim)
            .collect()
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    /// Sets the thresholds of hidden layer `layer`.
    pub fn set_beta(&mut self, layer: usize, beta: ThresholdVector) -> Result<()> {
        if layer + 1 >= self.layers.len() {
            return Err(invalid!("the output layer threshold is fixed at zero"));
        }
        self.layers[layer].set_beta(beta)
    }

    /// Replaces the free parameters of layer `layer`.
    pub fn set_parameters(&mut self, layer: usize, params: Matrix) -> Result<()> {
        let l = &self.layers[layer];
        let rebuilt = Layer::from_parameters(l.spec, params, l.beta.clone())?;
        self.layers[layer] = rebuilt;
        Ok(())
    }
}

/// Per-layer binary supports for layers `1..L−1`; the output layer is
/// implicitly all-ones.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MultiLayerSupport {
    masks: Vec<SupportMask>,
}

impl MultiLayerSupport {
    pub fn new(masks: Vec<SupportMask>) -> Self {
        Self { masks }
    }

    pub fn all_ones(net: &NetworkParams) -> Self {
        Self::new(net.hidden_widths().into_iter().map(SupportMask::ones).collect())
    }

    pub fn masks(&self) -> &[SupportMask] {
        &self.masks
    }

    pub fn masks_mut(&mut self) -> &mut [SupportMask] {
        &mut self.masks
    }

    pub fn into_masks(self) -> Vec<SupportMask> {
        self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn check_against(&self, net: &NetworkParams) -> Result<()> {
        let widths = net.hidden_widths();
        ensure_dim("support depth", widths.len(), self.masks.len())?;
        for (m, w) in self.masks.iter().zip(widths) {
            ensure_dim("support width", w, m.dim())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_chains_and_output_threshold() {
        let l1 = Layer::dense(Matrix::identity(2), ThresholdVector::zeros(2)).unwrap();
        let l2 = Layer::dense(Matrix::zeros(1, 3), ThresholdVector::zeros(1)).unwrap();
        assert!(NetworkParams::new(alloc::vec![l1.clone(), l2]).is_err());
        let biased = Layer::dense(Matrix::identity(2), ThresholdVector::constant(2, 0.5).unwrap())
            .unwrap();
        assert!(NetworkParams::new(alloc::vec![l1, biased]).is_err());
        assert!(NetworkParams::new(alloc::vec![]).is_err());
    }

    #[test]
    fn random_conv_layer_keeps_toeplitz_structure() {
        let geom = ConvGeometry {
            in_height: 5,
            in_width: 5,
            channels_in: 1,
            channels_out: 2,
            kernel_height: 3,
            kernel_width: 3,
            stride: 2,
        };
        let specs = [
            LayerSpec::conv(geom).unwrap(),
            LayerSpec::dense(geom.output_dim(), 3),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = NetworkParams::random(&specs, 1.0, &mut rng).unwrap();
        let layer = &net.layers()[0];
        let k = layer.kernel().unwrap().clone();
        assert_eq!(layer.weight(), &geom.toeplitz(&k).unwrap());

        let g = Matrix::from_fn(geom.output_dim(), geom.input_dim(), |i, j| (i + j) as f64);
        let pg = net.layers()[0].parameter_gradient(&g).unwrap();
        net.layers_mut()[0].add_to_parameters(&pg, -0.1).unwrap();
        let layer = &net.layers()[0];
        assert_eq!(layer.weight(), &geom.toeplitz(layer.kernel().unwrap()).unwrap());
        assert_ne!(layer.kernel().unwrap(), &k);
    }
}
