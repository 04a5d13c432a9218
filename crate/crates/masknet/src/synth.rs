//! Synthetic teacher networks with oracle supports.

use masknet_core::alternation::{MaskStore, StoreLayout};
use masknet_core::data::Examples;
use masknet_core::linalg::Matrix;
use masknet_core::network::{forward_masked, MultiLayerSupport, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AppError, AppResult};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTeacherSpec {
    /// Layer widths, input first.
    pub widths: Vec<usize>,
    /// Bernoulli probability of each hidden unit being active.
    pub density: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SyntheticTeacherSpec {
    pub fn validate(&self) -> AppResult<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(AppError::Config("teacher needs ≥ 2 positive widths".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(AppError::Config(format!("density {} outside [0, 1]", self.density)));
        }
        if self.samples == 0 {
            return Err(AppError::Config("teacher needs at least one sample".into()));
        }
        Ok(())
    }
}

/// A teacher, its data and the per-example supports that produced it.
#[derive(Clone, Debug)]
pub struct Teacher {
    pub net: NetworkParams,
    pub data: Examples,
    pub supports: Vec<MultiLayerSupport>,
}

impl Teacher {
    pub fn mask_store(&self) -> AppResult<MaskStore> {
        let widths = self.net.hidden_widths();
        let bits = (0..widths.len())
            .map(|l| {
                self.supports
                    .iter()
                    .flat_map(|s| s.masks()[l].bits().iter().copied())
                    .collect()
            })
            .collect();
        Ok(MaskStore::from_parts(
            StoreLayout::Instance {
                examples: self.supports.len(),
            },
            widths,
            bits,
            0,
        )?)
    }
}

/// Unit-Gaussian inputs, weights `N(0, 1/fan_in)`, independent Bernoulli
/// supports and labels from the masked forward pass.
pub fn synth_teacher(spec: &SyntheticTeacherSpec) -> AppResult<Teacher> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let net = NetworkParams::random(&NetworkParams::dense_specs(&spec.widths), 1.0, &mut rng)?;
    let (supports, data) = teacher_samples(&net, spec.density, spec.samples, &mut rng)?;
    Ok(Teacher { net, data, supports })
}

/// Fresh inputs and supports for an existing teacher.
pub fn teacher_samples<R: Rng>(
    net: &NetworkParams,
    density: f64,
    samples: usize,
    rng: &mut R,
) -> AppResult<(Vec<MultiLayerSupport>, Examples)> {
    let d = net.input_dim();
    let x = Matrix::from_fn(d, samples, |_, _| rng.sample(StandardNormal));
    let mut supports = Vec::with_capacity(samples);
    let mut y = Vec::with_capacity(samples * net.output_dim());
    for n in 0..samples {
        let s = MultiLayerSupport::new(
            net.hidden_widths()
                .iter()
                .map(|&w| masknet_core::SupportMask::new((0..w).map(|_| rng.random_bool(density)).collect()))
                .collect(),
        );
        y.extend_from_slice(&forward_masked(net, x.column(n), &s)?);
        supports.push(s);
    }
    let targets = Matrix::from_col_major(net.output_dim(), samples, y)?;
    Ok((supports, Examples::new(x, targets)?))
}
