#![allow(dead_code)]

use masknet_core::linalg::Matrix;
use masknet_core::network::{Layer, MultiLayerSupport, NetworkParams};
use masknet_core::{SupportMask, ThresholdVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Dense net with Gaussian weights and hidden thresholds drawn from `beta`.
pub fn random_net(rng: &mut impl Rng, widths: &[usize], beta: (f64, f64)) -> NetworkParams {
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let weight = gaussian_matrix(rng, w[1], w[0]);
            let b = if l + 2 == widths.len() {
                ThresholdVector::zeros(w[1])
            } else {
                ThresholdVector::new((0..w[1]).map(|_| rng.random_range(beta.0..=beta.1)).collect())
                    .unwrap()
            };
            Layer::dense(weight, b).unwrap()
        })
        .collect();
    NetworkParams::new(layers).unwrap()
}

pub fn random_support(rng: &mut impl Rng, net: &NetworkParams, density: f64) -> MultiLayerSupport {
    MultiLayerSupport::new(
        net.hidden_widths()
            .iter()
            .map(|&w| SupportMask::new((0..w).map(|_| rng.random_bool(density)).collect()))
            .collect(),
    )
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
