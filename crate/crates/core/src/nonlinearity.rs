//! Scalar nonlinearities, binary supports, and brute-force proximal oracles.
//!
//! ReLU is the proximal map of a nonnegative `ℓ1` penalty. Positive
//! hard-thresholding keeps `q` untouched above the threshold, which is what
//! lets a unit be rewritten as `m·q` with a binary `m`. The `ℓ0` oracle here
//! shows that the exact minimiser of the `ℓ0`-penalised problem thresholds at
//! `√(2β)` rather than `β`; both thresholds are available to the mask sweep.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{ensure_dim, invalid, Error, Result};

/// `max(q − β, 0)`.
#[inline]
pub fn relu(q: f64, beta: f64) -> f64 {
    if q > beta {
        q - beta
    } else {
        0.0
    }
}

/// Positive hard-thresholding: `q` if `q > β`, else `0`.
#[inline]
pub fn pos_hard_threshold(q: f64, beta: f64) -> f64 {
    if q > beta {
        q
    } else {
        0.0
    }
}

/// The runtime nonlinearity of a hidden layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    /// `max(q − β, 0)`.
    Relu,
    /// Positive hard-thresholding at `β`.
    Pht,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, q: f64, beta: f64) -> f64 {
        match self {
            Nonlinearity::Relu => relu(q, beta),
            Nonlinearity::Pht => pos_hard_threshold(q, beta),
        }
    }

    /// Offset subtracted from `q` on the active set: `β` for ReLU, `0` for
    /// hard-thresholding.
    #[inline]
    pub fn shift(self, beta: f64) -> f64 {
        match self {
            Nonlinearity::Relu => beta,
            Nonlinearity::Pht => 0.0,
        }
    }
}

/// Per-unit thresholds `β` of one layer.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("ThresholdVector"));
        }
        Ok(Self(beta))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn constant(dim: usize, beta: f64) -> Result<Self> {
        Self::new(alloc::vec![beta; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ThresholdVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Binary support of one layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SupportMask(Vec<bool>);

impl SupportMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn ones(dim: usize) -> Self {
        Self(alloc::vec![true; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![false; dim])
    }

    /// Parses `0`/`1` values; anything else is rejected.
    pub fn from_binary(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                v if v == 0.0 => Ok(false),
                v if v == 1.0 => Ok(true),
                v => Err(invalid!("support masks are binary, got {v}")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Fraction of active units; `0` for an empty mask.
    pub fn density(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.count_ones() as f64 / self.0.len() as f64
        }
    }

    /// `0.0`/`1.0` view, i.e. the diagonal of `diag(m)`.
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// In-place `v ← m ⊙ v`.
    pub fn gate(&self, v: &mut [f64]) -> Result<()> {
        ensure_dim("SupportMask::gate", self.0.len(), v.len())?;
        for (x, &on) in v.iter_mut().zip(&self.0) {
            if !on {
                *x = 0.0;
            }
        }
        Ok(())
    }
}

/// Indicator support `m_i = [q_i > β_i]` of the hard-thresholded layer.
pub fn support_from_preactivation(q: &[f64], beta: &ThresholdVector) -> Result<SupportMask> {
    ensure_dim("support_from_preactivation", beta.dim(), q.len())?;
    Ok(SupportMask(
        q.iter().zip(beta.iter()).map(|(&qi, &bi)| qi > bi).collect(),
    ))
}

/// Grid minimiser of `(q − p)² + 2β·|p|` over `p ∈ {0} ∪ {k·step : k ≥ 1}`.
///
/// The grid spans `(0, |q| + step]`; for `β ≥ 0` the cost is increasing past
/// `q`, so the true minimiser always lies in range.
pub fn l1_prox_oracle(q: f64, beta: f64, grid_step: f64) -> f64 {
    assert!(grid_step > 0.0, "grid_step must be positive");
    let cost = |p: f64| (q - p) * (q - p) + 2.0 * beta * libm::fabs(p);
    let mut best = 0.0;
    let mut best_cost = cost(0.0);
    let steps = libm::ceil((libm::fabs(q) + grid_step) / grid_step) as usize;
    for k in 1..=steps {
        let p = k as f64 * grid_step;
        let c = cost(p);
        if c < best_cost {
            best = p;
            best_cost = c;
        }
    }
    best
}

/// Exact minimiser of `(q − p)² + 2β·‖p‖₀` over `p > 0` or `p = 0`.
///
/// Only two candidates can win: `p = 0` with cost `q²`, and `p = q` (when
/// `q > 0`) with cost `2β`. Ties resolve to zero.
pub fn l0_prox_oracle(q: f64, beta: f64) -> f64 {
    let zero_cost = q * q;
    let keep_cost = 2.0 * beta;
    if q > 0.0 && keep_cost < zero_cost {
        q
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        assert_eq!(relu(3.0, 1.0), 2.0);
        assert_eq!(relu(0.5, 1.0), 0.0);
        assert_eq!(relu(-2.0, 0.0), 0.0);
    }

    #[test]
    fn pht_examples() {
        assert_eq!(pos_hard_threshold(3.0, 1.0), 3.0);
        assert_eq!(pos_hard_threshold(1.0, 1.0), 0.0);
        assert_eq!(pos_hard_threshold(-2.0, 1.0), 0.0);
    }

    #[test]
    fn support_examples() {
        let beta = ThresholdVector::constant(3, 1.0).unwrap();
        let m = support_from_preactivation(&[2.0, -1.0, 0.5], &beta).unwrap();
        assert_eq!(m.bits(), &[true, false, false]);
        let m = support_from_preactivation(&[1.0, 1.0, 1.0], &beta).unwrap();
        assert_eq!(m.count_ones(), 0);
        assert!(matches!(
            support_from_preactivation(&[1.0], &beta),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn l1_oracle_examples() {
        assert!((l1_prox_oracle(3.0, 1.0, 1e-4) - 2.0).abs() <= 1e-4);
        assert_eq!(l1_prox_oracle(0.5, 1.0, 1e-4), 0.0);
        assert!((l1_prox_oracle(1.7, 0.0, 1e-4) - 1.7).abs() <= 1e-4);
    }

    #[test]
    fn l0_oracle_examples() {
        assert_eq!(l0_prox_oracle(3.0, 1.0), 3.0);
        assert_eq!(l0_prox_oracle(1.2, 1.0), 0.0);
        assert_eq!(l0_prox_oracle(-1.0, 1.0), 0.0);
        // Hard-thresholding at β keeps 1.2; the ℓ0 minimiser does not.
        assert_eq!(pos_hard_threshold(1.2, 1.0), 1.2);
    }

    #[test]
    fn binary_parsing() {
        assert_eq!(
            SupportMask::from_binary(&[0.0, 1.0]).unwrap().bits(),
            &[false, true]
        );
        assert!(SupportMask::from_binary(&[0.5]).is_err());
    }

    #[test]
    fn gate_zeroes_inactive() {
        let m = SupportMask::new(alloc::vec![true, false, true]);
        let mut v = [1.0, 2.0, 3.0];
        m.gate(&mut v).unwrap();
        assert_eq!(v, [1.0, 0.0, 3.0]);
        assert_eq!(m.to_f64(), alloc::vec![1.0, 0.0, 1.0]);
        assert!((m.density() - 2.0 / 3.0).abs() < 1e-15);
    }
}
