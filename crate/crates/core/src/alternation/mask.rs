//! Closed-form support estimates for the reconstruction objective
//! `Σ_n ‖x⁽ⁿ⁾ − m ⊙ x⁽ⁿ⁾‖² + Σ_i β_i m_i` over binary `m`.
//!
//! The objective separates per coordinate: keeping unit `i` costs `β_i`,
//! dropping it costs `Σ_n (x_i⁽ⁿ⁾)²`. Ties drop the unit.

use alloc::vec::Vec;

use crate::error::{ensure_dim, invalid, Result};
use crate::nonlinearity::{SupportMask, ThresholdVector};

/// Largest dimension the exhaustive oracle will enumerate.
pub const BRUTE_FORCE_MAX_DIM: usize = 12;

fn check_beta(beta: &ThresholdVector) -> Result<()> {
    if let Some(b) = beta.iter().find(|&&b| b < 0.0) {
        return Err(invalid!("mask thresholds must be nonnegative, got {b}"));
    }
    Ok(())
}

/// Per-example support: `m_i = [x_i² > β_i]`.
pub fn estimate_mask_instance(x: &[f64], beta: &ThresholdVector) -> Result<SupportMask> {
    ensure_dim("estimate_mask_instance", beta.dim(), x.len())?;
    check_beta(beta)?;
    Ok(SupportMask::new(
        x.iter().zip(beta.iter()).map(|(&v, &b)| v * v > b).collect(),
    ))
}

/// Support shared by a batch: `m_i = [Σ_n (x_i⁽ⁿ⁾)² > β_i]`.
pub fn estimate_mask_batch<X: AsRef<[f64]>>(xs: &[X], beta: &ThresholdVector) -> Result<SupportMask> {
    let energy = batch_energy(xs, beta.dim())?;
    check_beta(beta)?;
    Ok(SupportMask::new(
        energy.iter().zip(beta.iter()).map(|(&e, &b)| e > b).collect(),
    ))
}

/// Majority vote over the per-example supports of a batch (strictly more
/// than half must keep a unit).
pub fn estimate_mask_majority<X: AsRef<[f64]>>(
    xs: &[X],
    beta: &ThresholdVector,
) -> Result<SupportMask> {
    if xs.is_empty() {
        return Err(invalid!("cannot estimate a batch mask from an empty batch"));
    }
    let mut votes = alloc::vec![0usize; beta.dim()];
    for x in xs {
        let m = estimate_mask_instance(x.as_ref(), beta)?;
        for (v, &on) in votes.iter_mut().zip(m.bits()) {
            *v += on as usize;
        }
    }
    Ok(SupportMask::new(votes.iter().map(|&v| 2 * v > xs.len()).collect()))
}

fn batch_energy<X: AsRef<[f64]>>(xs: &[X], dim: usize) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(invalid!("cannot estimate a batch mask from an empty batch"));
    }
    let mut energy = alloc::vec![0.0; dim];
    for x in xs {
        let x = x.as_ref();
        ensure_dim("estimate_mask_batch", dim, x.len())?;
        for (e, &v) in energy.iter_mut().zip(x) {
            *e += v * v;
        }
    }
    Ok(energy)
}

/// Value of the reconstruction objective for a given mask.
pub fn mask_objective<X: AsRef<[f64]>>(xs: &[X], m: &SupportMask, beta: &ThresholdVector) -> Result<f64> {
    ensure_dim("mask_objective", beta.dim(), m.dim())?;
    let mut total = 0.0;
    for x in xs {
        let x = x.as_ref();
        ensure_dim("mask_objective", m.dim(), x.len())?;
        for (i, &v) in x.iter().enumerate() {
            if !m.get(i) {
                total += v * v;
            }
        }
    }
    for (i, &b) in beta.iter().enumerate() {
        if m.get(i) {
            total += b;
        }
    }
    Ok(total)
}

/// Exhaustive minimiser over all `2^d` masks, `d ≤ 12`.
///
/// Among equal-cost masks the one with the smallest bit pattern wins, which
/// for this separable objective means every tied unit is dropped.
pub fn brute_force_mask_oracle<X: AsRef<[f64]>>(
    xs: &[X],
    beta: &ThresholdVector,
) -> Result<SupportMask> {
    let d = beta.dim();
    if d > BRUTE_FORCE_MAX_DIM {
        return Err(invalid!(
            "brute-force mask search is limited to d ≤ {BRUTE_FORCE_MAX_DIM}, got {d}"
        ));
    }
    if xs.is_empty() {
        return Err(invalid!("brute-force mask search needs at least one example"));
    }
    let mut best = SupportMask::zeros(d);
    let mut best_cost = f64::INFINITY;
    for code in 0u32..(1u32 << d) {
        let m = SupportMask::new((0..d).map(|i| code >> i & 1 == 1).collect());
        let c = mask_objective(xs, &m, beta)?;
        if c < best_cost {
            best_cost = c;
            best = m;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta(v: &[f64]) -> ThresholdVector {
        ThresholdVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn instance_examples() {
        let m = estimate_mask_instance(&[2.0, 0.5], &beta(&[1.0, 1.0])).unwrap();
        assert_eq!(m.bits(), &[true, false]);
        let m = estimate_mask_instance(&[0.0, -0.1, 3.0], &ThresholdVector::zeros(3)).unwrap();
        assert_eq!(m.bits(), &[false, true, true]);
        assert!(estimate_mask_instance(&[1.0], &beta(&[-0.1])).is_err());
    }

    #[test]
    fn batch_examples() {
        let b = beta(&[0.5, 0.5]);
        let single = estimate_mask_batch(&[[2.0, 0.5]], &beta(&[1.0, 1.0])).unwrap();
        assert_eq!(single.bits(), &[true, false]);
        let m = estimate_mask_batch(&[[1.0, 0.0], [0.0, 1.0]], &b).unwrap();
        assert_eq!(m.bits(), &[true, true]);
        let empty: [[f64; 2]; 0] = [];
        assert!(estimate_mask_batch(&empty, &b).is_err());
    }

    #[test]
    fn majority_vote() {
        let b = beta(&[0.5, 0.5]);
        let m = estimate_mask_majority(&[[1.0, 0.0], [1.0, 1.0], [0.0, 0.0]], &b).unwrap();
        assert_eq!(m.bits(), &[true, false]);
    }

    #[test]
    fn oracle_small_cases() {
        let m = brute_force_mask_oracle(&[[2.0]], &beta(&[1.0])).unwrap();
        assert_eq!(m.bits(), &[true]);
        // d = 2 table: each coordinate on both sides of its threshold.
        for &(x0, x1) in &[(2.0, 2.0), (2.0, 0.1), (0.1, 2.0), (0.1, 0.1)] {
            let b = beta(&[1.0, 1.0]);
            assert_eq!(
                brute_force_mask_oracle(&[[x0, x1]], &b).unwrap(),
                estimate_mask_instance(&[x0, x1], &b).unwrap()
            );
        }
        let xs = [[0.4, -1.0, 0.2], [0.3, 0.1, -0.2], [-0.5, 0.2, 0.1]];
        let b = beta(&[0.3, 0.9, 0.2]);
        assert_eq!(
            brute_force_mask_oracle(&xs, &b).unwrap(),
            estimate_mask_batch(&xs, &b).unwrap()
        );
        assert!(brute_force_mask_oracle(&[[0.0; 13]], &ThresholdVector::zeros(13)).is_err());
    }
}
