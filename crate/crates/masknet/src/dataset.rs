//! Dataset subsetting.

use masknet_core::data::Examples;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{AppError, AppResult};

/// Deterministic class-balanced subset of `limit` examples.
///
/// Classes take turns contributing one example at a time (from a seeded
/// shuffle of each class), so counts differ by at most one unless a class
/// runs out. The result is ordered by original index.
pub fn balanced_subset(data: &Examples, limit: usize, seed: u64) -> AppResult<Examples> {
    if limit > data.len() {
        return Err(AppError::Config(format!(
            "limit {limit} exceeds dataset size {}",
            data.len()
        )));
    }
    let classes = data.target_dim();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for i in 0..data.len() {
        by_class[data.label(i)].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in &mut by_class {
        c.shuffle(&mut rng);
    }
    let mut picked = Vec::with_capacity(limit);
    let mut round = 0;
    while picked.len() < limit {
        for c in &by_class {
            if picked.len() == limit {
                break;
            }
            if let Some(&i) = c.get(round) {
                picked.push(i);
            }
        }
        round += 1;
    }
    picked.sort_unstable();
    Ok(data.subset(&picked))
}
