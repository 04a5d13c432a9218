//! Rank-one SVD by power iteration and extreme singular values by Jacobi
//! diagonalisation of the Gram matrix.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, norm, Matrix, Vector};
use crate::error::{Error, Result};

/// Power-iteration settings for [`rank_one_svd_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    /// Stop once the right singular vector moves less than this (Euclidean).
    pub tol: f64,
    pub max_iters: usize,
    /// Seed for the random starting vector.
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 10_000,
            seed: 0x5eed_0f_5bd,
        }
    }
}

/// Leading singular triple `σ·u·wᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneSvd {
    pub sigma: f64,
    pub u: Vector,
    pub w: Vector,
    pub iterations: usize,
}

/// Best rank-one approximation of `v` with default settings.
///
/// When the top singular value is tied the returned pair is one valid choice
/// among many; which one depends on the starting vector.
pub fn rank_one_svd(v: &Matrix) -> Result<RankOneSvd> {
    rank_one_svd_with(v, PowerIteration::default())
}

pub fn rank_one_svd_with(v: &Matrix, opts: PowerIteration) -> Result<RankOneSvd> {
    if v.is_empty() || v.as_slice().iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroMatrix("rank_one_svd input"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w: Vec<f64> = (0..v.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut w);

    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let vw = v.matvec(&w)?;
        let mut next = v.tr_matvec(&vw)?.into_vec();
        let lambda = norm(&next);
        if lambda == 0.0 {
            // Start landed in the null space; perturb deterministically.
            w = (0..v.cols()).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut w);
            continue;
        }
        // Rayleigh residual ‖VᵀVw − λw‖ before normalising.
        let rq = dot(&next, &w);
        residual = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - rq * b) * (a - rq * b))
            .sum::<f64>();
        residual = libm::sqrt(residual);
        next.iter_mut().for_each(|x| *x /= lambda);
        let change = libm::sqrt(
            next.iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        );
        w = next;
        if change < opts.tol {
            let vw = v.matvec(&w)?;
            let sigma = vw.norm();
            let u = vw.scaled(1.0 / sigma);
            return Ok(RankOneSvd {
                sigma,
                u,
                w: Vector::from(w),
                iterations: it,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "rank_one_svd power iteration",
        iterations: opts.max_iters,
        residual,
    })
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Smallest and largest singular value of a matrix viewed as an operator on
/// its full column space: `σ_min² = λ_min(UᵀU)`, so a wide or column-deficient
/// matrix reports `σ_min = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularBounds {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn singular_bounds(u: &Matrix) -> Result<SingularBounds> {
    if u.is_empty() {
        return Err(Error::InvalidInput("singular_bounds of an empty matrix".into()));
    }
    // Structurally zero columns contribute nothing to σ_max and pin σ_min at 0.
    let active: Vec<usize> = (0..u.cols())
        .filter(|&j| u.column(j).iter().any(|&x| x != 0.0))
        .collect();
    if active.is_empty() {
        return Ok(SingularBounds {
            sigma_min: 0.0,
            sigma_max: 0.0,
        });
    }
    let reduced = if active.len() == u.cols() {
        None
    } else {
        let mut data = Vec::with_capacity(u.rows() * active.len());
        for &j in &active {
            data.extend_from_slice(u.column(j));
        }
        Some(Matrix::from_col_major(u.rows(), active.len(), data)?)
    };
    let m = reduced.as_ref().unwrap_or(u);
    let eig = symmetric_eigenvalues(&m.gram())?;
    let lmax = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let full_rank_possible = active.len() == u.cols() && u.rows() >= u.cols();
    Ok(SingularBounds {
        sigma_min: if full_rank_possible {
            libm::sqrt(lmin.max(0.0))
        } else {
            0.0
        },
        sigma_max: libm::sqrt(lmax.max(0.0)),
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let (vals, _) = jacobi(a, false)?;
    Ok(vals)
}

/// Eigen-decomposition `a = Q·diag(λ)·Qᵀ`, eigenvalues ascending, columns of
/// `Q` the matching eigenvectors.
pub(crate) fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (vals, q) = jacobi(a, true)?;
    Ok((vals, q.expect("eigenvectors requested")))
}

const JACOBI_MAX_SWEEPS: usize = 100;

fn jacobi(a: &Matrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "symmetric_eigenvalues (square input)",
            expected: n,
            found: a.cols(),
        });
    }
    let mut m = a.clone();
    let mut q = want_vectors.then(|| Matrix::identity(n));
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok((alloc::vec![0.0; n], q));
    }
    let target = 1e-15 * scale;
    let mut off = off_diagonal_norm(&m);
    let mut sweeps = 0;
    while off > target {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "Jacobi eigenvalue sweep",
                iterations: sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[(p, r)];
                if libm::fabs(apr) < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (2.0 * apr);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut m, p, r, c, s);
                if let Some(q) = q.as_mut() {
                    for k in 0..n {
                        let qkp = q[(k, p)];
                        let qkr = q[(k, r)];
                        q[(k, p)] = c * qkp - s * qkr;
                        q[(k, r)] = s * qkp + c * qkr;
                    }
                }
            }
        }
        off = off_diagonal_norm(&m);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let vals = order.iter().map(|&i| m[(i, i)]).collect();
    let q = q.map(|q| Matrix::from_fn(n, n, |i, j| q[(i, order[j])]));
    Ok((vals, q))
}

/// Applies the rotation `Jᵀ·M·J` in the (p, r) plane.
fn rotate(m: &mut Matrix, p: usize, r: usize, c: f64, s: f64) {
    let n = m.rows();
    let app = m[(p, p)];
    let arr = m[(r, r)];
    let apr = m[(p, r)];
    for k in 0..n {
        if k == p || k == r {
            continue;
        }
        let akp = m[(k, p)];
        let akr = m[(k, r)];
        let new_kp = c * akp - s * akr;
        let new_kr = s * akp + c * akr;
        m[(k, p)] = new_kp;
        m[(p, k)] = new_kp;
        m[(k, r)] = new_kr;
        m[(r, k)] = new_kr;
    }
    m[(p, p)] = c * c * app - 2.0 * s * c * apr + s * s * arr;
    m[(r, r)] = s * s * app + 2.0 * s * c * apr + c * c * arr;
    m[(p, r)] = 0.0;
    m[(r, p)] = 0.0;
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    libm::sqrt(s)
}
