//! Two-layer weight recovery from known supports.
//!
//! With supports fixed, a two-layer output is `U·(vec(W1) ⊗ vec(W2))`, i.e.
//! linear sensing of the rank-one matrix `V = vec(W1)·vec(W2)ᵀ` through the
//! lifting `𝔉(V) = vec(Vᵀ)`. Recovery runs gradient descent on the factors
//! `(a, b)` of `V = a·bᵀ` and splits the result with a rank-one SVD.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Examples;
use crate::decoupling::{assemble_lifted_dataset, LiftedDataset};
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::linalg::{
    dot, norm, rank_one_svd, singular_bounds, symmetric_eigen, unvectorize, Matrix, Vector,
};
use crate::network::{LayerSpec, MultiLayerSupport};

/// `𝔉(V) = vec(Vᵀ)`, so that `𝔉(p·qᵀ) = p ⊗ q`.
pub fn lifting(v: &Matrix) -> Vector {
    Vector::from(v.transpose().into_vec())
}

/// Outcome of the restricted-isometry test
/// `(9/10 + ε)·m ≤ σ_min² ≤ σ_max² ≤ (11/10 − ε)·m` for some `ε ∈ (0, 1/10)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RipReport {
    pub sigma_min_sq: f64,
    pub sigma_max_sq: f64,
    pub m: usize,
    /// Supremum of the feasible `ε`, present when satisfied.
    pub epsilon_max: Option<f64>,
    pub satisfied: bool,
}

pub fn rip_check(ds: &LiftedDataset) -> Result<RipReport> {
    if ds.m_total == 0 {
        return Err(invalid!("rip_check on an empty dataset"));
    }
    let b = singular_bounds(&ds.u_stacked)?;
    let m = ds.m_total as f64;
    let (lo, hi) = (b.sigma_min * b.sigma_min, b.sigma_max * b.sigma_max);
    let eps = (lo / m - 0.9).min(1.1 - hi / m).min(0.1);
    let satisfied = eps > 0.0;
    Ok(RipReport {
        sigma_min_sq: lo,
        sigma_max_sq: hi,
        m: ds.m_total,
        epsilon_max: satisfied.then_some(eps),
        satisfied,
    })
}

/// Rescales `U` and `y` jointly so that `(σ_min² + σ_max²)/2 = m`. The
/// least-squares minimiser is unchanged; the returned factor is the scale.
pub fn normalize_for_rip(ds: &LiftedDataset) -> Result<(LiftedDataset, f64)> {
    let b = singular_bounds(&ds.u_stacked)?;
    let mid = (b.sigma_min * b.sigma_min + b.sigma_max * b.sigma_max) / 2.0;
    if mid == 0.0 {
        return Err(Error::ZeroMatrix("normalize_for_rip: stacked U"));
    }
    let scale = libm::sqrt(ds.m_total as f64 / mid);
    Ok((ds.scaled(scale), scale))
}

/// Stacked data plus the shapes of the two weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneProblem {
    pub ds: LiftedDataset,
    pub shape1: (usize, usize),
    pub shape2: (usize, usize),
}

impl RankOneProblem {
    pub fn new(ds: LiftedDataset, shape1: (usize, usize), shape2: (usize, usize)) -> Result<Self> {
        let (n1, n2) = (shape1.0 * shape1.1, shape2.0 * shape2.1);
        ensure_dim("RankOneProblem: lifted columns", n1 * n2, ds.u_stacked.cols())?;
        Ok(Self { ds, shape1, shape2 })
    }

    fn dims(&self) -> (usize, usize) {
        (self.shape1.0 * self.shape1.1, self.shape2.0 * self.shape2.1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DescentInit {
    Random(u64),
    /// Rank-one SVD of the least-norm solution of `U·𝔉(V) = y`, refined
    /// into a rank-one fit of the entries the data determines.
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentConfig {
    pub init: DescentInit,
    /// Step on the lifted variable; `None` picks `1/(2σ_max²)`.
    pub step: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    /// Halve the step until the objective decreases sufficiently, then let
    /// it double back towards the base step. Without it a fixed step is used and a run of 50
    /// increases aborts.
    pub backtracking: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            init: DescentInit::Spectral,
            step: None,
            tol: 1e-10,
            max_iters: 50_000,
            backtracking: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentResult {
    pub a: Vector,
    pub b: Vector,
    /// Objective `‖y − U·(a ⊗ b)‖²` before the first and after every step.
    pub history: Vec<f64>,
    pub converged: bool,
}

const DIVERGENCE_RUN: usize = 50;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Below this fraction of `‖y‖²` the Gram-form objective is rounding noise.
const OBJECTIVE_FLOOR: f64 = 1e-26;

/// Quadratic `f(x) = xᵀGx − 2cᵀx + yᵀy` restricted to the columns of `U`
/// that are not identically zero, with `x_k = a[p_k]·b[q_k]`.
struct Reduced {
    pairs: Vec<(usize, usize)>,
    gram: Matrix,
    c: Vec<f64>,
    yy: f64,
}

impl Reduced {
    fn new(p: &RankOneProblem) -> Result<Self> {
        let (_, nb) = p.dims();
        let u = &p.ds.u_stacked;
        let active: Vec<usize> = (0..u.cols())
            .filter(|&j| u.column(j).iter().any(|&v| v != 0.0))
            .collect();
        let mut data = Vec::with_capacity(u.rows() * active.len());
        for &j in &active {
            data.extend_from_slice(u.column(j));
        }
        let ua = Matrix::from_col_major(u.rows(), active.len(), data)?;
        let y = p.ds.y_stacked.as_ref();
        Ok(Self {
            pairs: active.iter().map(|&j| (j / nb, j % nb)).collect(),
            gram: ua.gram(),
            c: ua.tr_matvec(y)?.into_vec(),
            yy: dot(y, y),
        })
    }

    fn lifted(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.pairs.iter().map(|&(p, q)| a[p] * b[q]).collect()
    }

    /// Objective and `∇_x f = 2(Gx − c)`.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let gx = self.gram.matvec(x)?;
        let f = (dot(x, &gx) - 2.0 * dot(&self.c, x) + self.yy).max(0.0);
        let g = gx.iter().zip(&self.c).map(|(a, c)| 2.0 * (a - c)).collect();
        Ok((f, g))
    }

    fn factor_gradients(&self, g: &[f64], a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut ga = alloc::vec![0.0; a.len()];
        let mut gb = alloc::vec![0.0; b.len()];
        for (&(p, q), &gk) in self.pairs.iter().zip(g) {
            ga[p] += gk * b[q];
            gb[q] += gk * a[p];
        }
        (ga, gb)
    }

    fn lambda_max(&self) -> Result<f64> {
        if self.pairs.is_empty() {
            return Ok(0.0);
        }
        Ok(rank_one_svd(&self.gram).map(|s| s.sigma).unwrap_or(0.0))
    }

    /// Least-norm `x` by eigen-decomposition of `G`, scattered back into the
    /// `n_a × n_b` matrix `V`.
    fn least_norm(&self, na: usize, nb: usize) -> Result<Matrix> {
        let mut v = Matrix::zeros(na, nb);
        if self.pairs.is_empty() {
            return Ok(v);
        }
        let (vals, q) = symmetric_eigen(&self.gram)?;
        let top = vals.iter().copied().fold(0.0, f64::max);
        let cutoff = 1e-12 * top;
        let qtc = q.tr_matvec(&self.c)?;
        let mut x = alloc::vec![0.0; self.pairs.len()];
        for (k, (&lam, &proj)) in vals.iter().zip(qtc.iter()).enumerate() {
            if lam > cutoff {
                let coef = proj / lam;
                for (xi, &qi) in x.iter_mut().zip(q.column(k)) {
                    *xi += coef * qi;
                }
            }
        }
        for (&(p, qq), &xk) in self.pairs.iter().zip(&x) {
            v.as_mut_slice()[p + qq * na] = xk;
        }
        Ok(v)
    }
}

const COMPLETION_SWEEPS: usize = 500;

impl Reduced {
    /// Rank-one fit `a·bᵀ` of `v` on the entries the data observes, by
    /// alternating least squares from `(a, b)`.
    ///
    /// Entries of `V` whose lifted column is identically zero carry no
    /// information and are zero in the least-norm solution; fitting them
    /// would pull the factors towards whichever observed block is largest.
    fn complete_rank_one(&self, v: &Matrix, mut a: Vec<f64>, mut b: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let na = a.len();
        let at = |p: usize, q: usize| v.as_slice()[p + q * na];
        // Keep every coordinate alive so no observed block starts at zero.
        let lift = 0.1 * norm(&b) / libm::sqrt(b.len() as f64);
        b.iter_mut().for_each(|x| *x += lift);
        let mut prev = f64::INFINITY;
        for _ in 0..COMPLETION_SWEEPS {
            let (mut num, mut den) = (alloc::vec![0.0; na], alloc::vec![0.0; na]);
            for &(p, q) in &self.pairs {
                num[p] += at(p, q) * b[q];
                den[p] += b[q] * b[q];
            }
            for p in 0..na {
                a[p] = if den[p] > 0.0 { num[p] / den[p] } else { 0.0 };
            }
            let (mut num, mut den) = (alloc::vec![0.0; b.len()], alloc::vec![0.0; b.len()]);
            for &(p, q) in &self.pairs {
                num[q] += at(p, q) * a[p];
                den[q] += a[p] * a[p];
            }
            for q in 0..b.len() {
                b[q] = if den[q] > 0.0 { num[q] / den[q] } else { 0.0 };
            }
            let misfit: f64 = self
                .pairs
                .iter()
                .map(|&(p, q)| {
                    let d = at(p, q) - a[p] * b[q];
                    d * d
                })
                .sum();
            if prev - misfit <= 1e-15 * prev {
                break;
            }
            prev = misfit;
        }
        (a, b)
    }
}

fn rebalance(a: &mut [f64], b: &mut [f64]) {
    let (na, nb) = (norm(a), norm(b));
    if na > 0.0 && nb > 0.0 {
        let s = libm::sqrt(nb / na);
        a.iter_mut().for_each(|v| *v *= s);
        b.iter_mut().for_each(|v| *v /= s);
    }
}

fn initial_factors(
    p: &RankOneProblem,
    r: &Reduced,
    init: DescentInit,
    lmax: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (na, nb) = p.dims();
    match init {
        DescentInit::Spectral => {
            let v = r.least_norm(na, nb)?;
            match rank_one_svd(&v) {
                Ok(s) => {
                    let root = libm::sqrt(s.sigma);
                    let a = s.u.scaled(root).into_vec();
                    let b = s.w.scaled(root).into_vec();
                    Ok(r.complete_rank_one(&v, a, b))
                }
                Err(Error::ZeroMatrix(_)) => Ok((alloc::vec![0.0; na], alloc::vec![0.0; nb])),
                Err(e) => Err(e),
            }
        }
        DescentInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    })
                    .collect()
            };
            let (mut a, mut b) = (draw(na), draw(nb));
            // Match the magnitude of ‖a ⊗ b‖ to ‖y‖/σ_max.
            let target = if lmax > 0.0 { libm::sqrt(r.yy / lmax) } else { 1.0 };
            let s = libm::sqrt(target / (norm(&a) * norm(&b)).max(f64::MIN_POSITIVE));
            // Start on the side of the origin that correlates with the data, so
            // descent does not have to pass through the saddle at zero.
            let sign = if dot(&r.lifted(&a, &b), &r.c) < 0.0 { -s } else { s };
            a.iter_mut().for_each(|v| *v *= sign);
            b.iter_mut().for_each(|v| *v *= s);
            Ok((a, b))
        }
    }
}

/// Gradient descent on `f(a, b) = ‖y − U·(a ⊗ b)‖²`.
///
/// Each factor takes a step scaled by the squared norm of the other, which
/// is plain gradient descent on the lifted variable to first order; the
/// pair is rebalanced to equal norms after every step (`a ⊗ b` unchanged).
pub fn factored_descent(p: &RankOneProblem, cfg: &DescentConfig) -> Result<DescentResult> {
    if !(cfg.tol >= 0.0) {
        return Err(invalid!("descent tolerance must be ≥ 0"));
    }
    let r = Reduced::new(p)?;
    let lmax = r.lambda_max()?;
    let base = match cfg.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(invalid!("descent step must be positive and finite, got {s}")),
        None if lmax > 0.0 => 1.0 / (2.0 * lmax),
        None => 1.0,
    };
    let (mut a, mut b) = initial_factors(p, &r, cfg.init, lmax)?;
    rebalance(&mut a, &mut b);
    let (mut f, mut g) = r.eval(&r.lifted(&a, &b))?;
    let mut history = alloc::vec![f];
    let floor = OBJECTIVE_FLOOR * r.yy;
    let mut step = base;
    let mut increases = 0;
    let mut converged = f <= floor;

    let mut iter = 0;
    while !converged && iter < cfg.max_iters {
        iter += 1;
        let (ga, gb) = r.factor_gradients(&g, &a, &b);
        let (sa, sb) = (dot(&b, &b).max(f64::MIN_POSITIVE), dot(&a, &a).max(f64::MIN_POSITIVE));
        let decrease = dot(&ga, &ga) / sa + dot(&gb, &gb) / sb;
        if decrease == 0.0 {
            converged = true;
            break;
        }
        let trial = |t: f64| -> Result<(Vec<f64>, Vec<f64>, f64, Vec<f64>)> {
            let na: Vec<f64> = a.iter().zip(&ga).map(|(v, d)| v - t * d / sa).collect();
            let nb: Vec<f64> = b.iter().zip(&gb).map(|(v, d)| v - t * d / sb).collect();
            let (nf, ng) = r.eval(&r.lifted(&na, &nb))?;
            Ok((na, nb, nf, ng))
        };
        let (na, nb, nf, ng) = if cfg.backtracking {
            let mut t = step;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let cand = trial(t)?;
                if cand.2 <= f - ARMIJO * t * decrease {
                    accepted = Some(cand);
                    break;
                }
                t /= 2.0;
            }
            match accepted {
                Some(c) => {
                    step = (2.0 * t).min(base);
                    c
                }
                None => {
                    // No decrease at any step size: a stationary point up to rounding.
                    converged = true;
                    break;
                }
            }
        } else {
            let c = trial(step)?;
            if !c.2.is_finite() {
                return Err(Error::Divergence {
                    iteration: iter,
                    objective: c.2,
                });
            }
            if c.2 > f {
                increases += 1;
                if increases >= DIVERGENCE_RUN {
                    return Err(Error::Divergence {
                        iteration: iter,
                        objective: c.2,
                    });
                }
            } else {
                increases = 0;
            }
            c
        };
        let change = libm::fabs(f - nf) / f.max(f64::MIN_POSITIVE);
        a = na;
        b = nb;
        rebalance(&mut a, &mut b);
        f = nf;
        g = ng;
        history.push(f);
        if f <= floor || change < cfg.tol {
            converged = true;
        }
    }
    Ok(DescentResult {
        a: Vector::from(a),
        b: Vector::from(b),
        history,
        converged,
    })
}

/// Weights split from a rank-one factorisation.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveredFactors {
    pub sigma_star: f64,
    pub u_star: Vector,
    pub v_star: Vector,
    /// `vec(W1) = √σ*·u*`.
    pub w1: Matrix,
    /// `vec(W2) = √σ*·v*`.
    pub w2: Matrix,
    /// Least-squares objective at `vec(W1) ⊗ vec(W2)`, once evaluated.
    pub residual: Option<f64>,
}

impl RecoveredFactors {
    /// `vec(W1) ⊗ vec(W2)`.
    pub fn lifted(&self) -> Vector {
        let (a, b) = (self.w1.as_slice(), self.w2.as_slice());
        Vector::from(a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect::<Vec<_>>())
    }
}

/// Rank-one SVD of `a·bᵀ`, split evenly between the two weight matrices.
///
/// The pair `(−W1, −W2)` yields the same products, so the sign is fixed by
/// making the largest-magnitude entry of `u*` positive.
pub fn extract_weights(
    a: &[f64],
    b: &[f64],
    shape1: (usize, usize),
    shape2: (usize, usize),
) -> Result<RecoveredFactors> {
    ensure_dim("extract_weights: a", shape1.0 * shape1.1, a.len())?;
    ensure_dim("extract_weights: b", shape2.0 * shape2.1, b.len())?;
    let v = Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j]);
    let svd = rank_one_svd(&v).map_err(|e| match e {
        Error::ZeroMatrix(_) => Error::ZeroMatrix("extract_weights factors"),
        other => other,
    })?;
    let (mut u, mut w) = (svd.u.into_vec(), svd.w.into_vec());
    let lead = u
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if libm::fabs(x) > libm::fabs(m) { x } else { m });
    if lead < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        w.iter_mut().for_each(|x| *x = -*x);
    }
    let root = libm::sqrt(svd.sigma);
    let w1 = unvectorize(&u.iter().map(|x| root * x).collect::<Vec<_>>(), shape1.0, shape1.1)?;
    let w2 = unvectorize(&w.iter().map(|x| root * x).collect::<Vec<_>>(), shape2.0, shape2.1)?;
    Ok(RecoveredFactors {
        sigma_star: svd.sigma,
        u_star: Vector::from(u),
        v_star: Vector::from(w),
        w1,
        w2,
        residual: None,
    })
}

/// Everything the two-layer pipeline produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub factors: RecoveredFactors,
    /// RIP test of the normalised data.
    pub rip: RipReport,
    /// Scale applied by normalisation.
    pub scale: f64,
    pub descent: DescentResult,
    /// `‖y − U·v‖ / ‖y‖` on the unnormalised data at the recovered weights.
    pub relative_residual: f64,
}

/// Assemble, normalise, test RIP, descend and split.
///
/// An unsatisfied RIP test does not stop the pipeline; it is reported in
/// [`Recovery::rip`] for the caller to act on.
pub fn recover_two_layer(
    specs: &[LayerSpec],
    samples: &Examples,
    supports: &[MultiLayerSupport],
    cfg: &DescentConfig,
) -> Result<Recovery> {
    if specs.len() != 2 {
        return Err(invalid!("recovery handles exactly two layers, got {}", specs.len()));
    }
    let shape1 = (specs[0].output_dim, specs[0].input_dim);
    let shape2 = (specs[1].output_dim, specs[1].input_dim);
    let raw = assemble_lifted_dataset(specs, samples, supports)?;
    let (ds, scale) = normalize_for_rip(&raw)?;
    let rip = rip_check(&ds)?;
    let problem = RankOneProblem::new(ds, shape1, shape2)?;
    let descent = factored_descent(&problem, cfg)?;
    let mut factors = extract_weights(&descent.a, &descent.b, shape1, shape2)?;
    let pred = raw.u_stacked.matvec(&factors.lifted())?;
    let resid: Vec<f64> = pred.iter().zip(raw.y_stacked.iter()).map(|(p, y)| y - p).collect();
    let rn = norm(&resid);
    factors.residual = Some(rn * rn);
    let yn = raw.y_stacked.norm();
    Ok(Recovery {
        factors,
        rip,
        scale,
        descent,
        relative_residual: if yn > 0.0 { rn / yn } else { rn },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(u: Matrix, y: Vec<f64>) -> LiftedDataset {
        LiftedDataset::new(Vector::from(y), u, 1).unwrap()
    }

    #[test]
    fn lifting_of_outer_product() {
        let v = Matrix::from_fn(2, 3, |i, j| [1.0, -2.0][i] * [3.0, 0.5, 4.0][j]);
        assert_eq!(lifting(&v).as_ref(), &[3.0, 0.5, 4.0, -6.0, -1.0, -8.0]);
        assert!(lifting(&Matrix::zeros(2, 2)).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rip_examples() {
        let r = rip_check(&ds(Matrix::identity(1), alloc::vec![0.0])).unwrap();
        assert!(r.satisfied);
        assert!((r.epsilon_max.unwrap() - 0.1).abs() < 1e-12);
        let r = rip_check(&ds(Matrix::diag(&[1.0, 10.0]), alloc::vec![0.0; 2])).unwrap();
        assert!(!r.satisfied && r.epsilon_max.is_none());
        let s2 = libm::sqrt(2.0);
        let r = rip_check(&ds(Matrix::diag(&[s2, s2]), alloc::vec![0.0; 2])).unwrap();
        assert!(r.satisfied);
    }

    #[test]
    fn normalization_examples() {
        let (n, s) = normalize_for_rip(&ds(Matrix::diag(&[2.0, 2.0]), alloc::vec![1.0, 1.0])).unwrap();
        assert!((s - libm::sqrt(2.0) / 2.0).abs() < 1e-14);
        let b = singular_bounds(&n.u_stacked).unwrap();
        assert!((b.sigma_max * b.sigma_max - 2.0).abs() < 1e-12);
        let (_, s) = normalize_for_rip(&ds(Matrix::identity(1), alloc::vec![1.0])).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(normalize_for_rip(&ds(Matrix::zeros(2, 2), alloc::vec![0.0; 2])).is_err());
    }

    #[test]
    fn identity_sensing_recovers_outer_product() {
        let (a0, b0) = ([1.0, -2.0], [0.5, 3.0, -1.0]);
        let y: Vec<f64> = a0.iter().flat_map(|&x| b0.iter().map(move |&z| x * z)).collect();
        let p = RankOneProblem::new(ds(Matrix::identity(6), y.clone()), (2, 1), (3, 1)).unwrap();
        for init in [DescentInit::Spectral, DescentInit::Random(3)] {
            let cfg = DescentConfig { init, ..Default::default() };
            let r = factored_descent(&p, &cfg).unwrap();
            assert!(*r.history.last().unwrap() <= 1e-10, "{init:?}: {:?}", r.history.last());
            let ab: Vec<f64> = r.a.iter().flat_map(|&x| r.b.iter().map(move |&z| x * z)).collect();
            for (u, v) in ab.iter().zip(&y) {
                assert!((u - v).abs() < 1e-5);
            }
        }
        let zero = RankOneProblem::new(ds(Matrix::identity(6), alloc::vec![0.0; 6]), (2, 1), (3, 1)).unwrap();
        let r = factored_descent(&zero, &DescentConfig::default()).unwrap();
        assert!(r.a.iter().chain(r.b.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn extract_exact_rank_one() {
        let f = extract_weights(&[2.0, 0.0], &[3.0, 0.0], (2, 1), (1, 2)).unwrap();
        assert!((f.sigma_star - 6.0).abs() < 1e-12);
        let r6 = libm::sqrt(6.0);
        assert!((f.w1[(0, 0)] - r6).abs() < 1e-12 && f.w1[(1, 0)].abs() < 1e-12);
        assert!((f.w2[(0, 0)] - r6).abs() < 1e-12 && f.w2[(0, 1)].abs() < 1e-12);
        assert!(extract_weights(&[0.0, 0.0], &[1.0, 0.0], (2, 1), (1, 2)).is_err());
    }
}
