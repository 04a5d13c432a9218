//! Property suites run by `masknet verify` and the acceptance test.
//!
//! Each suite draws its own random instances from a fixed seed and compares
//! the library against an independent oracle.

use masknet_core::alternation::{brute_force_mask_oracle, estimate_mask_batch, estimate_mask_instance, BRUTE_FORCE_MAX_DIM};
use masknet_core::decoupling::{decouple_network, LiftedDataset};
use masknet_core::linalg::{kron_vec, Matrix, DEFAULT_ENTRY_CAP};
use masknet_core::network::{
    backward_activation, backward_masked, forward_activation, forward_masked, loss, Gradients, Layer, LossKind,
    MultiLayerSupport, NetworkParams,
};
use masknet_core::nonlinearity::{l0_prox_oracle, l1_prox_oracle, pos_hard_threshold, relu};
use masknet_core::recovery::{lifting, normalize_for_rip, rip_check};
use masknet_core::{Nonlinearity, SupportMask, ThresholdVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::AppResult;
use crate::experiment::recovery_trials;
use crate::synth::SyntheticTeacherSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn gaussian_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Dense net with Gaussian weights; hidden thresholds uniform in `beta`.
fn random_net(rng: &mut impl Rng, widths: &[usize], beta: (f64, f64)) -> AppResult<NetworkParams> {
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let b = if l == last {
                ThresholdVector::zeros(w[1])
            } else {
                ThresholdVector::new((0..w[1]).map(|_| rng.random_range(beta.0..=beta.1)).collect())?
            };
            Layer::dense(gaussian_matrix(rng, w[1], w[0]), b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NetworkParams::new(layers)?)
}

fn random_support(rng: &mut impl Rng, net: &NetworkParams, density: f64) -> MultiLayerSupport {
    MultiLayerSupport::new(
        net.hidden_widths()
            .iter()
            .map(|&w| SupportMask::new((0..w).map(|_| rng.random_bool(density)).collect()))
            .collect(),
    )
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Masked forward pass against the decoupled form `U·v` over random nets of
/// depth 2 to 4 with widths up to 8.
pub fn decoupling(trials: usize, seed: u64) -> AppResult<SuiteResult> {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let depth = 2 + t % 3;
        let widths = loop {
            let w: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=8)).collect();
            let cols: u128 = w.windows(2).map(|p| (p[0] * p[1]) as u128).product();
            if cols * *w.last().expect("non-empty") as u128 <= 2_000_000 {
                break w;
            }
        };
        let net = random_net(&mut rng, &widths, (0.0, 0.0))?;
        let s = random_support(&mut rng, &net, 0.5);
        let x = gaussian_vec(&mut rng, widths[0]);
        let lifted = decouple_network(&net, &x, &s)?.output()?;
        worst = worst.max(rel_diff(&lifted, &forward_masked(&net, &x, &s)?));
    }
    Ok(SuiteResult::new(
        "decoupling",
        worst <= 1e-10,
        format!("{trials} networks, worst relative difference {worst:.3e} (limit 1e-10)"),
    ))
}

/// Instance and batch closed forms against exhaustive search.
pub fn mask_closed_forms(instances: usize, seed: u64) -> AppResult<SuiteResult> {
    let mut rng = rng(seed);
    let (mut instance_bad, mut batch_bad) = (0, 0);
    for _ in 0..instances {
        let d = rng.random_range(1..=BRUTE_FORCE_MAX_DIM);
        let beta = ThresholdVector::new((0..d).map(|_| rng.random_range(0.0..2.0)).collect())?;
        let x = gaussian_vec(&mut rng, d);
        if estimate_mask_instance(&x, &beta)? != brute_force_mask_oracle(&[&x], &beta)? {
            instance_bad += 1;
        }
        let n = rng.random_range(1..=4);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, d)).collect();
        if estimate_mask_batch(&xs, &beta)? != brute_force_mask_oracle(&xs, &beta)? {
            batch_bad += 1;
        }
    }
    Ok(SuiteResult::new(
        "mask-closed-forms",
        instance_bad == 0 && batch_bad == 0,
        format!("{instances} instance and {instances} batch problems, mismatches {instance_bad}/{batch_bad}"),
    ))
}

/// ReLU against the `ℓ1` grid oracle, the `ℓ0` oracle's threshold, and the
/// hard threshold's disagreement with the `ℓ0` minimiser.
pub fn proximal_maps() -> AppResult<SuiteResult> {
    let grid: Vec<f64> = (-300..=300).map(|k| k as f64 * 0.01).collect();
    let step = 1e-3;
    let (mut relu_bad, mut l0_bad, mut mismatch_missing) = (0, 0, 0);
    for beta in [0.1f64, 0.5, 1.0, 1.5] {
        let t = (2.0 * beta).sqrt();
        let mut mismatches = 0;
        for &q in &grid {
            if (relu(q, beta) - l1_prox_oracle(q, beta, step)).abs() > step {
                relu_bad += 1;
            }
            if l0_prox_oracle(q, beta) != if q > t { q } else { 0.0 } {
                l0_bad += 1;
            }
            if q > beta && q <= t && pos_hard_threshold(q, beta) != l0_prox_oracle(q, beta) {
                mismatches += 1;
            }
        }
        if mismatches == 0 {
            mismatch_missing += 1;
        }
    }
    Ok(SuiteResult::new(
        "proximal-maps",
        relu_bad == 0 && l0_bad == 0 && mismatch_missing == 0,
        format!(
            "l1 grid violations {relu_bad}, l0 violations {l0_bad}, betas without hard-threshold/l0 mismatch {mismatch_missing}"
        ),
    ))
}

/// Sandwich bound for random 2×3 `V` on a certified Gaussian lifted
/// dataset with `m` rows.
pub fn rip_sandwich(m: usize, draws: usize, seed: u64) -> AppResult<SuiteResult> {
    let mut rng = rng(seed);
    let u = gaussian_matrix(&mut rng, m, 6);
    let teacher = kron_vec(&gaussian_vec(&mut rng, 2), &gaussian_vec(&mut rng, 3), DEFAULT_ENTRY_CAP)?;
    let y = u.matvec(&teacher)?;
    let (ds, _) = normalize_for_rip(&LiftedDataset::new(y, u, m)?)?;
    let report = rip_check(&ds)?;
    let Some(eps) = report.epsilon_max.filter(|_| report.satisfied) else {
        return Ok(SuiteResult::new("rip-sandwich", false, format!("RIP test not certified: {report:?}")));
    };
    let mut violations = 0;
    for _ in 0..draws {
        let v = gaussian_matrix(&mut rng, 2, 3);
        let f = v.frobenius_norm().powi(2);
        let e = ds.u_stacked.matvec(&lifting(&v))?.norm().powi(2) / report.m as f64;
        let slack = 1.0 + 1e-12;
        if (0.9 + eps) * f > e * slack || e > (1.1 - eps) * f * slack {
            violations += 1;
        }
    }
    Ok(SuiteResult::new(
        "rip-sandwich",
        violations == 0,
        format!("epsilon {eps:.4}, {draws} draws, violations {violations}"),
    ))
}

const FD_STEP: f64 = 1e-5;
const FD_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy)]
enum Mode<'a> {
    Masked(&'a MultiLayerSupport),
    Activation(Nonlinearity),
}

fn objective(net: &NetworkParams, x: &[f64], t: &[f64], mode: Mode, kind: LossKind) -> AppResult<f64> {
    let y = match mode {
        Mode::Masked(s) => forward_masked(net, x, s)?,
        Mode::Activation(nl) => forward_activation(net, x, nl)?.0,
    };
    Ok(loss(kind, &y, t)?.0)
}

/// Largest central-difference discrepancy, relative to the largest analytic
/// entry floored at one.
fn fd_error(net: &NetworkParams, x: &[f64], t: &[f64], mode: Mode, kind: LossKind, g: &Gradients) -> AppResult<f64> {
    let scale = g
        .weights
        .iter()
        .flat_map(|w| w.as_slice())
        .chain(g.betas.iter().flatten())
        .fold(1.0f64, |m, &v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for l in 0..net.depth() {
        let w = net.layer(l).weight().clone();
        for k in 0..w.len() {
            let at = |d: f64| -> AppResult<f64> {
                let mut n = net.clone();
                let mut p = w.clone();
                p.as_mut_slice()[k] += d;
                n.set_parameters(l, p)?;
                objective(&n, x, t, mode, kind)
            };
            let fd = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
            worst = worst.max((fd - g.weights[l].as_slice()[k]).abs() / scale);
        }
        if l + 1 < net.depth() {
            let beta = net.layer(l).beta().to_vec();
            for k in 0..beta.len() {
                let at = |d: f64| -> AppResult<f64> {
                    let mut b = beta.clone();
                    b[k] += d;
                    let mut n = net.clone();
                    n.set_beta(l, ThresholdVector::new(b)?)?;
                    objective(&n, x, t, mode, kind)
                };
                let fd = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
                worst = worst.max((fd - g.betas[l][k]).abs() / scale);
            }
        }
    }
    Ok(worst)
}

fn away_from_thresholds(net: &NetworkParams, x: &[f64]) -> AppResult<bool> {
    let (_, trace) = forward_activation(net, x, Nonlinearity::Relu)?;
    Ok(trace.pre.iter().take(net.depth() - 1).enumerate().all(|(l, q)| {
        q.iter().zip(net.layer(l).beta().iter()).all(|(&v, &b)| (v - b).abs() > FD_MARGIN)
    }))
}

fn random_target(rng: &mut impl Rng, kind: LossKind, dim: usize) -> Vec<f64> {
    match kind {
        LossKind::LeastSquares => gaussian_vec(rng, dim),
        LossKind::SoftmaxCrossEntropy => {
            let mut t = vec![0.0; dim];
            t[rng.random_range(0..dim)] = 1.0;
            t
        }
    }
}

/// Both backward modes against central differences on `instances` random
/// problems per (mode, loss) pair, away from threshold boundaries.
pub fn gradients(instances: usize, seed: u64) -> AppResult<SuiteResult> {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    let kinds = [LossKind::LeastSquares, LossKind::SoftmaxCrossEntropy];
    for kind in kinds {
        for nl in [Nonlinearity::Relu, Nonlinearity::Pht] {
            let mut checked = 0;
            while checked < instances {
                let net = random_net(&mut rng, &[4, 5, 4, 3], (-0.3, 0.3))?;
                let x = gaussian_vec(&mut rng, 4);
                if !away_from_thresholds(&net, &x)? {
                    continue;
                }
                let t = random_target(&mut rng, kind, 3);
                let (_, up) = loss(kind, &forward_activation(&net, &x, nl)?.0, &t)?;
                let g = backward_activation(&net, &x, nl, &up)?;
                worst = worst.max(fd_error(&net, &x, &t, Mode::Activation(nl), kind, &g)?);
                checked += 1;
            }
        }
        for _ in 0..instances {
            let net = random_net(&mut rng, &[4, 5, 4, 3], (-0.3, 0.3))?;
            let s = random_support(&mut rng, &net, 0.6);
            let x = gaussian_vec(&mut rng, 4);
            let t = random_target(&mut rng, kind, 3);
            let (_, up) = loss(kind, &forward_masked(&net, &x, &s)?, &t)?;
            let g = backward_masked(&net, &x, &s, &up)?;
            worst = worst.max(fd_error(&net, &x, &t, Mode::Masked(&s), kind, &g)?);
        }
    }
    Ok(SuiteResult::new(
        "gradients",
        worst <= 1e-5,
        format!("{instances} instances per mode and loss, worst relative error {worst:.3e} (limit 1e-5)"),
    ))
}

/// The 8→6→4 teacher at density 0.5 with 400 samples, recovered on `seeds`.
pub fn recovery_spec(seed: u64) -> SyntheticTeacherSpec {
    SyntheticTeacherSpec {
        widths: vec![8, 6, 4],
        density: 0.5,
        samples: 400,
        seed,
    }
}

/// Two-layer recovery over `seeds`; passes when at least `required` seeds
/// reach the residual and held-out tolerances.
pub fn recovery(seeds: &[u64], required: usize, threads: usize) -> AppResult<SuiteResult> {
    let trials = recovery_trials(&recovery_spec(0), seeds, 100, threads)?;
    let ok = trials.iter().filter(|t| t.passed()).count();
    let worst = trials.iter().map(|t| t.relative_residual).fold(0.0f64, f64::max);
    Ok(SuiteResult::new(
        "recovery",
        ok >= required,
        format!("{ok}/{} seeds recovered (need {required}), worst residual {worst:.3e}", trials.len()),
    ))
}

/// Every suite at its acceptance size.
pub fn all(threads: usize) -> AppResult<Vec<SuiteResult>> {
    let seeds: Vec<u64> = (0..20).collect();
    Ok(vec![
        decoupling(100, 1)?,
        mask_closed_forms(1000, 2)?,
        proximal_maps()?,
        rip_sandwich(5000, 200, 3)?,
        recovery(&seeds, 18, threads)?,
        gradients(100, 4)?,
    ])
}
