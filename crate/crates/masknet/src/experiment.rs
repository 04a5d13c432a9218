//! Experiment drivers shared by the CLI and the acceptance suite.

use std::path::Path;
use std::time::Instant;

use masknet_core::alternation::{
    alternate_train, evaluate, Clock, EvalMode, MaskPolicy, MaskRule, MaskSignal, MaskStore,
    MaskThresholds, TrainingCurve,
};
use masknet_core::data::Examples;
use masknet_core::linalg::norm;
use masknet_core::network::{forward_masked, Layer, NetworkParams};
use masknet_core::recovery::{recover_two_layer, DescentConfig, RipReport};
use masknet_core::{Nonlinearity, ThresholdVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, TrainMode};
use crate::dataset::balanced_subset;
use crate::error::{AppError, AppResult};
use crate::idx::load_mnist_split;
use crate::synth::{synth_teacher, teacher_samples, SyntheticTeacherSpec};

/// Milliseconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> u64 {
        self.0.elapsed().as_millis() as u64
    }
}

/// Relative residual a recovery must reach.
pub const RECOVERY_RESIDUAL_TOL: f64 = 1e-6;
/// Worst relative output error allowed on held-out inputs.
pub const RECOVERY_HELDOUT_TOL: f64 = 1e-4;

/// One two-layer recovery run on a synthetic teacher.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryTrial {
    pub seed: u64,
    pub rip: RipReport,
    pub scale: f64,
    pub relative_residual: f64,
    /// Worst relative difference between teacher and recovered outputs on
    /// fresh inputs with fresh oracle supports.
    pub heldout_error: f64,
    /// Objective value per descent iteration.
    pub history: Vec<f64>,
}

impl RecoveryTrial {
    pub fn passed(&self) -> bool {
        self.relative_residual <= RECOVERY_RESIDUAL_TOL && self.heldout_error <= RECOVERY_HELDOUT_TOL
    }
}

/// Recovers a two-layer teacher from its data and oracle supports, then
/// compares student and teacher on `heldout` fresh samples.
pub fn recovery_trial(spec: &SyntheticTeacherSpec, heldout: usize) -> AppResult<RecoveryTrial> {
    if spec.widths.len() != 3 {
        return Err(AppError::Config("recovery needs exactly three widths (two layers)".into()));
    }
    let teacher = synth_teacher(spec)?;
    let r = recover_two_layer(&teacher.net.specs(), &teacher.data, &teacher.supports, &DescentConfig::default())?;
    let student = NetworkParams::new(vec![
        Layer::dense(r.factors.w1.clone(), ThresholdVector::zeros(r.factors.w1.rows()))?,
        Layer::dense(r.factors.w2.clone(), ThresholdVector::zeros(r.factors.w2.rows()))?,
    ])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (supports, data) = teacher_samples(&teacher.net, spec.density, heldout, &mut rng)?;
    let mut worst = 0.0f64;
    for (n, s) in supports.iter().enumerate() {
        let want = forward_masked(&teacher.net, data.input(n), s)?;
        let got = forward_masked(&student, data.input(n), s)?;
        let diff: Vec<f64> = want.iter().zip(got.iter()).map(|(a, b)| a - b).collect();
        let scale = want.norm();
        worst = worst.max(if scale > 0.0 { norm(&diff) / scale } else { norm(&diff) });
    }
    Ok(RecoveryTrial {
        seed: spec.seed,
        rip: r.rip,
        scale: r.scale,
        relative_residual: r.relative_residual,
        heldout_error: worst,
        history: r.descent.history,
    })
}

/// Recovery trials over `seeds`, spread across `threads` workers; results
/// are returned in seed order.
pub fn recovery_trials(base: &SyntheticTeacherSpec, seeds: &[u64], heldout: usize, threads: usize) -> AppResult<Vec<RecoveryTrial>> {
    parallel_map(seeds, threads, |&seed| {
        recovery_trial(&SyntheticTeacherSpec { seed, ..base.clone() }, heldout)
    })
}

/// Train and test examples.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Examples,
    pub test: Examples,
}

impl Split {
    pub fn load_mnist(dir: &Path) -> AppResult<Self> {
        Ok(Self {
            train: load_mnist_split(dir, true)?,
            test: load_mnist_split(dir, false)?,
        })
    }

    /// Class-balanced subsets of both halves, drawn with `seed`.
    pub fn subset(&self, train_limit: usize, test_limit: usize, seed: u64) -> AppResult<Self> {
        Ok(Self {
            train: balanced_subset(&self.train, train_limit.min(self.train.len()), seed)?,
            test: balanced_subset(&self.test, test_limit.min(self.test.len()), seed)?,
        })
    }
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct ArmRun {
    pub mode: TrainMode,
    pub net: NetworkParams,
    pub curve: TrainingCurve,
    /// Activation-mode test error of the final network.
    pub final_test_err: f64,
    /// Test error when supports come from the mask sweep instead of the
    /// nonlinearity; absent when no sweep ran.
    pub mask_test_err: Option<f64>,
    /// Mask-only test error with the reconstruction rule applied to the
    /// signed pre-activation, whatever signal the run's own policy uses;
    /// absent when no sweep ran.
    pub maskt_test_err: Option<f64>,
    pub store: Option<MaskStore>,
    pub thresholds: Option<MaskThresholds>,
}

impl ArmRun {
    pub fn mode_name(&self) -> &'static str {
        mode_name(self.mode)
    }
}

pub fn mode_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Sgd => "sgd",
        TrainMode::IAlt => "i-alt",
        TrainMode::BAlt => "b-alt",
    }
}

/// Initialises a network from `cfg.seed` and trains it on `split`.
pub fn train_run<C: Clock>(cfg: &RunConfig, split: &Split, clock: &C) -> AppResult<ArmRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = NetworkParams::random(&cfg.specs(), cfg.init_gain, &mut rng)?;
    let policy = cfg.policy();
    let out = alternate_train(&mut net, &split.train, Some(&split.test), &cfg.schedule(), &policy, clock)?;
    let act = match cfg.activation {
        Nonlinearity::Relu => EvalMode::ActivationRelu,
        Nonlinearity::Pht => EvalMode::ActivationPht,
    };
    let final_test_err = evaluate(&net, &split.test, act)?;
    let maskt = MaskPolicy {
        rule: MaskRule::Reconstruction,
        signal: MaskSignal::PreActivation,
        majority_vote: false,
        ..policy
    };
    let mask_only = |p: &MaskPolicy| -> AppResult<Option<f64>> {
        match &out.thresholds {
            Some(t) => Ok(Some(evaluate(&net, &split.test, EvalMode::MaskOnly { policy: p, thresholds: t })?)),
            None => Ok(None),
        }
    };
    let mask_test_err = mask_only(&policy)?;
    let maskt_test_err = mask_only(&maskt)?;
    Ok(ArmRun {
        mode: cfg.mode,
        net,
        curve: out.curve,
        final_test_err,
        mask_test_err,
        maskt_test_err,
        store: out.store,
        thresholds: out.thresholds,
    })
}

/// Paired runs on one seed; the first arm is plain SGD.
#[derive(Clone, Debug)]
pub struct BenchSeed {
    pub seed: u64,
    pub arms: Vec<ArmRun>,
}

impl BenchSeed {
    pub fn sgd(&self) -> &ArmRun {
        &self.arms[0]
    }

    /// The SGD arm's final training loss.
    pub fn target_loss(&self) -> f64 {
        self.sgd().curve.last().map_or(f64::NAN, |r| r.train_loss)
    }

    /// Epochs SGD needed to first reach its own final loss.
    pub fn sgd_epochs(&self) -> usize {
        self.epochs_to_target(self.sgd()).expect("SGD reaches its own final loss")
    }

    pub fn epochs_to_target(&self, arm: &ArmRun) -> Option<usize> {
        arm.curve.epochs_to_loss(self.target_loss())
    }

    /// Arm epochs over SGD epochs to the target.
    pub fn ratio(&self, arm: &ArmRun) -> Option<f64> {
        self.epochs_to_target(arm).map(|e| e as f64 / self.sgd_epochs() as f64)
    }

    pub fn arm(&self, mode: TrainMode) -> Option<&ArmRun> {
        self.arms.iter().find(|a| a.mode == mode)
    }
}

/// For every seed, trains SGD and then each mode in `arms` from the same
/// initialisation and data subset. `make_clock` supplies each run's clock.
pub fn bench<C, F>(
    cfg: &RunConfig,
    data: &Split,
    seeds: &[u64],
    arms: &[TrainMode],
    threads: usize,
    make_clock: F,
) -> AppResult<Vec<BenchSeed>>
where
    C: Clock,
    F: Fn() -> C + Sync,
{
    let modes: Vec<TrainMode> = std::iter::once(TrainMode::Sgd)
        .chain(arms.iter().copied().filter(|&m| m != TrainMode::Sgd))
        .collect();
    parallel_map(seeds, threads, |&seed| {
        let split = data.subset(cfg.train_limit, cfg.test_limit, seed)?;
        let runs = modes
            .iter()
            .map(|&mode| {
                let c = RunConfig { mode, seed, ..cfg.clone() };
                train_run(&c, &split, &make_clock())
            })
            .collect::<AppResult<Vec<_>>>()?;
        Ok(BenchSeed { seed, arms: runs })
    })
}

/// Applies `f` to every item using up to `threads` scoped workers; output
/// order matches input order.
pub fn parallel_map<T, R, F>(items: &[T], threads: usize, f: F) -> AppResult<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> AppResult<R> + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).collect::<AppResult<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}
