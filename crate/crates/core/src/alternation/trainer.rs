//! Minibatch SGD in activation or fixed-mask mode, and the alternation
//! scheduler that interleaves support sweeps with weight phases.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sweep::{sweep_masks, MaskPolicy, MaskStore, MaskThresholds, StoreLayout};
use crate::data::Examples;
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::linalg::Matrix;
use crate::network::{
    argmax, backward_batch, forward_batch, loss_batch, Gating, LossKind, NetworkParams,
};
use crate::nonlinearity::Nonlinearity;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub loss: LossKind,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 64,
            weight_decay: 0.0,
            loss: LossKind::SoftmaxCrossEntropy,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid!("SGD batch_size must be ≥ 1"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid!("learning rate must be finite and ≥ 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid!("momentum must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(invalid!("weight decay must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// Where the sweep thresholds come from once warm-up ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaInit {
    /// Freeze and reuse the network's warm-up thresholds.
    NetworkBeta,
    /// Per-layer percentile of the signal magnitudes over the training set.
    Percentile(f64),
}

/// Which loss the curve reports during fixed-mask phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveLoss {
    /// The objective being optimised (masked loss in weight phases).
    Training,
    /// Always the activation-mode loss, comparable across arms.
    Activation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlternationSchedule {
    pub warmup_epochs: usize,
    pub plateau_window: usize,
    pub plateau_rel_improvement: f64,
    pub min_gap: usize,
    pub max_gap: usize,
    pub max_alternations: usize,
    /// Total epoch budget, warm-up included.
    pub total_epochs: usize,
    pub sgd: SgdConfig,
    /// Nonlinearity of the activation-mode forward pass (warm-up and test).
    pub activation: Nonlinearity,
    pub beta_init: BetaInit,
    pub curve_loss: CurveLoss,
    pub seed: u64,
}

impl Default for AlternationSchedule {
    fn default() -> Self {
        Self {
            warmup_epochs: 2,
            plateau_window: 3,
            plateau_rel_improvement: 1e-3,
            min_gap: 4,
            max_gap: 50,
            max_alternations: 3,
            total_epochs: 20,
            sgd: SgdConfig::default(),
            activation: Nonlinearity::Relu,
            beta_init: BetaInit::Percentile(50.0),
            curve_loss: CurveLoss::Training,
            seed: 0,
        }
    }
}

impl AlternationSchedule {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.warmup_epochs == 0 {
            return Err(invalid!("warmup_epochs must be ≥ 1"));
        }
        if !(self.plateau_rel_improvement >= 0.0) {
            return Err(invalid!("plateau_rel_improvement must be ≥ 0"));
        }
        if self.plateau_window == 0 {
            return Err(invalid!("plateau_window must be ≥ 1"));
        }
        if self.min_gap == 0 || self.min_gap > self.max_gap {
            return Err(invalid!("need 1 ≤ min_gap ≤ max_gap"));
        }
        if self.total_epochs < self.warmup_epochs {
            return Err(invalid!("total_epochs must cover the warm-up"));
        }
        if let BetaInit::Percentile(p) = self.beta_init {
            if !(0.0..=100.0).contains(&p) {
                return Err(invalid!("beta percentile must lie in [0, 100]"));
            }
        }
        Ok(())
    }
}

/// Source of wall-clock stamps; tests use [`NullClock`] so curves are
/// reproducible bit for bit.
pub trait Clock {
    fn elapsed_ms(&self) -> u64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn elapsed_ms(&self) -> u64 {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean per-example loss over the full training set.
    pub train_loss: f64,
    pub train_err: f64,
    /// Activation-mode test error, `None` without a test set.
    pub test_err: Option<f64>,
    pub wall_ms: u64,
    /// A support sweep happened right before this epoch.
    pub alternation_event: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingCurve {
    pub records: Vec<EpochRecord>,
}

impl TrainingCurve {
    pub fn push(&mut self, r: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if r.epoch <= last.epoch {
                return Err(invalid!("curve epochs must increase ({} after {})", r.epoch, last.epoch));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn alternation_epochs(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.alternation_event)
            .map(|r| r.epoch)
            .collect()
    }

    /// First epoch whose training loss is at or below `target`.
    pub fn epochs_to_loss(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.train_loss <= target).map(|r| r.epoch)
    }
}

/// Forward mode used by [`evaluate`].
#[derive(Clone, Copy, Debug)]
pub enum EvalMode<'a> {
    ActivationRelu,
    ActivationPht,
    /// Supports swept from each example itself, then a masked pass.
    MaskOnly {
        policy: &'a MaskPolicy,
        thresholds: &'a MaskThresholds,
    },
}

const EVAL_CHUNK: usize = 512;

/// Classification error (fraction of argmax mismatches).
pub fn evaluate(net: &NetworkParams, data: &Examples, mode: EvalMode<'_>) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid!("cannot evaluate on an empty dataset"));
    }
    let (_, err) = match mode {
        EvalMode::ActivationRelu => full_pass(net, data, Pass::Activation(Nonlinearity::Relu), None)?,
        EvalMode::ActivationPht => full_pass(net, data, Pass::Activation(Nonlinearity::Pht), None)?,
        EvalMode::MaskOnly { policy, thresholds } => {
            let store = sweep_masks(net, data.inputs(), policy, thresholds, 0)?;
            full_pass(net, data, Pass::Masked { form: policy.form, store: &store }, None)?
        }
    };
    Ok(err)
}

#[derive(Clone, Copy)]
enum Pass<'a> {
    Activation(Nonlinearity),
    Masked {
        form: Nonlinearity,
        store: &'a MaskStore,
    },
}

/// Mean loss (if a loss kind is given) and error rate over `data`.
fn full_pass(
    net: &NetworkParams,
    data: &Examples,
    pass: Pass<'_>,
    loss: Option<LossKind>,
) -> Result<(f64, f64)> {
    let n = data.len();
    let slot_of = match pass {
        Pass::Masked { store, .. } => {
            ensure_dim("mask store coverage", n, store.coverage())?;
            Some(store.slot_of_examples())
        }
        Pass::Activation(_) => None,
    };
    let idx: Vec<usize> = (0..n).collect();
    let (mut total, mut wrong) = (0.0, 0usize);
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, y) = data.gather(chunk);
        let out = run_forward(net, &x, pass, slot_of.as_deref(), chunk)?;
        let pred = out.output();
        if let Some(kind) = loss {
            total += loss_batch(kind, pred, &y)?.0;
        }
        for j in 0..chunk.len() {
            if argmax(pred.column(j)) != argmax(y.column(j)) {
                wrong += 1;
            }
        }
    }
    Ok((total / n as f64, wrong as f64 / n as f64))
}

fn run_forward(
    net: &NetworkParams,
    x: &Matrix,
    pass: Pass<'_>,
    slot_of: Option<&[usize]>,
    examples: &[usize],
) -> Result<crate::network::BatchTrace> {
    match pass {
        Pass::Activation(nl) => forward_batch(net, x, Gating::Activation(nl)),
        Pass::Masked { form, store } => {
            let slot_of = slot_of.expect("masked pass has slots");
            let slots: Vec<usize> = examples.iter().map(|&i| slot_of[i]).collect();
            let masks = store.gates_for_slots(&slots);
            forward_batch(net, x, Gating::Masked { form, masks: &masks })
        }
    }
}

/// Momentum SGD state.
struct Optimizer {
    cfg: SgdConfig,
    velocity: Vec<Matrix>,
    beta_velocity: Vec<Vec<f64>>,
}

impl Optimizer {
    fn new(net: &NetworkParams, cfg: SgdConfig) -> Self {
        Self {
            cfg,
            velocity: net
                .layers()
                .iter()
                .map(|l| Matrix::zeros(l.parameters().rows(), l.parameters().cols()))
                .collect(),
            beta_velocity: net.layers().iter().map(|l| alloc::vec![0.0; l.beta().dim()]).collect(),
        }
    }

    fn reset(&mut self) {
        for v in &mut self.velocity {
            v.as_mut_slice().fill(0.0);
        }
        for v in &mut self.beta_velocity {
            v.fill(0.0);
        }
    }

    /// One minibatch step; returns the summed batch loss.
    fn step(
        &mut self,
        net: &mut NetworkParams,
        x: &Matrix,
        y: &Matrix,
        gating: Gating<'_>,
        update_beta: bool,
    ) -> Result<f64> {
        let trace = forward_batch(net, x, gating)?;
        let (value, upstream) = loss_batch(self.cfg.loss, trace.output(), y)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("minibatch loss"));
        }
        let grads = backward_batch(net, &trace, &upstream)?;
        let scale = 1.0 / x.cols() as f64;
        let (lr, mu, wd) = (self.cfg.learning_rate, self.cfg.momentum, self.cfg.weight_decay);
        let hidden = net.depth() - 1;
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = layer.parameter_gradient(&grads.weights[l])?;
            let v = &mut self.velocity[l];
            for ((vi, &gi), &pi) in v
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(layer.parameters().as_slice())
            {
                *vi = mu * *vi + gi * scale + wd * pi;
            }
            layer.add_to_parameters(v, -lr)?;
            if update_beta && l < hidden {
                let bv = &mut self.beta_velocity[l];
                for ((b, vb), &gb) in layer.beta_mut().iter_mut().zip(bv.iter_mut()).zip(&grads.betas[l]) {
                    *vb = mu * *vb + gb * scale;
                    *b -= lr * *vb;
                }
            }
        }
        Ok(value)
    }
}

/// Shared epoch machinery: optimizer, shuffling stream, clock, curve.
struct Runner<'a, C: Clock> {
    train: &'a Examples,
    test: Option<&'a Examples>,
    opt: Optimizer,
    rng: ChaCha8Rng,
    clock: &'a C,
    curve: TrainingCurve,
    epoch: usize,
    activation: Nonlinearity,
    curve_loss: CurveLoss,
}

impl<C: Clock> Runner<'_, C> {
    fn activation_epoch(&mut self, net: &mut NetworkParams, event: bool) -> Result<()> {
        let nl = self.activation;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        for batch in order.chunks(self.opt.cfg.batch_size) {
            let (x, y) = self.train.gather(batch);
            self.opt.step(net, &x, &y, Gating::Activation(nl), nl == Nonlinearity::Relu)?;
        }
        self.record(net, Pass::Activation(nl), event)
    }

    fn masked_epoch(
        &mut self,
        net: &mut NetworkParams,
        store: &MaskStore,
        form: Nonlinearity,
        event: bool,
    ) -> Result<()> {
        let bs = self.opt.cfg.batch_size;
        let batches: Vec<(Vec<usize>, Vec<usize>)> = match store.layout() {
            StoreLayout::Instance { examples } => {
                let mut order: Vec<usize> = (0..*examples).collect();
                order.shuffle(&mut self.rng);
                order.chunks(bs).map(|c| (c.to_vec(), c.to_vec())).collect()
            }
            StoreLayout::Batches(groups) => {
                let mut order: Vec<usize> = (0..groups.len()).collect();
                order.shuffle(&mut self.rng);
                order
                    .into_iter()
                    .map(|b| (groups[b].clone(), alloc::vec![b; groups[b].len()]))
                    .collect()
            }
        };
        for (examples, slots) in &batches {
            let (x, y) = self.train.gather(examples);
            let masks = store.gates_for_slots(slots);
            self.opt.step(net, &x, &y, Gating::Masked { form, masks: &masks }, false)?;
        }
        let pass = match self.curve_loss {
            CurveLoss::Training => Pass::Masked { form, store },
            CurveLoss::Activation => Pass::Activation(self.activation),
        };
        self.record(net, pass, event)
    }

    fn record(&mut self, net: &NetworkParams, pass: Pass<'_>, event: bool) -> Result<()> {
        self.epoch += 1;
        let (train_loss, train_err) = full_pass(net, self.train, pass, Some(self.opt.cfg.loss))?;
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                iteration: self.epoch,
                objective: train_loss,
            });
        }
        let test_err = match self.test {
            Some(t) => Some(full_pass(net, t, Pass::Activation(self.activation), None)?.1),
            None => None,
        };
        self.curve.push(EpochRecord {
            epoch: self.epoch,
            train_loss,
            train_err,
            test_err,
            wall_ms: self.clock.elapsed_ms(),
            alternation_event: event,
        })
    }
}

/// Minibatch SGD on the masked objective with the supports in `store` held
/// fixed; thresholds are not updated.
pub fn sgd_fixed_masks(
    net: &mut NetworkParams,
    train: &Examples,
    store: &MaskStore,
    form: Nonlinearity,
    sgd: &SgdConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainingCurve> {
    sgd.validate()?;
    check_data(net, train)?;
    let mut runner = Runner {
        train,
        test: None,
        opt: Optimizer::new(net, *sgd),
        rng: ChaCha8Rng::seed_from_u64(seed),
        clock: &NullClock,
        curve: TrainingCurve::default(),
        epoch: 0,
        activation: form,
        curve_loss: CurveLoss::Training,
    };
    for _ in 0..epochs {
        runner.masked_epoch(net, store, form, false)?;
    }
    Ok(runner.curve)
}

fn check_data(net: &NetworkParams, data: &Examples) -> Result<()> {
    if data.is_empty() {
        return Err(invalid!("training set is empty"));
    }
    ensure_dim("training inputs", net.input_dim(), data.input_dim())?;
    ensure_dim("training targets", net.output_dim(), data.target_dim())
}

/// Whether a weight phase has stalled: relative loss improvement over the
/// last `window` epochs below `threshold`, subject to the gap limits.
pub fn plateau_reached(losses: &[f64], window: usize, threshold: f64, min_gap: usize, max_gap: usize) -> bool {
    let gap = losses.len();
    if gap >= max_gap {
        return true;
    }
    if gap < min_gap || gap <= window {
        return false;
    }
    let before = losses[gap - 1 - window];
    let now = losses[gap - 1];
    let denom = libm::fabs(before).max(f64::MIN_POSITIVE);
    (before - now) / denom < threshold
}

/// Summary of an alternation run.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternationOutcome {
    pub curve: TrainingCurve,
    /// Supports of the last sweep (absent when no sweep ran).
    pub store: Option<MaskStore>,
    pub thresholds: Option<MaskThresholds>,
}

/// Warm-up in activation mode, then alternate support sweeps with
/// fixed-mask weight phases until the epoch budget is spent.
///
/// With `max_alternations = 0` every epoch is activation-mode SGD.
pub fn alternate_train<C: Clock>(
    net: &mut NetworkParams,
    train: &Examples,
    test: Option<&Examples>,
    schedule: &AlternationSchedule,
    policy: &MaskPolicy,
    clock: &C,
) -> Result<AlternationOutcome> {
    schedule.validate()?;
    policy.validate()?;
    check_data(net, train)?;
    if let Some(t) = test {
        check_data(net, t)?;
    }
    let mut runner = Runner {
        train,
        test,
        opt: Optimizer::new(net, schedule.sgd),
        rng: ChaCha8Rng::seed_from_u64(schedule.seed),
        clock,
        curve: TrainingCurve::default(),
        epoch: 0,
        activation: schedule.activation,
        curve_loss: schedule.curve_loss,
    };
    let warmup = if schedule.max_alternations == 0 {
        schedule.total_epochs
    } else {
        schedule.warmup_epochs
    };
    for _ in 0..warmup {
        runner.activation_epoch(net, false)?;
    }
    let mut outcome = AlternationOutcome {
        curve: TrainingCurve::default(),
        store: None,
        thresholds: None,
    };
    let mut alternations = 0;
    while runner.epoch < schedule.total_epochs && alternations < schedule.max_alternations {
        let thresholds = match (&outcome.thresholds, schedule.beta_init) {
            (Some(t), _) => t.clone(),
            (None, BetaInit::NetworkBeta) => MaskThresholds::from_network(net),
            (None, BetaInit::Percentile(p)) => MaskThresholds::percentile(net, train.inputs(), policy, p)?,
        };
        let sweep_seed = runner.rng.next_u64();
        let mut store = sweep_masks(net, train.inputs(), policy, &thresholds, sweep_seed)?;
        store.set_epoch(runner.epoch);
        alternations += 1;
        runner.opt.reset();
        let last = alternations == schedule.max_alternations;
        let mut losses = Vec::new();
        let mut event = true;
        while runner.epoch < schedule.total_epochs {
            runner.masked_epoch(net, &store, policy.form, event)?;
            event = false;
            losses.push(runner.curve.last().expect("epoch recorded").train_loss);
            if !last
                && plateau_reached(
                    &losses,
                    schedule.plateau_window,
                    schedule.plateau_rel_improvement,
                    schedule.min_gap,
                    schedule.max_gap,
                )
            {
                break;
            }
        }
        outcome.store = Some(store);
        outcome.thresholds = Some(thresholds);
    }
    outcome.curve = runner.curve;
    Ok(outcome)
}
