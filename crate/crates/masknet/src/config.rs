//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors; missing
//! keys take the defaults printed by `masknet train --print-config`.
//! [`RunConfig::to_text`] writes every key in a fixed order, so
//! write, read, write is byte-identical.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use masknet_core::alternation::{
    AlternationSchedule, BetaInit, CurveLoss, MaskKind, MaskPolicy, MaskRule, MaskSignal, SgdConfig,
    ThresholdRule,
};
use masknet_core::network::{LayerSpec, LossKind, NetworkParams};
use masknet_core::Nonlinearity;

use crate::error::{AppError, AppResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    Sgd,
    IAlt,
    BAlt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaSource {
    Network,
    Percentile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: TrainMode,
    pub widths: Vec<usize>,
    /// Weights start as `N(0, gain²/fan_in)`.
    pub init_gain: f64,
    pub activation: Nonlinearity,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub plateau_window: usize,
    pub plateau_rel_improvement: f64,
    pub min_gap: usize,
    pub max_gap: usize,
    pub max_alternations: usize,
    pub total_epochs: usize,
    pub mask_batch_size: usize,
    pub mask_rule: MaskRule,
    pub mask_signal: MaskSignal,
    pub threshold_rule: ThresholdRule,
    pub majority_vote: bool,
    pub beta_init: BetaSource,
    pub beta_percentile: f64,
    pub curve_loss: CurveLoss,
    pub seed: u64,
    /// Stamp curve rows with elapsed milliseconds; off keeps curves
    /// reproducible byte for byte.
    pub wall_clock: bool,
    pub train_limit: usize,
    pub test_limit: usize,
    pub mnist_dir: PathBuf,
    /// Empty means "do not write".
    pub curve_csv: PathBuf,
    pub model_out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::IAlt,
            widths: vec![784, 256, 64, 10],
            init_gain: std::f64::consts::SQRT_2,
            activation: Nonlinearity::Relu,
            loss: LossKind::SoftmaxCrossEntropy,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 64,
            weight_decay: 0.0,
            warmup_epochs: 8,
            plateau_window: 3,
            plateau_rel_improvement: 1e-3,
            min_gap: 4,
            max_gap: 50,
            max_alternations: 3,
            total_epochs: 20,
            mask_batch_size: 64,
            mask_rule: MaskRule::Reconstruction,
            mask_signal: MaskSignal::Rectified,
            threshold_rule: ThresholdRule::Beta,
            majority_vote: false,
            beta_init: BetaSource::Percentile,
            beta_percentile: 5.0,
            curve_loss: CurveLoss::Training,
            seed: 0,
            wall_clock: false,
            train_limit: 10_000,
            test_limit: 2_000,
            mnist_dir: PathBuf::from("data/mnist"),
            curve_csv: PathBuf::new(),
            model_out: PathBuf::new(),
        }
    }
}

fn word<T: Copy + PartialEq>(table: &[(&'static str, T)], v: T) -> &'static str {
    table.iter().find(|(_, t)| *t == v).expect("every variant is named").0
}

fn parse_word<T: Copy>(table: &[(&'static str, T)], key: &str, s: &str) -> AppResult<T> {
    table.iter().find(|(n, _)| *n == s).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        AppError::Config(format!("{key}: expected one of {}, got {s:?}", names.join(" | ")))
    })
}

const MODES: &[(&str, TrainMode)] = &[("sgd", TrainMode::Sgd), ("i-alt", TrainMode::IAlt), ("b-alt", TrainMode::BAlt)];
const NONLINEARITIES: &[(&str, Nonlinearity)] = &[("relu", Nonlinearity::Relu), ("pht", Nonlinearity::Pht)];
const LOSSES: &[(&str, LossKind)] = &[
    ("cross_entropy", LossKind::SoftmaxCrossEntropy),
    ("least_squares", LossKind::LeastSquares),
];
const RULES: &[(&str, MaskRule)] = &[("reconstruction", MaskRule::Reconstruction), ("gate", MaskRule::Gate)];
const SIGNALS: &[(&str, MaskSignal)] = &[
    ("preactivation", MaskSignal::PreActivation),
    ("rectified", MaskSignal::Rectified),
];
const THRESHOLDS: &[(&str, ThresholdRule)] = &[
    ("beta", ThresholdRule::Beta),
    ("sqrt_two_beta", ThresholdRule::SqrtTwoBeta),
];
const BETA_SOURCES: &[(&str, BetaSource)] = &[("network", BetaSource::Network), ("percentile", BetaSource::Percentile)];
const CURVE_LOSSES: &[(&str, CurveLoss)] = &[("training", CurveLoss::Training), ("activation", CurveLoss::Activation)];
const BOOLS: &[(&str, bool)] = &[("true", true), ("false", false)];

pub fn parse_mode(s: &str) -> AppResult<TrainMode> {
    parse_word(MODES, "mode", s)
}

fn number<T: FromStr>(key: &str, s: &str) -> AppResult<T>
where
    T::Err: Display,
{
    s.parse().map_err(|e| AppError::Config(format!("{key}: cannot parse {s:?}: {e}")))
}

impl RunConfig {
    pub fn to_text(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        let lines: Vec<(&str, String)> = vec![
            ("mode", word(MODES, self.mode).into()),
            ("widths", widths.join(",")),
            ("init_gain", self.init_gain.to_string()),
            ("activation", word(NONLINEARITIES, self.activation).into()),
            ("loss", word(LOSSES, self.loss).into()),
            ("learning_rate", self.learning_rate.to_string()),
            ("momentum", self.momentum.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("weight_decay", self.weight_decay.to_string()),
            ("warmup_epochs", self.warmup_epochs.to_string()),
            ("plateau_window", self.plateau_window.to_string()),
            ("plateau_rel_improvement", self.plateau_rel_improvement.to_string()),
            ("min_gap", self.min_gap.to_string()),
            ("max_gap", self.max_gap.to_string()),
            ("max_alternations", self.max_alternations.to_string()),
            ("total_epochs", self.total_epochs.to_string()),
            ("mask_batch_size", self.mask_batch_size.to_string()),
            ("mask_rule", word(RULES, self.mask_rule).into()),
            ("mask_signal", word(SIGNALS, self.mask_signal).into()),
            ("threshold_rule", word(THRESHOLDS, self.threshold_rule).into()),
            ("majority_vote", word(BOOLS, self.majority_vote).into()),
            ("beta_init", word(BETA_SOURCES, self.beta_init).into()),
            ("beta_percentile", self.beta_percentile.to_string()),
            ("curve_loss", word(CURVE_LOSSES, self.curve_loss).into()),
            ("seed", self.seed.to_string()),
            ("wall_clock", word(BOOLS, self.wall_clock).into()),
            ("train_limit", self.train_limit.to_string()),
            ("test_limit", self.test_limit.to_string()),
            ("mnist_dir", self.mnist_dir.display().to_string()),
            ("curve_csv", self.curve_csv.display().to_string()),
            ("model_out", self.model_out.display().to_string()),
        ];
        lines
            .iter()
            .map(|(k, v)| if v.is_empty() { format!("{k} =\n") } else { format!("{k} = {v}\n") })
            .collect()
    }

    pub fn from_text(text: &str) -> AppResult<Self> {
        let mut c = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, v: &str) -> AppResult<()> {
        match key {
            "mode" => self.mode = parse_word(MODES, key, v)?,
            "widths" => {
                self.widths = v
                    .split(',')
                    .map(|w| number(key, w.trim()))
                    .collect::<AppResult<_>>()?
            }
            "init_gain" => self.init_gain = number(key, v)?,
            "activation" => self.activation = parse_word(NONLINEARITIES, key, v)?,
            "loss" => self.loss = parse_word(LOSSES, key, v)?,
            "learning_rate" => self.learning_rate = number(key, v)?,
            "momentum" => self.momentum = number(key, v)?,
            "batch_size" => self.batch_size = number(key, v)?,
            "weight_decay" => self.weight_decay = number(key, v)?,
            "warmup_epochs" => self.warmup_epochs = number(key, v)?,
            "plateau_window" => self.plateau_window = number(key, v)?,
            "plateau_rel_improvement" => self.plateau_rel_improvement = number(key, v)?,
            "min_gap" => self.min_gap = number(key, v)?,
            "max_gap" => self.max_gap = number(key, v)?,
            "max_alternations" => self.max_alternations = number(key, v)?,
            "total_epochs" => self.total_epochs = number(key, v)?,
            "mask_batch_size" => self.mask_batch_size = number(key, v)?,
            "mask_rule" => self.mask_rule = parse_word(RULES, key, v)?,
            "mask_signal" => self.mask_signal = parse_word(SIGNALS, key, v)?,
            "threshold_rule" => self.threshold_rule = parse_word(THRESHOLDS, key, v)?,
            "majority_vote" => self.majority_vote = parse_word(BOOLS, key, v)?,
            "beta_init" => self.beta_init = parse_word(BETA_SOURCES, key, v)?,
            "beta_percentile" => self.beta_percentile = number(key, v)?,
            "curve_loss" => self.curve_loss = parse_word(CURVE_LOSSES, key, v)?,
            "seed" => self.seed = number(key, v)?,
            "wall_clock" => self.wall_clock = parse_word(BOOLS, key, v)?,
            "train_limit" => self.train_limit = number(key, v)?,
            "test_limit" => self.test_limit = number(key, v)?,
            "mnist_dir" => self.mnist_dir = PathBuf::from(v),
            "curve_csv" => self.curve_csv = PathBuf::from(v),
            "model_out" => self.model_out = PathBuf::from(v),
            _ => return Err(AppError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> AppResult<()> {
        std::fs::write(path, self.to_text()).map_err(|e| AppError::io(path, e))
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(AppError::Config("widths needs at least two positive entries".into()));
        }
        if !(self.init_gain.is_finite() && self.init_gain > 0.0) {
            return Err(AppError::Config("init_gain must be positive".into()));
        }
        if !(0.0..=100.0).contains(&self.beta_percentile) {
            return Err(AppError::Config("beta_percentile must lie in [0, 100]".into()));
        }
        if self.train_limit == 0 || self.test_limit == 0 {
            return Err(AppError::Config("train_limit and test_limit must be positive".into()));
        }
        let invalid = |e: masknet_core::Error| AppError::Config(e.to_string());
        self.schedule().validate().map_err(invalid)?;
        self.policy().validate().map_err(invalid)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        NetworkParams::dense_specs(&self.widths)
    }

    pub fn schedule(&self) -> AlternationSchedule {
        AlternationSchedule {
            warmup_epochs: self.warmup_epochs,
            plateau_window: self.plateau_window,
            plateau_rel_improvement: self.plateau_rel_improvement,
            min_gap: self.min_gap,
            max_gap: self.max_gap,
            max_alternations: match self.mode {
                TrainMode::Sgd => 0,
                _ => self.max_alternations,
            },
            total_epochs: self.total_epochs,
            sgd: SgdConfig {
                learning_rate: self.learning_rate,
                momentum: self.momentum,
                batch_size: self.batch_size,
                weight_decay: self.weight_decay,
                loss: self.loss,
            },
            activation: self.activation,
            beta_init: match self.beta_init {
                BetaSource::Network => BetaInit::NetworkBeta,
                BetaSource::Percentile => BetaInit::Percentile(self.beta_percentile),
            },
            curve_loss: self.curve_loss,
            seed: self.seed,
        }
    }

    pub fn policy(&self) -> MaskPolicy {
        MaskPolicy {
            kind: match self.mode {
                TrainMode::BAlt => MaskKind::Batch {
                    batch_size: self.mask_batch_size,
                },
                _ => MaskKind::Instance,
            },
            rule: self.mask_rule,
            signal: self.mask_signal,
            threshold_rule: self.threshold_rule,
            majority_vote: self.majority_vote,
            form: self.activation,
        }
    }
}
