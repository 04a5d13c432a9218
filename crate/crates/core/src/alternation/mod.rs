//! Alternation training: closed-form support estimates, support sweeps over
//! a training set, fixed-mask SGD and the scheduler tying them together.

mod mask;
mod sweep;
mod trainer;

pub use mask::{
    brute_force_mask_oracle, estimate_mask_batch, estimate_mask_instance, estimate_mask_majority,
    mask_objective, BRUTE_FORCE_MAX_DIM,
};
pub use sweep::{
    sweep_masks, MaskKind, MaskPolicy, MaskRule, MaskSignal, MaskStore, MaskThresholds, StoreLayout,
    ThresholdRule,
};
pub use trainer::{
    alternate_train, evaluate, plateau_reached, sgd_fixed_masks, AlternationOutcome,
    AlternationSchedule, BetaInit, Clock, CurveLoss, EpochRecord, EvalMode, NullClock, SgdConfig,
    TrainingCurve,
};
