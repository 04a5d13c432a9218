//! CSV writers for curves, recovery reports and benchmark tables.
//!
//! Floats are written in shortest round-trip scientific notation, so equal
//! values always print identically and parse back exactly.

use std::path::Path;

use masknet_core::alternation::TrainingCurve;

use crate::error::{AppError, AppResult};
use crate::experiment::{BenchSeed, RecoveryTrial};

pub const CURVE_HEADER: [&str; 6] = ["epoch", "train_loss", "train_err", "test_err", "wall_ms", "alternation_event"];
pub const RECOVERY_HEADER: [&str; 10] = [
    "seed",
    "m",
    "sigma_min_sq",
    "sigma_max_sq",
    "epsilon_max",
    "rip_satisfied",
    "scale",
    "relative_residual",
    "heldout_error",
    "iterations",
];
pub const RESIDUAL_HEADER: [&str; 3] = ["seed", "iteration", "objective"];
pub const BENCH_HEADER: [&str; 11] = [
    "seed",
    "arm",
    "target_loss",
    "sgd_epochs",
    "arm_epochs",
    "ratio",
    "sgd_test_err",
    "arm_test_err",
    "arm_mask_test_err",
    "arm_maskt_test_err",
    "alternations",
];

fn table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("ascii output")
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn curve_csv(curve: &TrainingCurve) -> String {
    table(
        &CURVE_HEADER,
        curve.records.iter().map(|r| {
            [
                r.epoch.to_string(),
                num(r.train_loss),
                num(r.train_err),
                opt_num(r.test_err),
                r.wall_ms.to_string(),
                u8::from(r.alternation_event).to_string(),
            ]
        }),
    )
}

pub fn recovery_csv(trials: &[RecoveryTrial]) -> String {
    table(
        &RECOVERY_HEADER,
        trials.iter().map(|t| {
            [
                t.seed.to_string(),
                t.rip.m.to_string(),
                num(t.rip.sigma_min_sq),
                num(t.rip.sigma_max_sq),
                opt_num(t.rip.epsilon_max),
                u8::from(t.rip.satisfied).to_string(),
                num(t.scale),
                num(t.relative_residual),
                num(t.heldout_error),
                t.history.len().to_string(),
            ]
        }),
    )
}

pub fn residual_csv(trials: &[RecoveryTrial]) -> String {
    table(
        &RESIDUAL_HEADER,
        trials.iter().flat_map(|t| {
            t.history
                .iter()
                .enumerate()
                .map(move |(i, f)| [t.seed.to_string(), i.to_string(), num(*f)])
        }),
    )
}

pub fn bench_csv(seeds: &[BenchSeed]) -> String {
    table(
        &BENCH_HEADER,
        seeds.iter().flat_map(|s| {
            s.arms.iter().map(move |a| {
                [
                    s.seed.to_string(),
                    a.mode_name().to_string(),
                    num(s.target_loss()),
                    s.sgd_epochs().to_string(),
                    s.epochs_to_target(a).map(|e| e.to_string()).unwrap_or_default(),
                    opt_num(s.ratio(a)),
                    num(s.sgd().final_test_err),
                    num(a.final_test_err),
                    opt_num(a.mask_test_err),
                    opt_num(a.maskt_test_err),
                    a.curve.alternation_epochs().len().to_string(),
                ]
            })
        }),
    )
}

/// Fixed-width summary printed by `bench`.
pub fn bench_table(seeds: &[BenchSeed]) -> String {
    let mut out = format!(
        "{:>6} {:>6} {:>12} {:>10} {:>10} {:>7} {:>9} {:>9} {:>9} {:>9}\n",
        "seed", "arm", "target_loss", "sgd_epochs", "arm_epochs", "ratio", "sgd_err", "arm_err", "mask_err", "maskt_err"
    );
    let pct = |v: f64| format!("{:.2}%", 100.0 * v);
    for s in seeds {
        for a in &s.arms {
            out += &format!(
                "{:>6} {:>6} {:>12.3e} {:>10} {:>10} {:>7} {:>9} {:>9} {:>9} {:>9}\n",
                s.seed,
                a.mode_name(),
                s.target_loss(),
                s.sgd_epochs(),
                s.epochs_to_target(a).map_or("-".into(), |e| e.to_string()),
                s.ratio(a).map_or("-".into(), |r| format!("{r:.3}")),
                pct(s.sgd().final_test_err),
                pct(a.final_test_err),
                a.mask_test_err.map_or("-".into(), pct),
                a.maskt_test_err.map_or("-".into(), pct),
            );
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}
