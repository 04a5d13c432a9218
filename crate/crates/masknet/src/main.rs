use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use masknet::config::{parse_mode, RunConfig, TrainMode};
use masknet::error::{AppError, AppResult};
use masknet::experiment::{bench, mode_name, recovery_trials, train_run, ArmRun, Split, WallClock};
use masknet::maskfile::save_masks;
use masknet::model::{load_model, save_model, SavedModel};
use masknet::report::{bench_csv, bench_table, curve_csv, recovery_csv, residual_csv, write_text};
use masknet::suites;
use masknet::synth::SyntheticTeacherSpec;
use masknet_core::alternation::{evaluate, EvalMode, NullClock};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_RUNTIME: u8 = 5;

#[derive(Parser)]
#[command(name = "masknet", version, about = "Masked-network decoupling, recovery and alternation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every property suite; exits 1 if any fails.
    Verify {
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Compare masked forward passes with their decoupled form.
    DecoupleCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Two-layer recovery on synthetic teachers.
    Recover(RecoverArgs),
    /// Train one network and write its curve, model and masks.
    Train(TrainArgs),
    /// Classification error of a saved model.
    Eval(EvalArgs),
    /// Paired SGD and alternation runs with an epochs-to-target table.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (`key=value`); repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Training-set size (class-balanced subset).
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> AppResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("--set expects key=value, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(n) = self.limit {
            cfg.train_limit = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RecoverArgs {
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "8,6,4")]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 400)]
    samples: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 100)]
    heldout: usize,
    /// Minimum number of recovered seeds for exit code 0 (default: all).
    #[arg(long)]
    require: Option<usize>,
    /// RIP and residual summary CSV, one row per seed.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Objective per descent iteration CSV.
    #[arg(long)]
    residuals: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// sgd, i-alt or b-alt.
    #[arg(long)]
    mode: Option<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the final mask store here (alternation modes only).
    #[arg(long)]
    masks: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    Relu,
    Pht,
    Mask,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    mode: EvalKind,
    /// Evaluate on the training subset instead of the test subset.
    #[arg(long)]
    train: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Number of seeds, starting at the configured seed.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Alternation arms paired with SGD.
    #[arg(long, value_delimiter = ',', default_value = "i-alt")]
    arms: Vec<String>,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn exit_code(e: &AppError) -> u8 {
    match e {
        AppError::Config(_) => EXIT_CONFIG,
        AppError::Io { .. } | AppError::Format(_) => EXIT_IO,
        AppError::Core(_) => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// `Ok(false)` means a check ran and failed.
fn run(command: Command) -> AppResult<bool> {
    match command {
        Command::Verify { threads } => {
            let results = suites::all(threads)?;
            for r in &results {
                println!("{}", r.line());
            }
            Ok(results.iter().all(|r| r.passed))
        }
        Command::DecoupleCheck { trials, seed } => {
            let r = suites::decoupling(trials, seed)?;
            println!("{}", r.line());
            Ok(r.passed)
        }
        Command::Recover(a) => recover(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn recover(a: RecoverArgs) -> AppResult<bool> {
    let base = SyntheticTeacherSpec {
        widths: a.widths,
        density: a.density,
        samples: a.samples,
        seed: a.seed,
    };
    base.validate()?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let trials = recovery_trials(&base, &seeds, a.heldout, a.threads)?;
    for t in &trials {
        println!(
            "seed {}: residual {:.3e}, held-out {:.3e}, iterations {}, rip {} (sigma_min^2 {:.3e}, sigma_max^2 {:.3e}, m {}) {}",
            t.seed,
            t.relative_residual,
            t.heldout_error,
            t.history.len(),
            if t.rip.satisfied { "certified" } else { "not certified" },
            t.rip.sigma_min_sq,
            t.rip.sigma_max_sq,
            t.rip.m,
            if t.passed() { "ok" } else { "FAILED" }
        );
    }
    if let Some(p) = &a.report {
        write_text(p, &recovery_csv(&trials))?;
    }
    if let Some(p) = &a.residuals {
        write_text(p, &residual_csv(&trials))?;
    }
    let ok = trials.iter().filter(|t| t.passed()).count();
    let need = a.require.unwrap_or(trials.len());
    println!("{ok}/{} seeds recovered (need {need})", trials.len());
    Ok(ok >= need)
}

fn load_split(cfg: &RunConfig) -> AppResult<Split> {
    Split::load_mnist(&cfg.mnist_dir)?.subset(cfg.train_limit, cfg.test_limit, cfg.seed)
}

fn train(a: TrainArgs) -> AppResult<bool> {
    let mut cfg = a.cfg.resolve()?;
    if let Some(m) = &a.mode {
        cfg.mode = parse_mode(m)?;
    }
    if let Some(p) = a.curve {
        cfg.curve_csv = p;
    }
    if let Some(p) = a.model {
        cfg.model_out = p;
    }
    if a.print_config {
        print!("{}", cfg.to_text());
        return Ok(true);
    }
    let split = load_split(&cfg)?;
    let run = if cfg.wall_clock {
        train_run(&cfg, &split, &WallClock::start())?
    } else {
        train_run(&cfg, &split, &NullClock)?
    };
    print_run(&run);
    if !cfg.curve_csv.as_os_str().is_empty() {
        write_text(&cfg.curve_csv, &curve_csv(&run.curve))?;
    }
    if !cfg.model_out.as_os_str().is_empty() {
        save_model(
            &cfg.model_out,
            &SavedModel {
                net: run.net.clone(),
                sweep_thresholds: run.thresholds.clone(),
            },
        )?;
    }
    if let Some(p) = &a.masks {
        match &run.store {
            Some(store) => save_masks(p, store)?,
            None => return Err(AppError::Config("--masks needs an alternation mode (no sweep ran)".into())),
        }
    }
    Ok(true)
}

fn print_run(run: &ArmRun) {
    for r in &run.curve.records {
        println!(
            "epoch {:>3}  loss {:.6}  train_err {:.4}  test_err {}{}",
            r.epoch,
            r.train_loss,
            r.train_err,
            r.test_err.map_or("-".into(), |e| format!("{e:.4}")),
            if r.alternation_event { "  [mask sweep]" } else { "" }
        );
    }
    println!("{} final test error {:.4}", mode_name(run.mode), run.final_test_err);
    if let Some(e) = run.mask_test_err {
        println!("mask-only test error {e:.4}");
    }
}

fn eval(a: EvalArgs) -> AppResult<bool> {
    let cfg = a.cfg.resolve()?;
    let model = load_model(&a.model)?;
    let split = load_split(&cfg)?;
    let data = if a.train { &split.train } else { &split.test };
    let policy = cfg.policy();
    let mode = match a.mode {
        EvalKind::Relu => EvalMode::ActivationRelu,
        EvalKind::Pht => EvalMode::ActivationPht,
        EvalKind::Mask => {
            let t = model.sweep_thresholds.as_ref().ok_or_else(|| {
                AppError::Config(format!("{} has no sweep thresholds; mask evaluation needs a model trained with alternation", a.model.display()))
            })?;
            EvalMode::MaskOnly { policy: &policy, thresholds: t }
        }
    };
    let err = evaluate(&model.net, data, mode)?;
    println!("error {err:.6} on {} examples", data.len());
    Ok(true)
}

fn run_bench(a: BenchArgs) -> AppResult<bool> {
    let cfg = a.cfg.resolve()?;
    let arms = a.arms.iter().map(|s| parse_mode(s.trim())).collect::<AppResult<Vec<TrainMode>>>()?;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + a.seeds).collect();
    let data = Split::load_mnist(&cfg.mnist_dir)?;
    let results = if cfg.wall_clock {
        bench(&cfg, &data, &seeds, &arms, a.threads, WallClock::start)?
    } else {
        bench(&cfg, &data, &seeds, &arms, a.threads, || NullClock)?
    };
    print!("{}", bench_table(&results));
    if let Some(p) = &a.csv {
        write_text(p, &bench_csv(&results))?;
    }
    Ok(true)
}
