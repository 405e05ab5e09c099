//! `pgts`: train, evaluate and compare reshaped Thompson-sampling policies.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid config or arguments,
//! 3 training divergence.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pgts_core::report::{learning_curve_csv, pulls_csv, report_csv, report_json, variance_csv};
use pgts_core::{
    evaluate_policies, run_episode, run_variance_study, train_with, CurvePoint, EpisodeKey, Error,
    Estimator, ExperimentConfig, Instance, MetaParams, Phase, Policy, Preset, SamplingPolicy,
    Substream, VarianceStudy,
};

/// `println!` that ignores a closed stdout (e.g. when piped into `head`).
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "pgts",
    version,
    about = "Policy-gradient training of reshaped Thompson sampling for Gaussian bandits"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train meta-parameters by policy gradient; writes learning_curve.csv and checkpoint.json.
    Train(TrainArgs),
    /// Evaluate one policy; writes report.csv and report.json.
    Evaluate(PolicyArgs),
    /// Evaluate the baselines and any checkpoints on one shared batch and print a table.
    Compare(CompareArgs),
    /// Covariance traces of single-time gradient estimators; writes variance.csv.
    VarianceStudy(VarianceArgs),
    /// Mean pulls per arm, sorted descending; writes pulls.csv.
    PullHistogram(PolicyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Built-in experiment preset.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<PresetArg>,
    /// JSON experiment config (may itself name a preset).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override for this subcommand's random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Override the number of iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Override the batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Write `wall_ms = 0` so the learning curve is byte-reproducible.
    #[arg(long)]
    no_wall_clock: bool,
    /// After training, write this many evaluation episodes of the trained
    /// policy to trajectories.jsonl.
    #[arg(long, value_name = "N")]
    dump_trajectories: Option<u64>,
}

#[derive(Args)]
struct PolicyArgs {
    #[command(flatten)]
    common: Common,
    /// Baseline policy to evaluate.
    #[arg(long, value_enum, conflicts_with = "checkpoint")]
    policy: Option<BaselinePolicy>,
    /// Trained meta-parameters (checkpoint JSON).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of evaluation instances.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Trained checkpoints to include (repeatable).
    #[arg(long)]
    checkpoint: Vec<PathBuf>,
    /// Number of evaluation instances.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct VarianceArgs {
    #[command(flatten)]
    common: Common,
    /// Meta-parameters to study (default: canonical).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of samples (at least 10000).
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PresetArg {
    Standard,
    Hetero,
    ManyArms,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Standard => Preset::Standard,
            PresetArg::Hetero => Preset::Hetero,
            PresetArg::ManyArms => Preset::ManyArms,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum BaselinePolicy {
    NaiveTs,
    BayesUcb,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Diverged(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => CliError::Diverged(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let config = match (&common.config, common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            ExperimentConfig::from_json_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(p)) => Preset::from(p).config(),
        (None, None) => {
            return Err(CliError::Config(
                "one of --preset or --config is required".into(),
            ))
        }
    };
    Ok(config)
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> CliResult<PathBuf> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn load_checkpoint(path: &Path, config: &ExperimentConfig) -> CliResult<SamplingPolicy> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let params = MetaParams::from_json(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if params.arms() != config.bandit.arms() {
        return Err(CliError::Config(format!(
            "{}: checkpoint has {} arms, config has {}",
            path.display(),
            params.arms(),
            config.bandit.arms()
        )));
    }
    Ok(SamplingPolicy {
        params,
        decay: config.training.decay,
    })
}

fn checkpoint_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trained_ts".into())
}

fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let mut config = load_config(&args.common)?;
    if let Some(n) = args.iterations {
        config.training.iterations = n;
    }
    if let Some(b) = args.batch_size {
        config.training.batch_size = b;
    }
    if let Some(s) = args.common.seed {
        config.training.seed = s;
    }
    config.validate()?;
    let dir = out_dir(&args.common, &config)?;
    let run = config.training_run()?;
    eprintln!(
        "training {} for {} iterations x {} episodes",
        run.estimator, run.iterations, run.batch_size
    );
    let report_every = (run.iterations / 20).max(1);
    let outcome = train_with(
        &config.bandit,
        &run,
        config.training.seed,
        |p: &CurvePoint| {
            if p.iteration.is_multiple_of(report_every) || p.iteration == 1 {
                eprintln!(
                    "iter {:>5}  regret {:>10.4}  |grad| {:>10.4}",
                    p.iteration, p.batch_regret, p.grad_norm
                );
            }
        },
    )?;
    let mut curve = outcome.curve.clone();
    if args.no_wall_clock {
        curve.iter_mut().for_each(|p| p.wall_ms = 0.0);
    }
    write(&dir, "learning_curve.csv", &learning_curve_csv(&curve))?;
    write(
        &dir,
        "learning_curve.json",
        &serde_json::to_string_pretty(&curve).expect("curve serializes"),
    )?;
    write(&dir, "checkpoint.json", &outcome.params.to_json())?;
    for (iteration, params) in &outcome.checkpoints {
        write(
            &dir,
            &format!("checkpoint_{iteration:05}.json"),
            &params.to_json(),
        )?;
    }
    write(&dir, "config.json", &config.to_json_string())?;

    if let Some(n) = args.dump_trajectories {
        let policy = SamplingPolicy {
            params: outcome.params.clone(),
            decay: config.training.decay,
        };
        let mut lines = String::new();
        for i in 0..n {
            let key = EpisodeKey::new(config.evaluation.seed, Phase::Eval, 0, i);
            let instance = Instance::for_episode(&config.bandit, &key);
            let traj = run_episode(
                &policy,
                &config.bandit,
                &instance,
                &mut key.stream(Substream::Policy),
            )?;
            lines.push_str(&traj.to_json_line());
            lines.push('\n');
        }
        write(&dir, "trajectories.jsonl", &lines)?;
    }
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        outln!(
            "batch regret {:.4} -> {:.4} over {} iterations ({} episodes simulated)",
            first.batch_regret,
            last.batch_regret,
            curve.len(),
            outcome.episodes_simulated
        );
    }
    outln!("wrote {}", dir.display());
    Ok(())
}

fn eval_settings(common: &Common, n: Option<usize>) -> CliResult<(ExperimentConfig, u64, usize)> {
    let config = load_config(common)?;
    let seed = common.seed.unwrap_or(config.evaluation.seed);
    let n = n.unwrap_or(config.evaluation.n_instances);
    Ok((config, seed, n))
}

fn selected_policy(args: &PolicyArgs, config: &ExperimentConfig) -> CliResult<(String, Policy)> {
    Ok(match (&args.checkpoint, args.policy) {
        (Some(path), _) => (
            checkpoint_label(path),
            Policy::Reshaped(load_checkpoint(path, config)?),
        ),
        (None, Some(BaselinePolicy::NaiveTs)) => ("naive_ts".into(), Policy::NaiveTs),
        (None, Some(BaselinePolicy::BayesUcb)) => ("bayes_ucb".into(), Policy::BayesUcb),
        (None, None) => {
            return Err(CliError::Config(
                "one of --policy or --checkpoint is required".into(),
            ))
        }
    })
}

fn cmd_evaluate(args: PolicyArgs) -> CliResult<()> {
    let (config, seed, n) = eval_settings(&args.common, args.n)?;
    let policy = selected_policy(&args, &config)?;
    let reports = evaluate_policies(&[policy], &config.bandit, seed, n)?;
    let dir = out_dir(&args.common, &config)?;
    write(&dir, "report.csv", &report_csv(&reports))?;
    write(&dir, "report.json", &report_json(&reports))?;
    let r = &reports[0];
    outln!(
        "{}: regret {:.3} ({:.3}) over {} instances",
        r.policy,
        r.mean_regret,
        r.std_error,
        r.instances
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    let (config, seed, n) = eval_settings(&args.common, args.n)?;
    let mut policies = vec![
        ("naive_ts".to_string(), Policy::NaiveTs),
        ("bayes_ucb".to_string(), Policy::BayesUcb),
    ];
    for path in &args.checkpoint {
        policies.push((
            checkpoint_label(path),
            Policy::Reshaped(load_checkpoint(path, &config)?),
        ));
    }
    let reports = evaluate_policies(&policies, &config.bandit, seed, n)?;
    let dir = out_dir(&args.common, &config)?;
    write(&dir, "report.csv", &report_csv(&reports))?;
    write(&dir, "report.json", &report_json(&reports))?;

    let width = reports
        .iter()
        .map(|r| r.policy.len())
        .max()
        .unwrap_or(0)
        .max(9);
    let mut table = String::new();
    writeln!(
        table,
        "K={} T={} instances={n} seed={seed}",
        config.bandit.arms(),
        config.bandit.horizon()
    )
    .unwrap();
    writeln!(table, "{:<width$}  {:>18}", "algorithm", "regret (s.e.)").unwrap();
    for r in &reports {
        writeln!(
            table,
            "{:<width$}  {:>18}",
            r.policy,
            format!("{:.3} ({:.3})", r.mean_regret, r.std_error)
        )
        .unwrap();
    }
    outln!("{}", table.trim_end());
    Ok(())
}

fn cmd_variance_study(args: VarianceArgs) -> CliResult<()> {
    if args.n < 10_000 {
        return Err(CliError::Config(format!(
            "variance-study needs --n of at least 10000, got {}",
            args.n
        )));
    }
    let config = load_config(&args.common)?;
    let policy = match &args.checkpoint {
        Some(path) => load_checkpoint(path, &config)?,
        None => SamplingPolicy {
            params: pgts_core::canonical_meta_params(&config.bandit),
            decay: config.training.decay,
        },
    };
    let seed = args.common.seed.unwrap_or(config.evaluation.seed);
    let mut study = VarianceStudy::new(args.n, seed, Estimator::all());
    study.resamples = args.resamples;
    let started = Instant::now();
    let report = run_variance_study(&policy, &config.bandit, &study)?;
    let dir = out_dir(&args.common, &config)?;
    write(&dir, "variance.csv", &variance_csv(&report))?;
    write(
        &dir,
        "variance.json",
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    for row in &report.traces {
        outln!(
            "{:>5}/{:<6} trace {:.4e}  CI [{:.4e}, {:.4e}]",
            row.metric,
            row.baseline,
            row.trace,
            row.ci_low,
            row.ci_high
        );
    }
    for gap in &report.gaps {
        outln!(
            "{:>6}: {}-{} gap {:.4e}  CI [{:.4e}, {:.4e}]{}",
            gap.baseline,
            gap.higher,
            gap.lower,
            gap.gap,
            gap.ci_low,
            gap.ci_high,
            if gap.significant() {
                ""
            } else {
                "  (not significant)"
            }
        );
    }
    eprintln!(
        "{} samples in {:.1}s",
        args.n,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_pull_histogram(args: PolicyArgs) -> CliResult<()> {
    let (config, seed, n) = eval_settings(&args.common, args.n)?;
    let policy = selected_policy(&args, &config)?;
    let reports = evaluate_policies(&[policy], &config.bandit, seed, n)?;
    let histogram = reports[0].pull_histogram();
    let dir = out_dir(&args.common, &config)?;
    write(&dir, "pulls.csv", &pulls_csv(&histogram))?;
    write(
        &dir,
        "pulls.json",
        &serde_json::to_string_pretty(&histogram).expect("histogram serializes"),
    )?;
    for (rank, p) in histogram.iter().enumerate() {
        outln!("{:>3}  {p:.4}", rank + 1);
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::VarianceStudy(a) => cmd_variance_study(a),
        Command::PullHistogram(a) => cmd_pull_histogram(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Config(m) | CliError::Diverged(m) | CliError::Io(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
