//! `adc`: generate games, run experiments, evaluate profiles, rebuild summaries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adc_core::equilibrium::{nash_gap, nash_gap_report};
use adc_core::game::{load_game, save_game};
use adc_core::harness::{read_trials_csv, summarize, write_outputs, write_summary_csv, Experiment, RunMetadata};
use adc_core::{Aggregation, Error, ExperimentConfig, GameClass, GameSpec, Profile, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "adc",
    version,
    about = "Actor-dual-critic learning in tabular stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random game and write it as JSON.
    Generate(GenerateArgs),
    /// Run an experiment from a JSON config.
    Run(RunArgs),
    /// Nash gap of a strategy profile in a game.
    Eval(EvalArgs),
    /// Recompute summary.csv from trials.csv.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    ZeroSum,
    IdenticalInterest,
    General,
}

impl From<ClassArg> for GameClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::ZeroSum => GameClass::ZeroSum,
            ClassArg::IdenticalInterest => GameClass::IdenticalInterest,
            ClassArg::General => GameClass::General,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Max,
    Uniform,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Max => Aggregation::MaxOverStates,
            AggregationArg::Uniform => Aggregation::UniformInitial,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Game spec JSON; replaces the shape flags below.
    #[arg(long, conflicts_with_all = ["actions", "states", "gamma", "class"])]
    spec: Option<PathBuf>,
    /// Action count per agent, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    actions: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    states: usize,
    #[arg(long, default_value_t = 0.8)]
    gamma: f64,
    #[arg(long, value_enum, default_value = "zero-sum")]
    class: ClassArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    stages: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    game: PathBuf,
    /// Profile JSON: `{"strategies": [[[...]]]}` or the bare nested array.
    #[arg(long)]
    profile: PathBuf,
    /// Treat the profile as exploration-free and also report the perturbed
    /// and effective gaps with the threshold.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum, default_value = "max")]
    aggregation: AggregationArg,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    trials: PathBuf,
    /// Threshold column; read from run.json beside the trials file if omitted.
    #[arg(long)]
    threshold: Option<f64>,
    /// Defaults to summary.csv beside the trials file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn generate(args: GenerateArgs) -> Result<serde_json::Value> {
    let spec = match &args.spec {
        Some(path) => read_json(path)?,
        None => GameSpec::new(args.actions, args.states, args.gamma, args.class.into()),
    };
    let game = adc_core::generate_random_game(&spec, args.seed)?;
    save_game(&game, &args.out)?;
    Ok(json!({ "game": args.out, "seed": args.seed, "spec": spec }))
}

fn run(args: RunArgs) -> Result<serde_json::Value> {
    let mut config: ExperimentConfig = read_json(&args.config)?;
    if let Some(stages) = args.stages {
        config.total_stages = stages;
    }
    if let Some(trials) = args.trials {
        config.n_trials = trials;
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(eps) = args.epsilon {
        config.epsilon = eps;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let result = Experiment::new(config.clone())?.run()?;
    let manifest = write_outputs(&result, &config, &config.output_dir)?;
    let last = result.summary.last();
    Ok(json!({
        "trials_csv": manifest.trials_csv,
        "summary_csv": manifest.summary_csv,
        "run_json": manifest.run_json,
        "threshold": result.threshold,
        "final": last,
    }))
}

fn load_profile(path: &Path) -> Result<Profile> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_array() {
        Ok(Profile::new(serde_json::from_value(value)?))
    } else {
        Ok(serde_json::from_value(value)?)
    }
}

fn eval(args: EvalArgs) -> Result<serde_json::Value> {
    let game = load_game(&args.game)?;
    let profile = load_profile(&args.profile)?;
    let agg = args.aggregation.into();
    let report = match args.epsilon {
        Some(eps) => nash_gap_report(&game, &profile, eps, args.tolerance, agg)?,
        None => nash_gap(&game, &profile, args.tolerance, agg)?,
    };
    Ok(serde_json::to_value(report)?)
}

fn report(args: ReportArgs) -> Result<serde_json::Value> {
    let threshold = match args.threshold {
        Some(t) => t,
        None => {
            let meta = sibling(&args.trials, "run.json");
            if !meta.exists() {
                return Err(Error::Config(format!(
                    "no --threshold given and {} does not exist",
                    meta.display()
                )));
            }
            RunMetadata::load(&meta)?.threshold
        }
    };
    let rows = read_trials_csv(&args.trials)?;
    let summary = summarize(&rows, threshold);
    let out = args.out.unwrap_or_else(|| sibling(&args.trials, "summary.csv"));
    write_summary_csv(&out, &summary)?;
    Ok(json!({ "summary_csv": out, "rows": summary.len() }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable output"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
