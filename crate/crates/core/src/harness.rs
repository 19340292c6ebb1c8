//! Experiment orchestration: seeded trials, checkpointed exact evaluation,
//! aggregation across trials and CSV/JSON output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::diagnostic_snapshot;
use crate::dynamics::{Simulation, StepSchedule};
use crate::equilibrium::{epsilon_threshold, nash_gap, Aggregation};
use crate::error::{Error, Result};
use crate::game::{
    build_effective_game, generate_random_game, load_game, validate_game, GameClass, GameSpec, StochasticGame,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameSource {
    Generate { spec: GameSpec, seed: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointRule {
    /// `count` stages log-spaced from `start` to the final stage, rounded
    /// and deduplicated.
    LogSpaced {
        count: usize,
        start: u64,
    },
    Explicit {
        stages: Vec<u64>,
    },
}

impl Default for CheckpointRule {
    fn default() -> Self {
        CheckpointRule::LogSpaced { count: 40, start: 100 }
    }
}

fn default_tolerance() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub epsilon: f64,
    pub schedule: StepSchedule<f64>,
    pub total_stages: u64,
    pub n_trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub checkpoints: CheckpointRule,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default)]
    pub aggregation: Aggregation,
    pub output_dir: PathBuf,
    /// Best-response tolerance used in every gap evaluation.
    #[serde(default = "default_tolerance")]
    pub eval_tolerance: f64,
    /// Enforce the stricter step-exponent condition on identical-interest games.
    #[serde(default)]
    pub strict_schedule: bool,
}

impl ExperimentConfig {
    /// Three states, three actions per agent, `γ = 0.8`, `ε = 0.002`, the
    /// standard step schedule and 10 trials of `10^7` stages.
    pub fn standard(class: GameClass, n_agents: usize, game_seed: u64) -> Self {
        Self {
            game: GameSource::Generate {
                spec: GameSpec::new(vec![3; n_agents], 3, 0.8, class),
                seed: game_seed,
            },
            epsilon: 0.002,
            schedule: StepSchedule::standard(),
            total_stages: 10_000_000,
            n_trials: 10,
            base_seed: 0,
            checkpoints: CheckpointRule::default(),
            diagnostics: false,
            aggregation: Aggregation::MaxOverStates,
            output_dir: PathBuf::from("out"),
            eval_tolerance: default_tolerance(),
            strict_schedule: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_stages < 1 {
            return Err(Error::Config("total_stages must be at least 1".into()));
        }
        if self.n_trials < 1 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} outside (0, 1)", self.epsilon)));
        }
        if !(self.eval_tolerance > 0.0) {
            return Err(Error::Config("eval_tolerance must be positive".into()));
        }
        self.schedule.validate()?;
        match &self.checkpoints {
            CheckpointRule::LogSpaced { count, .. } if *count == 0 => {
                return Err(Error::Config("checkpoint count must be positive".into()))
            }
            CheckpointRule::Explicit { stages } => {
                if stages.is_empty() {
                    return Err(Error::Config("explicit checkpoint list is empty".into()));
                }
                if stages.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("checkpoints must be strictly increasing".into()));
                }
                if stages.last().is_some_and(|&k| k > self.total_stages) {
                    return Err(Error::Config("checkpoint beyond total_stages".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Sorted checkpoint stages within `[0, total_stages]`.
    pub fn checkpoint_stages(&self) -> Vec<u64> {
        match &self.checkpoints {
            CheckpointRule::Explicit { stages } => stages.clone(),
            CheckpointRule::LogSpaced { count, start } => log_spaced(*start, self.total_stages, *count),
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn load_game(&self) -> Result<StochasticGame<f64>> {
        match &self.game {
            GameSource::Generate { spec, seed } => generate_random_game(spec, *seed),
            GameSource::File { path } => load_game(path),
        }
    }
}

fn log_spaced(start: u64, end: u64, count: usize) -> Vec<u64> {
    let start = start.max(1);
    if count <= 1 || start >= end {
        return vec![end];
    }
    let (lo, hi) = ((start as f64).log10(), (end as f64).log10());
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
            (10f64.powf(x).round() as u64).clamp(start, end)
        })
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointDiagnostics {
    pub mean_tracking: f64,
    pub mean_mismatch: Option<f64>,
    /// `[agent][s * n_joint + a]`
    pub global_q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub k: u64,
    pub nash_gap: f64,
    pub effective_nash_gap: f64,
    pub diagnostics: Option<CheckpointDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub trial: usize,
    pub seed: u64,
    pub checkpoints: Vec<CheckpointRecord>,
    pub wall_time_secs: f64,
}

impl TrialLog {
    pub fn at(&self, k: u64) -> Option<&CheckpointRecord> {
        self.checkpoints.iter().find(|c| c.k == k)
    }

    /// Global-Q tables flattened per checkpoint, for the backslide monitor.
    pub fn global_q_history(&self) -> Option<Vec<Vec<f64>>> {
        self.checkpoints
            .iter()
            .map(|c| c.diagnostics.as_ref().map(|d| d.global_q.concat()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: u64,
    pub mean_gap: f64,
    pub std_gap: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub logs: Vec<TrialLog>,
    pub summary: Vec<SummaryRow>,
    pub threshold: f64,
}

/// A validated configuration with its game, effective game and threshold.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub game: StochasticGame<f64>,
    effective: StochasticGame<f64>,
    pub threshold: f64,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let game = config.load_game()?;
        Self::with_game(config, game)
    }

    /// Uses `game` in place of the configured source.
    pub fn with_game(config: ExperimentConfig, game: StochasticGame<f64>) -> Result<Self> {
        config.validate()?;
        validate_game(&game)?.into_result()?;
        config
            .schedule
            .validate_for(game.game_class(), config.strict_schedule)?;
        let effective = build_effective_game(&game, &config.epsilon)?;
        let threshold = epsilon_threshold(&game, &config.epsilon)?;
        Ok(Self {
            config,
            game,
            effective,
            threshold,
        })
    }

    /// Runs trial `trial` and evaluates every checkpoint exactly. The
    /// learners never see evaluation results.
    pub fn run_trial(&self, trial: usize) -> Result<TrialLog> {
        let start = Instant::now();
        let cfg = &self.config;
        let seed = cfg.trial_seed(trial);
        let mut sim = Simulation::new(&self.game, cfg.epsilon, cfg.schedule, seed)?;
        let mut checkpoints = Vec::new();
        for k in cfg.checkpoint_stages() {
            sim.run_until(k)?;
            let pi = sim.pi_profile();
            let mu = sim.mu_profile();
            let gap = nash_gap(&self.game, &pi, cfg.eval_tolerance, cfg.aggregation)?.nash_gap;
            let effective_gap = nash_gap(&self.effective, &mu, cfg.eval_tolerance, cfg.aggregation)?.nash_gap;
            let diagnostics = if cfg.diagnostics {
                let snap = diagnostic_snapshot(&self.game, sim.learners(), k)?;
                Some(CheckpointDiagnostics {
                    mean_tracking: snap.mean_tracking(),
                    mean_mismatch: snap.mean_mismatch(),
                    global_q: snap.global_q,
                })
            } else {
                None
            };
            checkpoints.push(CheckpointRecord {
                k,
                nash_gap: gap,
                effective_nash_gap: effective_gap,
                diagnostics,
            });
        }
        Ok(TrialLog {
            trial,
            seed,
            checkpoints,
            wall_time_secs: start.elapsed().as_secs_f64(),
        })
    }

    /// All trials, in parallel, ordered by trial index.
    pub fn run(&self) -> Result<ExperimentResult> {
        let logs = (0..self.config.n_trials)
            .into_par_iter()
            .map(|i| {
                self.run_trial(i).map_err(|e| Error::Trial {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = summarize(&trial_rows(&logs), self.threshold);
        Ok(ExperimentResult {
            logs,
            summary,
            threshold: self.threshold,
        })
    }
}

pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialLog> {
    Experiment::new(config.clone())?.run_trial(trial)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    Experiment::new(config.clone())?.run()
}

/// One row of `trials.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub k: u64,
    pub trial: usize,
    pub nash_gap: f64,
    pub effective_nash_gap: f64,
}

pub fn trial_rows(logs: &[TrialLog]) -> Vec<TrialRow> {
    let mut rows: Vec<TrialRow> = logs
        .iter()
        .flat_map(|log| {
            log.checkpoints.iter().map(move |c| TrialRow {
                k: c.k,
                trial: log.trial,
                nash_gap: c.nash_gap,
                effective_nash_gap: c.effective_nash_gap,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.k, r.trial));
    rows
}

/// Mean and sample standard deviation of the Nash gap per checkpoint.
pub fn summarize(rows: &[TrialRow], threshold: f64) -> Vec<SummaryRow> {
    let mut sorted: Vec<&TrialRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.k, r.trial));
    sorted
        .chunk_by(|a, b| a.k == b.k)
        .map(|group| {
            let n = group.len() as f64;
            let mean = group.iter().map(|r| r.nash_gap).sum::<f64>() / n;
            let var = if group.len() > 1 {
                group.iter().map(|r| (r.nash_gap - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            SummaryRow {
                k: group[0].k,
                mean_gap: mean,
                std_gap: var.sqrt(),
                threshold,
            }
        })
        .collect()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn csv_bytes<S: Serialize>(rows: &[S]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

pub fn write_trials_csv(path: &Path, rows: &[TrialRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<TrialRow>, _>>()
        .map_err(Error::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub finished_unix_secs: u64,
    pub trial_wall_secs: Vec<f64>,
}

/// Contents of `run.json`. Everything except `timing` is a pure function of
/// the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub version: String,
    pub timing: RunTiming,
}

impl RunMetadata {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputManifest {
    pub trials_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub run_json: PathBuf,
}

pub fn write_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<OutputManifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = OutputManifest {
        trials_csv: dir.join("trials.csv"),
        summary_csv: dir.join("summary.csv"),
        run_json: dir.join("run.json"),
    };
    write_trials_csv(&manifest.trials_csv, &trial_rows(&result.logs))?;
    write_summary_csv(&manifest.summary_csv, &result.summary)?;
    let meta = RunMetadata {
        config: config.clone(),
        seeds: result.logs.iter().map(|l| l.seed).collect(),
        threshold: result.threshold,
        version: env!("CARGO_PKG_VERSION").to_string(),
        timing: RunTiming {
            finished_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            trial_wall_secs: result.logs.iter().map(|l| l.wall_time_secs).collect(),
        },
    };
    write_atomic(&manifest.run_json, serde_json::to_string_pretty(&meta)?.as_bytes())?;
    Ok(manifest)
}
