//! Monte Carlo experiments: every configured algorithm runs from the same
//! initial point within a trial, traces and a summary are written to disk.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix_market::load_matrix;
use super::synthetic::generate_synthetic;
use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::nmf::NmfProblem;
use crate::solvers::{
    run, ArmijoParams, BlockSchedule, IterUnit, IterationRecord, Method, RunTrace, SolverConfig, StepPolicy,
};

/// Environment variable read when no job count is given.
pub const JOBS_ENV: &str = "B2B_JOBS";

pub const TRACE_HEADER: [&str; 9] = [
    "iter",
    "block_updates",
    "elapsed_s",
    "objective",
    "rel_residual",
    "proj_grad_norm",
    "rel_proj_grad",
    "chosen_block",
    "alpha",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "pg")]
    Pg,
    #[serde(rename = "bpg")]
    Bpg,
    #[serde(rename = "cbbcd")]
    Cbbcd,
    #[serde(rename = "gb2b")]
    Gb2b,
    #[serde(rename = "rb2b")]
    Rb2b,
    #[serde(rename = "b2b-ls")]
    B2bLs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pg,
        Algorithm::Bpg,
        Algorithm::Cbbcd,
        Algorithm::Gb2b,
        Algorithm::Rb2b,
        Algorithm::B2bLs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pg => "pg",
            Algorithm::Bpg => "bpg",
            Algorithm::Cbbcd => "cbbcd",
            Algorithm::Gb2b => "gb2b",
            Algorithm::Rb2b => "rb2b",
            Algorithm::B2bLs => "b2b-ls",
        }
    }

    /// Solver configuration; `rng_seed` drives the randomized schedule.
    ///
    /// PG and BPG use the default Armijo search, CBBCD `0.99/L`, GB2B and
    /// RB2B the unit stepsize `α*`, and b2b-ls greedy selection with
    /// `σ = 0.1, τ = 0.5, α₀ = 1`.
    pub fn solver_config(&self, rng_seed: u64) -> SolverConfig {
        let armijo = StepPolicy::armijo(ArmijoParams::default());
        let (method, policy) = match self {
            Algorithm::Pg => (Method::ProjectedGradient, armijo),
            Algorithm::Bpg => (Method::BregmanProximalGradient, armijo),
            Algorithm::Cbbcd => (Method::CyclicBbcd, StepPolicy::OptimalConstant),
            Algorithm::Gb2b => (Method::B2b(BlockSchedule::Greedy), StepPolicy::OptimalConstant),
            Algorithm::Rb2b => (
                Method::B2b(BlockSchedule::Randomized { seed: rng_seed }),
                StepPolicy::OptimalConstant,
            ),
            Algorithm::B2bLs => (Method::B2b(BlockSchedule::Greedy), armijo),
        };
        SolverConfig::new(method, policy)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (expected pg, bpg, cbbcd, gb2b, rb2b, b2b-ls)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataSource {
    File(PathBuf),
    Synthetic {
        m: usize,
        n: usize,
        rank: usize,
        noise: f64,
        seed: u64,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<DataMatrix> {
        match self {
            DataSource::File(p) => load_matrix(p),
            DataSource::Synthetic {
                m,
                n,
                rank,
                noise,
                seed,
            } => Ok(generate_synthetic(*m, *n, *rank, *noise, *seed)?.a.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub rank: usize,
    pub algorithms: Vec<Algorithm>,
    pub epsilon: f64,
    pub max_iter: usize,
    pub iter_unit: IterUnit,
    pub trials: usize,
    pub seed: u64,
    pub assertions: bool,
    /// Where traces and the summary go; nothing is written when `None`.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; falls back to `B2B_JOBS`, then to the rayon default.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(data: DataSource, rank: usize) -> Self {
        Self {
            data,
            rank,
            algorithms: Algorithm::ALL.to_vec(),
            epsilon: 1e-5,
            max_iter: 1000,
            iter_unit: IterUnit::Epoch,
            trials: 1,
            seed: 0,
            assertions: true,
            output_dir: None,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if self.rank == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    fn worker_count(&self) -> Result<Option<usize>> {
        if let Some(j) = self.jobs {
            return Ok(Some(j));
        }
        match std::env::var(JOBS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(j) if j > 0 => Ok(Some(j)),
                _ => Err(Error::Config(format!("{JOBS_ENV} must be a positive integer, got `{v}`"))),
            },
            Err(_) => Ok(None),
        }
    }
}

/// Per-trial seed: the experiment seed XOR the trial index.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

/// FNV-1a over the bit patterns of `values`.
pub fn point_hash(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

/// One (algorithm, trial) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub algorithm: Algorithm,
    pub trial: usize,
    /// Epochs (block updates divided by the block count).
    pub iterations: f64,
    pub block_updates: usize,
    pub wall_time_s: f64,
    /// `½‖A - UVᵀ‖²`.
    pub final_objective: Option<f64>,
    pub final_rel_residual: Option<f64>,
    pub final_rel_proj_grad: Option<f64>,
    /// Solver status, or `Error` / `InvariantViolation` for failed runs.
    pub status: String,
    pub init_hash: String,
    pub max_backtracks: usize,
    /// Message of a failed run; never empty, so the CSV round-trip can map an
    /// empty field back to `None`.
    pub error: Option<String>,
}

impl TrialRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

/// Mean and standard deviation over the successful trials of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub failures: usize,
    pub iterations: MeanStd,
    pub block_updates: MeanStd,
    pub wall_time_s: MeanStd,
    pub final_rel_residual: MeanStd,
    pub final_rel_proj_grad: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsSummary {
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<Aggregate>,
}

impl ResultsSummary {
    /// Builds the aggregates from `rows`, in first-appearance order of the
    /// algorithms.
    pub fn from_rows(rows: Vec<TrialRow>) -> Self {
        let mut order: Vec<Algorithm> = Vec::new();
        for r in &rows {
            if !order.contains(&r.algorithm) {
                order.push(r.algorithm);
            }
        }
        let aggregates = order
            .into_iter()
            .map(|algorithm| {
                let all: Vec<&TrialRow> = rows.iter().filter(|r| r.algorithm == algorithm).collect();
                let ok: Vec<&TrialRow> = all.iter().copied().filter(|r| r.succeeded()).collect();
                let col = |f: &dyn Fn(&TrialRow) -> Option<f64>| {
                    MeanStd::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
                };
                Aggregate {
                    algorithm,
                    runs: all.len(),
                    failures: all.len() - ok.len(),
                    iterations: col(&|r| Some(r.iterations)),
                    block_updates: col(&|r| Some(r.block_updates as f64)),
                    wall_time_s: col(&|r| Some(r.wall_time_s)),
                    final_rel_residual: col(&|r| r.final_rel_residual),
                    final_rel_proj_grad: col(&|r| r.final_rel_proj_grad),
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the rows of a `summary.csv` and recomputes the aggregates.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<TrialRow>, _>>()?;
        Ok(Self::from_rows(rows))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn rows_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &TrialRow> {
        self.rows.iter().filter(move |r| r.algorithm == algorithm)
    }
}

/// Output of [`run_experiment`]; traces are kept in memory as well as written.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub summary: ResultsSummary,
    /// One entry per row of the summary, in the same order (`None` for
    /// failed runs).
    pub traces: Vec<Option<RunTrace>>,
}

/// Writes a trace in the CSV layout of [`TRACE_HEADER`]. `elapsed_s` is the
/// only column that differs between identical runs.
pub fn write_trace_csv(records: &[IterationRecord], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        w.write_record([
            r.iter.to_string(),
            r.block_updates.to_string(),
            r.elapsed_s.to_string(),
            r.objective.to_string(),
            opt(r.rel_residual.map(|v| v.to_string())),
            r.proj_grad_norm.to_string(),
            r.rel_proj_grad.to_string(),
            opt(r.chosen_block.map(|v| v.to_string())),
            opt(r.alpha.map(|v| v.to_string())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_file_name(algorithm: Algorithm, trial: usize) -> String {
    format!("{}_t{trial}.csv", algorithm.name())
}

/// Runs every configured algorithm on every trial. Trial `t` draws its shared
/// initial point (entries uniform on `[0, 1]`) from `seed XOR t`. Run errors
/// are recorded in their row; the other runs continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let data = config.data.load()?;
    let (m, n) = data.shape();
    if config.rank > m.min(n) {
        return Err(Error::Config(format!("rank {} exceeds min({m}, {n})", config.rank)));
    }
    let problem = NmfProblem::new(data, config.rank)?;

    let mut jobs = Vec::new();
    for trial in 0..config.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, trial));
        let x0 = problem.random_iterate(&mut rng);
        let schedule_seed = rng.next_u64();
        let hash = point_hash(x0.values());
        for &algorithm in &config.algorithms {
            jobs.push((trial, algorithm, x0.clone(), schedule_seed, hash.clone()));
        }
    }

    let execute = || -> Vec<(TrialRow, Option<RunTrace>)> {
        jobs.into_par_iter()
            .map(|(trial, algorithm, x0, schedule_seed, init_hash)| {
                let solver = algorithm
                    .solver_config(schedule_seed)
                    .with_epsilon(config.epsilon)
                    .with_max_iter(config.max_iter)
                    .with_iter_unit(config.iter_unit)
                    .with_assertions(config.assertions);
                match run(&problem, x0, &solver) {
                    Ok(trace) => {
                        let last = trace.final_record();
                        let row = TrialRow {
                            algorithm,
                            trial,
                            iterations: trace.epochs(),
                            block_updates: trace.block_updates(),
                            wall_time_s: last.elapsed_s,
                            final_objective: Some(last.objective),
                            final_rel_residual: last.rel_residual,
                            final_rel_proj_grad: Some(last.rel_proj_grad),
                            status: format!("{:?}", trace.status),
                            init_hash,
                            max_backtracks: trace.max_backtracks,
                            error: None,
                        };
                        (row, Some(trace))
                    }
                    Err(e) => {
                        let row = TrialRow {
                            algorithm,
                            trial,
                            iterations: 0.0,
                            block_updates: 0,
                            wall_time_s: 0.0,
                            final_objective: None,
                            final_rel_residual: None,
                            final_rel_proj_grad: None,
                            status: match e {
                                Error::InvariantViolation { .. } => "InvariantViolation",
                                _ => "Error",
                            }
                            .into(),
                            init_hash,
                            max_backtracks: 0,
                            error: Some(e.to_string()),
                        };
                        (row, None)
                    }
                }
            })
            .collect()
    };
    let results = match config.worker_count()? {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let (rows, traces): (Vec<TrialRow>, Vec<Option<RunTrace>>) = results.into_iter().unzip();
    let summary = ResultsSummary::from_rows(rows);

    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        for (row, trace) in summary.rows.iter().zip(&traces) {
            if let Some(t) = trace {
                let file = fs::File::create(dir.join(trace_file_name(row.algorithm, row.trial)))?;
                write_trace_csv(&t.records, std::io::BufWriter::new(file))?;
            }
        }
        summary.write_csv(&dir.join("summary.csv"))?;
        summary.write_json(&dir.join("summary.json"))?;
    }
    Ok(ExperimentOutput { summary, traces })
}
