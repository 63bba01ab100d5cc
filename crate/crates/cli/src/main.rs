use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use b2b_core::harness::{
    check_invariants, generate_synthetic, run_experiment, write_matrix_market_array, Algorithm, CheckConfig,
    DataSource, ExperimentConfig, ResultsSummary,
};
use b2b_core::solvers::IterUnit;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "b2b", version, about = "Block Bregman NMF solvers and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run Monte Carlo trials of the selected algorithms.
    Solve(SolveArgs),
    /// Write a synthetic matrix and its ground-truth factors as MatrixMarket files.
    Synth(SynthArgs),
    /// Run the invariant suites and print a JSON report.
    Check(CheckArgs),
}

/// `M,N,R,NOISE`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SyntheticSpec {
    m: usize,
    n: usize,
    rank: usize,
    noise: f64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [m, n, r, noise] = parts.as_slice() else {
            return Err(format!("expected M,N,R,NOISE, got `{s}`"));
        };
        let int = |v: &str, what: &str| v.parse::<usize>().map_err(|e| format!("{what} `{v}`: {e}"));
        Ok(Self {
            m: int(m, "M")?,
            n: int(n, "N")?,
            rank: int(r, "R")?,
            noise: noise.parse().map_err(|e| format!("NOISE `{noise}`: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Unit {
    Epoch,
    Block,
}

impl From<Unit> for IterUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Epoch => IterUnit::Epoch,
            Unit::Block => IterUnit::Block,
        }
    }
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["data", "synthetic"]))]
struct SolveArgs {
    /// MatrixMarket file (coordinate or array, real general).
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Synthetic data `A = U*V*ᵀ + noise` drawn from `--seed`.
    #[arg(long, value_name = "M,N,R,NOISE")]
    synthetic: Option<SyntheticSpec>,
    /// Factorization rank; defaults to R of `--synthetic`.
    #[arg(long, value_name = "K")]
    rank: Option<usize>,
    /// Comma-separated algorithms: pg, bpg, cbbcd, gb2b, rb2b, b2b-ls.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "pg,bpg,cbbcd,gb2b,rb2b,b2b-ls")]
    algo: Vec<Algorithm>,
    /// Relative projected-gradient tolerance.
    #[arg(long, value_name = "FLOAT", default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, value_name = "INT", default_value_t = 1000)]
    max_iter: usize,
    /// What `--max-iter` counts for greedy and randomized schedules.
    #[arg(long, value_enum, default_value_t = Unit::Epoch)]
    iter_unit: Unit,
    #[arg(long, value_name = "INT", default_value_t = 1)]
    trials: usize,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Check the descent inequalities at every step (default).
    #[arg(long = "assert", overrides_with = "no_assert")]
    assert: bool,
    #[arg(long = "no-assert", overrides_with = "assert")]
    no_assert: bool,
    /// Directory for traces, summary.csv and summary.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Concurrent runs; falls back to B2B_JOBS, then the core count.
    #[arg(long, value_name = "INT")]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_name = "M,N,R,NOISE")]
    synthetic: SyntheticSpec,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Directory receiving a.mtx, u.mtx and v.mtx; without it A goes to stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Synth(args) => synth(args),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<b2b_core::Error>() {
        Some(b2b_core::Error::InvariantViolation { .. }) => EXIT_INVARIANT,
        _ => EXIT_CONFIG,
    }
}

fn solve(args: SolveArgs) -> anyhow::Result<u8> {
    let (data, default_rank) = match (&args.data, args.synthetic) {
        (Some(path), None) => (DataSource::File(path.clone()), None),
        (None, Some(s)) => (
            DataSource::Synthetic {
                m: s.m,
                n: s.n,
                rank: s.rank,
                noise: s.noise,
                seed: args.seed,
            },
            Some(s.rank),
        ),
        _ => bail!("exactly one of --data and --synthetic is required"),
    };
    let Some(rank) = args.rank.or(default_rank) else {
        bail!("--rank is required with --data");
    };
    let mut cfg = ExperimentConfig::new(data, rank);
    cfg.algorithms = args.algo;
    cfg.epsilon = args.eps;
    cfg.max_iter = args.max_iter;
    cfg.iter_unit = args.iter_unit.into();
    cfg.trials = args.trials;
    cfg.seed = args.seed;
    cfg.assertions = !args.no_assert;
    cfg.output_dir = args.out;
    cfg.jobs = args.jobs;

    let out = run_experiment(&cfg)?;
    print_summary(&out.summary)?;
    let rows = &out.summary.rows;
    if rows.iter().any(|r| r.status == "InvariantViolation") {
        return Ok(EXIT_INVARIANT);
    }
    if rows.iter().any(|r| !r.succeeded()) {
        return Ok(EXIT_FAILURE);
    }
    Ok(0)
}

fn print_summary(summary: &ResultsSummary) -> io::Result<()> {
    let mut w = BufWriter::new(io::stdout().lock());
    writeln!(w, "{:<8} {:>5} {:>10} {:>12} {:>12} {:>12}  status", "algo", "trial", "epochs", "updates", "rel_res", "rel_pg")?;
    for r in &summary.rows {
        writeln!(
            w,
            "{:<8} {:>5} {:>10.2} {:>12} {:>12} {:>12}  {}",
            r.algorithm.name(),
            r.trial,
            r.iterations,
            r.block_updates,
            fmt_opt(r.final_rel_residual),
            fmt_opt(r.final_rel_proj_grad),
            r.error.as_deref().map_or(r.status.clone(), |e| format!("{}: {e}", r.status)),
        )?;
    }
    if summary.rows.len() > summary.aggregates.len() {
        writeln!(w)?;
        for a in &summary.aggregates {
            writeln!(
                w,
                "{:<8} runs {:>3} failed {:>3}  epochs {:.2} ± {:.2}  rel_pg {:.3e} ± {:.3e}",
                a.algorithm.name(),
                a.runs,
                a.failures,
                a.iterations.mean,
                a.iterations.std,
                a.final_rel_proj_grad.mean,
                a.final_rel_proj_grad.std,
            )?;
        }
    }
    w.flush()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

fn synth(args: SynthArgs) -> anyhow::Result<u8> {
    let s = args.synthetic;
    let data = generate_synthetic(s.m, s.n, s.rank, s.noise, args.seed)?;
    match args.out {
        None => write_matrix_market_array(&data.a, BufWriter::new(io::stdout().lock()))?,
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, m) in [("a.mtx", &data.a), ("u.mtx", &data.u), ("v.mtx", &data.v)] {
                write_mtx(&dir.join(name), m)?;
            }
        }
    }
    Ok(0)
}

fn write_mtx(path: &Path, m: &b2b_core::DenseMatrix) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_matrix_market_array(m, &mut w)?;
    w.flush()?;
    Ok(())
}

fn check(args: CheckArgs) -> anyhow::Result<u8> {
    let cfg = CheckConfig {
        seed: args.seed,
        ..CheckConfig::default()
    };
    let report = check_invariants(&cfg)?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = args.out {
        fs::write(&path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if report.passed() {
        Ok(0)
    } else {
        eprintln!("failed suites: {}", report.failed_suites().join(", "));
        Ok(EXIT_INVARIANT)
    }
}
