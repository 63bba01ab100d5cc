//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! Oracles (objective, finite differences, HALS column update, projected
//! gradient, descent bounds, rate envelopes) are written out here rather than
//! taken from the library.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use b2b_core::harness::{
    generate_synthetic, near_stationary_points, run_experiment, Algorithm, DataSource, ExperimentConfig,
};
use b2b_core::metrics::stationarity_equivalence_check;
use b2b_core::solvers::{
    b2b_block_update, run, ArmijoParams, BlockSchedule, Method, RunTrace, SolverConfig, Status, StepPolicy,
    MAX_BACKTRACKS,
};
use b2b_core::{BlockProblem, BlockedIterate, DenseMatrix, Error, NmfProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESCENT_TOL: f64 = 1e-9;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(id: usize, name: &'static str, passed: bool, detail: String) -> Self {
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {detail}");
        Self { id, name, passed, detail }
    }
}

fn instance(seed: u64, (m, n, r): (usize, usize, usize), noise: f64) -> (NmfProblem, DenseMatrix, BlockedIterate) {
    let data = generate_synthetic(m, n, r, noise, seed).unwrap();
    let a = data.a.clone();
    let p = NmfProblem::new(data.a, r).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let x = p.random_iterate(&mut rng);
    (p, a, x)
}

/// `½‖A - UVᵀ‖²` straight from the entries.
fn objective(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let (m, n) = a.shape();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..n {
            let approx: f64 = (0..u.cols()).map(|k| u.get(i, k) * v.get(j, k)).sum();
            let e = a.get(i, j) - approx;
            s += e * e;
        }
    }
    0.5 * s
}

fn objective_flat(p: &NmfProblem, a: &DenseMatrix, x: &[f64]) -> f64 {
    let (u, v) = p.unflatten(x).unwrap();
    objective(a, &u, &v)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖P(∇f)‖` with the gradient formed from the factors.
fn projected_gradient_norm(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> f64 {
    let (m, n) = a.shape();
    let r = u.cols();
    let mut e = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let approx: f64 = (0..r).map(|k| u.get(i, k) * v.get(j, k)).sum();
            e[i * n + j] = approx - a.get(i, j);
        }
    }
    let clip = |x: f64, g: f64| if x > 0.0 { g } else { g.min(0.0) };
    let mut s = 0.0;
    for k in 0..r {
        for i in 0..m {
            let g: f64 = (0..n).map(|j| e[i * n + j] * v.get(j, k)).sum();
            s += clip(u.get(i, k), g).powi(2);
        }
        for j in 0..n {
            let g: f64 = (0..m).map(|i| e[i * n + j] * u.get(i, k)).sum();
            s += clip(v.get(j, k), g).powi(2);
        }
    }
    s.sqrt()
}

fn hals_v_column(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, c: usize) -> Vec<f64> {
    let (m, n) = a.shape();
    let uc: Vec<f64> = (0..m).map(|i| u.get(i, c)).collect();
    let denom = dot(&uc, &uc);
    (0..n)
        .map(|j| {
            let mut num: f64 = (0..m).map(|i| a.get(i, j) * uc[i]).sum();
            for k in 0..u.cols() {
                if k != c {
                    let ukc: f64 = (0..m).map(|i| u.get(i, k) * uc[i]).sum();
                    num -= v.get(j, k) * ukc;
                }
            }
            (num / denom).max(0.0)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut checked = 0;
    for seed in 0..20 {
        let (p, a, x) = instance(seed, (30, 25, 4), 0.1);
        let xv = x.values().to_vec();
        let part = p.partition().clone();
        for b in 0..part.block_count() {
            let g = p.partial_gradient(&xv, b);
            let mut y = xv.clone();
            let fd: Vec<f64> = part
                .range(b)
                .map(|i| {
                    let orig = y[i];
                    y[i] = orig + h;
                    let fp = objective_flat(&p, &a, &y);
                    y[i] = orig - h;
                    let fm = objective_flat(&p, &a, &y);
                    y[i] = orig;
                    (fp - fm) / (2.0 * h)
                })
                .collect();
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
            let rel = norm(&diff) / norm(&g).max(1e-12);
            worst = worst.max(rel);
            checked += 1;
            failures += usize::from(rel > 1e-5);
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        1,
        "gradient oracle",
        failures == 0 && elapsed < Duration::from_secs(5),
        format!("{checked} blocks, {failures} above 1e-5, worst {worst:.2e}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let pairs = 10_000;
    let mut positive_violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut tight_rejected = 0;
    let instances = 10;
    let mut library_ok = true;
    for seed in 0..instances {
        let (p, a, x) = instance(100 + seed, (30, 25, 4), 0.1);
        let part = p.partition().clone();
        let r = p.rank();
        let xv = x.values().to_vec();
        let fx = objective_flat(&p, &a, &xv);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tight_hits = 0;
        for k in 0..pairs {
            let b = k % part.block_count();
            let partner = if b < r { b + r } else { b - r };
            let scale = norm(x.block(partner)).powi(2);
            let g = p.partial_gradient(&xv, b);
            let mut y = xv.clone();
            let mut step_sq = 0.0;
            let mut lin = 0.0;
            for (j, i) in part.range(b).enumerate() {
                y[i] = rng.gen_range(0.0..2.0);
                let d = y[i] - xv[i];
                step_sq += d * d;
                lin += g[j] * d;
            }
            let dh = 0.5 * scale * step_sq;
            let gap = objective_flat(&p, &a, &y) - fx - lin;
            let excess = gap - dh;
            worst_excess = worst_excess.max(excess);
            positive_violations += usize::from(excess > DESCENT_TOL);
            tight_hits += usize::from(gap - 0.9 * dh > DESCENT_TOL);
        }
        tight_rejected += usize::from(tight_hits >= 1);
        let blocks = part.block_count();
        let per_block = pairs.div_ceil(blocks);
        let mut lib_tight = 0;
        for b in 0..blocks {
            let one = b2b_core::bregman::relative_smoothness_check(&p, b, 1.0, per_block, seed * 100 + b as u64).unwrap();
            library_ok &= one.violations == 0;
            lib_tight += b2b_core::bregman::relative_smoothness_check(&p, b, 0.9, per_block, seed * 100 + b as u64)
                .unwrap()
                .violations;
        }
        library_ok &= lib_tight >= 1;
    }
    let passed = positive_violations == 0 && tight_rejected == instances as usize && library_ok;
    Outcome::new(
        2,
        "relative smoothness",
        passed,
        format!(
            "L=1: {positive_violations} violations over {} pairs (worst excess {worst_excess:.2e}); \
             L=0.9 rejected on {tight_rejected}/{instances} instances; library check agrees: {library_ok}",
            pairs * instances as usize
        ),
    )
}

/// Traces with assertions on, shared by the descent and envelope criteria.
struct DescentRuns {
    runs: Vec<(Algorithm, RunTrace)>,
    errors: Vec<String>,
}

fn descent_runs() -> DescentRuns {
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for seed in 0..5u64 {
        let (p, _, x0) = instance(1000 + seed, (30, 25, 4), 0.05);
        for alg in [Algorithm::Gb2b, Algorithm::Rb2b, Algorithm::B2bLs, Algorithm::Cbbcd] {
            let cfg = alg
                .solver_config(seed)
                .with_epsilon(1e-12)
                .with_max_iter(200)
                .with_assertions(true);
            match run(&p, x0.clone(), &cfg) {
                Ok(t) => runs.push((alg, t)),
                Err(e) => errors.push(format!("{alg} seed {seed}: {e}")),
            }
        }
    }
    DescentRuns { runs, errors }
}

fn criterion_3(d: &DescentRuns) -> Outcome {
    let mut updates = 0;
    let (mut sufficient, mut sufficient_bad, mut realized_bad) = (0, 0, 0);
    let (mut constant, mut constant_bad) = (0, 0);
    let (mut greedy, mut greedy_bad) = (0, 0);
    let (mut sweeps, mut sweeps_bad) = (0, 0);
    for (alg, t) in &d.runs {
        updates += t.block_updates();
        let s = t.block_count as f64;
        for a in &t.steps {
            let c = &a.constants;
            let decrease = a.f_before - a.f_after;
            let curvature = (1.0 + c.beta) * c.m;
            let decrease_bound = |dir_sq: f64| 0.5 * a.alpha * curvature * (1.0 - c.l * c.big_m * a.alpha / curvature) * dir_sq;
            sufficient += 1;
            sufficient_bad += usize::from(decrease_bound(a.direction_norm_sq) - decrease > DESCENT_TOL);
            realized_bad += usize::from(decrease_bound(a.step_norm_sq / (a.alpha * a.alpha)) - decrease > DESCENT_TOL);
            if a.alpha <= c.alpha_star {
                constant += 1;
                constant_bad += usize::from(0.5 * c.l * c.big_m * a.step_norm_sq - decrease > DESCENT_TOL);
            }
            if *alg == Algorithm::Gb2b {
                greedy += 1;
                let bound = a.alpha * (1.0 + c.beta) * a.m_all / (4.0 * s * a.big_m_all) * a.proj_grad_norm_sq;
                greedy_bad += usize::from(bound - decrease > DESCENT_TOL);
            }
        }
        for w in &t.sweeps {
            sweeps += 1;
            sweeps_bad += usize::from(w.weighted_distance - (w.f_before - w.f_after) > DESCENT_TOL);
        }
    }
    let passed = d.errors.is_empty()
        && updates >= 10_000
        && sufficient_bad == 0
        && constant_bad == 0
        && greedy_bad == 0
        && sweeps_bad == 0;
    Outcome::new(
        3,
        "descent inequalities",
        passed,
        format!(
            "{updates} block updates, {} run errors; sufficient decrease {sufficient_bad}/{sufficient} \
             (realized-step form {realized_bad}/{sufficient}); constant-step {constant_bad}/{constant}; \
             greedy per-step {greedy_bad}/{greedy}; cyclic sweep {sweeps_bad}/{sweeps}",
            d.errors.len()
        ),
    )
}

fn criterion_4(d: &DescentRuns) -> Outcome {
    let (mut greedy_checked, mut greedy_bad, mut greedy_ratio) = (0, 0, 0.0f64);
    let (mut cyc_checked, mut cyc_bad, mut cyc_ratio) = (0, 0, 0.0f64);
    for (alg, t) in &d.runs {
        let f_best = t
            .steps
            .iter()
            .map(|a| a.f_after)
            .chain(t.sweeps.iter().map(|s| s.f_after))
            .chain(t.records.iter().map(|r| r.objective))
            .fold(f64::INFINITY, f64::min);
        match alg {
            Algorithm::Gb2b | Algorithm::Rb2b => {
                let Some(first) = t.steps.first() else { continue };
                let s = t.block_count as f64;
                let m = t.steps.iter().map(|a| a.m_all).fold(f64::INFINITY, f64::min);
                let big_m = t.steps.iter().map(|a| a.big_m_all).fold(0.0, f64::max);
                let alpha = t.steps.iter().map(|a| a.alpha).fold(f64::INFINITY, f64::min);
                let beta = t.steps.iter().map(|a| a.constants.beta).fold(f64::INFINITY, f64::min);
                let mut best = f64::INFINITY;
                for (n, a) in t.steps.iter().enumerate() {
                    best = best.min(a.proj_grad_norm_sq);
                    let env = 4.0 * s * big_m * (first.f_before - f_best) / ((n as f64 + 1.0) * alpha * (1.0 + beta) * m);
                    greedy_checked += 1;
                    greedy_bad += usize::from(best > env + DESCENT_TOL);
                    greedy_ratio = greedy_ratio.max(best / env);
                }
            }
            Algorithm::Cbbcd => {
                let Some(first) = t.sweeps.first() else { continue };
                let l = t.sweeps.iter().map(|s| s.l_max).fold(0.0, f64::max);
                let alpha = first.alpha;
                let mut best = f64::INFINITY;
                for (n, w) in t.sweeps.iter().enumerate() {
                    best = best.min(w.distance);
                    let env = alpha * (first.f_before - f_best) / ((n as f64 + 1.0) * (1.0 - alpha * l));
                    cyc_checked += 1;
                    cyc_bad += usize::from(best > env + DESCENT_TOL);
                    cyc_ratio = cyc_ratio.max(best / env);
                }
            }
            _ => {}
        }
    }
    Outcome::new(
        4,
        "rate envelopes",
        greedy_bad == 0 && cyc_bad == 0 && greedy_checked > 0 && cyc_checked > 0,
        format!(
            "greedy/randomized {greedy_bad}/{greedy_checked} violations (worst ratio {greedy_ratio:.3}); \
             cyclic {cyc_bad}/{cyc_checked} (worst ratio {cyc_ratio:.3})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut reached = 0;
    let mut slowest = Duration::ZERO;
    let mut worst = (0.0f64, 0.0f64);
    for seed in 0..10u64 {
        let data = generate_synthetic(100, 80, 10, 0.0, seed).unwrap();
        let a = data.a.clone();
        let p = NmfProblem::new(data.a, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = p.random_iterate(&mut rng);
        let (u0, v0) = p.unflatten(x0.values()).unwrap();
        let pg0 = projected_gradient_norm(&a, &u0, &v0);
        let cfg = SolverConfig::new(Method::B2b(BlockSchedule::Greedy), StepPolicy::Constant(1.0))
            .with_epsilon(1e-12)
            .with_max_iter(500)
            .with_assertions(false);
        let start = Instant::now();
        let t = run(&p, x0, &cfg).unwrap();
        slowest = slowest.max(start.elapsed());
        let hit = t
            .records
            .iter()
            .any(|r| r.rel_residual.is_some_and(|v| v <= 1e-6) && r.rel_proj_grad <= 1e-5);
        let (u, v) = p.unflatten(t.iterate.values()).unwrap();
        let relres = (2.0 * objective(&a, &u, &v)).sqrt() / a.frobenius_norm();
        let relpg = projected_gradient_norm(&a, &u, &v) / pg0;
        worst = (worst.0.max(relres), worst.1.max(relpg));
        reached += usize::from(hit || (relres <= 1e-6 && relpg <= 1e-5));
    }
    Outcome::new(
        5,
        "exact-recovery convergence",
        reached == 10 && slowest < Duration::from_secs(30),
        format!(
            "{reached}/10 seeds reach rel_residual <= 1e-6 and rel_proj_grad <= 1e-5 in 500 epochs; \
             worst final {:.2e} / {:.2e}; slowest run {:.2}s",
            worst.0,
            worst.1,
            slowest.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let (m, n, r) = (30, 25, 4);
    let (p, a, x) = instance(77, (m, n, r), 0.1);
    let mut state = p.state(x).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..500 {
        let c = rng.gen_range(0..r);
        let expected = hals_v_column(&a, &state.u(), &state.v(), c);
        match b2b_block_update(&mut state, r + c, StepPolicy::Constant(1.0)) {
            Ok(_) | Err(Error::InvalidBlock { .. }) => {}
            Err(e) => panic!("{e}"),
        }
        let dev = state.v_col(c).iter().zip(&expected).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
        failures += usize::from(dev > 1e-14);
        let cu = rng.gen_range(0..r);
        match b2b_block_update(&mut state, cu, StepPolicy::Constant(1.0)) {
            Ok(_) | Err(Error::InvalidBlock { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }
    Outcome::new(
        6,
        "HALS equivalence",
        failures == 0,
        format!("500 V-column updates, {failures} above 1e-14, worst {worst:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let tol = 1e-6;
    let points = near_stationary_points(100, 0).unwrap();
    let mut disagree = 0;
    let mut oracle_mismatch = 0;
    let mut stationary = 0;
    for (p, x) in &points {
        let c = stationarity_equivalence_check(p, x, tol).unwrap();
        let data = p.data().to_dense();
        let (u, v) = p.unflatten(x.values()).unwrap();
        let own = projected_gradient_norm(&data, &u, &v);
        if (own - c.proj_grad_norm).abs() > 1e-9 * (1.0 + own) {
            oracle_mismatch += 1;
        }
        let verdicts = [own <= tol, c.max_direction_norm <= tol, c.max_displacement <= tol];
        if verdicts.iter().any(|&v| v != verdicts[0]) {
            disagree += 1;
        }
        stationary += usize::from(verdicts[0]);
    }
    Outcome::new(
        7,
        "stationarity certificates",
        points.len() == 100 && disagree == 0 && oracle_mismatch == 0,
        format!(
            "{} points, {disagree} disagree at tol 1e-6, {stationary} certified stationary, \
             {oracle_mismatch} projected-gradient mismatches",
            points.len()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_8() -> Outcome {
    let mut gb2b = Vec::new();
    let mut cbbcd = Vec::new();
    let mut unfinished = 0;
    for seed in 0..10u64 {
        let mut cfg = ExperimentConfig::new(
            DataSource::Synthetic { m: 100, n: 80, rank: 10, noise: 0.0, seed },
            10,
        );
        cfg.algorithms = vec![Algorithm::Gb2b, Algorithm::Cbbcd];
        cfg.epsilon = 1e-5;
        cfg.max_iter = 20_000;
        cfg.seed = seed;
        cfg.assertions = false;
        let out = run_experiment(&cfg).unwrap();
        for row in &out.summary.rows {
            unfinished += usize::from(row.status != format!("{:?}", Status::ToleranceReached));
            match row.algorithm {
                Algorithm::Gb2b => gb2b.push(row.iterations),
                _ => cbbcd.push(row.iterations),
            }
        }
    }
    let (mg, mc) = (median(gb2b), median(cbbcd));
    Outcome::new(
        8,
        "greedy vs cyclic epochs",
        mg <= mc,
        format!("median epochs to 1e-5: GB2B {mg:.1}, CBBCD {mc:.1}; {unfinished} runs hit the cap"),
    )
}

fn criterion_9() -> Outcome {
    let params = ArmijoParams::new(1.0, 0.5, 0.1).unwrap();
    let mut runs = 0;
    let mut capped = 0;
    let mut increases = 0;
    let mut steps = 0;
    let mut most = 0;
    let suite: Vec<((usize, usize, usize), f64, u64)> = (0..10)
        .map(|s| ((100, 80, 10), 0.0, s))
        .chain((0..10).map(|s| ((30, 25, 4), 0.05, 200 + s)))
        .collect();
    for (shape, noise, seed) in suite {
        let (p, _, x0) = instance(seed, shape, noise);
        let cfg = SolverConfig::new(Method::B2b(BlockSchedule::Greedy), StepPolicy::armijo(params))
            .with_epsilon(1e-8)
            .with_max_iter(200)
            .with_assertions(true);
        let t = run(&p, x0, &cfg).unwrap();
        runs += 1;
        most = most.max(t.max_backtracks);
        capped += usize::from(t.max_backtracks >= MAX_BACKTRACKS);
        steps += t.steps.len();
        increases += t.steps.iter().filter(|a| a.f_after > a.f_before).count();
    }
    Outcome::new(
        9,
        "line-search soundness",
        capped == 0 && increases == 0,
        format!("{runs} runs, {steps} steps, {capped} hit the cap (most backtracks {most}), {increases} increases"),
    )
}

/// Every file of `dir` with the named column removed, sorted by name.
fn strip_column(dir: &Path, column: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if !name.ends_with(".csv") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
        let skip = header.iter().position(|h| *h == column);
        let keep = |line: &str| -> String {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        };
        let body: Vec<String> = std::iter::once(header.join(",")).map(|h| keep(&h)).chain(lines.map(keep)).collect();
        out.push((name, body.join("\n")));
    }
    out.sort();
    out
}

fn criterion_10() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let mut cfg = ExperimentConfig::new(
            DataSource::Synthetic { m: 30, n: 25, rank: 4, noise: 0.05, seed: 3 },
            4,
        );
        cfg.trials = 3;
        cfg.max_iter = 40;
        cfg.seed = 11;
        cfg.jobs = Some(3);
        cfg.output_dir = Some(dir.path().to_path_buf());
        run_experiment(&cfg).unwrap();
    }
    let traces: Vec<_> = dirs.iter().map(|d| strip_column(d.path(), "elapsed_s")).collect();
    let summaries: Vec<_> = dirs
        .iter()
        .map(|d| {
            strip_column(d.path(), "wall_time_s")
                .into_iter()
                .filter(|(n, _)| n == "summary.csv")
                .collect::<Vec<_>>()
        })
        .collect();
    let files = traces[0].iter().filter(|(n, _)| n != "summary.csv").count();
    let same = traces[0]
        .iter()
        .zip(&traces[1])
        .filter(|((n, _), _)| n != "summary.csv")
        .all(|(a, b)| a == b)
        && traces[0].len() == traces[1].len()
        && summaries[0] == summaries[1]
        && !summaries[0].is_empty();
    Outcome::new(
        10,
        "determinism",
        same && files == 18,
        format!("{files} trace files and summary.csv compared across two invocations, identical: {same}"),
    )
}

#[test]
fn acceptance() {
    println!();
    let descent = descent_runs();
    let outcomes = vec![
        criterion_1(),
        criterion_2(),
        criterion_3(&descent),
        criterion_4(&descent),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} ({}): {}", o.id, o.name, o.detail))
        .collect();
    println!("{}/{} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failing criteria:\n{}", failed.join("\n"));
}
