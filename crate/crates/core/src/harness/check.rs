//! The invariant checker: seeded NMF instances run through every suite, with
//! a machine-readable pass/fail report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::experiment::Algorithm;
use super::synthetic::generate_synthetic;
use crate::block::BlockedIterate;
use crate::bregman::relative_smoothness_check;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::metrics::stationarity_equivalence_check;
use crate::nmf::NmfProblem;
use crate::problem::BlockProblem;
use crate::solvers::{
    b2b_block_update, check_cyclic_envelope, check_greedy_envelope, run, BlockSchedule, Method, StepPolicy,
    DESCENT_SLACK, MAX_BACKTRACKS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    /// Instances for the gradient and relative-smoothness suites.
    pub instances: usize,
    /// `(M, N, R)` of those instances.
    pub shape: (usize, usize, usize),
    pub fd_step: f64,
    pub fd_rtol: f64,
    /// Sampled pairs per instance for relative smoothness.
    pub smoothness_samples: usize,
    /// Seeds for the descent suite.
    pub descent_seeds: usize,
    pub descent_epochs: usize,
    pub hals_updates: usize,
    pub stationary_points: usize,
    pub stationarity_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 20,
            shape: (30, 25, 4),
            fd_step: 1e-6,
            fd_rtol: 1e-5,
            smoothness_samples: 10_000,
            descent_seeds: 5,
            descent_epochs: 200,
            hals_updates: 500,
            stationary_points: 20,
            stationarity_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub failures: usize,
    pub detail: String,
}

impl SuiteResult {
    fn new(name: &str, checked: usize, failures: usize, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: failures == 0,
            checked,
            failures,
            detail,
        }
    }
}

/// Counts reported without gating the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub suites: Vec<SuiteResult>,
    pub diagnostics: Vec<Diagnostic>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn failed_suites(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect()
    }
}

/// Relative error `‖g_b - g_fd‖ / max(‖g_b‖, 1e-12)` of every block gradient
/// against central differences of the objective.
pub fn finite_difference_errors<P: BlockProblem + ?Sized>(problem: &P, x: &[f64], step: f64) -> Vec<f64> {
    let partition = problem.partition();
    let mut y = x.to_vec();
    (0..partition.block_count())
        .map(|b| {
            let g = problem.partial_gradient(x, b);
            let mut diff_sq = 0.0;
            let mut norm_sq = 0.0;
            for (k, i) in partition.range(b).enumerate() {
                let xi = x[i];
                y[i] = xi + step;
                let fp = problem.objective(&y);
                y[i] = xi - step;
                let fm = problem.objective(&y);
                y[i] = xi;
                let fd = (fp - fm) / (2.0 * step);
                diff_sq += (g[k] - fd) * (g[k] - fd);
                norm_sq += g[k] * g[k];
            }
            diff_sq.sqrt() / norm_sq.sqrt().max(1e-12)
        })
        .collect()
}

/// Gradient suite over `(problem, point)` pairs. The detail names the first
/// failing block.
pub fn finite_difference_suite<P: BlockProblem + ?Sized>(
    cases: &[(&P, BlockedIterate)],
    step: f64,
    rtol: f64,
) -> SuiteResult {
    let mut checked = 0;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    let mut first = None;
    for (k, (p, x)) in cases.iter().enumerate() {
        for (b, e) in finite_difference_errors(*p, x.values(), step).into_iter().enumerate() {
            checked += 1;
            worst = worst.max(e);
            if !(e <= rtol) {
                failures += 1;
                first.get_or_insert((k, b, e));
            }
        }
    }
    let detail = match first {
        Some((k, b, e)) => format!("instance {k} block {b}: relative error {e:.3e} > {rtol:e}"),
        None => format!("worst relative error {worst:.3e}"),
    };
    SuiteResult::new("finite-difference gradient", checked, failures, detail)
}

/// Column update of hierarchical alternating least squares for `v_c`,
/// computed from `A`, `U` and `V` directly.
pub fn hals_column_update(a: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, c: usize) -> Vec<f64> {
    let (m, n) = a.shape();
    let r = u.cols();
    let utu: Vec<f64> = (0..r).map(|d| (0..m).map(|i| u.get(i, d) * u.get(i, c)).sum()).collect();
    (0..n)
        .map(|j| {
            let atu: f64 = (0..m).map(|i| a.get(i, j) * u.get(i, c)).sum();
            let others: f64 = (0..r).filter(|&d| d != c).map(|d| v.get(j, d) * utu[d]).sum();
            ((atu - others) / utu[c]).max(0.0)
        })
        .collect()
}

fn instance(seed: u64, (m, n, r): (usize, usize, usize), noise: f64) -> Result<(NmfProblem, BlockedIterate)> {
    let data = generate_synthetic(m, n, r, noise, seed)?;
    let p = NmfProblem::new(data.a, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9));
    let x = p.random_iterate(&mut rng);
    Ok((p, x))
}

fn smoothness_suite(cfg: &CheckConfig, problems: &[NmfProblem]) -> Result<(SuiteResult, SuiteResult)> {
    let mut pos = (0, 0, 0.0f64);
    let mut neg = (0, 0);
    for (k, p) in problems.iter().enumerate() {
        let blocks = p.partition().block_count();
        let per_block = cfg.smoothness_samples.div_ceil(blocks);
        let mut negative_hits = 0;
        for b in 0..blocks {
            let seed = cfg.seed ^ ((k * blocks + b) as u64);
            let one = relative_smoothness_check(p, b, 1.0, per_block, seed)?;
            pos.0 += one.samples;
            pos.1 += one.violations;
            pos.2 = pos.2.max(one.worst_excess);
            negative_hits += relative_smoothness_check(p, b, 0.9, per_block, seed)?.violations;
        }
        neg.0 += 1;
        if negative_hits == 0 {
            neg.1 += 1;
        }
    }
    Ok((
        SuiteResult::new(
            "relative smoothness L=1",
            pos.0,
            pos.1,
            format!("worst excess {:.3e}", pos.2),
        ),
        SuiteResult::new(
            "relative smoothness L=0.9 rejected",
            neg.0,
            neg.1,
            "expected failure of the tighter constant, counted per instance".into(),
        ),
    ))
}

struct DescentTotals {
    updates: usize,
    failures: usize,
    first_error: Option<String>,
    capped: usize,
    nonmonotone: usize,
    unclipped_decrease: (usize, usize),
    literal_greedy: (usize, usize),
    greedy_env: (usize, usize),
    cyclic_env: (usize, usize),
}

fn descent_suite(cfg: &CheckConfig) -> Result<DescentTotals> {
    let mut t = DescentTotals {
        updates: 0,
        failures: 0,
        first_error: None,
        capped: 0,
        nonmonotone: 0,
        unclipped_decrease: (0, 0),
        literal_greedy: (0, 0),
        greedy_env: (0, 0),
        cyclic_env: (0, 0),
    };
    for s in 0..cfg.descent_seeds {
        let seed = cfg.seed.wrapping_add(1000 + s as u64);
        let (p, x0) = instance(seed, cfg.shape, 0.05)?;
        for alg in [Algorithm::Gb2b, Algorithm::Rb2b, Algorithm::B2bLs, Algorithm::Cbbcd] {
            let solver = alg
                .solver_config(seed)
                .with_epsilon(1e-12)
                .with_max_iter(cfg.descent_epochs)
                .with_assertions(true);
            let trace = match run(&p, x0.clone(), &solver) {
                Ok(t) => t,
                Err(e) => {
                    t.failures += 1;
                    t.first_error.get_or_insert(format!("{alg} seed {seed}: {e}"));
                    continue;
                }
            };
            t.updates += trace.block_updates();
            if trace.max_backtracks >= MAX_BACKTRACKS {
                t.capped += 1;
            }
            if alg == Algorithm::B2bLs && trace.steps.iter().any(|a| a.f_after > a.f_before + DESCENT_SLACK) {
                t.nonmonotone += 1;
            }
            let s_blocks = trace.block_count;
            for a in &trace.steps {
                t.unclipped_decrease.0 += 1;
                if a.sufficient_decrease_excess() > DESCENT_SLACK {
                    t.unclipped_decrease.1 += 1;
                }
            }
            if alg == Algorithm::Gb2b {
                for a in &trace.steps {
                    t.literal_greedy.0 += 1;
                    if a.greedy_excess_global(s_blocks) > DESCENT_SLACK {
                        t.literal_greedy.1 += 1;
                    }
                }
            }
            let f_best = trace.best_objective();
            if matches!(alg, Algorithm::Gb2b | Algorithm::Rb2b) {
                let env = check_greedy_envelope(&trace.steps, s_blocks, f_best);
                t.greedy_env.0 += env.checked;
                t.greedy_env.1 += env.violations;
            }
            if alg == Algorithm::Cbbcd {
                let env = check_cyclic_envelope(&trace.sweeps, f_best);
                t.cyclic_env.0 += env.checked;
                t.cyclic_env.1 += env.violations;
            }
        }
    }
    Ok(t)
}

fn hals_suite(cfg: &CheckConfig) -> Result<SuiteResult> {
    let (m, n, r) = cfg.shape;
    let data = generate_synthetic(m, n, r, 0.1, cfg.seed.wrapping_add(77))?;
    let p = NmfProblem::new(data.a.clone(), r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(78));
    let mut state = p.state(p.random_iterate(&mut rng))?;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut checked = 0;
    while checked < cfg.hals_updates {
        let c = rng.gen_range(0..r);
        let expected = hals_column_update(&data.a, &state.u(), &state.v(), c);
        match b2b_block_update(&mut state, r + c, StepPolicy::Constant(1.0)) {
            Ok(_) => {}
            Err(Error::InvalidBlock { .. }) => {
                // a stationary column stays put, which is also what HALS does
                let same = state.v_col(c).iter().zip(&expected).all(|(a, b)| (a - b).abs() <= 1e-14);
                checked += 1;
                failures += usize::from(!same);
                continue;
            }
            Err(e) => return Err(e),
        }
        checked += 1;
        let dev = state
            .v_col(c)
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        if dev > 1e-14 {
            failures += 1;
        }
        // move a U column too so consecutive V updates see fresh partners
        let cu = rng.gen_range(0..r);
        match b2b_block_update(&mut state, cu, StepPolicy::Constant(1.0)) {
            Ok(_) | Err(Error::InvalidBlock { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(SuiteResult::new(
        "HALS equivalence",
        checked,
        failures,
        format!("worst entry deviation {worst:.3e}"),
    ))
}

fn residual_suite(cfg: &CheckConfig) -> Result<SuiteResult> {
    let (m, n, r) = (20, 15, 5);
    let (p, x) = instance(cfg.seed.wrapping_add(55), (m, n, r), 0.05)?;
    let bound = 1e-8 * (1.0 + p.data_norm());
    let mut state = p.state(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(56));
    let blocks = 2 * r;
    let mut failures = 0;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for k in 1..=1000 {
        let b = rng.gen_range(0..blocks);
        match b2b_block_update(&mut state, b, StepPolicy::Constant(1.0)) {
            Ok(_) | Err(Error::InvalidBlock { .. }) => {}
            Err(e) => return Err(e),
        }
        if k % blocks == 0 {
            let d = state.residual_drift();
            worst = worst.max(d);
            checked += 1;
            failures += usize::from(d > bound);
        }
    }
    Ok(SuiteResult::new(
        "maintained residual",
        checked,
        failures,
        format!("worst drift {worst:.3e} (bound {bound:.3e})"),
    ))
}

/// Absolute projected-gradient norm reached by [`near_stationary_points`].
pub const NEAR_STATIONARY_TOL: f64 = 1e-8;

/// Noiseless 12x10 rank-2 instances driven by greedy B2B until
/// `‖∇ᴾf‖ <= NEAR_STATIONARY_TOL`.
pub fn near_stationary_points(count: usize, seed: u64) -> Result<Vec<(NmfProblem, BlockedIterate)>> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0u64;
    while out.len() < count {
        let (p, x0) = instance(seed.wrapping_add(5000 + k), (12, 10, 2), 0.0)?;
        k += 1;
        let pg0 = crate::nmf::nmf_full_projected_gradient(&p.state(x0.clone())?)?.report.proj_grad_norm;
        if pg0 <= NEAR_STATIONARY_TOL {
            out.push((p, x0));
            continue;
        }
        let cfg = crate::solvers::SolverConfig::new(Method::B2b(BlockSchedule::Greedy), StepPolicy::OptimalConstant)
            .with_epsilon(NEAR_STATIONARY_TOL / pg0)
            .with_max_iter(50_000)
            .with_assertions(false);
        let trace = run(&p, x0, &cfg)?;
        out.push((p, trace.iterate));
    }
    Ok(out)
}

fn stationarity_suite(cfg: &CheckConfig) -> Result<SuiteResult> {
    let mut failures = 0;
    let mut first = None;
    let points = near_stationary_points(cfg.stationary_points, cfg.seed)?;
    for (k, (p, x)) in points.iter().enumerate() {
        let c = stationarity_equivalence_check(p, x, cfg.stationarity_tol)?;
        if !c.agree() {
            failures += 1;
            first.get_or_insert(format!(
                "point {k}: |pg| {:.3e}, max |d_b| {:.3e}, max displacement {:.3e}",
                c.proj_grad_norm, c.max_direction_norm, c.max_displacement
            ));
        }
    }
    Ok(SuiteResult::new(
        "stationarity certificates agree",
        points.len(),
        failures,
        first.unwrap_or_else(|| "all agree".into()),
    ))
}

/// Runs every suite on seeded synthetic instances.
///
/// Gating suites check the inequalities that hold for the realized step
/// `x⁺ - x`; the forms stated with the unclipped search direction, the
/// per-step greedy bound and the rate envelopes are reported as diagnostics.
pub fn check_invariants(cfg: &CheckConfig) -> Result<InvariantReport> {
    if cfg.instances == 0 || cfg.descent_seeds == 0 {
        return Err(Error::Config("instances and descent seeds must be positive".into()));
    }
    let mut cases = Vec::with_capacity(cfg.instances);
    for k in 0..cfg.instances {
        cases.push(instance(cfg.seed.wrapping_add(k as u64), cfg.shape, 0.1)?);
    }
    let refs: Vec<(&NmfProblem, BlockedIterate)> = cases.iter().map(|(p, x)| (p, x.clone())).collect();
    let mut suites = vec![finite_difference_suite(&refs, cfg.fd_step, cfg.fd_rtol)];

    let problems: Vec<NmfProblem> = cases.into_iter().map(|(p, _)| p).collect();
    let (pos, neg) = smoothness_suite(cfg, &problems)?;
    suites.push(pos);
    suites.push(neg);

    let d = descent_suite(cfg)?;
    suites.push(SuiteResult::new(
        "descent assertions",
        d.updates,
        d.failures,
        d.first_error.unwrap_or_else(|| format!("{} block updates without a violation", d.updates)),
    ));
    suites.push(SuiteResult::new(
        "line search within backtrack cap",
        cfg.descent_seeds * 4,
        d.capped,
        format!("cap {MAX_BACKTRACKS}"),
    ));
    suites.push(SuiteResult::new(
        "line search monotone",
        cfg.descent_seeds,
        d.nonmonotone,
        "b2b-ls objective never increases".into(),
    ));
    suites.push(hals_suite(cfg)?);
    suites.push(residual_suite(cfg)?);
    suites.push(stationarity_suite(cfg)?);

    let diagnostics = vec![
        Diagnostic {
            name: "sufficient decrease with unclipped direction".into(),
            checked: d.unclipped_decrease.0,
            violations: d.unclipped_decrease.1,
            note: "fails on steps where the projection clips a coordinate".into(),
        },
        Diagnostic {
            name: "greedy per-step decrease".into(),
            checked: d.literal_greedy.0,
            violations: d.literal_greedy.1,
            note: "bound scales like M/m relative to the realized decrease".into(),
        },
        Diagnostic {
            name: "greedy/randomized rate envelope".into(),
            checked: d.greedy_env.0,
            violations: d.greedy_env.1,
            note: String::new(),
        },
        Diagnostic {
            name: "cyclic BBCD rate envelope".into(),
            checked: d.cyclic_env.0,
            violations: d.cyclic_env.1,
            note: String::new(),
        },
    ];
    Ok(InvariantReport { suites, diagnostics })
}
