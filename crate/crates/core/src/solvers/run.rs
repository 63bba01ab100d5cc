use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bounds::{StepAudit, SweepAudit};
use super::selection::{BlockSchedule, Selector};
use super::steps::{b2b_update, cbbcd_update, full_update, StepContext, StepPolicy};
use crate::block::BlockedIterate;
use crate::error::{Error, Result};
use crate::metrics::projected_gradient_norm_sq;
use crate::problem::{BlockProblem, Session};

/// Epochs without progress after which a run is declared stalled.
pub const STALL_EPOCHS: usize = 50;
/// Per-epoch decrease, relative to `max(1, |f|)`, regarded as negligible.
/// An epoch that lowers the best projected-gradient norm seen so far still
/// counts as progress.
pub const STALL_DECREASE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Projected gradient on the full vector.
    ProjectedGradient,
    /// Bregman proximal gradient on the full vector.
    BregmanProximalGradient,
    /// Cyclic Bregman block coordinate descent.
    CyclicBbcd,
    /// Two-reference block method.
    B2b(BlockSchedule),
}

impl Method {
    /// Whether one iteration of the method touches every block.
    pub fn is_sweep(&self) -> bool {
        !matches!(self, Method::B2b(BlockSchedule::Greedy | BlockSchedule::Randomized { .. }))
    }
}

/// What `max_iter` and the trace's `iter` column count for single-block
/// schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IterUnit {
    /// `s` block updates.
    #[default]
    Epoch,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub policy: StepPolicy,
    /// Stop once `‖∇ᴾf(x)‖ <= ε‖∇ᴾf(x⁰)‖`.
    pub epsilon: f64,
    pub max_iter: usize,
    pub iter_unit: IterUnit,
    pub assertions: bool,
}

impl SolverConfig {
    pub fn new(method: Method, policy: StepPolicy) -> Self {
        Self {
            method,
            policy,
            epsilon: 1e-5,
            max_iter: 1000,
            iter_unit: IterUnit::Epoch,
            assertions: true,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_iter_unit(mut self, unit: IterUnit) -> Self {
        self.iter_unit = unit;
        self
    }

    pub fn with_assertions(mut self, on: bool) -> Self {
        self.assertions = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        self.policy.validate()?;
        match (self.method, self.policy) {
            (Method::CyclicBbcd, StepPolicy::ArmijoLineSearch { .. }) => Err(Error::Unsupported(
                "cyclic BBCD runs with a constant stepsize".into(),
            )),
            (Method::ProjectedGradient, StepPolicy::OptimalConstant) => Err(Error::Config(
                "projected gradient has no block constants; use a constant stepsize or line search".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    ToleranceReached,
    MaxIterations,
    StallDetected,
    /// No block had a valid coordinate.
    StationaryReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub block_updates: usize,
    pub elapsed_s: f64,
    pub objective: f64,
    pub rel_residual: Option<f64>,
    pub proj_grad_norm: f64,
    pub rel_proj_grad: f64,
    pub chosen_block: Option<usize>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub iterate: BlockedIterate,
    pub block_count: usize,
    /// One entry per B2B block update.
    pub steps: Vec<StepAudit>,
    /// One entry per cyclic BBCD sweep.
    pub sweeps: Vec<SweepAudit>,
    pub max_backtracks: usize,
}

impl RunTrace {
    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("a trace has at least the initial record")
    }

    pub fn block_updates(&self) -> usize {
        self.final_record().block_updates
    }

    /// Block updates divided by the number of blocks.
    pub fn epochs(&self) -> f64 {
        self.block_updates() as f64 / self.block_count as f64
    }

    pub fn best_objective(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.objective)
            .chain(self.steps.iter().map(|a| a.f_after))
            .chain(self.sweeps.iter().map(|a| a.f_after))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the recorded objective never increased by more than `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective + tol)
    }
}

struct Loop<'s> {
    session: Box<dyn Session + 's>,
    config: SolverConfig,
    s: usize,
    start: Instant,
    pg0: f64,
    grad: Vec<f64>,
    pg_sq: f64,
    records: Vec<IterationRecord>,
    block_updates: usize,
    last_block: Option<usize>,
    last_alpha: Option<f64>,
    epoch_objective: f64,
    best_pg_sq: f64,
    stalled_epochs: usize,
}

impl Loop<'_> {
    fn refresh(&mut self) {
        self.grad = self.session.gradient();
        self.pg_sq = projected_gradient_norm_sq(self.session.iterate().values(), &self.grad);
    }

    fn converged(&self) -> bool {
        self.pg_sq.sqrt() <= self.config.epsilon * self.pg0
    }

    fn record(&mut self, iter: usize) {
        let pg = self.pg_sq.sqrt();
        self.records.push(IterationRecord {
            iter,
            block_updates: self.block_updates,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            objective: self.session.objective(),
            rel_residual: self.session.relative_residual(),
            proj_grad_norm: pg,
            rel_proj_grad: if self.pg0 > 0.0 { pg / self.pg0 } else { 0.0 },
            chosen_block: self.last_block,
            alpha: self.last_alpha,
        });
    }

    /// Updates the stall counter at an epoch boundary; true once stalled.
    fn epoch_boundary(&mut self) -> bool {
        let f = self.session.objective();
        let negligible = self.epoch_objective - f < STALL_DECREASE * f.abs().max(1.0);
        let pg_improved = self.pg_sq < self.best_pg_sq;
        self.best_pg_sq = self.best_pg_sq.min(self.pg_sq);
        if negligible && !pg_improved {
            self.stalled_epochs += 1;
        } else {
            self.stalled_epochs = 0;
        }
        self.epoch_objective = f;
        self.stalled_epochs >= STALL_EPOCHS
    }
}

/// Runs `config.method` from `x0` until the relative projected-gradient test
/// passes, the iteration budget is spent, progress stalls, or no block is
/// valid.
pub fn run<P: BlockProblem + ?Sized>(problem: &P, x0: BlockedIterate, config: &SolverConfig) -> Result<RunTrace> {
    config.validate()?;
    let session = problem.session(x0)?;
    let s = session.partition().block_count();
    let f0 = session.objective();
    let mut lp = Loop {
        session,
        config: *config,
        s,
        start: Instant::now(),
        pg0: 0.0,
        grad: Vec::new(),
        pg_sq: 0.0,
        records: Vec::new(),
        block_updates: 0,
        last_block: None,
        last_alpha: None,
        epoch_objective: f0,
        best_pg_sq: f64::INFINITY,
        stalled_epochs: 0,
    };
    lp.refresh();
    lp.pg0 = lp.pg_sq.sqrt();
    lp.best_pg_sq = lp.pg_sq;
    lp.record(0);

    let mut steps = Vec::new();
    let mut sweeps = Vec::new();
    let mut max_backtracks = 0;

    let status = if lp.converged() {
        Status::ToleranceReached
    } else if config.method.is_sweep() {
        run_sweeps(&mut lp, &mut steps, &mut sweeps, &mut max_backtracks)?
    } else {
        run_blocks(&mut lp, &mut steps, &mut max_backtracks)?
    };

    Ok(RunTrace {
        records: lp.records,
        status,
        iterate: lp.session.iterate().clone(),
        block_count: s,
        steps,
        sweeps,
        max_backtracks,
    })
}

fn run_sweeps(
    lp: &mut Loop<'_>,
    steps: &mut Vec<StepAudit>,
    sweeps: &mut Vec<SweepAudit>,
    max_backtracks: &mut usize,
) -> Result<Status> {
    let config = lp.config;
    let mut selector = Selector::new(BlockSchedule::Cyclic);
    for iter in 1..=config.max_iter {
        match config.method {
            Method::ProjectedGradient | Method::BregmanProximalGradient => {
                let bregman = config.method == Method::BregmanProximalGradient;
                let (alpha, ls) = full_update(lp.session.as_mut(), &lp.grad, bregman, &config.policy)?;
                if let Some(ls) = ls {
                    *max_backtracks = (*max_backtracks).max(ls.backtracks);
                }
                lp.last_alpha = Some(alpha);
                lp.block_updates += lp.s;
            }
            Method::CyclicBbcd => {
                let alpha = cbbcd_stepsize(lp.session.as_ref(), &config.policy)?;
                let audit = cbbcd_update(lp.session.as_mut(), alpha, iter - 1, config.assertions)?;
                sweeps.push(audit);
                lp.last_alpha = Some(alpha);
                lp.block_updates += lp.s;
            }
            Method::B2b(_) => {
                // cyclic B2B: one pass of `s` selections
                let mut moved = false;
                for _ in 0..lp.s {
                    let Some(b) = selector.select(lp.session.as_ref(), &lp.grad) else {
                        break;
                    };
                    let audit = block_step(lp, b, steps.len(), max_backtracks)?;
                    steps.push(audit);
                    moved = true;
                }
                if !moved {
                    lp.record(iter - 1);
                    return Ok(Status::StationaryReached);
                }
            }
        }
        lp.refresh();
        let stalled = lp.epoch_boundary();
        lp.record(iter);
        if lp.converged() {
            return Ok(Status::ToleranceReached);
        }
        if stalled {
            return Ok(Status::StallDetected);
        }
    }
    Ok(Status::MaxIterations)
}

fn run_blocks(lp: &mut Loop<'_>, steps: &mut Vec<StepAudit>, max_backtracks: &mut usize) -> Result<Status> {
    let config = lp.config;
    let Method::B2b(schedule) = config.method else {
        unreachable!("single-block loop only drives B2B");
    };
    let mut selector = Selector::new(schedule);
    let budget = match config.iter_unit {
        IterUnit::Epoch => config.max_iter.saturating_mul(lp.s),
        IterUnit::Block => config.max_iter,
    };
    let iter_of = |updates: usize, s: usize| match config.iter_unit {
        IterUnit::Epoch => updates.div_ceil(s),
        IterUnit::Block => updates,
    };
    for k in 0..budget {
        let Some(b) = selector.select(lp.session.as_ref(), &lp.grad) else {
            if lp.records.last().map(|r| r.block_updates) != Some(lp.block_updates) {
                lp.record(iter_of(lp.block_updates, lp.s));
            }
            return Ok(Status::StationaryReached);
        };
        let audit = block_step(lp, b, k, max_backtracks)?;
        steps.push(audit);
        lp.refresh();
        let at_epoch_end = lp.block_updates % lp.s == 0;
        let stalled = at_epoch_end && lp.epoch_boundary();
        let converged = lp.converged();
        if config.iter_unit == IterUnit::Block || at_epoch_end || converged {
            lp.record(iter_of(lp.block_updates, lp.s));
        }
        if converged {
            return Ok(Status::ToleranceReached);
        }
        if stalled {
            return Ok(Status::StallDetected);
        }
    }
    Ok(Status::MaxIterations)
}

fn block_step(lp: &mut Loop<'_>, b: usize, step: usize, max_backtracks: &mut usize) -> Result<StepAudit> {
    let grad = std::mem::take(&mut lp.grad);
    let ctx = StepContext {
        step,
        grad: &grad,
        proj_grad_norm_sq: lp.pg_sq,
        assertions: lp.config.assertions,
    };
    let result = b2b_update(lp.session.as_mut(), b, &lp.config.policy, &ctx);
    lp.grad = grad;
    let up = result?;
    if let Some(ls) = up.line_search {
        *max_backtracks = (*max_backtracks).max(ls.backtracks);
    }
    lp.block_updates += 1;
    lp.last_block = Some(b);
    lp.last_alpha = Some(up.alpha);
    // the cyclic B2B pass selects against a fresh gradient each time
    if lp.config.method.is_sweep() {
        lp.refresh();
    }
    Ok(up.audit)
}

/// Common stepsize of a cyclic BBCD sweep. `OptimalConstant` resolves to
/// `0.99 / max_b L_b`.
fn cbbcd_stepsize(session: &dyn Session, policy: &StepPolicy) -> Result<f64> {
    match *policy {
        StepPolicy::Constant(a) => Ok(a),
        StepPolicy::OptimalConstant => {
            let mut l: f64 = 0.0;
            for b in 0..session.partition().block_count() {
                if let Ok(h) = session.reference(b) {
                    l = l.max(h.relative_smoothness());
                }
            }
            Ok(if l > 0.0 { CBBCD_SAFETY / l } else { CBBCD_SAFETY })
        }
        StepPolicy::ArmijoLineSearch { .. } => Err(Error::Unsupported(
            "cyclic BBCD runs with a constant stepsize".into(),
        )),
    }
}

/// Fraction of `1/L` used by cyclic BBCD when no stepsize is given.
pub const CBBCD_SAFETY: f64 = 0.99;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockPartition;
    use crate::toy::{ReferenceChoice, SeparableQuadratic};

    fn problem() -> (SeparableQuadratic, BlockedIterate) {
        let part = BlockPartition::uniform(4, 2).unwrap();
        let p = SeparableQuadratic::new(
            vec![1.0, 2.0, 3.0, 4.0, 1.5, 2.5, 0.5, 1.0],
            vec![0.5, -1.0, 2.0, 0.0, 1.0, 1.0, -0.5, 3.0],
            part.clone(),
            ReferenceChoice::Scaled,
        )
        .unwrap();
        (p, BlockedIterate::new(vec![1.0; 8], part).unwrap())
    }

    #[test]
    fn epsilon_one_stops_immediately() {
        let (p, x) = problem();
        let cfg = SolverConfig::new(Method::B2b(BlockSchedule::Greedy), StepPolicy::OptimalConstant).with_epsilon(1.0);
        let t = run(&p, x, &cfg).unwrap();
        assert_eq!(t.status, Status::ToleranceReached);
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].iter, 0);
    }

    #[test]
    fn zero_max_iter_rejected() {
        let (p, x) = problem();
        let cfg = SolverConfig::new(Method::CyclicBbcd, StepPolicy::Constant(0.5)).with_max_iter(0);
        assert!(matches!(run(&p, x, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn every_method_converges_on_separable_quadratic() {
        let methods = [
            (Method::ProjectedGradient, StepPolicy::armijo(Default::default())),
            (Method::BregmanProximalGradient, StepPolicy::OptimalConstant),
            (Method::CyclicBbcd, StepPolicy::OptimalConstant),
            (Method::B2b(BlockSchedule::Cyclic), StepPolicy::OptimalConstant),
            (Method::B2b(BlockSchedule::Greedy), StepPolicy::OptimalConstant),
            (Method::B2b(BlockSchedule::Randomized { seed: 3 }), StepPolicy::OptimalConstant),
            (Method::B2b(BlockSchedule::Greedy), StepPolicy::armijo(Default::default())),
        ];
        for (method, policy) in methods {
            let (p, x) = problem();
            // Armijo compares objective values, so it cannot resolve a
            // projected gradient much below sqrt(eps) relative
            let eps = if matches!(policy, StepPolicy::ArmijoLineSearch { .. }) { 1e-6 } else { 1e-10 };
            let cfg = SolverConfig::new(method, policy).with_epsilon(eps).with_max_iter(2000);
            let t = run(&p, x, &cfg).unwrap();
            assert!(
                matches!(t.status, Status::ToleranceReached | Status::StationaryReached),
                "{method:?}: {:?}",
                t.status
            );
            for (xi, ci) in t.iterate.values().iter().zip(p.center()) {
                assert!((xi - ci.max(0.0)).abs() < 1e-5, "{method:?}");
            }
            assert!(t.is_monotone(1e-12), "{method:?}");
        }
    }

    #[test]
    fn block_unit_records_every_update() {
        let (p, x) = problem();
        let cfg = SolverConfig::new(Method::B2b(BlockSchedule::Greedy), StepPolicy::OptimalConstant)
            .with_epsilon(1e-12)
            .with_max_iter(3)
            .with_iter_unit(IterUnit::Block);
        let t = run(&p, x, &cfg).unwrap();
        assert_eq!(t.records.len(), 4);
        assert_eq!(t.block_updates(), 3);
        assert!(t.records[1..].iter().all(|r| r.chosen_block.is_some()));
    }
}
