//! Single updates: PG, BPG, one cyclic BBCD sweep and one B2B block step.
//!
//! The `*_update` functions act on a [`Session`] in place and are what
//! [`run`](super::run) drives; the public `*_step` wrappers take a problem
//! and an iterate and return the new iterate.

use serde::{Deserialize, Serialize};

use super::bounds::{constant_step_decrease, sufficient_decrease, StepAudit, SweepAudit, DESCENT_SLACK};
use super::line_search::{armijo_block, armijo_full, ArmijoParams, LineSearchOutcome};
use super::selection::{is_valid_coordinate, valid_gradient_norm_sq, BlockSchedule, Selector};
use crate::block::BlockedIterate;
use crate::bregman::bregman_distance;
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::problem::{BlockProblem, Session};

/// Relative tolerance when comparing a constant stepsize against `α*`.
const STEP_BOUND_RTOL: f64 = 1e-12;

/// Stepsize rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepPolicy {
    Constant(f64),
    /// `α* = (1+β)m/(2LM)` of the visited block.
    OptimalConstant,
    ArmijoLineSearch { alpha0: f64, tau: f64, sigma: f64 },
}

impl StepPolicy {
    pub fn armijo(params: ArmijoParams) -> Self {
        StepPolicy::ArmijoLineSearch {
            alpha0: params.alpha0,
            tau: params.tau,
            sigma: params.sigma,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Constant(a) if !(a.is_finite() && a > 0.0) => {
                Err(Error::Config(format!("stepsize must be positive, got {a}")))
            }
            StepPolicy::ArmijoLineSearch { alpha0, tau, sigma } => {
                ArmijoParams { alpha0, tau, sigma }.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Search direction of one B2B step.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDirection {
    pub block: usize,
    /// Subproblem solution with the invalid coordinates set to zero.
    pub d_b: Vec<f64>,
    /// `d_b` on the coordinates that can move (`x_i > 0, d_i != 0` or
    /// `x_i = 0, d_i > 0`), zero elsewhere.
    pub restricted_d_b: Vec<f64>,
}

impl SearchDirection {
    fn new(block: usize, x_b: &[f64], g_b: &[f64], raw: Vec<f64>) -> Self {
        let d_b: Vec<f64> = raw
            .into_iter()
            .zip(x_b.iter().zip(g_b))
            .map(|(d, (&x, &g))| if is_valid_coordinate(x, g) { d } else { 0.0 })
            .collect();
        let restricted_d_b = d_b
            .iter()
            .zip(x_b)
            .map(|(&d, &x)| {
                if (x > 0.0 && d != 0.0) || (x == 0.0 && d > 0.0) {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            block,
            d_b,
            restricted_d_b,
        }
    }
}

/// Result of [`b2b_step`].
#[derive(Debug, Clone)]
pub enum B2bStep {
    Moved {
        iterate: BlockedIterate,
        direction: SearchDirection,
        alpha: f64,
    },
    /// No valid block: `x` is stationary.
    StationaryReached,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockUpdate {
    pub direction: SearchDirection,
    pub alpha: f64,
    pub line_search: Option<LineSearchOutcome>,
    pub audit: StepAudit,
}

/// Context the run loop already has at the current iterate.
pub(crate) struct StepContext<'a> {
    pub step: usize,
    pub grad: &'a [f64],
    pub proj_grad_norm_sq: f64,
    pub assertions: bool,
}

fn violation(invariant: &'static str, step: usize, block: Option<usize>, lhs: f64, rhs: f64) -> Error {
    Error::InvariantViolation {
        invariant,
        step,
        block,
        lhs,
        rhs,
    }
}

/// `min m_b` and `max M_b` over the blocks with a well-defined reference.
pub(crate) fn global_constants(session: &dyn Session) -> (f64, f64) {
    let mut m = f64::INFINITY;
    let mut big_m: f64 = 0.0;
    for b in 0..session.partition().block_count() {
        if let Ok(h) = session.reference(b) {
            m = m.min(h.strong_convexity());
            big_m = big_m.max(h.gradient_smoothness());
        }
    }
    (m, big_m)
}

/// One B2B update of block `b`: `x_b⁺ = [x_b + α d_b]₊` with the invalid
/// coordinates of `d_b` removed.
pub(crate) fn b2b_update(
    session: &mut dyn Session,
    b: usize,
    policy: &StepPolicy,
    ctx: &StepContext<'_>,
) -> Result<BlockUpdate> {
    let range = session.partition().range(b);
    let x_b = session.iterate().values()[range.clone()].to_vec();
    let g_b = &ctx.grad[range];
    if valid_gradient_norm_sq(&x_b, g_b) == 0.0 {
        return Err(Error::InvalidBlock {
            block: b,
            reason: "no valid coordinate".into(),
        });
    }
    let h = session.reference(b)?;
    let bound = h.step_bound();
    let direction = SearchDirection::new(b, &x_b, g_b, session.direction(b)?);

    let mut line_search = None;
    let alpha = match *policy {
        StepPolicy::Constant(a) => {
            if ctx.assertions && a > bound.alpha_star * (1.0 + STEP_BOUND_RTOL) {
                return Err(Error::Config(format!(
                    "stepsize {a} exceeds the bound {} of block {b}",
                    bound.alpha_star
                )));
            }
            a
        }
        StepPolicy::OptimalConstant => bound.alpha_star,
        StepPolicy::ArmijoLineSearch { alpha0, tau, sigma } => {
            let out = armijo_block(
                &*session,
                b,
                g_b,
                &direction.d_b,
                &ArmijoParams { alpha0, tau, sigma },
            )?;
            line_search = Some(out);
            out.alpha
        }
    };

    let mut clamped = false;
    let new: Vec<f64> = x_b
        .iter()
        .zip(&direction.d_b)
        .map(|(&x, &d)| {
            let t = x + alpha * d;
            if t < 0.0 {
                clamped = true;
                0.0
            } else {
                t
            }
        })
        .collect();
    let step_norm_sq: f64 = new.iter().zip(&x_b).map(|(a, c)| (a - c) * (a - c)).sum();

    let (m_all, big_m_all) = global_constants(&*session);
    let f_before = session.objective();
    session.set_block(b, &new)?;
    let f_after = session.objective();

    let audit = StepAudit {
        step: ctx.step,
        block: b,
        alpha,
        f_before,
        f_after,
        direction_norm_sq: dot(&direction.d_b, &direction.d_b),
        step_norm_sq,
        clamped,
        constants: bound,
        proj_grad_norm_sq: ctx.proj_grad_norm_sq,
        m_all,
        big_m_all,
    };

    if ctx.assertions {
        // The sufficient-decrease bound with the realized direction and the
        // constant-step bound hold for isotropic references at any
        // step; with an anisotropic reference they are only established for
        // steps the projection leaves alone.
        if h.is_isotropic() || !clamped {
            let needed = sufficient_decrease(alpha, &bound, step_norm_sq / (alpha * alpha));
            if f_after > f_before - needed + DESCENT_SLACK {
                return Err(violation("sufficient decrease", ctx.step, Some(b), f_after, f_before - needed));
            }
            if alpha <= bound.alpha_star * (1.0 + STEP_BOUND_RTOL) {
                let needed = constant_step_decrease(&bound, step_norm_sq);
                if f_after > f_before - needed + DESCENT_SLACK {
                    return Err(violation("constant-step descent", ctx.step, Some(b), f_after, f_before - needed));
                }
            }
        }
        if line_search.is_some() && f_after > f_before + DESCENT_SLACK {
            return Err(violation("monotone descent", ctx.step, Some(b), f_after, f_before));
        }
    }

    Ok(BlockUpdate {
        direction,
        alpha,
        line_search,
        audit,
    })
}

/// `x⁺ = [x + α d]₊` on the whole vector.
fn full_step(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(d).map(|(&x, &d)| (x + alpha * d).max(0.0)).collect()
}

/// Block-wise Bregman directions assembled into one vector. A block without
/// a well-defined reference contributes a zero direction.
fn bregman_directions(session: &dyn Session) -> Result<Vec<f64>> {
    let p = session.partition().clone();
    let mut d = vec![0.0; p.dim()];
    for b in 0..p.block_count() {
        match session.direction(b) {
            Ok(db) => d[p.range(b)].copy_from_slice(&db),
            Err(Error::InvalidBlock { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(d)
}

/// Full-vector step shared by PG (`d = -∇f`) and BPG (Bregman `d`).
pub(crate) fn full_update(
    session: &mut dyn Session,
    grad: &[f64],
    bregman: bool,
    policy: &StepPolicy,
) -> Result<(f64, Option<LineSearchOutcome>)> {
    let d = if bregman {
        bregman_directions(&*session)?
    } else {
        grad.iter().map(|g| -g).collect()
    };
    let (alpha, ls) = match *policy {
        StepPolicy::Constant(a) => (a, None),
        StepPolicy::OptimalConstant => {
            if !bregman {
                return Err(Error::Config(
                    "projected gradient has no block constants; use a constant stepsize or line search"
                        .into(),
                ));
            }
            let mut a = f64::INFINITY;
            for b in 0..session.partition().block_count() {
                if let Ok(h) = session.reference(b) {
                    a = a.min(h.step_bound().alpha_star);
                }
            }
            (if a.is_finite() { a } else { 1.0 }, None)
        }
        StepPolicy::ArmijoLineSearch { alpha0, tau, sigma } => {
            let out = armijo_full(&*session, grad, &d, &ArmijoParams { alpha0, tau, sigma })?;
            (out.alpha, Some(out))
        }
    };
    let next = full_step(session.iterate().values(), &d, alpha);
    session.set_values(&next)?;
    Ok((alpha, ls))
}

/// One cyclic BBCD sweep over all blocks with a common stepsize
/// `0 < α < 1/L_b`. Blocks without a well-defined reference are skipped.
pub(crate) fn cbbcd_update(
    session: &mut dyn Session,
    alpha: f64,
    sweep: usize,
    assertions: bool,
) -> Result<SweepAudit> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("stepsize must be positive, got {alpha}")));
    }
    let s = session.partition().block_count();
    let f_before = session.objective();
    let mut weighted = 0.0;
    let mut distance = 0.0;
    let mut l_max: f64 = 0.0;
    for b in 0..s {
        let h = match session.reference(b) {
            Ok(h) => h,
            Err(Error::InvalidBlock { .. }) => continue,
            Err(e) => return Err(e),
        };
        if !h.is_isotropic() {
            return Err(Error::Unsupported(
                "cyclic BBCD needs an isotropic reference for its closed-form block update".into(),
            ));
        }
        let l = h.relative_smoothness();
        if alpha * l >= 1.0 {
            return Err(Error::Config(format!(
                "cyclic BBCD needs alpha < 1/L; block {b} has L = {l}, alpha = {alpha}"
            )));
        }
        l_max = l_max.max(l);
        let range = session.partition().range(b);
        let x_b = session.iterate().values()[range].to_vec();
        let d = session.direction(b)?;
        let new = full_step(&x_b, &d, alpha);
        let dist = bregman_distance(&h, &new, &x_b)?;
        weighted += (1.0 / alpha - l) * dist;
        distance += dist;
        session.set_block(b, &new)?;
    }
    let f_after = session.objective();
    let audit = SweepAudit {
        sweep,
        alpha,
        f_before,
        f_after,
        weighted_distance: weighted,
        distance,
        l_max,
    };
    if assertions && audit.descent_excess() > DESCENT_SLACK {
        return Err(violation(
            "sweep descent",
            sweep,
            None,
            weighted,
            f_before - f_after,
        ));
    }
    Ok(audit)
}

/// `x⁺ = [x - α∇f(x)]₊`.
pub fn pg_step<P: BlockProblem + ?Sized>(problem: &P, x: &BlockedIterate, alpha: f64) -> Result<BlockedIterate> {
    StepPolicy::Constant(alpha).validate()?;
    let mut session = problem.session(x.clone())?;
    let g = session.gradient();
    full_update(session.as_mut(), &g, false, &StepPolicy::Constant(alpha))?;
    Ok(session.iterate().clone())
}

/// `x⁺ = [x + α d]₊` with `d` the block-wise Bregman directions.
pub fn bpg_step<P: BlockProblem + ?Sized>(problem: &P, x: &BlockedIterate, alpha: f64) -> Result<BlockedIterate> {
    StepPolicy::Constant(alpha).validate()?;
    let mut session = problem.session(x.clone())?;
    let g = session.gradient();
    full_update(session.as_mut(), &g, true, &StepPolicy::Constant(alpha))?;
    Ok(session.iterate().clone())
}

/// One cyclic BBCD sweep with the sweep-descent assertion enabled.
pub fn cbbcd_sweep<P: BlockProblem + ?Sized>(problem: &P, x: &BlockedIterate, alpha: f64) -> Result<BlockedIterate> {
    let mut session = problem.session(x.clone())?;
    cbbcd_update(session.as_mut(), alpha, 0, true)?;
    Ok(session.iterate().clone())
}

/// One B2B step from `x`: picks a block by `schedule` (the first draw for a
/// randomized schedule, the first valid block for cyclic), then updates it.
/// Descent assertions are enabled.
pub fn b2b_step<P: BlockProblem + ?Sized>(
    problem: &P,
    x: &BlockedIterate,
    schedule: BlockSchedule,
    policy: StepPolicy,
) -> Result<B2bStep> {
    policy.validate()?;
    let mut session = problem.session(x.clone())?;
    let grad = session.gradient();
    let Some(b) = Selector::new(schedule).select(session.as_ref(), &grad) else {
        return Ok(B2bStep::StationaryReached);
    };
    let pg = crate::metrics::projected_gradient_norm_sq(session.iterate().values(), &grad);
    let ctx = StepContext {
        step: 0,
        grad: &grad,
        proj_grad_norm_sq: pg,
        assertions: true,
    };
    let up = b2b_update(session.as_mut(), b, &policy, &ctx)?;
    Ok(B2bStep::Moved {
        iterate: session.iterate().clone(),
        direction: up.direction,
        alpha: up.alpha,
    })
}

/// Outcome of [`b2b_block_update`].
#[derive(Debug, Clone)]
pub struct BlockStepOutcome {
    pub direction: SearchDirection,
    pub alpha: f64,
    pub audit: StepAudit,
}

/// B2B update of a chosen block `b` on an open session, with the descent
/// assertions enabled.
pub fn b2b_block_update(session: &mut dyn Session, b: usize, policy: StepPolicy) -> Result<BlockStepOutcome> {
    policy.validate()?;
    let grad = session.gradient();
    let pg = crate::metrics::projected_gradient_norm_sq(session.iterate().values(), &grad);
    let ctx = StepContext {
        step: 0,
        grad: &grad,
        proj_grad_norm_sq: pg,
        assertions: true,
    };
    let up = b2b_update(session, b, &policy, &ctx)?;
    Ok(BlockStepOutcome {
        direction: up.direction,
        alpha: up.alpha,
        audit: up.audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockPartition;
    use crate::toy::{ReferenceChoice, SeparableQuadratic};

    fn point(v: &[f64], sizes: &[usize]) -> BlockedIterate {
        BlockedIterate::new(v.to_vec(), BlockPartition::from_sizes(sizes).unwrap()).unwrap()
    }

    #[test]
    fn pg_step_examples() {
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        // stationary
        assert_eq!(pg_step(&p, &point(&[1.0], &[1]), 0.3).unwrap().values(), &[1.0]);
        // x = 1 with gradient 2 (center -1) clamps to 0
        let p = SeparableQuadratic::scalar(-1.0, ReferenceChoice::Energy);
        assert_eq!(pg_step(&p, &point(&[1.0], &[1]), 1.0).unwrap().values(), &[0.0]);
    }

    #[test]
    fn pg_unit_step_solves_quadratic() {
        let part = BlockPartition::from_sizes(&[2, 1]).unwrap();
        let c = vec![0.5, 2.0, 0.0];
        let p = SeparableQuadratic::new(vec![1.0; 3], c.clone(), part.clone(), ReferenceChoice::Energy).unwrap();
        let x = BlockedIterate::new(vec![3.0, 0.0, 1.0], part).unwrap();
        assert_eq!(pg_step(&p, &x, 1.0).unwrap().values(), c.as_slice());
    }

    #[test]
    fn bpg_with_energy_matches_pg() {
        let part = BlockPartition::from_sizes(&[2, 2]).unwrap();
        let p = SeparableQuadratic::new(
            vec![1.0, 2.0, 0.5, 3.0],
            vec![0.3, -1.0, 2.0, 0.1],
            part.clone(),
            ReferenceChoice::Energy,
        )
        .unwrap();
        let x = BlockedIterate::new(vec![1.0, 0.5, 0.0, 2.0], part).unwrap();
        for alpha in [0.1, 0.37, 1.0] {
            assert_eq!(
                pg_step(&p, &x, alpha).unwrap().values(),
                bpg_step(&p, &x, alpha).unwrap().values()
            );
        }
    }

    /// `½(x-1)²` paired with `h = x²` (scale 2).
    struct OverScaled(BlockPartition);

    impl BlockProblem for OverScaled {
        fn partition(&self) -> &BlockPartition {
            &self.0
        }
        fn objective(&self, x: &[f64]) -> f64 {
            0.5 * (x[0] - 1.0).powi(2)
        }
        fn partial_gradient(&self, x: &[f64], _b: usize) -> Vec<f64> {
            vec![x[0] - 1.0]
        }
        fn reference(&self, _x: &[f64], _b: usize) -> Result<crate::bregman::ReferenceFunction> {
            crate::bregman::ReferenceFunction::scaled_energy(2.0)
        }
        fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>> {
            Ok(Box::new(crate::problem::RecomputeSession::new(self, x)?))
        }
    }

    #[test]
    fn bpg_scaled_energy_one_dimensional() {
        // g = 2, d = -g/2 = -1, x⁺ = 2; the subproblem
        // min_y 2(y-3) + (y-3)² over y >= 0 is minimized at y = 2 as well
        let p = OverScaled(BlockPartition::from_sizes(&[1]).unwrap());
        let next = bpg_step(&p, &point(&[3.0], &[1]), 1.0).unwrap();
        assert_eq!(next.values(), &[2.0]);
        let grid_min = (0..=6000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|a, b| {
                let fa = 2.0 * (a - 3.0) + (a - 3.0).powi(2);
                let fb = 2.0 * (b - 3.0) + (b - 3.0).powi(2);
                fa.partial_cmp(&fb).unwrap()
            })
            .unwrap();
        assert!((grid_min - 2.0).abs() < 1e-9);
    }

    #[test]
    fn b2b_energy_half_step() {
        // f = ½(x-1)², x = 3, α = ½: d = -2, x⁺ = 2
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        let out = b2b_step(&p, &point(&[3.0], &[1]), BlockSchedule::Greedy, StepPolicy::Constant(0.5)).unwrap();
        match out {
            B2bStep::Moved {
                iterate,
                direction,
                alpha,
            } => {
                assert_eq!(iterate.values(), &[2.0]);
                assert_eq!(direction.d_b, vec![-2.0]);
                assert_eq!(alpha, 0.5);
            }
            B2bStep::StationaryReached => panic!("expected a step"),
        }
    }

    #[test]
    fn b2b_stationary_point() {
        let p = SeparableQuadratic::scalar(-1.0, ReferenceChoice::Energy);
        let out = b2b_step(&p, &point(&[0.0], &[1]), BlockSchedule::Cyclic, StepPolicy::OptimalConstant).unwrap();
        assert!(matches!(out, B2bStep::StationaryReached));
    }

    #[test]
    fn b2b_rejects_stepsize_above_bound() {
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        let err = b2b_step(&p, &point(&[3.0], &[1]), BlockSchedule::Greedy, StepPolicy::Constant(1.5)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn restricted_direction_drops_blocked_coordinates() {
        // x = [0, 1, 2], g = [-1, 0, 3]: coordinate 1 is invalid (x > 0, g = 0)
        let dir = SearchDirection::new(0, &[0.0, 1.0, 2.0], &[-1.0, 0.0, 3.0], vec![1.0, 5.0, -3.0]);
        assert_eq!(dir.d_b, vec![1.0, 0.0, -3.0]);
        assert_eq!(dir.restricted_d_b, vec![1.0, 0.0, -3.0]);
        let dir = SearchDirection::new(0, &[0.0], &[-1.0], vec![0.0]);
        assert_eq!(dir.restricted_d_b, vec![0.0]);
    }

    #[test]
    fn cbbcd_single_block_equals_bpg() {
        let part = BlockPartition::from_sizes(&[3]).unwrap();
        let p = SeparableQuadratic::new(
            vec![1.0, 2.0, 4.0],
            vec![0.5, -1.0, 3.0],
            part.clone(),
            ReferenceChoice::Scaled,
        )
        .unwrap();
        let x = BlockedIterate::new(vec![1.0, 1.0, 1.0], part).unwrap();
        assert_eq!(
            cbbcd_sweep(&p, &x, 0.9).unwrap().values(),
            bpg_step(&p, &x, 0.9).unwrap().values()
        );
    }

    #[test]
    fn cbbcd_fixed_point() {
        let part = BlockPartition::from_sizes(&[1, 1]).unwrap();
        let p = SeparableQuadratic::new(vec![1.0, 1.0], vec![0.5, -1.0], part.clone(), ReferenceChoice::Energy)
            .unwrap();
        let x = BlockedIterate::new(vec![0.5, 0.0], part).unwrap();
        assert_eq!(cbbcd_sweep(&p, &x, 0.5).unwrap().values(), x.values());
        assert!(cbbcd_sweep(&p, &x, 1.0).is_err());
    }
}
