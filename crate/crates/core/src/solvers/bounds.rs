//! Descent inequalities and rate envelopes as checkable formulas.
//!
//! Every function returns the *guaranteed* quantity (decrease or upper bound);
//! callers compare observed values against it with [`DESCENT_SLACK`].

use serde::{Deserialize, Serialize};

use crate::bregman::StepSizeBound;

/// Absolute slack on every descent inequality.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Guaranteed decrease of one B2B step of size `alpha` along a direction of
/// squared norm `dir_norm_sq`:
/// `α(1+β)m/2 · (1 - LMα/((1+β)m)) · ‖d‖²`.
pub fn sufficient_decrease(alpha: f64, c: &StepSizeBound, dir_norm_sq: f64) -> f64 {
    let curvature = (1.0 + c.beta) * c.m;
    0.5 * alpha * curvature * (1.0 - c.l * c.big_m * alpha / curvature) * dir_norm_sq
}

/// Guaranteed decrease at a constant stepsize `α <= α*`: `(LM/2)‖x⁺ - x‖²`.
pub fn constant_step_decrease(c: &StepSizeBound, step_norm_sq: f64) -> f64 {
    0.5 * c.l * c.big_m * step_norm_sq
}

/// Guaranteed decrease of a greedy step: `α(1+β)m/(4sM) ‖∇ᴾf(x)‖²`.
pub fn greedy_decrease(alpha: f64, m: f64, big_m: f64, beta: f64, blocks: usize, pg_norm_sq: f64) -> f64 {
    alpha * (1.0 + beta) * m / (4.0 * blocks as f64 * big_m) * pg_norm_sq
}

/// Upper bound on `min_{k<=N} ‖∇ᴾf(x^k)‖²` for greedy and randomized B2B:
/// `4sM(f(x⁰) - f*) / ((N+1) α (1+β) m)`.
pub fn greedy_rate_envelope(
    blocks: usize,
    m: f64,
    big_m: f64,
    alpha: f64,
    beta: f64,
    f0: f64,
    f_star: f64,
    n: usize,
) -> f64 {
    4.0 * blocks as f64 * big_m * (f0 - f_star) / ((n as f64 + 1.0) * alpha * (1.0 + beta) * m)
}

/// Upper bound on `min_{k<=N} Σ_b D_h(x_b^{k+1}, x_b^k)` for cyclic BBCD:
/// `α(F(x⁰) - F*) / ((N+1)(1 - αL))`.
pub fn cyclic_rate_envelope(alpha: f64, l: f64, f0: f64, f_star: f64, n: usize) -> f64 {
    alpha * (f0 - f_star) / ((n as f64 + 1.0) * (1.0 - alpha * l))
}

/// Everything needed to re-evaluate the per-step inequalities of one B2B
/// block update after the fact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub step: usize,
    pub block: usize,
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    /// `‖d_b‖²` with invalid coordinates removed.
    pub direction_norm_sq: f64,
    /// `‖x⁺ - x‖²`.
    pub step_norm_sq: f64,
    /// Some coordinate was clipped by the projection.
    pub clamped: bool,
    pub constants: StepSizeBound,
    /// `‖∇ᴾf(x)‖²` before the step.
    pub proj_grad_norm_sq: f64,
    /// `m` and `M` over all admissible blocks at `x`.
    pub m_all: f64,
    pub big_m_all: f64,
}

impl StepAudit {
    pub fn decrease(&self) -> f64 {
        self.f_before - self.f_after
    }

    /// Excess of the observed change over the sufficient-decrease bound
    /// stated with the search direction `‖d_b‖`. Positive beyond the slack
    /// means violated.
    pub fn sufficient_decrease_excess(&self) -> f64 {
        sufficient_decrease(self.alpha, &self.constants, self.direction_norm_sq) - self.decrease()
    }

    /// Same bound with the realized direction `(x⁺ - x)/α`, which equals
    /// `d_b` on every step that clips nothing.
    pub fn realized_sufficient_decrease_excess(&self) -> f64 {
        let realized = self.step_norm_sq / (self.alpha * self.alpha);
        sufficient_decrease(self.alpha, &self.constants, realized) - self.decrease()
    }

    pub fn constant_step_excess(&self) -> f64 {
        constant_step_decrease(&self.constants, self.step_norm_sq) - self.decrease()
    }

    /// Greedy per-step bound evaluated with the visited block's constants.
    pub fn greedy_excess(&self, blocks: usize) -> f64 {
        let c = &self.constants;
        greedy_decrease(self.alpha, c.m, c.big_m, c.beta, blocks, self.proj_grad_norm_sq)
            - self.decrease()
    }

    /// Greedy per-step bound with `m = min_b m_b`, `M = max_b M_b` at `x`.
    pub fn greedy_excess_global(&self, blocks: usize) -> f64 {
        greedy_decrease(
            self.alpha,
            self.m_all,
            self.big_m_all,
            self.constants.beta,
            blocks,
            self.proj_grad_norm_sq,
        ) - self.decrease()
    }
}

/// One cyclic sweep of BBCD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAudit {
    pub sweep: usize,
    pub alpha: f64,
    pub f_before: f64,
    pub f_after: f64,
    /// `Σ_b (1/α - L_b) D_h(x_b⁺, x_b)`.
    pub weighted_distance: f64,
    /// `Σ_b D_h(x_b⁺, x_b)`.
    pub distance: f64,
    /// `max_b L_b` over the sweep.
    pub l_max: f64,
}

impl SweepAudit {
    pub fn descent_excess(&self) -> f64 {
        self.weighted_distance - (self.f_before - self.f_after)
    }
}

/// Result of checking a rate envelope along a trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub checked: usize,
    pub violations: usize,
    /// Largest `observed / envelope` ratio.
    pub worst_ratio: f64,
}

impl EnvelopeCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `min_{k<=N} ‖∇ᴾf(x^k)‖² <= envelope(N)` for every `N` along a greedy
/// or randomized trace. Constants are the run-level `m = min m_b`,
/// `M = max M_b`, and `f*` is the best objective observed.
pub fn check_greedy_envelope(audits: &[StepAudit], blocks: usize, f_best: f64) -> EnvelopeCheck {
    let mut out = EnvelopeCheck::default();
    let Some(first) = audits.first() else {
        return out;
    };
    let m = audits.iter().map(|a| a.m_all).fold(f64::INFINITY, f64::min);
    let big_m = audits.iter().map(|a| a.big_m_all).fold(0.0, f64::max);
    let alpha = audits.iter().map(|a| a.alpha).fold(f64::INFINITY, f64::min);
    let beta = audits.iter().map(|a| a.constants.beta).fold(f64::INFINITY, f64::min);
    let f0 = first.f_before;
    let mut running_min = f64::INFINITY;
    for (n, a) in audits.iter().enumerate() {
        running_min = running_min.min(a.proj_grad_norm_sq);
        let env = greedy_rate_envelope(blocks, m, big_m, alpha, beta, f0, f_best, n);
        out.checked += 1;
        if running_min > env + DESCENT_SLACK {
            out.violations += 1;
        }
        if env > 0.0 {
            out.worst_ratio = out.worst_ratio.max(running_min / env);
        }
    }
    out
}

/// Checks `min_{k<=N} Σ_b D_h(x_b^{k+1}, x_b^k) <= α(F⁰ - F*)/((N+1)(1 - αL))`.
pub fn check_cyclic_envelope(sweeps: &[SweepAudit], f_best: f64) -> EnvelopeCheck {
    let mut out = EnvelopeCheck::default();
    let Some(first) = sweeps.first() else {
        return out;
    };
    let l = sweeps.iter().map(|s| s.l_max).fold(0.0, f64::max);
    let alpha = first.alpha;
    let f0 = first.f_before;
    let mut running_min = f64::INFINITY;
    for (n, s) in sweeps.iter().enumerate() {
        running_min = running_min.min(s.distance);
        let env = cyclic_rate_envelope(alpha, l, f0, f_best, n);
        out.checked += 1;
        if running_min > env + DESCENT_SLACK {
            out.violations += 1;
        }
        if env > 0.0 {
            out.worst_ratio = out.worst_ratio.max(running_min / env);
        }
    }
    out
}
