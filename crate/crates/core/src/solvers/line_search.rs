use crate::block::BlockedIterate;
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::problem::{BlockProblem, Session};

/// Backtracks allowed before the search gives up (`τ^60 α₀`).
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoParams {
    pub alpha0: f64,
    pub tau: f64,
    pub sigma: f64,
}

impl ArmijoParams {
    pub fn new(alpha0: f64, tau: f64, sigma: f64) -> Result<Self> {
        let p = Self { alpha0, tau, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return Err(Error::Config(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0,1), got {}", self.tau)));
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(Error::Config(format!("sigma must lie in (0,1/2), got {}", self.sigma)));
        }
        Ok(())
    }
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            alpha0: 1.0,
            tau: 0.5,
            sigma: 0.1,
        }
    }
}

/// Relative precision below which two objective values are not distinguished.
pub const OBJECTIVE_RESOLUTION: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub backtracks: usize,
    /// The direction was zero (or too small to move `x` at `α₀`) and `α₀`
    /// was accepted vacuously.
    pub degenerate: bool,
}

/// Armijo rule along the projected arc `x_b(α) = [x_b + α d_b]₊`: the first
/// `α = τ^m α₀`, `m = 0, 1, ...`, with
/// `f(x) - f(x(α)) >= -σ <∇_b f(x), x_b(α) - x_b>`.
pub(crate) fn armijo_block(
    session: &dyn Session,
    b: usize,
    g_b: &[f64],
    d_b: &[f64],
    params: &ArmijoParams,
) -> Result<LineSearchOutcome> {
    let range = session.partition().range(b);
    let x_b = &session.iterate().values()[range];
    let f0 = session.objective();
    search(x_b, g_b, d_b, params, |trial| session.objective_change(b, trial), f0, b)
}

/// Same rule applied to the full vector (used by PG and BPG).
pub(crate) fn armijo_full(
    session: &dyn Session,
    g: &[f64],
    d: &[f64],
    params: &ArmijoParams,
) -> Result<LineSearchOutcome> {
    let x = session.iterate().values();
    let f0 = session.objective();
    search(x, g, d, params, |trial| session.objective_at(trial) - f0, f0, 0)
}

fn search(
    x: &[f64],
    g: &[f64],
    d: &[f64],
    params: &ArmijoParams,
    change: impl Fn(&[f64]) -> f64,
    f0: f64,
    block: usize,
) -> Result<LineSearchOutcome> {
    params.validate()?;
    if d.iter().all(|v| *v == 0.0) {
        return Ok(LineSearchOutcome {
            alpha: params.alpha0,
            backtracks: 0,
            degenerate: true,
        });
    }
    let resolution = OBJECTIVE_RESOLUTION * f0.abs();
    let mut alpha = params.alpha0;
    let mut trial = vec![0.0; x.len()];
    let mut diff = vec![0.0; x.len()];
    for m in 0..=MAX_BACKTRACKS {
        for i in 0..x.len() {
            trial[i] = (x[i] + alpha * d[i]).max(0.0);
            diff[i] = trial[i] - x[i];
        }
        // A trial that rounds back onto x is not progress. If even α₀ does
        // not move x, or its first-order decrease is below the resolution of
        // f, the direction counts as zero.
        let moved = diff.iter().any(|v| *v != 0.0);
        let predicted = -dot(g, &diff);
        if m == 0 && (!moved || predicted.abs() <= resolution) {
            return Ok(LineSearchOutcome {
                alpha: params.alpha0,
                backtracks: 0,
                degenerate: true,
            });
        }
        let decrease = -change(&trial);
        if moved && decrease >= params.sigma * predicted {
            return Ok(LineSearchOutcome {
                alpha,
                backtracks: m,
                degenerate: false,
            });
        }
        alpha *= params.tau;
    }
    Err(Error::LineSearchFailure {
        block,
        backtracks: MAX_BACKTRACKS,
        alpha0: params.alpha0,
    })
}

/// Armijo stepsize for block `b` of `problem` at `x` along `d_b`.
pub fn armijo_line_search<P: BlockProblem + ?Sized>(
    problem: &P,
    x: &BlockedIterate,
    b: usize,
    d_b: &[f64],
    params: &ArmijoParams,
) -> Result<LineSearchOutcome> {
    let session = problem.session(x.clone())?;
    let g_b = session.partial_gradient(b);
    if d_b.len() != g_b.len() {
        return Err(Error::dims(format!(
            "direction has {} entries, block {b} has {}",
            d_b.len(),
            g_b.len()
        )));
    }
    armijo_block(session.as_ref(), b, &g_b, d_b, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockPartition;
    use crate::toy::{ReferenceChoice, SeparableQuadratic, ShiftedQuartic};

    fn point(v: f64) -> BlockedIterate {
        BlockedIterate::new(vec![v], BlockPartition::from_sizes(&[1]).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_accepts_unit_step() {
        // f = ½(x-1)², x = 3, d = -2: x(1) = 1, decrease 2 >= 0.1·2·2 = 0.4
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        let out = armijo_line_search(&p, &point(3.0), 0, &[-2.0], &ArmijoParams::new(1.0, 0.5, 0.1).unwrap())
            .unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.backtracks, 0);
    }

    #[test]
    fn zero_direction_is_degenerate() {
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        let out = armijo_line_search(&p, &point(3.0), 0, &[0.0], &ArmijoParams::default()).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.alpha, 1.0);
    }

    #[test]
    fn steep_quartic_backtracks_twice() {
        // f = (x-4)⁴ at x = 2: g = -32, d = 32, α₀ = 1/4.
        //   α = 1/4  -> x = 10, f = 1296 > 16            reject
        //   α = 1/8  -> x = 6,  decrease 0 < 0.1·32·4     reject
        //   α = 1/16 -> x = 4,  decrease 16 >= 0.1·32·2   accept
        let p = ShiftedQuartic::new(4.0, 1).unwrap();
        let params = ArmijoParams::new(0.25, 0.5, 0.1).unwrap();
        let out = armijo_line_search(&p, &point(2.0), 0, &[32.0], &params).unwrap();
        assert_eq!(out.backtracks, 2);
        assert_eq!(out.alpha, 0.5 * 0.5 * 0.25);
    }

    #[test]
    fn ascent_direction_exhausts_backtracks() {
        let p = SeparableQuadratic::scalar(1.0, ReferenceChoice::Energy);
        let err = armijo_line_search(&p, &point(3.0), 0, &[1.0], &ArmijoParams::default()).unwrap_err();
        assert!(matches!(err, Error::LineSearchFailure { backtracks: 60, .. }));
    }

    #[test]
    fn parameters_validated() {
        assert!(ArmijoParams::new(0.0, 0.5, 0.1).is_err());
        assert!(ArmijoParams::new(1.0, 1.0, 0.1).is_err());
        assert!(ArmijoParams::new(1.0, 0.5, 0.5).is_err());
    }
}
