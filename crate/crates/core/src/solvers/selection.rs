//! Valid coordinates, valid blocks and the block selection rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::BlockedIterate;
use crate::problem::{BlockProblem, Session};

/// Which block a B2B step updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockSchedule {
    Cyclic,
    /// Largest projected partial gradient; ties go to the lowest index.
    Greedy,
    /// Uniform over the currently valid blocks.
    Randomized { seed: u64 },
}

/// Indices (local to the block) of the valid coordinates: `-g_i ∉ ∂δ₊(x_i)`,
/// i.e. `x_i > 0 && g_i != 0` or `x_i == 0 && g_i < 0`.
pub fn valid_coordinates(x_b: &[f64], g_b: &[f64]) -> Vec<usize> {
    x_b.iter()
        .zip(g_b)
        .enumerate()
        .filter(|(_, (&x, &g))| is_valid_coordinate(x, g))
        .map(|(i, _)| i)
        .collect()
}

#[inline]
pub(crate) fn is_valid_coordinate(x: f64, g: f64) -> bool {
    (x > 0.0 && g != 0.0) || (x == 0.0 && g < 0.0)
}

/// Squared norm of `g_b` over the valid coordinates of the block. This is the
/// squared norm of the block's projected gradient.
pub(crate) fn valid_gradient_norm_sq(x_b: &[f64], g_b: &[f64]) -> f64 {
    x_b.iter()
        .zip(g_b)
        .filter(|(&x, &g)| is_valid_coordinate(x, g))
        .map(|(_, g)| g * g)
        .sum()
}

/// A block is valid when its reference is well defined and it has at least
/// one valid coordinate. `grad` is the full gradient at the session iterate.
pub fn block_is_valid(session: &dyn Session, grad: &[f64], b: usize) -> bool {
    let range = session.partition().range(b);
    let x_b = &session.iterate().values()[range.clone()];
    let g_b = &grad[range];
    x_b.iter().zip(g_b).any(|(&x, &g)| is_valid_coordinate(x, g)) && session.block_admissible(b)
}

pub fn valid_blocks(session: &dyn Session, grad: &[f64]) -> Vec<usize> {
    (0..session.partition().block_count())
        .filter(|&b| block_is_valid(session, grad, b))
        .collect()
}

/// Greedy rule over the valid blocks.
pub fn greedy_select_in(session: &dyn Session, grad: &[f64]) -> Option<usize> {
    let partition = session.partition();
    let x = session.iterate().values();
    let mut best: Option<(usize, f64)> = None;
    for b in 0..partition.block_count() {
        let r = partition.range(b);
        let score = valid_gradient_norm_sq(&x[r.clone()], &grad[r]);
        if score == 0.0 {
            continue;
        }
        if best.map_or(true, |(_, s)| score > s) && session.block_admissible(b) {
            best = Some((b, score));
        }
    }
    best.map(|(b, _)| b)
}

/// Greedy rule evaluated directly on a problem; `None` when no block is valid.
pub fn greedy_select<P: BlockProblem + ?Sized>(problem: &P, x: &BlockedIterate) -> Option<usize> {
    let session = problem.session(x.clone()).ok()?;
    let grad = session.gradient();
    greedy_select_in(session.as_ref(), &grad)
}

/// Stateful block picker for one run.
#[derive(Debug, Clone)]
pub(crate) struct Selector {
    schedule: BlockSchedule,
    cursor: usize,
    rng: Option<ChaCha8Rng>,
}

impl Selector {
    pub(crate) fn new(schedule: BlockSchedule) -> Self {
        let rng = match schedule {
            BlockSchedule::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self {
            schedule,
            cursor: 0,
            rng,
        }
    }

    /// Next block, or `None` when no block is valid (stationary point).
    pub(crate) fn select(&mut self, session: &dyn Session, grad: &[f64]) -> Option<usize> {
        match self.schedule {
            BlockSchedule::Greedy => greedy_select_in(session, grad),
            BlockSchedule::Cyclic => {
                let s = session.partition().block_count();
                for k in 0..s {
                    let b = (self.cursor + k) % s;
                    if block_is_valid(session, grad, b) {
                        self.cursor = (b + 1) % s;
                        return Some(b);
                    }
                }
                None
            }
            BlockSchedule::Randomized { .. } => {
                let valid = valid_blocks(session, grad);
                if valid.is_empty() {
                    return None;
                }
                let rng = self.rng.as_mut().expect("randomized selector owns an rng");
                Some(valid[rng.gen_range(0..valid.len())])
            }
        }
    }
}
