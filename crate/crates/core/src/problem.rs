//! The abstract composite problem `min f(x) s.t. x >= 0` over a block partition.
//!
//! [`BlockProblem`] is the stateless description a user implements: objective,
//! partial gradients and per-block reference functions evaluated at an arbitrary
//! point. Solvers never drive a problem directly; they open a [`Session`], which
//! owns the current iterate and may cache whatever makes repeated evaluation
//! cheap (the NMF session keeps the residual `A - U Vᵀ`).

use rand::{Rng, RngCore};

use crate::block::{BlockPartition, BlockedIterate};
use crate::bregman::{bregman_step, ReferenceFunction};
use crate::error::{Error, Result};

pub trait BlockProblem {
    fn partition(&self) -> &BlockPartition;

    /// `f(x)`; deterministic in `x`.
    fn objective(&self, x: &[f64]) -> f64;

    /// `∇_b f(x)`.
    fn partial_gradient(&self, x: &[f64], b: usize) -> Vec<f64>;

    /// Full gradient, block by block.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.partition();
        let mut g = Vec::with_capacity(p.dim());
        for b in 0..p.block_count() {
            g.extend(self.partial_gradient(x, b));
        }
        g
    }

    /// Reference function `h_b` at `x` (its scale may depend on the other blocks).
    fn reference(&self, x: &[f64], b: usize) -> Result<ReferenceFunction>;

    /// Solution of the search-direction subproblem for block `b`.
    fn block_subproblem_direction(&self, x: &[f64], b: usize) -> Result<Vec<f64>> {
        let h = self.reference(x, b)?;
        let g = self.partial_gradient(x, b);
        bregman_step(&h, &x[self.partition().range(b)], &g)
    }

    /// Whether block `b` has a well-defined reference at `x`. Blocks failing
    /// this are never selected.
    fn block_admissible(&self, x: &[f64], b: usize) -> bool {
        self.reference(x, b).is_ok()
    }

    /// Random feasible point used by sampling validators; uniform on `[0,1]^n`
    /// unless overridden.
    fn sample_feasible(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.partition().dim()).map(|_| rng.gen::<f64>()).collect()
    }

    /// Problem-specific quality measure reported next to the objective.
    fn relative_residual(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Opens an evaluation session owning `x`.
    fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>>;
}

/// A solver run's view of the problem at its current iterate.
pub trait Session {
    fn iterate(&self) -> &BlockedIterate;

    fn partition(&self) -> &BlockPartition {
        self.iterate().partition()
    }

    fn objective(&self) -> f64;

    fn partial_gradient(&self, b: usize) -> Vec<f64>;

    fn gradient(&self) -> Vec<f64> {
        let p = self.partition().clone();
        let mut g = Vec::with_capacity(p.dim());
        for b in 0..p.block_count() {
            g.extend(self.partial_gradient(b));
        }
        g
    }

    fn reference(&self, b: usize) -> Result<ReferenceFunction>;

    /// Search direction `d_b` over the whole block (no coordinate filtering).
    fn direction(&self, b: usize) -> Result<Vec<f64>>;

    fn block_admissible(&self, b: usize) -> bool;

    /// `f` at the current iterate with block `b` replaced by `values`.
    fn objective_with_block(&self, b: usize, values: &[f64]) -> f64;

    /// `f(x with block b = values) - f(x)`. Sessions that can form the
    /// difference without cancellation should override this.
    fn objective_change(&self, b: usize, values: &[f64]) -> f64 {
        self.objective_with_block(b, values) - self.objective()
    }

    /// `f` at an arbitrary point.
    fn objective_at(&self, x: &[f64]) -> f64;

    fn set_block(&mut self, b: usize, values: &[f64]) -> Result<()>;

    fn set_values(&mut self, values: &[f64]) -> Result<()>;

    fn relative_residual(&self) -> Option<f64> {
        None
    }
}

/// Session that re-evaluates everything from the problem on every call.
pub struct RecomputeSession<'a, P: BlockProblem + ?Sized> {
    problem: &'a P,
    x: BlockedIterate,
}

impl<'a, P: BlockProblem + ?Sized> RecomputeSession<'a, P> {
    pub fn new(problem: &'a P, x: BlockedIterate) -> Result<Self> {
        if x.partition() != problem.partition() {
            return Err(Error::dims("iterate partition differs from the problem's"));
        }
        Ok(Self { problem, x })
    }
}

impl<P: BlockProblem + ?Sized> Session for RecomputeSession<'_, P> {
    fn iterate(&self) -> &BlockedIterate {
        &self.x
    }

    fn objective(&self) -> f64 {
        self.problem.objective(self.x.values())
    }

    fn partial_gradient(&self, b: usize) -> Vec<f64> {
        self.problem.partial_gradient(self.x.values(), b)
    }

    fn gradient(&self) -> Vec<f64> {
        self.problem.gradient(self.x.values())
    }

    fn reference(&self, b: usize) -> Result<ReferenceFunction> {
        self.problem.reference(self.x.values(), b)
    }

    fn direction(&self, b: usize) -> Result<Vec<f64>> {
        self.problem.block_subproblem_direction(self.x.values(), b)
    }

    fn block_admissible(&self, b: usize) -> bool {
        self.problem.block_admissible(self.x.values(), b)
    }

    fn objective_with_block(&self, b: usize, values: &[f64]) -> f64 {
        let mut y = self.x.values().to_vec();
        y[self.x.partition().range(b)].copy_from_slice(values);
        self.problem.objective(&y)
    }

    fn objective_at(&self, x: &[f64]) -> f64 {
        self.problem.objective(x)
    }

    fn set_block(&mut self, b: usize, values: &[f64]) -> Result<()> {
        self.x.set_block(b, values)
    }

    fn set_values(&mut self, values: &[f64]) -> Result<()> {
        self.x.set_values(values)
    }

    fn relative_residual(&self) -> Option<f64> {
        self.problem.relative_residual(self.x.values())
    }
}
