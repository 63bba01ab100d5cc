//! Small closed-form problems for tests, examples and the invariant checker.

use nalgebra::{DMatrix, DVector};

use crate::block::{BlockPartition, BlockedIterate};
use crate::bregman::ReferenceFunction;
use crate::error::{Error, Result};
use crate::problem::{BlockProblem, RecomputeSession, Session};

/// How a quadratic toy problem picks its block reference functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceChoice {
    /// `½‖·‖²` with `L_b` the block curvature bound.
    Energy,
    /// `(c/2)‖·‖²` with `c` the block curvature bound and `L_b = 1`.
    Scaled,
    /// `½ xᵀ Q_bb x` with `L_b = 1` (only for [`CoupledQuadratic`]).
    Weighted,
}

/// `f(x) = ½ Σ w_i (x_i - c_i)²`.
#[derive(Debug, Clone)]
pub struct SeparableQuadratic {
    weights: Vec<f64>,
    center: Vec<f64>,
    partition: BlockPartition,
    choice: ReferenceChoice,
}

impl SeparableQuadratic {
    pub fn new(
        weights: Vec<f64>,
        center: Vec<f64>,
        partition: BlockPartition,
        choice: ReferenceChoice,
    ) -> Result<Self> {
        if weights.len() != center.len() || weights.len() != partition.dim() {
            return Err(Error::dims("weights, center and partition disagree"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be positive"));
        }
        if choice == ReferenceChoice::Weighted {
            return Err(Error::Unsupported(
                "separable quadratic uses Energy or Scaled references".into(),
            ));
        }
        Ok(Self {
            weights,
            center,
            partition,
            choice,
        })
    }

    /// `½(x - c)²` in one dimension with unit weight.
    pub fn scalar(center: f64, choice: ReferenceChoice) -> Self {
        Self::new(
            vec![1.0],
            vec![center],
            BlockPartition::from_sizes(&[1]).expect("one block"),
            choice,
        )
        .expect("valid scalar problem")
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn block_curvature(&self, b: usize) -> f64 {
        self.weights[self.partition.range(b)]
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }
}

impl BlockProblem for SeparableQuadratic {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn objective(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .zip(&self.weights)
            .map(|((xi, ci), wi)| wi * (xi - ci) * (xi - ci))
            .sum::<f64>()
    }

    fn partial_gradient(&self, x: &[f64], b: usize) -> Vec<f64> {
        self.partition
            .range(b)
            .map(|i| self.weights[i] * (x[i] - self.center[i]))
            .collect()
    }

    fn reference(&self, _x: &[f64], b: usize) -> Result<ReferenceFunction> {
        let w = self.block_curvature(b);
        match self.choice {
            ReferenceChoice::Energy => ReferenceFunction::energy().with_relative_smoothness(w),
            _ => ReferenceFunction::scaled_energy(w),
        }
    }

    fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(RecomputeSession::new(self, x)?))
    }
}

/// `f(x) = ½ xᵀQx - bᵀx` with `Q` symmetric positive semidefinite and every
/// diagonal block `Q_bb` positive definite.
#[derive(Debug, Clone)]
pub struct CoupledQuadratic {
    q: DMatrix<f64>,
    lin: DVector<f64>,
    partition: BlockPartition,
    choice: ReferenceChoice,
}

impl CoupledQuadratic {
    pub fn new(
        q: DMatrix<f64>,
        lin: Vec<f64>,
        partition: BlockPartition,
        choice: ReferenceChoice,
    ) -> Result<Self> {
        let n = partition.dim();
        if q.nrows() != n || q.ncols() != n || lin.len() != n {
            return Err(Error::dims("Q, b and partition disagree"));
        }
        let prob = Self {
            q,
            lin: DVector::from_vec(lin),
            partition,
            choice,
        };
        for b in 0..prob.partition.block_count() {
            ReferenceFunction::weighted_quadratic(prob.diagonal_block(b))?;
        }
        Ok(prob)
    }

    pub fn diagonal_block(&self, b: usize) -> DMatrix<f64> {
        let r = self.partition.range(b);
        self.q
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    fn block_lambda_max(&self, b: usize) -> f64 {
        nalgebra::SymmetricEigen::new(self.diagonal_block(b))
            .eigenvalues
            .max()
    }
}

impl BlockProblem for CoupledQuadratic {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.q * &xv)) - self.lin.dot(&xv)
    }

    fn partial_gradient(&self, x: &[f64], b: usize) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        self.partition
            .range(b)
            .map(|i| self.q.row(i).transpose().dot(&xv) - self.lin[i])
            .collect()
    }

    fn reference(&self, _x: &[f64], b: usize) -> Result<ReferenceFunction> {
        match self.choice {
            ReferenceChoice::Energy => {
                ReferenceFunction::energy().with_relative_smoothness(self.block_lambda_max(b))
            }
            ReferenceChoice::Scaled => ReferenceFunction::scaled_energy(self.block_lambda_max(b)),
            ReferenceChoice::Weighted => ReferenceFunction::weighted_quadratic(self.diagonal_block(b)),
        }
    }

    fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(RecomputeSession::new(self, x)?))
    }
}

/// `f(x) = Σ (x_i - c)⁴`, a single-block problem without a global
/// Lipschitz gradient. Its reference is Energy with a nominal `L_b = 1`; it is
/// meant for line-search tests, not constant stepsizes.
#[derive(Debug, Clone)]
pub struct ShiftedQuartic {
    center: f64,
    partition: BlockPartition,
}

impl ShiftedQuartic {
    pub fn new(center: f64, dim: usize) -> Result<Self> {
        Ok(Self {
            center,
            partition: BlockPartition::from_sizes(&[dim])?,
        })
    }
}

impl BlockProblem for ShiftedQuartic {
    fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    fn objective(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| (v - self.center).powi(4)).sum()
    }

    fn partial_gradient(&self, x: &[f64], _b: usize) -> Vec<f64> {
        x.iter().map(|v| 4.0 * (v - self.center).powi(3)).collect()
    }

    fn reference(&self, _x: &[f64], _b: usize) -> Result<ReferenceFunction> {
        Ok(ReferenceFunction::energy())
    }

    fn session(&self, x: BlockedIterate) -> Result<Box<dyn Session + '_>> {
        Ok(Box::new(RecomputeSession::new(self, x)?))
    }
}
