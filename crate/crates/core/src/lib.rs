//! Block-wise Bregman proximal gradient methods for nonnegativity-constrained
//! smooth problems, with a nonnegative matrix factorization instantiation and
//! a benchmark harness.
//!
//! The solver family (projected gradient, Bregman proximal gradient, cyclic
//! block Bregman coordinate descent and the B2B block method with cyclic,
//! greedy or randomized selection) works on any [`BlockProblem`].

pub mod block;
pub mod bregman;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod metrics;
pub mod nmf;
pub mod problem;
pub mod solvers;
pub mod toy;

pub use block::{BlockPartition, BlockedIterate};
pub use bregman::{ReferenceFunction, StepSizeBound};
pub use error::{Error, Result};
pub use matrix::{DataMatrix, DenseMatrix, SparseMatrix};
pub use nmf::{NmfProblem, NmfState};
pub use problem::{BlockProblem, Session};
