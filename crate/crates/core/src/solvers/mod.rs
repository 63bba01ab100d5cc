//! PG, BPG, cyclic BBCD and B2B with cyclic, greedy and randomized block
//! rules, constant or line-search stepsizes, and per-step descent checks.

pub mod bounds;
pub mod line_search;
pub mod run;
pub mod selection;
pub mod steps;

pub use bounds::{
    check_cyclic_envelope, check_greedy_envelope, constant_step_decrease, cyclic_rate_envelope,
    greedy_decrease, greedy_rate_envelope, sufficient_decrease, EnvelopeCheck, StepAudit, SweepAudit,
    DESCENT_SLACK,
};
pub use line_search::{armijo_line_search, ArmijoParams, LineSearchOutcome, MAX_BACKTRACKS};
pub use run::{run, IterUnit, IterationRecord, Method, RunTrace, SolverConfig, Status};
pub use selection::{block_is_valid, greedy_select, greedy_select_in, valid_blocks, valid_coordinates, BlockSchedule};
pub use steps::{b2b_block_update, b2b_step, BlockStepOutcome, bpg_step, cbbcd_sweep, pg_step, B2bStep, SearchDirection, StepPolicy};
