//! Parallel distributed optimization with an adaptive proximal
//! regularizer (PDAR), plus BCD and PVD baselines.
//!
//! The joint problem `min f(x)` over a block-separable feasible set is
//! split into `N` per-block subproblems solved in parallel against the
//! previous iterate. Coordination comes from a proximal penalty whose
//! coefficient adapts: before an iteration threshold it grows with the
//! block's previous step norm, after it it grows linearly in the
//! iteration index. The crate ships:
//!
//! - [`core`]: block-partitioned vectors and the [`core::Problem`] trait
//! - [`regularizer`]: the two-phase adaptive coefficient
//! - [`subsolver`]: projected gradient with backtracking, and the
//!   Euclidean simplex projection
//! - [`algorithms`]: the PDAR, BCD, PVD and unregularized-parallel
//!   drivers with full per-iteration instrumentation
//! - [`benchmark`]: the N-agent three-bin resource-allocation problem
//! - [`trace_io`]: trace CSV persistence and run comparison
//!
//! The `pdar` binary ties these together; see the crate README.

pub mod algorithms;
pub mod benchmark;
pub mod core;
pub mod error;
pub mod regularizer;
pub mod subsolver;
pub mod trace_io;

pub use crate::algorithms::{
    descent_dot, run, run_bcd, run_parallel_noreg, run_pdar, run_pvd, step_formula_residual,
    Algorithm, IterationRow, IterationTrace, RunConfig,
};
pub use crate::benchmark::{
    block_gradient, eval_g, eval_local, eval_objective, gen_instance, ResourceAllocationInstance,
    ResourceProblem,
};
pub use crate::core::{BlockStep, BlockVector, CostMode, Problem, StepRecord};
pub use crate::error::{Error, Result};
pub use crate::regularizer::{lambda_coeff, phi, RegularizerParams};
pub use crate::subsolver::{augmented_value, project_simplex, solve_block, SubsolverConfig};
