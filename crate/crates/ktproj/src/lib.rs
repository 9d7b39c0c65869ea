//! Best approximation from Kuhn-Tucker sets of composite monotone inclusions.
//!
//! Given maximally monotone operators `A` on `H`, `B` on `G`, and a bounded
//! linear coupling `L : H -> G`, the Kuhn-Tucker set
//!
//! ```text
//! Z = { (x, v*) : -L*v* in Ax  and  Lx in B^{-1}v* }
//! ```
//!
//! collects the primal-dual solutions of the inclusion `0 in Ax + L*BLx`.
//! This crate computes the *projection* of a reference pair `(x0, v0*)` onto
//! `Z` by a strongly convergent Haugazeau-type outer-approximation iteration
//! driven entirely by resolvent evaluations: no operator norms, no matrix
//! inversions. A Fejer-monotone baseline (same half-steps, no projection) is
//! included for comparison; it reaches an unspecified Kuhn-Tucker point.
//!
//! The [`systems`] module extends the solver to coupled blocks
//! (`m` primal spaces, `K` dual spaces, a grid of couplings) via a product
//! space lift, with front ends for relaxed common-zero problems and
//! structured convex minimization. The `solve` binary wraps everything behind
//! a TOML problem-file format; [`oracle`] holds the independent brute-force
//! references the test suites compare against.

pub mod diagnostics;
pub mod haugazeau;
pub mod operators;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod space;
pub mod systems;
pub mod trace_io;

pub use haugazeau::{project_q, EmptyIntersection, HalfSpace, QScalars};
pub use operators::{GraphPoint, MonotoneOp, ProxFn};
pub use solver::{
    fejer_solve, kt_residual, projection_step, select_resolvent, solve, solve_with_selection,
    GraphSelection, KTProblem, Mode, PrimalDual, Schedule, Solution, SolveStatus, SolverConfig,
    SolverError, Trace,
};
pub use space::{BlockVec, InnerSpace, LinearMap, Vector};
pub use systems::{
    build_minimization, build_relaxation, lift, solve_system, MinimizationSpec, RelaxationSpec,
    SystemProblem, SystemSolution,
};
