//! Mixed-integer linear programming toolkit: a solver-agnostic model
//! representation, a deterministic MPS writer, an embedded branch-and-bound
//! solver over a bounded-variable revised simplex, a brute-force enumeration
//! oracle for small instances, and a bridge to external MPS-consuming
//! solvers.

pub mod branch_bound;
pub mod external;
pub mod model;
pub mod mps;
pub mod oracle;
pub mod simplex;

pub use branch_bound::{
    solve, Branching, Search, SolveError, SolveResult, SolveStatus, SolverConfig,
    FEASIBILITY_TOL, INTEGRALITY_TOL,
};
pub use external::{solve_external, ExternalError};
pub use model::{
    ConstraintId, Direction, LinearConstraint, MipModel, ModelError, Sense, VarId, VarKind,
    Variable,
};
pub use mps::{write_mps, write_mps_file};
pub use oracle::{brute_force_oracle, OracleError, OracleOutcome, DEFAULT_BINARY_LIMIT};
