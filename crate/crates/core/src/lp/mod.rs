//! Dense bounded-variable primal simplex.
//!
//! Every LP in the crate (node relaxations, big-M coefficient LPs, support
//! functions, transportation problems) goes through [`solve`]. The solver is
//! a textbook two-phase tableau method: variables carry their own bounds, so
//! no bound rows are generated, and phase one uses one artificial per row whose
//! slack cannot absorb the initial residual.

mod problem;
mod simplex;

pub use problem::{LinearProgram, LpRow, Sense};
pub use simplex::{solve, solve_with, SimplexOptions};

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Position of a column relative to its bounds in the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column resting at zero.
    Free,
}

/// Outcome of [`solve`].
#[derive(Debug, Clone)]
pub struct LpResult<T> {
    pub status: LpStatus,
    /// Objective value in the problem's own sense, including the constant.
    /// Meaningful only at `Optimal`.
    pub objective: T,
    /// Structural variable values.
    pub x: Vec<T>,
    /// Row duals in the problem's own sense: `c - A^T y` is the vector of
    /// reduced costs of the structural columns.
    pub duals: Vec<T>,
    /// Reduced costs of the structural columns.
    pub reduced_costs: Vec<T>,
    /// Status of structural columns followed by one entry per row slack.
    pub basis: Vec<VarStatus>,
    /// Number of simplex iterations across both phases.
    pub iterations: usize,
}

impl<T: Copy> LpResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
