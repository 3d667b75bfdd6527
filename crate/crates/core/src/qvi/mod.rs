//! Grid, intervention operator and the monotone implicit solver for the
//! double obstacle HJBI quasi-variational inequality.

mod grid;
mod intervention;
mod residual;
mod scheme;
mod solver;

use thiserror::Error;

pub use grid::{build_grid, sup_norms, Grid, StopObstacle, MAX_DIM};
pub use intervention::{intervention_operator, Intervention};
pub(crate) use intervention::landing_value;
pub use residual::{pde_residual, ResidualField};
pub use scheme::{build_stencil, Stencil};
pub use solver::{solve_qvi, Diagnostics, SolverParams, ValueField};

#[derive(Debug, Error)]
pub enum QviError {
    #[error("solver did not converge at slice {slice}; gap history {history:?}")]
    NotConverged {
        /// Full field with `diagnostics.converged == false`.
        field: Box<ValueField>,
        slice: usize,
        history: Vec<f64>,
    },
    #[error("non-monotone stencil at node {node} ({coords:?}): weight {weight}")]
    NonMonotone {
        node: usize,
        coords: Vec<f64>,
        weight: f64,
    },
    #[error("grid dimension {grid} does not match problem dimension {spec}")]
    GridMismatch { grid: usize, spec: usize },
}
