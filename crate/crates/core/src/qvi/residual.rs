use crate::model::ProblemSpec;

use super::grid::StopObstacle;
use super::intervention::intervention_operator;
use super::solver::{node_residual, slice_data, ValueField};
use super::QviError;

/// Nodewise discrete residual of the QVI; zero on the boundary and at `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub values: Vec<f64>,
}

impl ResidualField {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluates `max{ min[ -D_t V - L_h V - f, V - G ], V - M V }` with the
/// solver's stencils.
pub fn pde_residual(spec: &ProblemSpec, field: &ValueField) -> Result<ResidualField, QviError> {
    let grid = &field.grid;
    let n = grid.n_space();
    let obstacle = StopObstacle::new(spec, grid);
    let mut values = vec![0.0; grid.len()];
    for k in 0..grid.nt {
        let data = slice_data(spec, grid, &obstacle, k)?;
        let v = field.slice(k);
        let next = field.slice(k + 1);
        let upper = intervention_operator(spec, grid, data.t, v).values;
        for node in 0..n {
            if grid.is_boundary(node) {
                continue;
            }
            values[k * n + node] = node_residual(&data, grid.dt(), v, next, &upper, node);
        }
    }
    Ok(ResidualField { values })
}
