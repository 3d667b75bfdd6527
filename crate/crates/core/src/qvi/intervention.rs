use crate::model::ProblemSpec;

use super::grid::Grid;

/// `M phi` on one time slice plus the minimizing impulse per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    pub values: Vec<f64>,
    /// Index into the impulse set; `None` only when the set is empty.
    pub argmin: Vec<Option<usize>>,
}

/// Value of jumping from `x` with impulse `z` given slice `phi` at time `t`,
/// excluding the cost. Post-impulse states outside the closed box pay the
/// bequest at the point where the segment `x -> Gamma(x, z)` leaves it.
pub(crate) fn landing_value(
    spec: &ProblemSpec,
    grid: &Grid,
    t: f64,
    phi: &[f64],
    x: &[f64],
    z: &[f64],
    scratch: &mut [f64],
) -> f64 {
    spec.impulse_response.apply_into(x, z, scratch);
    if spec.domain.contains_closed(scratch) {
        grid.interpolate(phi, scratch)
    } else {
        let exit = spec.domain.exit_point(x, scratch);
        spec.bequest(t, &exit)
    }
}

/// Non-local intervention operator on the slice `phi` at time `t`:
///
/// `M phi(x) = min_z [ phi(Gamma(x, z)) + c(t, z) ]`
///
/// Ties keep the first impulse in canonical order. An empty impulse set
/// yields `+inf` everywhere.
pub fn intervention_operator(spec: &ProblemSpec, grid: &Grid, t: f64, phi: &[f64]) -> Intervention {
    let n = grid.n_space();
    let mut values = vec![f64::INFINITY; n];
    let mut argmin = vec![None; n];
    if spec.impulse_set.is_empty() {
        return Intervention { values, argmin };
    }
    let costs: Vec<f64> = spec
        .impulse_set
        .iter()
        .map(|z| spec.intervention_cost(t, z))
        .collect();
    let mut scratch = vec![0.0; grid.dim()];
    for node in 0..n {
        let x = grid.coords(node);
        for (zi, z) in spec.impulse_set.iter().enumerate() {
            let v = landing_value(spec, grid, t, phi, &x, z, &mut scratch) + costs[zi];
            if v < values[node] {
                values[node] = v;
                argmin[node] = Some(zi);
            }
        }
    }
    Intervention { values, argmin }
}
