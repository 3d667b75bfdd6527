//! Feedback strategies read off a solved field, and the one-step DPP check.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{Controller, Stopper};
use crate::error::{DomainError, Error};
use crate::model::ProblemSpec;
use crate::qvi::{landing_value, sup_norms, Grid, StopObstacle, ValueField};

/// Player I feedback: intervene where `V >= MV - act_tol` with the
/// minimizing impulse of `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerPolicy {
    #[serde(skip)]
    pub grid: Grid,
    pub act_tol: f64,
    /// Time-major mask over all lattice nodes.
    pub intervene: Vec<bool>,
    /// Impulse index at intervention nodes, `None` elsewhere.
    pub impulse: Vec<Option<usize>>,
    pub impulses: Vec<Vec<f64>>,
}

/// Player II feedback: stop where `V <= G + act_tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopperPolicy {
    #[serde(skip)]
    pub grid: Grid,
    pub act_tol: f64,
    pub stop: Vec<bool>,
}

impl ControllerPolicy {
    fn lookup(&self, t: f64, x: &[f64]) -> usize {
        self.grid.nearest_time(t) * self.grid.n_space() + self.grid.nearest_node(x)
    }

    pub fn region_size(&self) -> usize {
        self.intervene.iter().filter(|&&b| b).count()
    }
}

impl Controller for ControllerPolicy {
    fn act(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let i = self.lookup(t, x);
        self.impulse[i].map(|z| self.impulses[z].clone())
    }
}

impl StopperPolicy {
    pub fn region_size(&self) -> usize {
        self.stop.iter().filter(|&&b| b).count()
    }
}

impl Stopper for StopperPolicy {
    fn stop(&self, t: f64, x: &[f64]) -> bool {
        self.stop[self.grid.nearest_time(t) * self.grid.n_space() + self.grid.nearest_node(x)]
    }
}

/// `10 fixed_point_tol (1 + |G|_inf)`.
pub fn default_act_tol(spec: &ProblemSpec, field: &ValueField) -> f64 {
    let (_, g_sup) = sup_norms(spec, &field.grid);
    10.0 * field.diagnostics.fixed_point_tol * (1.0 + g_sup)
}

/// Reads both players' active sets off a converged field.
///
/// The terminal slice is all-stop. The controller never acts on the spatial
/// boundary, where the value is pinned to the bequest.
pub fn extract_policy(
    spec: &ProblemSpec,
    field: &ValueField,
    act_tol: f64,
) -> Result<(ControllerPolicy, StopperPolicy), Error> {
    if !field.diagnostics.converged {
        return Err(Error::StaleField);
    }
    if !(act_tol >= 0.0) {
        return Err(DomainError::Arity(format!("act_tol must be non-negative, got {act_tol}")).into());
    }
    let grid = &field.grid;
    let n = grid.n_space();
    let nt = grid.nt;
    let obstacle = StopObstacle::new(spec, grid);
    let coords: Vec<Vec<f64>> = (0..n).map(|i| grid.coords(i)).collect();
    let boundary: Vec<bool> = (0..n).map(|i| grid.is_boundary(i)).collect();
    let mv = field.intervention(spec);

    let mut stop = vec![false; grid.len()];
    let mut intervene = vec![false; grid.len()];
    let mut impulse = vec![None; grid.len()];
    for k in 0..=nt {
        let t = grid.time(k);
        for node in 0..n {
            let i = k * n + node;
            let v = field.values[i];
            stop[i] = k == nt || v <= obstacle.at(spec, k, t, &coords[node]) + act_tol;
            if k < nt && !boundary[node] && v >= mv[k].values[node] - act_tol {
                intervene[i] = true;
                impulse[i] = mv[k].argmin[node];
            }
        }
    }
    Ok((
        ControllerPolicy {
            grid: grid.clone(),
            act_tol,
            intervene,
            impulse,
            impulses: spec.impulse_set.iter().map(<[f64]>::to_vec).collect(),
        },
        StopperPolicy {
            grid: grid.clone(),
            act_tol,
            stop,
        },
    ))
}

/// Three-point Gauss-Hermite rule for a standard normal.
const GH_NODES: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
const GH_WEIGHTS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

/// `|V(t_k, x) - RHS|` for the one-step dynamic programming identity with
/// `h = dt`:
///
/// `RHS = min( MV(t, x), max( G(t, x), h/2 (f(t,x) + E f(t+h, Y)) + E V(t+h, Y) ) )`
///
/// where `Y = x + mu h + sigma sqrt(h) xi` and the expectation uses a tensor
/// Gauss-Hermite rule. Nodes of `Y` outside the closed box are charged the
/// bequest at the crossing point.
pub fn dpp_residual(spec: &ProblemSpec, field: &ValueField, k: usize, node: usize) -> Result<f64, DomainError> {
    let grid = &field.grid;
    if k >= grid.nt {
        return Err(DomainError::TimeRange {
            t: grid.time(k.min(grid.nt)) + grid.dt(),
            lo: 0.0,
            hi: grid.horizon,
        });
    }
    if node >= grid.n_space() || grid.is_boundary(node) {
        return Err(DomainError::BoundaryNode(node));
    }
    let p = grid.dim();
    let h = grid.dt();
    let t = grid.time(k);
    let t1 = grid.time(k + 1);
    let x = grid.coords(node);
    let mut mu = vec![0.0; p];
    let mut sigma = vec![0.0; p * p];
    spec.drift_into(t, &x, &mut mu);
    spec.vol_into(t, &x, &mut sigma);
    let next = field.slice(k + 1);

    let mut expect_v = 0.0;
    let mut expect_f = 0.0;
    let mut y = vec![0.0; p];
    let mut digits = vec![0usize; p];
    for combo in 0..3usize.pow(p as u32) {
        let mut c = combo;
        let mut weight = 1.0;
        for d in digits.iter_mut() {
            *d = c % 3;
            c /= 3;
            weight *= GH_WEIGHTS[*d];
        }
        for i in 0..p {
            let noise: f64 = (0..p).map(|j| sigma[i * p + j] * GH_NODES[digits[j]]).sum();
            y[i] = x[i] + mu[i] * h + noise * h.sqrt();
        }
        if spec.domain.contains_closed(&y) {
            expect_v += weight * grid.interpolate(next, &y);
            expect_f += weight * spec.running_cost(t1, &y);
        } else {
            let exit = spec.domain.exit_point(&x, &y);
            expect_v += weight * spec.bequest(t1, &exit);
            expect_f += weight * spec.running_cost(t1, &exit);
        }
    }
    let cont = 0.5 * h * (spec.running_cost(t, &x) + expect_f) + expect_v;
    let lower = StopObstacle::new(spec, grid).at(spec, k, t, &x);
    let slice = field.slice(k);
    let mut scratch = vec![0.0; p];
    let impulse = spec
        .impulse_set
        .iter()
        .map(|z| landing_value(spec, grid, t, slice, &x, z, &mut scratch) + spec.intervention_cost(t, z))
        .fold(f64::INFINITY, f64::min);
    let rhs = impulse.min(lower.max(cont));
    Ok((field.at(k, node) - rhs).abs())
}

/// Mean and max of [`dpp_residual`] over every interior node of every
/// non-terminal slice.
pub fn dpp_residual_summary(spec: &ProblemSpec, field: &ValueField) -> Result<(f64, f64), DomainError> {
    let grid = &field.grid;
    let n = grid.n_space();
    let interior: Vec<usize> = (0..n).filter(|&i| !grid.is_boundary(i)).collect();
    let all: Vec<f64> = (0..grid.nt)
        .into_par_iter()
        .flat_map_iter(|k| {
            interior
                .iter()
                .map(move |&node| dpp_residual(spec, field, k, node))
                .collect::<Vec<_>>()
        })
        .collect::<Result<_, _>>()?;
    let max = all.iter().copied().fold(0.0, f64::max);
    Ok((crate::stats::mean(&all), max))
}
