use serde::{Deserialize, Serialize};

use crate::model::{ProblemSpec, Stopping};

use super::grid::{sup_norms, Grid, StopObstacle};
use super::intervention::{intervention_operator, Intervention};
use super::scheme::{build_stencil, Stencil};
use super::QviError;

/// Tolerances for [`solve_qvi`]. `None` picks the default scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverParams {
    /// Sup-norm gap between outer iterates; default `1e-8 (1 + |G|_inf)`.
    pub fixed_point_tol: Option<f64>,
    pub max_outer_iters: usize,
    /// Projected-SOR stopping tolerance in residual units; default
    /// `fixed_point_tol / 10`.
    pub linear_solver_tol: Option<f64>,
    pub max_sweeps: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            fixed_point_tol: None,
            max_outer_iters: 50,
            linear_solver_tol: None,
            max_sweeps: 20_000,
        }
    }
}

/// Per-slice convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub fixed_point_tol: f64,
    /// Indexed by time slice; the terminal slice records zeros.
    pub outer_iterations: Vec<usize>,
    pub final_fixed_point_gap: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub stopping: Stopping,
    /// Lower obstacle used off the terminal slice when stopping is disabled.
    pub stop_floor: Option<f64>,
    /// `solver`, or the oracle that produced the field.
    pub source: String,
}

impl Diagnostics {
    pub fn max_outer_iterations(&self) -> usize {
        self.outer_iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Value function sampled on a [`Grid`], slices stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl ValueField {
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.n_space();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn at(&self, k: usize, node: usize) -> f64 {
        self.values[k * self.grid.n_space() + node]
    }

    /// Interpolated value at time node `k`.
    pub fn value_at(&self, k: usize, x: &[f64]) -> f64 {
        self.grid.interpolate(self.slice(k), x)
    }

    /// `M V` on every slice.
    pub fn intervention(&self, spec: &ProblemSpec) -> Vec<Intervention> {
        (0..self.grid.n_times())
            .map(|k| intervention_operator(spec, &self.grid, self.grid.time(k), self.slice(k)))
            .collect()
    }

    pub fn sup_distance(&self, other: &ValueField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) struct SliceData {
    pub t: f64,
    pub stencil: Stencil,
    pub lower: Vec<f64>,
    pub bequest: Vec<f64>,
    pub running: Vec<f64>,
}

pub(crate) fn slice_data(
    spec: &ProblemSpec,
    grid: &Grid,
    obstacle: &StopObstacle,
    k: usize,
) -> Result<SliceData, QviError> {
    let t = grid.time(k);
    let stencil = build_stencil(spec, grid, t)?;
    let n = grid.n_space();
    let mut lower = Vec::with_capacity(n);
    let mut bequest = Vec::with_capacity(n);
    let mut running = Vec::with_capacity(n);
    for node in 0..n {
        let x = grid.coords(node);
        lower.push(obstacle.at(spec, k, t, &x));
        bequest.push(spec.bequest(t, &x));
        running.push(spec.running_cost(t, &x));
    }
    Ok(SliceData {
        t,
        stencil,
        lower,
        bequest,
        running,
    })
}

/// Discrete residual `max{ min[ A(V), V - lower ], V - upper }` at an
/// interior node, with `A(V) = (V - V_next)/dt - L_h V - f`.
pub(crate) fn node_residual(
    data: &SliceData,
    dt: f64,
    v: &[f64],
    next: &[f64],
    upper: &[f64],
    node: usize,
) -> f64 {
    let pde = (v[node] - next[node]) / dt - data.stencil.apply(v, node) - data.running[node];
    let inner = pde.min(v[node] - data.lower[node]);
    let outer = v[node] - upper[node];
    if outer.is_nan() {
        inner
    } else {
        inner.max(outer)
    }
}

#[inline]
fn project(v: f64, lower: f64, upper: f64) -> f64 {
    v.max(lower).min(upper)
}

/// Projected SOR for the double obstacle problem with a frozen upper
/// obstacle. Returns the sweep count, or `None` if the cap was hit.
fn psor(
    grid: &Grid,
    data: &SliceData,
    next: &[f64],
    upper: &[f64],
    v: &mut [f64],
    tol: f64,
    max_sweeps: usize,
) -> Option<usize> {
    let dt = grid.dt();
    let interior: Vec<usize> = (0..grid.n_space()).filter(|&n| !grid.is_boundary(n)).collect();
    let diag: Vec<f64> = interior
        .iter()
        .map(|&n| 1.0 / dt + data.stencil.total_weight(n))
        .collect();
    let rhs: Vec<f64> = interior
        .iter()
        .map(|&n| next[n] / dt + data.running[n])
        .collect();
    let max_diag = diag.iter().copied().fold(0.0, f64::max);

    // Jacobi radius estimate for the relaxation factor.
    let rho = interior
        .iter()
        .zip(&diag)
        .map(|(&n, d)| data.stencil.total_weight(n) / d)
        .fold(0.0, f64::max);
    let c = grid
        .nx
        .iter()
        .map(|&n| (std::f64::consts::PI / n as f64).cos())
        .fold(0.0, f64::max);
    let rc = (rho * c).min(0.999_999);
    let mut omega = (2.0 / (1.0 + (1.0 - rc * rc).sqrt())).min(1.9);
    let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 64.0 * f64::EPSILON * scale;

    for sweep in 0..max_sweeps {
        if sweep == max_sweeps / 2 {
            omega = 1.0;
        }
        let mut change: f64 = 0.0;
        let mut relax = |i: usize, v: &mut [f64]| {
            let n = interior[i];
            let off: f64 = data.stencil.neighbours(n).map(|(j, w)| w * v[j]).sum();
            let gs = (rhs[i] + off) / diag[i];
            let new = project(v[n] + omega * (gs - v[n]), data.lower[n], upper[n]);
            change = change.max((new - v[n]).abs());
            v[n] = new;
        };
        if sweep % 2 == 0 {
            for i in 0..interior.len() {
                relax(i, v);
            }
        } else {
            for i in (0..interior.len()).rev() {
                relax(i, v);
            }
        }
        if change * max_diag <= tol || change <= floor {
            return Some(sweep + 1);
        }
    }
    None
}

/// Backward time stepping for the double obstacle QVI
///
/// `max{ min[ -dV/dt - L V - f, V - G ], V - M V } = 0`, `V = G` on the
/// spatial boundary and at `T`.
///
/// Each slice runs an outer fixed point on the impulse obstacle: freeze
/// `O = M V^(m)`, solve the implicit Euler step projected onto
/// `min(O, max(G, .))`, repeat until the sup-norm gap is below tolerance.
/// Where `O < G` the impulse obstacle wins.
pub fn solve_qvi(spec: &ProblemSpec, grid: &Grid, params: &SolverParams) -> Result<ValueField, QviError> {
    if grid.dim() != spec.dim() {
        return Err(QviError::GridMismatch {
            grid: grid.dim(),
            spec: spec.dim(),
        });
    }
    let n = grid.n_space();
    let nt = grid.nt;
    let dt = grid.dt();
    let (_, g_sup) = sup_norms(spec, grid);
    let fp_tol = params
        .fixed_point_tol
        .unwrap_or(1e-8 * (1.0 + g_sup));
    let lin_tol = params.linear_solver_tol.unwrap_or(fp_tol / 10.0);
    let obstacle = StopObstacle::new(spec, grid);
    let boundary: Vec<usize> = (0..n).filter(|&i| grid.is_boundary(i)).collect();
    let interior: Vec<usize> = (0..n).filter(|&i| !grid.is_boundary(i)).collect();

    let mut values = vec![0.0; grid.len()];
    for node in 0..n {
        values[nt * n + node] = spec.bequest(grid.horizon, &grid.coords(node));
    }
    let mut outer_iterations = vec![0; nt + 1];
    let mut gaps = vec![0.0; nt + 1];
    let mut residual_norms = vec![0.0; nt + 1];
    let mut failure: Option<(usize, Vec<f64>)> = None;

    for k in (0..nt).rev() {
        let data = slice_data(spec, grid, &obstacle, k)?;
        let (head, tail) = values.split_at_mut((k + 1) * n);
        let next = &tail[..n];
        let mut v = next.to_vec();
        for &b in &boundary {
            v[b] = data.bequest[b];
        }
        let mut history = Vec::new();
        let mut converged = false;
        let mut upper = vec![f64::INFINITY; n];
        for m in 1..=params.max_outer_iters {
            if !spec.impulse_set.is_empty() {
                upper = intervention_operator(spec, grid, data.t, &v).values;
            }
            let prev = v.clone();
            if psor(grid, &data, next, &upper, &mut v, lin_tol, params.max_sweeps).is_none() {
                history.push(f64::NAN);
                outer_iterations[k] = m;
                break;
            }
            let gap = if spec.impulse_set.is_empty() {
                0.0
            } else {
                prev.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            };
            history.push(gap);
            outer_iterations[k] = m;
            gaps[k] = gap;
            if gap <= fp_tol {
                converged = true;
                break;
            }
        }
        if spec.impulse_set.is_empty() {
            upper.fill(f64::INFINITY);
        } else {
            upper = intervention_operator(spec, grid, data.t, &v).values;
        }
        residual_norms[k] = interior
            .iter()
            .map(|&i| node_residual(&data, dt, &v, next, &upper, i).abs())
            .fold(0.0, f64::max);
        head[k * n..].copy_from_slice(&v);
        if !converged && failure.is_none() {
            failure = Some((k, history));
        }
    }

    let field = ValueField {
        grid: grid.clone(),
        values,
        diagnostics: Diagnostics {
            converged: failure.is_none(),
            fixed_point_tol: fp_tol,
            outer_iterations,
            final_fixed_point_gap: gaps,
            residual_norms,
            stopping: spec.stopping,
            stop_floor: obstacle.floor(),
            source: "solver".into(),
        },
    };
    match failure {
        None => Ok(field),
        Some((slice, history)) => Err(QviError::NotConverged {
            field: Box::new(field),
            slice,
            history,
        }),
    }
}
