//! Brute-force lattice games with explicit moment-matched transitions.
//!
//! These share the grid and the problem definition with the solver but
//! nothing else: transitions are explicit trinomial steps (sub-stepped until
//! the probabilities are feasible), interpolation for impulse landings is
//! local to this module, and each slice is resolved by a direct min/max.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ProblemSpec, Stopping};
use crate::qvi::{Diagnostics, Grid, StopObstacle, ValueField};

const MAX_SUBSTEPS: usize = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("moment matching infeasible with {substeps} substeps per slice")]
    Infeasible { substeps: usize },
    #[error("lattice transitions need diagonal diffusion; (sigma sigma^T)[{i}][{j}] = {value}")]
    Correlated { i: usize, j: usize, value: f64 },
    #[error("lattice oracles support dimensions 1 and 2, got {0}")]
    Dimension(usize),
    #[error("{0}")]
    Precondition(String),
}

/// Which player commits first within a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Controller first: `min( MV, max(G, C) )`.
    InfSup,
    /// Stopper first: `max( G, min(MV, C) )`.
    SupInf,
}

#[derive(Clone, Copy)]
enum Rule {
    Stopping,
    Impulse,
    Game(Order),
}

/// Per-axis trinomial probabilities `(up, down)`.
fn trinomial(mu: f64, a: f64, h: f64, dx: f64) -> (f64, f64) {
    let second = a * h + mu * mu * h * h;
    let up = second / (2.0 * dx * dx) + mu * h / (2.0 * dx);
    let down = second / (2.0 * dx * dx) - mu * h / (2.0 * dx);
    if down < 0.0 {
        (mu * h / dx, 0.0)
    } else if up < 0.0 {
        (0.0, -mu * h / dx)
    } else {
        (up, down)
    }
}

struct Lattice<'a> {
    spec: &'a ProblemSpec,
    grid: &'a Grid,
    coords: Vec<Vec<f64>>,
    boundary: Vec<bool>,
    strides: Vec<usize>,
}

impl<'a> Lattice<'a> {
    fn new(spec: &'a ProblemSpec, grid: &'a Grid) -> Result<Self, LatticeError> {
        let p = grid.dim();
        if !(1..=2).contains(&p) || spec.dim() != p {
            return Err(LatticeError::Dimension(p));
        }
        let n = grid.n_space();
        let mut strides = vec![1; p];
        for i in (0..p - 1).rev() {
            strides[i] = strides[i + 1] * (grid.nx[i + 1] + 1);
        }
        let coords: Vec<Vec<f64>> = (0..n)
            .map(|node| {
                let mut rem = node;
                (0..p)
                    .map(|i| {
                        let j = rem / strides[i];
                        rem %= strides[i];
                        if j == grid.nx[i] {
                            grid.upper[i]
                        } else {
                            grid.lower[i] + j as f64 * grid.dx(i)
                        }
                    })
                    .collect()
            })
            .collect();
        let boundary = (0..n)
            .map(|node| {
                let mut rem = node;
                (0..p).any(|i| {
                    let j = rem / strides[i];
                    rem %= strides[i];
                    j == 0 || j == grid.nx[i]
                })
            })
            .collect();
        Ok(Self {
            spec,
            grid,
            coords,
            boundary,
            strides,
        })
    }

    /// Transition probabilities `[(stride, up, down)]` per axis at `(t, x)`.
    fn probabilities(&self, t: f64, x: &[f64], h: f64) -> Result<Vec<(usize, f64, f64)>, LatticeError> {
        let p = x.len();
        let mut mu = vec![0.0; p];
        let mut sigma = vec![0.0; p * p];
        self.spec.drift_into(t, x, &mut mu);
        self.spec.vol_into(t, x, &mut sigma);
        let cov = |i: usize, j: usize| -> f64 { (0..p).map(|k| sigma[i * p + k] * sigma[j * p + k]).sum() };
        for i in 0..p {
            for j in i + 1..p {
                let value = cov(i, j);
                if value.abs() > 1e-14 {
                    return Err(LatticeError::Correlated { i, j, value });
                }
            }
        }
        Ok((0..p)
            .map(|i| {
                let (u, d) = trinomial(mu[i], cov(i, i), h, self.grid.dx(i));
                (self.strides[i], u, d)
            })
            .collect())
    }

    fn feasible(probs: &[(usize, f64, f64)]) -> bool {
        probs.iter().all(|&(_, u, d)| u >= 0.0 && d >= 0.0 && u + d <= 1.0 + 1e-12)
    }

    /// `E_h[ w(t + dt, .) ] + f dt` by `m` explicit substeps backward from
    /// `t_hi` to `t_lo`; boundary nodes hold the bequest at each substep.
    fn continuation(&self, t_lo: f64, t_hi: f64, w: &[f64]) -> Result<Vec<f64>, LatticeError> {
        let mut m = 1;
        'outer: loop {
            if m > MAX_SUBSTEPS {
                return Err(LatticeError::Infeasible { substeps: m / 2 });
            }
            let h = (t_hi - t_lo) / m as f64;
            let mut cur = w.to_vec();
            for s in 0..m {
                let tau = if s + 1 == m { t_lo } else { t_hi - (s + 1) as f64 * h };
                let next: Result<Vec<f64>, LatticeError> = (0..cur.len())
                    .into_par_iter()
                    .with_min_len(1024)
                    .map(|node| {
                        let x = &self.coords[node];
                        if self.boundary[node] {
                            return Ok(self.spec.bequest(tau, x));
                        }
                        let probs = self.probabilities(tau, x, h)?;
                        if !Self::feasible(&probs) {
                            return Err(LatticeError::Infeasible { substeps: m });
                        }
                        Ok(self.expectation(&cur, node, &probs) + h * self.spec.running_cost(tau, x))
                    })
                    .collect();
                match next {
                    Ok(v) => cur = v,
                    Err(LatticeError::Infeasible { .. }) => {
                        m *= 2;
                        continue 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
            return Ok(cur);
        }
    }

    /// Product of independent per-axis trinomials.
    fn expectation(&self, w: &[f64], node: usize, probs: &[(usize, f64, f64)]) -> f64 {
        match probs {
            [(s, u, d)] => (1.0 - u - d) * w[node] + u * w[node + s] + d * w[node - s],
            [(s0, u0, d0), (s1, u1, d1)] => {
                let row = |c: usize| (1.0 - u1 - d1) * w[c] + u1 * w[c + s1] + d1 * w[c - s1];
                (1.0 - u0 - d0) * row(node) + u0 * row(node + s0) + d0 * row(node - s0)
            }
            _ => unreachable!("dimension checked in Lattice::new"),
        }
    }

    /// Multilinear interpolation of `w` at `y` in the closed box.
    fn interpolate(&self, w: &[f64], y: &[f64]) -> f64 {
        let p = y.len();
        let mut base = 0;
        let mut frac = [0.0; 2];
        for i in 0..p {
            let u = ((y[i] - self.grid.lower[i]) / self.grid.dx(i)).clamp(0.0, self.grid.nx[i] as f64);
            let j = (u.floor() as usize).min(self.grid.nx[i] - 1);
            frac[i] = u - j as f64;
            base += j * self.strides[i];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << p) {
            let mut weight = 1.0;
            let mut idx = base;
            for i in 0..p {
                if corner >> i & 1 == 1 {
                    weight *= frac[i];
                    idx += self.strides[i];
                } else {
                    weight *= 1.0 - frac[i];
                }
            }
            if weight != 0.0 {
                acc += weight * w[idx];
            }
        }
        acc
    }

    /// `min_z [ w(Gamma(x, z)) + c(t, z) ]`; exits pay the bequest at the
    /// crossing point.
    fn best_impulse(&self, t: f64, w: &[f64], node: usize, costs: &[f64]) -> f64 {
        let x = &self.coords[node];
        let mut best = f64::INFINITY;
        let mut y = vec![0.0; x.len()];
        for (z, c) in self.spec.impulse_set.iter().zip(costs) {
            self.spec.impulse_response.apply_into(x, z, &mut y);
            let landed = if self.spec.domain.contains_closed(&y) {
                self.interpolate(w, &y)
            } else {
                self.spec.bequest(t, &self.spec.domain.exit_point(x, &y))
            };
            best = best.min(landed + c);
        }
        best
    }

    fn run(&self, rule: Rule, source: &str) -> Result<ValueField, LatticeError> {
        let grid = self.grid;
        let spec = self.spec;
        let n = grid.n_space();
        let nt = grid.nt;
        let obstacle = StopObstacle::new(spec, grid);
        let mut values = vec![0.0; grid.len()];
        for node in 0..n {
            values[nt * n + node] = spec.bequest(grid.horizon, &self.coords[node]);
        }
        let mut rounds = vec![0; nt + 1];
        for k in (0..nt).rev() {
            let t = grid.time(k);
            let cont = self.continuation(t, grid.time(k + 1), &values[(k + 1) * n..(k + 2) * n])?;
            let lower: Vec<f64> = (0..n).map(|node| obstacle.at(spec, k, t, &self.coords[node])).collect();
            let mut v: Vec<f64> = match rule {
                Rule::Impulse => cont.clone(),
                _ => cont.iter().zip(&lower).map(|(c, g)| c.max(*g)).collect(),
            };
            for node in 0..n {
                if self.boundary[node] {
                    v[node] = spec.bequest(t, &self.coords[node]);
                }
            }
            if !spec.impulse_set.is_empty() && !matches!(rule, Rule::Stopping) {
                let costs: Vec<f64> = spec.impulse_set.iter().map(|z| spec.intervention_cost(t, z)).collect();
                let (lo, hi) = v
                    .iter()
                    .filter(|x| x.is_finite())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                let cap = ((hi - lo).max(0.0) / spec.cost_floor).ceil() as usize + 2;
                let start = v.clone();
                for r in 1..=cap {
                    let mv: Vec<f64> = (0..n)
                        .into_par_iter()
                        .with_min_len(1024)
                        .map(|node| {
                            if self.boundary[node] {
                                f64::INFINITY
                            } else {
                                self.best_impulse(t, &v, node, &costs)
                            }
                        })
                        .collect();
                    let mut changed = false;
                    for node in 0..n {
                        if self.boundary[node] {
                            continue;
                        }
                        let new = match rule {
                            Rule::Impulse => mv[node].min(cont[node]),
                            Rule::Game(Order::InfSup) => mv[node].min(start[node]),
                            Rule::Game(Order::SupInf) => lower[node].max(mv[node].min(cont[node])),
                            Rule::Stopping => unreachable!(),
                        };
                        if new != v[node] {
                            changed = true;
                            v[node] = new;
                        }
                    }
                    rounds[k] = r;
                    if !changed {
                        break;
                    }
                }
            }
            values[k * n..(k + 1) * n].copy_from_slice(&v);
        }
        Ok(ValueField {
            grid: grid.clone(),
            values,
            diagnostics: Diagnostics {
                converged: true,
                fixed_point_tol: 0.0,
                outer_iterations: rounds,
                final_fixed_point_gap: vec![0.0; nt + 1],
                residual_norms: vec![0.0; nt + 1],
                stopping: spec.stopping,
                stop_floor: obstacle.floor(),
                source: source.into(),
            },
        })
    }
}

/// Optimal stopping by backward induction: `V = max(G, f dt + E_h V)`.
pub fn lattice_stopping_value(spec: &ProblemSpec, grid: &Grid) -> Result<ValueField, LatticeError> {
    if !spec.impulse_set.is_empty() {
        return Err(LatticeError::Precondition(
            "stopping oracle needs an empty impulse set".into(),
        ));
    }
    Lattice::new(spec, grid)?.run(Rule::Stopping, "oracle:stopping")
}

/// Impulse control by backward induction: `V = min(MV, f dt + E_h V)` with
/// impulse chains resolved by fixed-point iteration within each slice.
pub fn lattice_impulse_value(spec: &ProblemSpec, grid: &Grid) -> Result<ValueField, LatticeError> {
    if spec.stopping != Stopping::Disabled {
        return Err(LatticeError::Precondition(
            "impulse oracle needs stopping disabled".into(),
        ));
    }
    Lattice::new(spec, grid)?.run(Rule::Impulse, "oracle:impulse")
}

/// Discrete game with the per-slice min/max resolved in `order`.
///
/// By construction `min(a, max(b, c)) <= max(b, min(a, c))`, so the
/// [`Order::InfSup`] value never exceeds the [`Order::SupInf`] value.
pub fn discrete_game_value(spec: &ProblemSpec, grid: &Grid, order: Order) -> Result<ValueField, LatticeError> {
    let source = match order {
        Order::InfSup => "oracle:infsup",
        Order::SupInf => "oracle:supinf",
    };
    Lattice::new(spec, grid)?.run(Rule::Game(order), source)
}
