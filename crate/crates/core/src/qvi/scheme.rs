//! Monotone spatial stencils: upwind drift, central diffusion and a
//! seven-point cross-derivative stencil oriented by the sign of the
//! off-diagonal diffusion coefficient.

use crate::model::ProblemSpec;

use super::grid::Grid;
use super::QviError;

/// Weights of `L_h u(x) = sum_j w_j (u(x_j) - u(x))` at every interior node.
#[derive(Debug, Clone)]
pub struct Stencil {
    /// `start[n]..start[n + 1]` indexes `nbr`/`weight` for node `n`.
    start: Vec<usize>,
    nbr: Vec<usize>,
    weight: Vec<f64>,
}

impl Stencil {
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[node]..self.start[node + 1];
        self.nbr[r.clone()].iter().copied().zip(self.weight[r].iter().copied())
    }

    pub fn total_weight(&self, node: usize) -> f64 {
        self.weight[self.start[node]..self.start[node + 1]].iter().sum()
    }

    pub fn apply(&self, u: &[f64], node: usize) -> f64 {
        self.neighbours(node).map(|(j, w)| w * (u[j] - u[node])).sum()
    }
}

/// Builds the stencil at time `t`. Boundary nodes get no neighbours.
pub fn build_stencil(spec: &ProblemSpec, grid: &Grid, t: f64) -> Result<Stencil, QviError> {
    let p = grid.dim();
    let strides = grid.strides();
    let dx: Vec<f64> = (0..p).map(|a| grid.dx(a)).collect();
    let n_offsets = 3usize.pow(p as u32);
    let mut mu = vec![0.0; p];
    let mut sigma = vec![0.0; p * p];
    let mut a = vec![0.0; p * p];
    let mut acc = vec![0.0; n_offsets];

    // offset code: digit d_i in {0,1,2} means delta_i = d_i - 1
    let code = |delta: &[i64]| -> usize {
        delta
            .iter()
            .fold(0usize, |c, &d| c * 3 + (d + 1) as usize)
    };

    let mut start = Vec::with_capacity(grid.n_space() + 1);
    let mut nbr = Vec::new();
    let mut weight = Vec::new();
    start.push(0);
    for node in 0..grid.n_space() {
        if grid.is_boundary(node) {
            start.push(nbr.len());
            continue;
        }
        let x = grid.coords(node);
        spec.drift_into(t, &x, &mut mu);
        spec.vol_into(t, &x, &mut sigma);
        for i in 0..p {
            for j in 0..p {
                a[i * p + j] = (0..p).map(|k| sigma[i * p + k] * sigma[j * p + k]).sum();
            }
        }
        acc.fill(0.0);
        let mut delta = vec![0i64; p];
        for i in 0..p {
            delta.fill(0);
            let diff = 0.5 * a[i * p + i] / (dx[i] * dx[i]);
            delta[i] = 1;
            acc[code(&delta)] += diff + mu[i].max(0.0) / dx[i];
            delta[i] = -1;
            acc[code(&delta)] += diff + (-mu[i]).max(0.0) / dx[i];
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = a[i * p + j];
                if aij == 0.0 {
                    continue;
                }
                let c = aij.abs() / (2.0 * dx[i] * dx[j]);
                let s: i64 = if aij > 0.0 { 1 } else { -1 };
                for sign in [1i64, -1] {
                    delta.fill(0);
                    delta[i] = sign;
                    delta[j] = sign * s;
                    acc[code(&delta)] += c;
                    for axis in [i, j] {
                        delta.fill(0);
                        delta[axis] = sign;
                        acc[code(&delta)] -= c;
                    }
                }
            }
        }
        let scale = acc.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        for (off, &w) in acc.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if w < -1e-12 * scale {
                return Err(QviError::NonMonotone {
                    node,
                    coords: x,
                    weight: w,
                });
            }
            let mut target = node as i64;
            let mut rest = off;
            for axis in (0..p).rev() {
                let d = (rest % 3) as i64 - 1;
                rest /= 3;
                target += d * strides[axis] as i64;
            }
            if target as usize != node {
                nbr.push(target as usize);
                weight.push(w.max(0.0));
            }
        }
        start.push(nbr.len());
    }
    Ok(Stencil { start, nbr, weight })
}
