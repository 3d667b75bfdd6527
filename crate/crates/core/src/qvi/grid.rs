use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::model::{DomainSpec, ProblemSpec, Stopping};

/// Uniform time x tensor-box space lattice over `[0, T] x closure(S)`.
///
/// Space nodes are flattened row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub horizon: f64,
    pub nt: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Intervals per axis; axis `i` has `nx[i] + 1` nodes.
    pub nx: Vec<usize>,
}

pub const MAX_DIM: usize = 3;

/// Builds the lattice. A single `nx` entry is used for every axis.
pub fn build_grid(domain: &DomainSpec, nt: usize, nx: &[usize]) -> Result<Grid, DomainError> {
    let p = domain.dim();
    if p > MAX_DIM {
        return Err(DomainError::Arity(format!(
            "tensor grids support at most {MAX_DIM} dimensions, got {p}"
        )));
    }
    let nx: Vec<usize> = match nx.len() {
        1 => vec![nx[0]; p],
        n if n == p => nx.to_vec(),
        n => {
            return Err(DomainError::Arity(format!(
                "expected 1 or {p} space counts, got {n}"
            )))
        }
    };
    if nt < 1 {
        return Err(DomainError::Arity("need at least one time step".into()));
    }
    if let Some(bad) = nx.iter().find(|&&n| n < 2) {
        return Err(DomainError::Arity(format!(
            "need at least two space intervals per axis, got {bad}"
        )));
    }
    Ok(Grid {
        horizon: domain.horizon,
        nt,
        lower: domain.lower.clone(),
        upper: domain.upper.clone(),
        nx,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.nx.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.nx[axis] as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.nt {
            self.horizon
        } else {
            self.horizon * k as f64 / self.nt as f64
        }
    }

    pub fn n_times(&self) -> usize {
        self.nt + 1
    }

    pub fn n_space(&self) -> usize {
        self.nx.iter().map(|n| n + 1).product()
    }

    pub fn len(&self) -> usize {
        self.n_times() * self.n_space()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.nx[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + i as f64 * self.dx(axis)
        }
    }

    /// Flat-index stride of each axis.
    pub fn strides(&self) -> Vec<usize> {
        let p = self.dim();
        let mut s = vec![1; p];
        for a in (0..p.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * (self.nx[a + 1] + 1);
        }
        s
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rest = node;
        for a in (0..self.dim()).rev() {
            let n = self.nx[a] + 1;
            idx[a] = rest % n;
            rest /= n;
        }
        idx
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.axis_coord(a, i))
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.multi_index(node)
            .iter()
            .zip(&self.nx)
            .any(|(&i, &n)| i == 0 || i == n)
    }

    /// Nearest space node, clamped into the box.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let strides = self.strides();
        (0..self.dim())
            .map(|a| {
                let s = ((x[a] - self.lower[a]) / self.dx(a)).round();
                let i = s.clamp(0.0, self.nx[a] as f64) as usize;
                i * strides[a]
            })
            .sum()
    }

    pub fn nearest_time(&self, t: f64) -> usize {
        (t / self.dt()).round().clamp(0.0, self.nt as f64) as usize
    }

    /// Multilinear interpolation of one time slice; `y` is clamped into the box.
    pub fn interpolate(&self, slice: &[f64], y: &[f64]) -> f64 {
        let p = self.dim();
        let strides = self.strides();
        let mut base = 0;
        let mut frac = [0.0f64; 8];
        let mut step = [0usize; 8];
        for a in 0..p {
            let n = self.nx[a];
            let s = ((y[a] - self.lower[a]) / self.dx(a)).clamp(0.0, n as f64);
            let i = (s.floor() as usize).min(n - 1);
            base += i * strides[a];
            frac[a] = s - i as f64;
            step[a] = strides[a];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << p) {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..p {
                if corner >> a & 1 == 1 {
                    w *= frac[a];
                    idx += step[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * slice[idx];
            }
        }
        acc
    }
}

/// The lower obstacle used for the stopping constraint.
///
/// With stopping disabled it is `-B` off the terminal slice, where
/// `B = 10 (|f|_inf T + |G|_inf)` over the lattice nodes. The spatial
/// boundary and the terminal slice always keep the bequest.
#[derive(Debug, Clone, Copy)]
pub struct StopObstacle {
    floor: Option<f64>,
    nt: usize,
}

impl StopObstacle {
    pub fn new(spec: &ProblemSpec, grid: &Grid) -> Self {
        let floor = match spec.stopping {
            Stopping::Enabled => None,
            Stopping::Disabled => {
                let (f_max, g_max) = sup_norms(spec, grid);
                Some(-10.0 * (f_max * grid.horizon + g_max))
            }
        };
        Self {
            floor,
            nt: grid.nt,
        }
    }

    pub fn floor(&self) -> Option<f64> {
        self.floor
    }

    pub fn at(&self, spec: &ProblemSpec, k: usize, t: f64, x: &[f64]) -> f64 {
        match self.floor {
            Some(b) if k < self.nt => b,
            _ => spec.bequest(t, x),
        }
    }
}

/// `(|f|_inf, |G|_inf)` over every lattice node.
pub fn sup_norms(spec: &ProblemSpec, grid: &Grid) -> (f64, f64) {
    let mut f_max: f64 = 0.0;
    let mut g_max: f64 = 0.0;
    let coords: Vec<Vec<f64>> = (0..grid.n_space()).map(|n| grid.coords(n)).collect();
    for k in 0..grid.n_times() {
        let t = grid.time(k);
        for x in &coords {
            f_max = f_max.max(spec.running_cost(t, x).abs());
            g_max = g_max.max(spec.bequest(t, x).abs());
        }
    }
    (f_max, g_max)
}
