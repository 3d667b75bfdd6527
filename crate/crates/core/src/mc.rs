//! Monte-Carlo play of feedback strategies and empirical regularity of a
//! solved field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{simulate_path, Controller, Stopper};
use crate::error::DomainError;
use crate::model::ProblemSpec;
use crate::payoff::{evaluate_payoff, summarize, BatchSummary};
use crate::qvi::ValueField;
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub mean_impulse_count: f64,
    pub stop_fraction: f64,
    pub exit_fraction: f64,
    pub breakdown: BatchSummary,
}

/// Stops at the first mesh time.
#[derive(Debug, Clone, Copy, Default)]
pub struct StopImmediately;

impl Stopper for StopImmediately {
    fn stop(&self, _: f64, _: &[f64]) -> bool {
        true
    }
}

/// Stops at the first mesh time at or after a time drawn uniformly from
/// `[t0, T)` with the given seed.
#[derive(Debug, Clone, Copy)]
pub struct StopAtRandomTime {
    pub at: f64,
}

impl StopAtRandomTime {
    pub fn new(t0: f64, horizon: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            at: rng.random_range(t0..horizon),
        }
    }
}

impl Stopper for StopAtRandomTime {
    fn stop(&self, t: f64, _: &[f64]) -> bool {
        t >= self.at
    }
}

/// Runs `n_paths` games with path `i` seeded by `seed + i` and averages the
/// payoff with pairwise summation, so the result does not depend on the
/// thread count.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value(
    spec: &ProblemSpec,
    controller: Option<&dyn Controller>,
    stopper: Option<&dyn Stopper>,
    t0: f64,
    x0: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate, DomainError> {
    let runs: Vec<_> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let out = simulate_path(spec, t0, x0, controller, stopper, dt, seed.wrapping_add(i as u64))?;
            let pay = evaluate_payoff(spec, &out)?;
            Ok((
                pay,
                out.schedule.len() as f64,
                out.stop_time.is_some(),
                out.exit_time.is_some(),
            ))
        })
        .collect::<Result<_, DomainError>>()?;
    let parts: Vec<_> = runs.iter().map(|r| r.0).collect();
    let breakdown = summarize(&parts)?;
    let counts: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let frac = |hit: usize| hit as f64 / n_paths as f64;
    Ok(McEstimate {
        mean: breakdown.mean,
        std_error: breakdown.std_error,
        n: n_paths,
        mean_impulse_count: mean(&counts),
        stop_fraction: frac(runs.iter().filter(|r| r.2).count()),
        exit_fraction: frac(runs.iter().filter(|r| r.3).count()),
        breakdown,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regularity {
    /// Max `|V(t, x') - V(t, x)| / dx` over space neighbours.
    pub lipschitz_x: f64,
    /// Max `|V(t', x) - V(t, x)| / sqrt(dt)` over time neighbours.
    pub holder_t: f64,
}

pub fn regularity_probe(field: &ValueField) -> Regularity {
    let grid = &field.grid;
    let n = grid.n_space();
    let strides = grid.strides();
    let mut lipschitz_x: f64 = 0.0;
    let mut holder_t: f64 = 0.0;
    let sq = grid.dt().sqrt();
    for k in 0..grid.n_times() {
        let v = field.slice(k);
        for node in 0..n {
            let idx = grid.multi_index(node);
            for a in 0..grid.dim() {
                if idx[a] < grid.nx[a] {
                    let d = (v[node + strides[a]] - v[node]).abs() / grid.dx(a);
                    lipschitz_x = lipschitz_x.max(d);
                }
            }
            if k < grid.nt {
                holder_t = holder_t.max((field.at(k + 1, node) - v[node]).abs() / sq);
            }
        }
    }
    Regularity {
        lipschitz_x,
        holder_t,
    }
}
