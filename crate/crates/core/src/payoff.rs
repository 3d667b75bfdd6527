use serde::{Deserialize, Serialize};

use crate::dynamics::PathOutcome;
use crate::error::DomainError;
use crate::model::ProblemSpec;
use crate::stats::{mean, mean_and_se};

/// Pathwise payoff split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub running: f64,
    pub intervention: f64,
    pub bequest: f64,
    pub total: f64,
}

impl PayoffBreakdown {
    fn new(running: f64, intervention: f64, bequest: f64) -> Self {
        Self {
            running,
            intervention,
            bequest,
            total: running + intervention + bequest,
        }
    }
}

/// Batch estimator of the expected payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub running_mean: f64,
    pub intervention_mean: f64,
    pub bequest_mean: f64,
}

fn check_dims(spec: &ProblemSpec, outcome: &PathOutcome) -> Result<(), DomainError> {
    let p = spec.dim();
    match outcome.trajectory.iter().map(|s| s.state.len()).find(|&d| d != p) {
        Some(got) => Err(DomainError::Dimension { expected: p, got }),
        None => Ok(()),
    }
}

/// Cumulative trapezoidal integral of `f` at each trajectory sample.
///
/// Each interval starts from the post-jump state and ends at the state
/// before any impulse applied at its right end.
pub fn running_cost_profile(spec: &ProblemSpec, outcome: &PathOutcome) -> Result<Vec<f64>, DomainError> {
    check_dims(spec, outcome)?;
    let traj = &outcome.trajectory;
    let mut acc = Vec::with_capacity(traj.len());
    let mut total = 0.0;
    acc.push(0.0);
    let mut events = outcome.schedule.events.iter().peekable();
    for n in 1..traj.len() {
        while events.peek().is_some_and(|e| e.step < n) {
            events.next();
        }
        let right = match events.peek() {
            Some(e) if e.step == n => &e.from,
            _ => &traj[n].state,
        };
        let (a, b) = (&traj[n - 1], &traj[n]);
        let h = b.time - a.time;
        total += 0.5 * h * (spec.running_cost(a.time, &a.state) + spec.running_cost(b.time, right));
        acc.push(total);
    }
    Ok(acc)
}

/// `J = int f ds + sum c(tau_j, xi_j) + G(end, X_end)` for one path.
pub fn evaluate_payoff(spec: &ProblemSpec, outcome: &PathOutcome) -> Result<PayoffBreakdown, DomainError> {
    if outcome.end_state.len() != spec.dim() {
        return Err(DomainError::Dimension {
            expected: spec.dim(),
            got: outcome.end_state.len(),
        });
    }
    let running = *running_cost_profile(spec, outcome)?
        .last()
        .expect("trajectory is never empty");
    let intervention = outcome
        .schedule
        .events
        .iter()
        .filter(|e| e.time <= outcome.effective_end)
        .fold(0.0, |acc, e| acc + e.cost);
    let bequest = spec.bequest(outcome.effective_end, &outcome.end_state);
    Ok(PayoffBreakdown::new(running, intervention, bequest))
}

/// Aggregates precomputed breakdowns.
pub fn summarize(parts: &[PayoffBreakdown]) -> Result<BatchSummary, DomainError> {
    if parts.len() < 2 {
        return Err(DomainError::Arity(format!(
            "batch needs at least 2 outcomes, got {}",
            parts.len()
        )));
    }
    let column = |f: fn(&PayoffBreakdown) -> f64| parts.iter().map(f).collect::<Vec<_>>();
    let (m, se) = mean_and_se(&column(|b| b.total));
    Ok(BatchSummary {
        mean: m,
        std_error: se,
        n: parts.len(),
        running_mean: mean(&column(|b| b.running)),
        intervention_mean: mean(&column(|b| b.intervention)),
        bequest_mean: mean(&column(|b| b.bequest)),
    })
}

pub fn batch_payoff(spec: &ProblemSpec, outcomes: &[PathOutcome]) -> Result<BatchSummary, DomainError> {
    let parts = outcomes
        .iter()
        .map(|o| evaluate_payoff(spec, o))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(&parts)
}
