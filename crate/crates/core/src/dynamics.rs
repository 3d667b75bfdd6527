//! Euler-Maruyama simulation of the controlled state under feedback
//! strategies, the discrete generator, and moment diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::DomainError;
use crate::model::{norm, ProblemSpec};
use crate::qvi::Grid;
use crate::stats::mean;

/// Player I feedback: an impulse from the impulse set, or nothing.
pub trait Controller: Sync {
    fn act(&self, t: f64, x: &[f64]) -> Option<Vec<f64>>;
}

/// Player II feedback: stop now or continue.
pub trait Stopper: Sync {
    fn stop(&self, t: f64, x: &[f64]) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverIntervene;

impl Controller for NeverIntervene {
    fn act(&self, _: f64, _: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverStop;

impl Stopper for NeverStop {
    fn stop(&self, _: f64, _: &[f64]) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    None,
    Impulse,
    Stop,
    Exit,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::None => "none",
            Event::Impulse => "impulse",
            Event::Stop => "stop",
            Event::Exit => "exit",
        }
    }
}

/// State at a mesh time after any impulse applied there. Exit samples hold
/// the point where the last step left the closed box.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub time: f64,
    pub state: Vec<f64>,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseEvent {
    pub time: f64,
    /// Index of the mesh sample the impulse belongs to.
    pub step: usize,
    pub impulse: Vec<f64>,
    pub cost: f64,
    /// Pre-jump state.
    pub from: Vec<f64>,
}

/// Realized control `[tau_j, xi_j]` along one path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpulseSchedule {
    pub events: Vec<ImpulseEvent>,
}

impl ImpulseSchedule {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.events.iter().map(|e| e.cost).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub t0: f64,
    pub trajectory: Vec<PathSample>,
    pub schedule: ImpulseSchedule,
    pub stop_time: Option<f64>,
    pub exit_time: Option<f64>,
    /// `min(rho, tau_S, T)`
    pub effective_end: f64,
    pub end_state: Vec<f64>,
}

/// Mesh `t0, t0 + dt, ...` ending exactly at `T` (the last step may be short).
fn mesh(t0: f64, horizon: f64, dt: f64) -> Vec<f64> {
    let steps = ((horizon - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|n| if n == steps { horizon } else { t0 + n as f64 * dt })
        .collect()
}

struct Stepper<'a> {
    spec: &'a ProblemSpec,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    dw: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a ProblemSpec) -> Self {
        let p = spec.dim();
        Self {
            spec,
            mu: vec![0.0; p],
            sigma: vec![0.0; p * p],
            dw: vec![0.0; p],
        }
    }

    /// One Euler-Maruyama step of the uncontrolled SDE, in place.
    fn step(&mut self, t: f64, h: f64, x: &mut [f64], rng: &mut ChaCha8Rng) {
        let p = x.len();
        self.spec.drift_into(t, x, &mut self.mu);
        self.spec.vol_into(t, x, &mut self.sigma);
        let sq = h.sqrt();
        for w in self.dw.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *w = sq * z;
        }
        for i in 0..p {
            let noise: f64 = (0..p).map(|j| self.sigma[i * p + j] * self.dw[j]).sum();
            x[i] += self.mu[i] * h + noise;
        }
    }
}

/// Simulates the controlled state from `(t0, x0)`.
///
/// At each mesh time the stopper is asked first, then the controller (at
/// most one impulse), then one diffusion step is taken. Exit from the open
/// box is checked after jumps and after diffusion steps. `None` policies
/// never act.
pub fn simulate_path(
    spec: &ProblemSpec,
    t0: f64,
    x0: &[f64],
    controller: Option<&dyn Controller>,
    stopper: Option<&dyn Stopper>,
    dt: f64,
    seed: u64,
) -> Result<PathOutcome, DomainError> {
    let horizon = spec.horizon();
    if x0.len() != spec.dim() {
        return Err(DomainError::Dimension {
            expected: spec.dim(),
            got: x0.len(),
        });
    }
    if !(0.0..horizon).contains(&t0) {
        return Err(DomainError::TimeRange {
            t: t0,
            lo: 0.0,
            hi: horizon,
        });
    }
    if !(dt > 0.0) || dt >= horizon - t0 {
        return Err(DomainError::InvalidStep {
            dt,
            remaining: horizon - t0,
        });
    }
    if !spec.domain.contains(x0) {
        return Err(DomainError::OutsideDomain(x0.to_vec()));
    }

    let times = mesh(t0, horizon, dt);
    let last = times.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stepper = Stepper::new(spec);
    let mut x = x0.to_vec();
    let mut trajectory = Vec::with_capacity(times.len());
    let mut schedule = ImpulseSchedule::default();
    let mut stop_time = None;
    let mut exit_time = None;
    let mut jumped = vec![0.0; x.len()];

    for n in 0..=last {
        let t = times[n];
        if n == last {
            trajectory.push(PathSample {
                time: t,
                state: x.clone(),
                event: Event::None,
            });
            break;
        }
        if stopper.is_some_and(|s| s.stop(t, &x)) {
            trajectory.push(PathSample {
                time: t,
                state: x.clone(),
                event: Event::Stop,
            });
            stop_time = Some(t);
            break;
        }
        let mut event = Event::None;
        if let Some(z) = controller.and_then(|c| c.act(t, &x)) {
            if spec.impulse_set.index_of(&z).is_none() {
                return Err(DomainError::UnknownImpulse(z));
            }
            spec.impulse_response.apply_into(&x, &z, &mut jumped);
            schedule.events.push(ImpulseEvent {
                time: t,
                step: n,
                cost: spec.intervention_cost(t, &z),
                impulse: z,
                from: x.clone(),
            });
            if !spec.domain.contains(&jumped) {
                trajectory.push(PathSample {
                    time: t,
                    state: spec.domain.exit_point(&x, &jumped),
                    event: Event::Exit,
                });
                exit_time = Some(t);
                break;
            }
            x.copy_from_slice(&jumped);
            event = Event::Impulse;
        }
        trajectory.push(PathSample {
            time: t,
            state: x.clone(),
            event,
        });
        let before = x.clone();
        stepper.step(t, times[n + 1] - t, &mut x, &mut rng);
        if !spec.domain.contains(&x) {
            trajectory.push(PathSample {
                time: times[n + 1],
                state: spec.domain.exit_point(&before, &x),
                event: Event::Exit,
            });
            exit_time = Some(times[n + 1]);
            break;
        }
    }

    let end = trajectory.last().expect("mesh has at least two points");
    Ok(PathOutcome {
        t0,
        effective_end: end.time,
        end_state: end.state.clone(),
        trajectory,
        schedule,
        stop_time,
        exit_time,
    })
}

/// Discrete generator `sum_i mu_i d_i phi + 1/2 sum_ij (sigma sigma^T)_ij d_ij phi`
/// with second-order central differences at an interior node.
pub fn generator_apply(
    spec: &ProblemSpec,
    grid: &Grid,
    phi: &[f64],
    t: f64,
    node: usize,
) -> Result<f64, DomainError> {
    if grid.is_boundary(node) {
        return Err(DomainError::BoundaryNode(node));
    }
    let p = grid.dim();
    let strides = grid.strides();
    let x = grid.coords(node);
    let mut mu = vec![0.0; p];
    let mut sigma = vec![0.0; p * p];
    spec.drift_into(t, &x, &mut mu);
    spec.vol_into(t, &x, &mut sigma);
    let at = |offsets: &[(usize, i64)]| -> f64 {
        let mut idx = node as i64;
        for &(axis, d) in offsets {
            idx += d * strides[axis] as i64;
        }
        phi[idx as usize]
    };
    let centre = phi[node];
    let mut acc = 0.0;
    for i in 0..p {
        let h = grid.dx(i);
        let plus = at(&[(i, 1)]);
        let minus = at(&[(i, -1)]);
        let a_ii: f64 = (0..p).map(|k| sigma[i * p + k] * sigma[i * p + k]).sum();
        acc += mu[i] * (plus - minus) / (2.0 * h);
        acc += 0.5 * a_ii * (plus - 2.0 * centre + minus) / (h * h);
        for j in i + 1..p {
            let a_ij: f64 = (0..p).map(|k| sigma[i * p + k] * sigma[j * p + k]).sum();
            if a_ij == 0.0 {
                continue;
            }
            let cross = (at(&[(i, 1), (j, 1)]) - at(&[(i, 1), (j, -1)]) - at(&[(i, -1), (j, 1)])
                + at(&[(i, -1), (j, -1)]))
                / (4.0 * h * grid.dx(j));
            acc += a_ij * cross;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderEntry {
    pub h: f64,
    /// `E[ sup_{s in [t0, t0+h]} |X_s - x0|^2 ]`
    pub mean_sup_sq_increment: f64,
    /// Mean divided by `h`.
    pub ratio: f64,
    /// Ratio divided by `1 + |x0|^2`.
    pub constant: f64,
}

/// Empirical second-moment bounds of the uncontrolled diffusion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub n_paths: usize,
    pub dt: f64,
    /// `E[ sup_{s in [t0, T]} |X_s|^2 ]`
    pub sup_second_moment: f64,
    /// `sup_second_moment / (1 + |x0|^2)`
    pub sup_constant: f64,
    pub ladder: Vec<LadderEntry>,
    /// Largest ladder constant.
    pub increment_constant: f64,
}

/// Monte-Carlo estimates of `E sup |X|^2` and `E sup |X - x0|^2` over
/// windows of length `h`, for the free (unstopped, uncontrolled) SDE.
pub fn moment_diagnostics(
    spec: &ProblemSpec,
    t0: f64,
    x0: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
    h_ladder: &[f64],
) -> Result<MomentReport, DomainError> {
    let horizon = spec.horizon();
    if n_paths < 100 {
        return Err(DomainError::Arity(format!(
            "moment diagnostics need at least 100 paths, got {n_paths}"
        )));
    }
    if x0.len() != spec.dim() {
        return Err(DomainError::Dimension {
            expected: spec.dim(),
            got: x0.len(),
        });
    }
    if !(dt > 0.0) || dt >= horizon - t0 {
        return Err(DomainError::InvalidStep {
            dt,
            remaining: horizon - t0,
        });
    }
    if let Some(&h) = h_ladder.iter().find(|&&h| !(h > 0.0 && t0 + h <= horizon + 1e-12)) {
        return Err(DomainError::TimeRange {
            t: t0 + h,
            lo: t0,
            hi: horizon,
        });
    }
    let times = mesh(t0, horizon, dt);
    let per_path: Vec<(f64, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut stepper = Stepper::new(spec);
            let mut x = x0.to_vec();
            let mut sup_sq = norm(&x).powi(2);
            let mut incr = vec![0.0f64; h_ladder.len()];
            for n in 0..times.len() - 1 {
                stepper.step(times[n], times[n + 1] - times[n], &mut x, &mut rng);
                let s = times[n + 1];
                sup_sq = sup_sq.max(norm(&x).powi(2));
                let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                for (slot, &h) in incr.iter_mut().zip(h_ladder) {
                    if s <= t0 + h + 1e-12 {
                        *slot = slot.max(d2);
                    }
                }
            }
            (sup_sq, incr)
        })
        .collect();

    let sups: Vec<f64> = per_path.iter().map(|(s, _)| *s).collect();
    let growth = 1.0 + norm(x0).powi(2);
    let sup_second_moment = mean(&sups);
    let ladder: Vec<LadderEntry> = h_ladder
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let col: Vec<f64> = per_path.iter().map(|(_, v)| v[j]).collect();
            let m = mean(&col);
            LadderEntry {
                h,
                mean_sup_sq_increment: m,
                ratio: m / h,
                constant: m / h / growth,
            }
        })
        .collect();
    let increment_constant = ladder.iter().map(|e| e.constant).fold(0.0, f64::max);
    Ok(MomentReport {
        n_paths,
        dt,
        sup_second_moment,
        sup_constant: sup_second_moment / growth,
        ladder,
        increment_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientFn, CoefficientKind};
    use crate::qvi::build_grid;
    use crate::test_support::spec_1d;

    fn frozen() -> ProblemSpec {
        let mut s = spec_1d();
        s.vol = CoefficientFn::constant(0.0);
        s
    }

    struct FireOnce {
        at: f64,
    }

    impl Controller for FireOnce {
        fn act(&self, t: f64, _: &[f64]) -> Option<Vec<f64>> {
            ((t - self.at).abs() < 1e-12).then(|| vec![-0.5])
        }
    }

    #[test]
    fn frozen_dynamics_stay_put() {
        let out = simulate_path(&frozen(), 0.0, &[0.5], None, None, 0.01, 1).unwrap();
        assert_eq!(out.effective_end, 1.0);
        assert_eq!(out.end_state, vec![0.5]);
        assert!(out.trajectory.iter().all(|s| s.state == vec![0.5]));
        assert_eq!(out.trajectory.len(), 101);
        assert!(out.exit_time.is_none() && out.stop_time.is_none());
    }

    #[test]
    fn deterministic_drift_exits_near_expected_time() {
        let mut s = frozen();
        s.drift = CoefficientFn::constant(1.0);
        let out = simulate_path(&s, 0.0, &[1.9], None, None, 0.01, 1).unwrap();
        let tau = out.exit_time.unwrap();
        assert!((tau - 0.10).abs() <= 0.01 + 1e-12, "{tau}");
        assert_eq!(out.end_state, vec![2.0]);
        assert_eq!(out.trajectory.last().unwrap().event, Event::Exit);
        let pre = &out.trajectory[out.trajectory.len() - 2];
        assert!(s.domain.contains(&pre.state));
    }

    #[test]
    fn single_forced_impulse() {
        let s = frozen();
        let c = FireOnce { at: 0.01 };
        let out = simulate_path(&s, 0.0, &[1.0], Some(&c), None, 0.01, 1).unwrap();
        assert_eq!(out.schedule.len(), 1);
        assert_eq!(out.end_state, vec![0.5]);
        let e = &out.schedule.events[0];
        assert_eq!(e.time, 0.01);
        assert_eq!(e.cost, s.intervention_cost(0.01, &[-0.5]));
        assert_eq!(out.trajectory[1].event, Event::Impulse);
        assert_eq!(out.trajectory[1].state, vec![0.5]);
    }

    #[test]
    fn impulse_outside_set_rejected() {
        struct Bad;
        impl Controller for Bad {
            fn act(&self, _: f64, _: &[f64]) -> Option<Vec<f64>> {
                Some(vec![0.25])
            }
        }
        let r = simulate_path(&frozen(), 0.0, &[0.0], Some(&Bad), None, 0.01, 1);
        assert_eq!(r.unwrap_err(), DomainError::UnknownImpulse(vec![0.25]));
    }

    #[test]
    fn stopper_acts_before_controller() {
        struct Always;
        impl Stopper for Always {
            fn stop(&self, _: f64, _: &[f64]) -> bool {
                true
            }
        }
        let c = FireOnce { at: 0.0 };
        let out = simulate_path(&frozen(), 0.0, &[1.0], Some(&c), Some(&Always), 0.01, 1).unwrap();
        assert_eq!(out.stop_time, Some(0.0));
        assert!(out.schedule.is_empty());
    }

    #[test]
    fn invalid_inputs() {
        let s = spec_1d();
        assert!(matches!(
            simulate_path(&s, 0.0, &[0.0], None, None, 1.0, 1),
            Err(DomainError::InvalidStep { .. })
        ));
        assert!(matches!(
            simulate_path(&s, 0.0, &[2.0], None, None, 0.01, 1),
            Err(DomainError::OutsideDomain(_))
        ));
    }

    #[test]
    fn seeded_paths_are_reproducible() {
        let s = spec_1d();
        let a = simulate_path(&s, 0.0, &[0.0], None, None, 0.01, 42).unwrap();
        let b = simulate_path(&s, 0.0, &[0.0], None, None, 0.01, 42).unwrap();
        let c = simulate_path(&s, 0.0, &[0.0], None, None, 0.01, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn refinement_of_deterministic_path() {
        let mut s = frozen();
        s.drift = CoefficientFn::new(CoefficientKind::Affine, vec![0.0, 0.0, -1.0]);
        let exact = 1.0f64 * (-1.0f64).exp();
        let e1 = (simulate_path(&s, 0.0, &[1.0], None, None, 0.02, 0).unwrap().end_state[0] - exact).abs();
        let e2 = (simulate_path(&s, 0.0, &[1.0], None, None, 0.01, 0).unwrap().end_state[0] - exact).abs();
        assert!(e1 < 0.02 && e2 < 0.01);
        assert!(e2 / e1 < 0.6);
    }

    #[test]
    fn generator_examples() {
        let s = spec_1d();
        let g = build_grid(&s.domain, 1, &[400]).unwrap();
        let quad: Vec<f64> = (0..g.n_space()).map(|n| g.coords(n)[0].powi(2)).collect();
        let v = generator_apply(&s, &g, &quad, 0.0, 137).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let sine: Vec<f64> = (0..g.n_space()).map(|n| g.coords(n)[0].sin()).collect();
        let centre = g.nearest_node(&[0.0]);
        assert!(generator_apply(&s, &g, &sine, 0.0, centre).unwrap().abs() < 1e-6);
        assert_eq!(
            generator_apply(&s, &g, &sine, 0.0, 0),
            Err(DomainError::BoundaryNode(0))
        );

        let mut lin = frozen();
        lin.drift = CoefficientFn::new(CoefficientKind::Affine, vec![0.0, 0.0, 1.0]);
        let g = build_grid(&lin.domain, 1, &[8]).unwrap();
        let id: Vec<f64> = (0..g.n_space()).map(|n| g.coords(n)[0]).collect();
        let node = g.nearest_node(&[0.5]);
        assert!((generator_apply(&lin, &g, &id, 0.0, node).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn frozen_moments_vanish() {
        let r = moment_diagnostics(&frozen(), 0.0, &[0.3], 100, 0.01, 5, &[0.01, 0.04, 0.16]).unwrap();
        assert!(r.ladder.iter().all(|e| e.mean_sup_sq_increment == 0.0));
        assert!((r.sup_second_moment - 0.09).abs() < 1e-12);
        assert!(moment_diagnostics(&frozen(), 0.0, &[0.3], 99, 0.01, 5, &[0.01]).is_err());
    }
}
