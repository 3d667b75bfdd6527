//! Acceptance gate. Each test prints one `PASS`/`FAIL` line and asserts it.
//!
//! Run with `cargo test -p qvigame-core --test acceptance -- --nocapture`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use qvigame::policy::default_act_tol;
use qvigame::qvi::{StopObstacle, ValueField};
use qvigame::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CANONICAL: &str = include_str!("../../../problems/canonical.json");
const STOPPING: &str = include_str!("../../../problems/stopping.json");
const IMPULSE: &str = include_str!("../../../problems/impulse.json");

fn spec(text: &str) -> ProblemSpec {
    ProblemSpec::from_json_str(text).expect("problem file parses")
}

fn impulse_spec() -> ProblemSpec {
    spec(IMPULSE).without_stopping()
}

fn solve(spec: &ProblemSpec, n: usize) -> ValueField {
    let grid = build_grid(&spec.domain, n, &[n]).unwrap();
    solve_qvi(spec, &grid, &SolverParams::default()).expect("solver converges")
}

fn canonical_field() -> &'static (ProblemSpec, ValueField) {
    static CELL: OnceLock<(ProblemSpec, ValueField)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = spec(CANONICAL);
        let f = solve(&s, 200);
        (s, f)
    })
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "{} criterion {id} ({name}): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

/// Largest violation of `G - 10 tol <= V <= MV + 10 tol` over interior
/// nodes of non-terminal slices.
fn sandwich_violation(spec: &ProblemSpec, field: &ValueField) -> (f64, f64) {
    let grid = &field.grid;
    let tol = 10.0 * field.diagnostics.fixed_point_tol;
    let obstacle = StopObstacle::new(spec, grid);
    let mv = field.intervention(spec);
    let (mut below, mut above) = (0.0f64, 0.0f64);
    for k in 0..grid.nt {
        let t = grid.time(k);
        for node in 0..grid.n_space() {
            if grid.is_boundary(node) {
                continue;
            }
            let v = field.at(k, node);
            let g = obstacle.at(spec, k, t, &grid.coords(node));
            below = below.max(g - tol - v);
            above = above.max(v - mv[k].values[node] - tol);
        }
    }
    (below, above)
}

#[test]
fn criterion_01_obstacle_sandwich() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    let stop = spec(STOPPING);
    let imp = impulse_spec();
    let (game, game_field) = canonical_field();
    let fields = [
        ("stopping", &stop, solve(&stop, 200)),
        ("impulse", &imp, solve(&imp, 200)),
        ("game", game, game_field.clone()),
    ];
    for (name, s, f) in &fields {
        let (below, above) = sandwich_violation(s, f);
        pass &= below <= 0.0 && above <= 0.0;
        details.push(format!("{name}: max(G-10tol-V)={below:.3e} max(V-MV-10tol)={above:.3e}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 60);
    verdict(1, "obstacle sandwich", pass, format!("{} in {elapsed:.1?}", details.join("; ")));
}

#[test]
fn criterion_02_degenerate_stopping() {
    let start = Instant::now();
    let s = spec(STOPPING);
    let grid = build_grid(&s.domain, 200, &[200]).unwrap();
    let solved = solve_qvi(&s, &grid, &SolverParams::default()).unwrap();
    let oracle = lattice_stopping_value(&s, &grid).unwrap();
    let elapsed = start.elapsed();
    let gap = solved.sup_distance(&oracle);
    let gap0 = sup_gap(solved.slice(0), oracle.slice(0));
    let g_sup = solved.slice(grid.nt).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = 1e-3 * (1.0 + g_sup);
    verdict(
        2,
        "degenerate stopping",
        gap <= threshold && within(elapsed, 30),
        format!("sup gap {gap:.3e} (t=0 slice {gap0:.3e}) vs {threshold:.1e} in {elapsed:.1?}"),
    );
}

#[test]
fn criterion_03_degenerate_impulse() {
    let start = Instant::now();
    let s = impulse_spec();
    let grid = build_grid(&s.domain, 200, &[200]).unwrap();
    let solved = solve_qvi(&s, &grid, &SolverParams::default()).unwrap();
    let oracle = lattice_impulse_value(&s, &grid).unwrap();
    let elapsed = start.elapsed();
    let gap = solved.sup_distance(&oracle);
    let gap0 = sup_gap(solved.slice(0), oracle.slice(0));
    verdict(
        3,
        "degenerate impulse",
        gap <= 1e-3 && within(elapsed, 30),
        format!("sup gap {gap:.3e} (t=0 slice {gap0:.3e}) vs 1e-3 in {elapsed:.1?}"),
    );
}

#[test]
fn criterion_04_value_existence() {
    let start = Instant::now();
    let s = spec(CANONICAL);
    let grid = build_grid(&s.domain, 50, &[50]).unwrap();
    let lower = discrete_game_value(&s, &grid, Order::InfSup).unwrap();
    let upper = discrete_game_value(&s, &grid, Order::SupInf).unwrap();
    let elapsed = start.elapsed();
    let gap = lower.sup_distance(&upper);
    // Controller-first resolution min(MV, max(G, C)) never exceeds the
    // stopper-first max(G, min(MV, C)).
    let dominance = lower
        .values
        .iter()
        .zip(&upper.values)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        4,
        "value existence",
        gap <= 1e-6 && dominance <= 1e-12 && within(elapsed, 10),
        format!(
            "order gap {gap:.3e} vs 1e-6; max(infsup - supinf) {dominance:.3e} (infsup <= supinf) in {elapsed:.1?}"
        ),
    );
}

#[test]
fn criterion_05_dpp_residual() {
    let start = Instant::now();
    let s = spec(CANONICAL);
    let mut means = Vec::new();
    let mut constants = Vec::new();
    for n in [50, 100, 200, 400] {
        let f = solve(&s, n);
        let (mean, _) = dpp_residual_summary(&s, &f).unwrap();
        means.push(mean);
        constants.push(mean / (f.grid.dt() + f.grid.dx(0)));
    }
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    let elapsed = start.elapsed();
    let pass = ratios.iter().all(|&r| r <= 0.7) && within(elapsed, 120);
    verdict(
        5,
        "DPP residual",
        pass,
        format!(
            "means [{}] C {constants:.4?} ratios {ratios:.3?} (<= 0.7) in {elapsed:.1?}",
            means.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

#[test]
fn criterion_06_monte_carlo_closure() {
    let start = Instant::now();
    let (s, f) = canonical_field();
    let (controller, stopper) = extract_policy(s, f, default_act_tol(s, f)).unwrap();
    let v = f.value_at(0, &[0.0]);
    let slack = 0.05;
    let (paths, dt, seed) = (10_000, 1e-3, 20_240_601);
    let run = |c: &dyn Controller, st: &dyn Stopper| estimate_value(s, Some(c), Some(st), 0.0, &[0.0], paths, dt, seed).unwrap();
    let est = run(&controller, &stopper);
    let mut pass = (est.mean - v).abs() <= 3.0 * est.std_error + slack;
    let mut details = vec![format!(
        "V(0,0)={v:.4} estimate {:.4} (SE {:.4})",
        est.mean, est.std_error
    )];
    let random = StopAtRandomTime::new(0.0, s.horizon(), seed);
    let deviations: [(&str, &dyn Stopper); 3] =
        [("never-stop", &NeverStop), ("stop-now", &StopImmediately), ("stop-random", &random)];
    for (name, st) in deviations {
        let e = run(&controller, st);
        let ok = e.mean <= v + 3.0 * e.std_error + slack;
        pass &= ok;
        details.push(format!("{name} {:.4}{}", e.mean, if ok { "" } else { " (violates)" }));
    }
    let e = run(&NeverIntervene, &stopper);
    let ok = e.mean >= v - 3.0 * e.std_error - slack;
    pass &= ok;
    details.push(format!("no-impulse {:.4}{}", e.mean, if ok { "" } else { " (violates)" }));
    let elapsed = start.elapsed();
    pass &= within(elapsed, 120);
    verdict(6, "Monte-Carlo closure", pass, format!("{} in {elapsed:.1?}", details.join("; ")));
}

#[test]
fn criterion_07_regularity() {
    let s = spec(CANONICAL);
    let probes: Vec<Regularity> = [50, 100, 200].iter().map(|&n| regularity_probe(&solve(&s, n))).collect();
    let change = |a: f64, b: f64| if a == 0.0 { b.abs() } else { (b / a - 1.0).abs() };
    let lip: Vec<f64> = probes.iter().map(|r| r.lipschitz_x).collect();
    let hol: Vec<f64> = probes.iter().map(|r| r.holder_t).collect();
    let worst = probes
        .windows(2)
        .map(|w| change(w[0].lipschitz_x, w[1].lipschitz_x).max(change(w[0].holder_t, w[1].holder_t)))
        .fold(0.0, f64::max);
    verdict(
        7,
        "regularity",
        worst <= 0.25,
        format!("lipschitz_x {lip:.3?} holder_t {hol:.3?} worst change {:.1}% (<= 25%)", 100.0 * worst),
    );
}

#[test]
fn criterion_08_comparison_surrogate() {
    let (s1, v1) = canonical_field();
    let mut s2 = s1.clone();
    let mut params = s2.bequest.params.clone();
    params.resize(5, 0.0);
    params.push(0.1);
    s2.bequest = CoefficientFn::new(s2.bequest.kind, params);
    let v2 = solve(&s2, 200);
    let tol = 10.0 * v1.diagnostics.fixed_point_tol.max(v2.diagnostics.fixed_point_tol);
    let diffs: Vec<f64> = v2.values.iter().zip(&v1.values).map(|(a, b)| a - b).collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        8,
        "comparison surrogate",
        min >= 0.0 && max <= 0.1 + tol,
        format!("V2 - V1 in [{min:.3e}, {max:.6}] vs [0, 0.1 + {tol:.1e}]"),
    );
}

/// Random slice with `phi = G(t, .)` on the boundary and bounded slopes.
fn random_lipschitz_slice(spec: &ProblemSpec, grid: &Grid, t: f64, slope: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = grid.n_space();
    let dx = grid.dx(0);
    let mut v = vec![0.0; n];
    for i in 1..n {
        v[i] = v[i - 1] + rng.random_range(-slope..slope) * dx;
    }
    let left = spec.bequest(t, &grid.coords(0));
    let right = spec.bequest(t, &grid.coords(n - 1));
    let (a, b) = (left - v[0], right - v[n - 1]);
    for (i, x) in v.iter_mut().enumerate() {
        let w = i as f64 / (n - 1) as f64;
        *x += a * (1.0 - w) + b * w;
    }
    v
}

fn lipschitz(grid: &Grid, v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs() / grid.dx(0)).fold(0.0, f64::max)
}

#[test]
fn criterion_09_intervention_laws() {
    let start = Instant::now();
    let s = spec(CANONICAL);
    let grid = build_grid(&s.domain, 10, &[100]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = 0.3;
    let min_cost = s.impulse_set.iter().map(|z| s.intervention_cost(t, z)).fold(f64::INFINITY, f64::min);
    // Shift equivariance is checked where every landing stays in the box
    // (exits pay the unshifted bequest).
    let inside: Vec<usize> = (0..grid.n_space())
        .filter(|&n| {
            let x = grid.coords(n);
            s.impulse_set.iter().all(|z| s.domain.contains_closed(&[x[0] + z[0]]))
        })
        .collect();
    let (mut shift_err, mut mono_err, mut lip_excess, mut floor_err) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let mut minimizers = true;
    for _ in 0..100 {
        let phi = random_lipschitz_slice(&s, &grid, t, 2.0, &mut rng);
        let bump = random_lipschitz_slice(&s, &grid, t, 1.0, &mut rng);
        let psi: Vec<f64> = phi.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
        let a: f64 = rng.random_range(-3.0..3.0);
        let shifted: Vec<f64> = phi.iter().map(|v| v + a).collect();
        let m_phi = intervention_operator(&s, &grid, t, &phi);
        let m_psi = intervention_operator(&s, &grid, t, &psi);
        let m_shift = intervention_operator(&s, &grid, t, &shifted);
        minimizers &= m_phi.argmin.iter().all(Option::is_some);
        for &n in &inside {
            shift_err = shift_err.max((m_shift.values[n] - m_phi.values[n] - a).abs());
        }
        for n in 0..grid.n_space() {
            mono_err = mono_err.max(m_phi.values[n] - m_psi.values[n]);
        }
        lip_excess = lip_excess.max(lipschitz(&grid, &m_phi.values) - lipschitz(&grid, &phi) - grid.dx(0));
        let low = phi.iter().copied().fold(f64::INFINITY, f64::min).min(
            [grid.coords(0), grid.coords(grid.n_space() - 1)]
                .iter()
                .map(|x| s.bequest(t, x))
                .fold(f64::INFINITY, f64::min),
        );
        floor_err = floor_err.max(min_cost + low - m_phi.values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let elapsed = start.elapsed();
    let pass = shift_err <= 1e-12 && mono_err <= 0.0 && minimizers && lip_excess <= 0.0 && floor_err <= 1e-12 && within(elapsed, 10);
    verdict(
        9,
        "intervention operator laws",
        pass,
        format!(
            "shift err {shift_err:.1e}, monotonicity excess {mono_err:.1e}, minimizers {minimizers}, \
             Lipschitz excess {lip_excess:.3e}, floor excess {floor_err:.1e} in {elapsed:.1?}"
        ),
    );
}

#[test]
fn criterion_10_moment_diagnostics() {
    let start = Instant::now();
    let mut bm = spec(CANONICAL);
    bm.domain.lower = vec![-100.0];
    bm.domain.upper = vec![100.0];
    let ladder = [0.01, 0.04, 0.16];
    let r = moment_diagnostics(&bm, 0.0, &[0.0], 100_000, 1e-3, 10, &ladder).unwrap();
    let ratios: Vec<f64> = r.ladder.iter().map(|e| e.ratio).collect();
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pass = ratios.iter().all(|&q| q <= 4.0) && spread <= 1.25;

    let mut lin = bm.clone();
    lin.drift = CoefficientFn::new(CoefficientKind::Affine, vec![0.0, 0.0, 1.0]);
    let half = moment_diagnostics(&lin, 0.0, &[0.5], 100_000, 1e-3, 11, &ladder).unwrap();
    let one = moment_diagnostics(&lin, 0.0, &[1.0], 100_000, 1e-3, 12, &ladder).unwrap();
    let within2 = |a: f64, b: f64| (a / b).max(b / a) <= 2.0;
    pass &= within2(half.sup_constant, one.sup_constant) && within2(half.increment_constant, one.increment_constant);
    let elapsed = start.elapsed();
    pass &= within(elapsed, 60);
    verdict(
        10,
        "moment diagnostics",
        pass,
        format!(
            "ratios {ratios:.3?} spread {spread:.3} (<= 1.25, each <= 4); growth constants x0=0.5 ({:.3}, {:.3}) x0=1 ({:.3}, {:.3}) in {elapsed:.1?}",
            half.sup_constant, half.increment_constant, one.sup_constant, one.increment_constant
        ),
    );
}
