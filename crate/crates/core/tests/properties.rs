use proptest::prelude::*;
use qvigame::policy::default_act_tol;
use qvigame::qvi::ValueField;
use qvigame::*;
use serde_json::json;

fn game(bequest: [f64; 3], running: f64, cost: [f64; 2]) -> ProblemSpec {
    load_spec(&json!({
        "domain": {"lower": [-2.0], "upper": [2.0], "horizon": 1.0},
        "drift": {"kind": "constant", "params": [0.2]},
        "vol": {"kind": "constant", "params": [0.8]},
        "running_cost": {"kind": "constant", "params": [running]},
        "bequest": {"kind": "scaled-power", "params": [bequest[0], bequest[1], 1.0, 0.1, bequest[2]]},
        "intervention_cost": {"kind": "scaled-power", "params": [cost[0], cost[1], 1.0]},
        "impulse_set": [-0.5, 0.5],
        "impulse_response": {"kind": "translation"},
        "cost_floor": cost[0]
    }))
    .unwrap()
}

fn solve(spec: &ProblemSpec, nt: usize, nx: usize) -> ValueField {
    let grid = build_grid(&spec.domain, nt, &[nx]).unwrap();
    solve_qvi(spec, &grid, &SolverParams::default()).unwrap()
}

fn side() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(0.0), Just(1.0)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scheme_is_monotone_in_data(
        a in -1.0f64..1.0, s in 0.0f64..1.5, sd in side(), f in -0.5f64..0.5,
        dg in 0.0f64..0.5, df in 0.0f64..0.5, c0 in 0.05f64..0.5, c1 in 0.0f64..1.0,
    ) {
        let lo = game([a, s, sd], f, [c0, c1]);
        let hi = game([a + dg, s, sd], f + df, [c0, c1]);
        let v1 = solve(&lo, 20, 40);
        let v2 = solve(&hi, 20, 40);
        for (x, y) in v1.values.iter().zip(&v2.values) {
            prop_assert!(x <= &(y + 1e-9), "{x} > {y}");
        }
    }

    #[test]
    fn converged_fields_are_bounded_and_consistent(
        a in -1.0f64..1.0, s in 0.0f64..1.5, sd in side(), f in -0.5f64..0.5,
        c0 in 0.05f64..0.5, c1 in 0.0f64..1.0,
    ) {
        let spec = game([a, s, sd], f, [c0, c1]);
        let field = solve(&spec, 20, 40);
        let grid = &field.grid;
        let (f_sup, g_sup) = qvi::sup_norms(&spec, grid);
        let bound = g_sup + grid.horizon * f_sup;
        prop_assert!(field.values.iter().all(|v| v.abs() <= bound + 1e-9));
        let res = pde_residual(&spec, &field).unwrap().sup_norm();
        prop_assert!(res <= 10.0 * field.diagnostics.fixed_point_tol, "residual {res}");
        for node in 0..grid.n_space() {
            let x = grid.coords(node);
            prop_assert_eq!(field.at(grid.nt, node), spec.bequest(1.0, &x));
            if grid.is_boundary(node) {
                for k in 0..grid.nt {
                    prop_assert_eq!(field.at(k, node), spec.bequest(grid.time(k), &x));
                }
            }
        }
        prop_assert!(field.diagnostics.max_outer_iterations() <= 50);
    }

    #[test]
    fn intervention_operator_laws(
        vals in prop::collection::vec(-2.0f64..2.0, 41),
        bump in prop::collection::vec(0.0f64..1.0, 41),
        shift in -5.0f64..5.0,
    ) {
        let spec = game([0.0, 1.0, 0.0], 0.0, [0.1, 0.5]);
        let grid = build_grid(&spec.domain, 1, &[40]).unwrap();
        let psi: Vec<f64> = vals.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
        let m = intervention_operator(&spec, &grid, 0.0, &vals);
        let m_psi = intervention_operator(&spec, &grid, 0.0, &psi);
        let m_shift = intervention_operator(&spec, &grid, 0.0, &shifted);
        for node in 0..grid.n_space() {
            prop_assert!(m.argmin[node].is_some());
            prop_assert!(m.values[node] <= m_psi.values[node]);
            let x = grid.coords(node)[0];
            if (-1.5..=1.5).contains(&x) {
                prop_assert!((m_shift.values[node] - m.values[node] - shift).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn simulated_schedules_are_admissible(seed in 0u64..10_000, x0 in -1.5f64..1.5) {
        let spec = game([0.0, 1.0, 1.0], 0.0, [0.1, 0.5]);
        let field = solve(&spec, 20, 40);
        let (c, st) = extract_policy(&spec, &field, default_act_tol(&spec, &field)).unwrap();
        let a = simulate_path(&spec, 0.0, &[x0], Some(&c), Some(&st), 0.01, seed).unwrap();
        let b = simulate_path(&spec, 0.0, &[x0], Some(&c), Some(&st), 0.01, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let times: Vec<f64> = a.schedule.events.iter().map(|e| e.time).collect();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        for e in &a.schedule.events {
            prop_assert!(e.cost >= spec.cost_floor);
            prop_assert!(spec.impulse_set.index_of(&e.impulse).is_some());
        }
        let end = a.trajectory.last().unwrap();
        prop_assert_eq!(end.time, a.effective_end);
        prop_assert!(a.trajectory.windows(2).all(|w| w[0].time < w[1].time));
    }
}

#[test]
fn constant_game_is_constant() {
    let spec = ProblemSpec::from_json_str(include_str!("../../../problems/constant.json")).unwrap();
    let field = solve(&spec, 20, 40);
    assert!(field.values.iter().all(|&v| v == 2.0));
    assert_eq!(pde_residual(&spec, &field).unwrap().sup_norm(), 0.0);
    let mut bumped = field.clone();
    let node = 7;
    bumped.values[node] += 1.0;
    let res = pde_residual(&spec, &bumped).unwrap();
    let min_cost = spec.impulse_set.iter().map(|z| spec.intervention_cost(0.0, z)).fold(f64::INFINITY, f64::min);
    assert!(res.values[node] >= 1.0 - min_cost - 1e-12);
}

/// Doubling the grid shrinks the change in `V(0, 0)` by at least 0.6 once
/// the grids resolve the problem (N = 100, 200, 400).
#[test]
fn refinement_changes_contract() {
    for (name, text, no_stop) in [
        ("canonical", include_str!("../../../problems/canonical.json"), false),
        ("stopping", include_str!("../../../problems/stopping.json"), false),
        ("impulse", include_str!("../../../problems/impulse.json"), true),
    ] {
        let mut spec = ProblemSpec::from_json_str(text).unwrap();
        if no_stop {
            spec = spec.without_stopping();
        }
        let v: Vec<f64> = [100, 200, 400].iter().map(|&n| solve(&spec, n, n).value_at(0, &[0.0])).collect();
        let ratio = (v[2] - v[1]).abs() / (v[1] - v[0]).abs();
        assert!(ratio <= 0.6, "{name}: values {v:?} ratio {ratio}");
    }
}

#[test]
fn nonconvergence_returns_the_field() {
    let spec = game([0.0, 1.0, 1.0], 0.0, [0.1, 0.5]);
    let grid = build_grid(&spec.domain, 10, &[40]).unwrap();
    let params = SolverParams {
        max_outer_iters: 1,
        fixed_point_tol: Some(1e-15),
        ..SolverParams::default()
    };
    match solve_qvi(&spec, &grid, &params) {
        Err(qvi::QviError::NotConverged { field, history, .. }) => {
            assert!(!field.diagnostics.converged);
            assert_eq!(history.len(), 1);
            assert!(matches!(
                extract_policy(&spec, &field, 1e-6),
                Err(Error::StaleField)
            ));
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}
