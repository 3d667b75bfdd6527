use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qvigame::io::{load_field, save_field, save_policy, write_json, write_path_csv};
use qvigame::qvi::QviError;
use qvigame::{
    build_grid, default_act_tol, discrete_game_value, dpp_residual_summary, estimate_value, extract_policy,
    lattice_impulse_value, lattice_stopping_value, regularity_probe, simulate_path, solve_qvi, validate_assumptions,
    Controller, NeverIntervene, NeverStop, Order, ProblemSpec, SolverParams, StopAtRandomTime, StopImmediately,
    Stopper, Stopping, ValueField,
};

const EXIT_FAIL: u8 = 1;
const EXIT_NONCONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "qvigame", version, about = "Impulse control vs. stopping games: solve, simulate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SpecArgs {
    /// Problem document (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Solve with the stopper's option removed before the horizon.
    #[arg(long)]
    no_stop: bool,
}

impl SpecArgs {
    fn load(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::from_path(&self.spec).with_context(|| format!("loading {}", self.spec.display()))?;
        Ok(if self.no_stop { spec.without_stopping() } else { spec })
    }
}

#[derive(clap::Args)]
struct GridArgs {
    #[arg(long, default_value_t = 200)]
    nt: usize,
    /// Cells per axis; one value is reused for every axis.
    #[arg(long, value_delimiter = ',', default_value = "200")]
    nx: Vec<usize>,
}

impl GridArgs {
    fn build(&self, spec: &ProblemSpec) -> Result<qvigame::Grid> {
        let nx = if self.nx.len() == 1 {
            vec![self.nx[0]; spec.dim()]
        } else {
            self.nx.clone()
        };
        Ok(build_grid(&spec.domain, self.nt, &nx)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Oracle,
    Mc,
    Dpp,
    Regularity,
    Assumptions,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Mc => "mc",
            Mode::Dpp => "dpp",
            Mode::Regularity => "regularity",
            Mode::Assumptions => "assumptions",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Infsup,
    Supinf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the QVI and write value.csv, diagnostics.json and policy files.
    Solve {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
        /// Outer fixed-point iterations allowed per slice.
        #[arg(long, default_value_t = SolverParams::default().max_outer_iters)]
        max_outer_iters: usize,
        /// Fixed-point tolerance; defaults to a multiple of the data scale.
        #[arg(long)]
        fixed_point_tol: Option<f64>,
    },
    /// Brute-force lattice value on the same grid.
    Oracle {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
        /// Order of play within a slice for the full game.
        #[arg(long, value_enum, default_value = "infsup")]
        order: OrderArg,
    },
    /// Simulate one path, or estimate the value over many.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        /// Solved field whose policies drive both players; without it
        /// neither player acts.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
    },
    /// Run one check suite against a solved field.
    Verify {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
    },
    /// Load a problem document and sample the standing assumptions.
    Validate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    value: f64,
    threshold: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= threshold,
            value,
            threshold,
            detail: String::new(),
        }
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    mode: &'a str,
    pass: bool,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

fn center(spec: &ProblemSpec) -> Vec<f64> {
    spec.domain.lower.iter().zip(&spec.domain.upper).map(|(a, b)| 0.5 * (a + b)).collect()
}

/// The field's own stopping mode wins over the command line.
fn aligned(spec: ProblemSpec, field: &ValueField) -> ProblemSpec {
    match field.diagnostics.stopping {
        Stopping::Disabled => spec.without_stopping(),
        Stopping::Enabled => spec,
    }
}

fn open_field(path: &Option<PathBuf>) -> Result<ValueField> {
    let path = path.as_ref().context("--field is required")?;
    load_field(path).with_context(|| format!("loading field from {}", path.display()))
}

fn cmd_solve(spec: &ProblemSpec, grid: qvigame::Grid, params: &SolverParams, out: &Path) -> Result<u8> {
    match solve_qvi(spec, &grid, params) {
        Ok(field) => {
            save_field(out, spec, &field)?;
            let (c, s) = extract_policy(spec, &field, default_act_tol(spec, &field))?;
            save_policy(out, &c, &s)?;
            eprintln!(
                "converged: {} slices, max {} outer iterations",
                grid.nt,
                field.diagnostics.max_outer_iterations()
            );
            Ok(0)
        }
        Err(QviError::NotConverged { field, slice, .. }) => {
            save_field(out, spec, &field)?;
            eprintln!("solver did not converge at slice {slice}; stale field written");
            Ok(EXIT_NONCONVERGED)
        }
        Err(e) => Err(e.into()),
    }
}

fn oracle_field(spec: &ProblemSpec, grid: &qvigame::Grid, order: Order) -> Result<ValueField> {
    Ok(if spec.impulse_set.is_empty() {
        lattice_stopping_value(spec, grid)?
    } else if spec.stopping == Stopping::Disabled {
        lattice_impulse_value(spec, grid)?
    } else {
        discrete_game_value(spec, grid, order)?
    })
}

fn verify_oracle(spec: &ProblemSpec, field: &ValueField) -> Result<Vec<Check>> {
    let oracle = oracle_field(spec, &field.grid, Order::InfSup)?;
    let g_sup = qvigame::qvi::sup_norms(spec, &field.grid).1;
    let mut checks = vec![Check::at_most(
        "solver_vs_oracle_sup_gap",
        field.sup_distance(&oracle),
        1e-3 * (1.0 + g_sup),
    )];
    if !spec.impulse_set.is_empty() && spec.stopping == Stopping::Enabled {
        let other = discrete_game_value(spec, &field.grid, Order::SupInf)?;
        checks.push(Check::at_most("order_gap", oracle.sup_distance(&other), 1e-6));
    }
    Ok(checks)
}

fn verify_mc(spec: &ProblemSpec, field: &ValueField, x0: &[f64], paths: usize, dt: f64, seed: u64) -> Result<Vec<Check>> {
    let (controller, stopper) = extract_policy(spec, field, default_act_tol(spec, field))?;
    let v = field.value_at(0, x0);
    let slack = 0.05;
    let run = |c: &dyn Controller, s: &dyn Stopper| estimate_value(spec, Some(c), Some(s), 0.0, x0, paths, dt, seed);
    let est = run(&controller, &stopper)?;
    let bound = 3.0 * est.std_error + slack;
    let mut checks = vec![Check {
        detail: format!("V={v} estimate={} se={}", est.mean, est.std_error),
        ..Check::at_most("closure", (est.mean - v).abs(), bound)
    }];
    let random = StopAtRandomTime::new(0.0, spec.horizon(), seed);
    let deviations: [(&str, &dyn Stopper); 3] =
        [("stopper_never_stop", &NeverStop), ("stopper_stop_now", &StopImmediately), ("stopper_random", &random)];
    for (name, s) in deviations {
        let e = run(&controller, s)?;
        checks.push(Check {
            detail: format!("estimate={} se={}", e.mean, e.std_error),
            ..Check::at_most(name, e.mean - v, 3.0 * e.std_error + slack)
        });
    }
    let e = run(&NeverIntervene, &stopper)?;
    checks.push(Check {
        detail: format!("estimate={} se={}", e.mean, e.std_error),
        ..Check::at_most("controller_no_impulse", v - e.mean, 3.0 * e.std_error + slack)
    });
    Ok(checks)
}

fn coarser(spec: &ProblemSpec, field: &ValueField) -> Result<ValueField> {
    let g = &field.grid;
    let nx: Vec<usize> = g.nx.iter().map(|n| (n / 2).max(2)).collect();
    let grid = build_grid(&spec.domain, (g.nt / 2).max(1), &nx)?;
    Ok(solve_qvi(spec, &grid, &SolverParams::default())?)
}

fn verify_dpp(spec: &ProblemSpec, field: &ValueField) -> Result<(Vec<Check>, serde_json::Value)> {
    let (mean, max) = dpp_residual_summary(spec, field)?;
    let (coarse_mean, _) = dpp_residual_summary(spec, &coarser(spec, field)?)?;
    let scale = field.grid.dt() + field.grid.dx(0);
    let ratio = mean / coarse_mean;
    let extra = serde_json::json!({
        "mean_residual": mean,
        "max_residual": max,
        "coarse_mean_residual": coarse_mean,
        "constant": mean / scale,
    });
    Ok((vec![Check::at_most("refinement_ratio", ratio, 0.7)], extra))
}

fn verify_regularity(spec: &ProblemSpec, field: &ValueField) -> Result<(Vec<Check>, serde_json::Value)> {
    let fine = regularity_probe(field);
    let coarse = regularity_probe(&coarser(spec, field)?);
    let change = |a: f64, b: f64| if a == 0.0 { b.abs() } else { (b / a - 1.0).abs() };
    let checks = vec![
        Check::at_most("lipschitz_x_change", change(coarse.lipschitz_x, fine.lipschitz_x), 0.25),
        Check::at_most("holder_t_change", change(coarse.holder_t, fine.holder_t), 0.25),
    ];
    Ok((checks, serde_json::json!({ "fine": fine, "coarse": coarse })))
}

fn status(name: &str, s: &qvigame::model::CheckStatus) -> Check {
    Check {
        name: name.into(),
        pass: s.ok(),
        value: f64::from(u8::from(!s.ok())),
        threshold: 0.0,
        detail: serde_json::to_string(s).unwrap_or_default(),
    }
}

fn cmd_verify(spec: ProblemSpec, field: &Option<PathBuf>, mode: Mode, out: &Path, seed: u64, mc: (usize, f64, Option<Vec<f64>>)) -> Result<u8> {
    let (checks, extra) = if let Mode::Assumptions = mode {
        let report = validate_assumptions(&spec, 64);
        let checks = vec![
            status("cost_subadditive", &report.cost_subadditive),
            status("cost_nonincreasing_in_time", &report.cost_nonincreasing_in_time),
            status("cost_floor", &report.cost_floor),
        ];
        (checks, Some(serde_json::to_value(&report)?))
    } else {
        let field = open_field(field)?;
        let spec = aligned(spec, &field);
        if !field.diagnostics.converged {
            bail!("field is stale: solver did not converge");
        }
        match mode {
            Mode::Oracle => (verify_oracle(&spec, &field)?, None),
            Mode::Mc => {
                let x0 = mc.2.unwrap_or_else(|| center(&spec));
                (verify_mc(&spec, &field, &x0, mc.0, mc.1, seed)?, None)
            }
            Mode::Dpp => {
                let (c, e) = verify_dpp(&spec, &field)?;
                (c, Some(e))
            }
            Mode::Regularity => {
                let (c, e) = verify_regularity(&spec, &field)?;
                (c, Some(e))
            }
            Mode::Assumptions => unreachable!(),
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!("{} {}: {:e} (threshold {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    std::fs::create_dir_all(out)?;
    let report = VerifyReport {
        mode: mode.name(),
        pass,
        checks,
        extra,
    };
    write_json(&out.join(format!("verify_{}.json", mode.name())), &report)?;
    Ok(if pass { 0 } else { EXIT_FAIL })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    spec: ProblemSpec,
    field: &Option<PathBuf>,
    out: &Path,
    seed: u64,
    paths: usize,
    dt: f64,
    x0: Option<Vec<f64>>,
    t0: f64,
) -> Result<u8> {
    let x0 = x0.unwrap_or_else(|| center(&spec));
    let (spec, policies) = match field {
        Some(_) => {
            let f = open_field(field)?;
            let spec = aligned(spec, &f);
            let p = extract_policy(&spec, &f, default_act_tol(&spec, &f))?;
            (spec, Some(p))
        }
        None => (spec, None),
    };
    let controller: Option<&dyn Controller> = policies.as_ref().map(|p| &p.0 as &dyn Controller);
    let stopper: Option<&dyn Stopper> = policies.as_ref().map(|p| &p.1 as &dyn Stopper);
    std::fs::create_dir_all(out)?;
    let path = simulate_path(&spec, t0, &x0, controller, stopper, dt, seed)?;
    write_path_csv(&out.join("path.csv"), &spec, &path)?;
    let payoff = qvigame::evaluate_payoff(&spec, &path)?;
    let mut summary = serde_json::json!({ "seed": seed, "payoff": payoff, "impulses": path.schedule.len() });
    if paths > 1 {
        let est = estimate_value(&spec, controller, stopper, t0, &x0, paths, dt, seed)?;
        summary["estimate"] = serde_json::to_value(&est)?;
    }
    write_json(&out.join("simulate.json"), &summary)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { spec, grid, out, max_outer_iters, fixed_point_tol } => {
            let spec = spec.load()?;
            let grid = grid.build(&spec)?;
            let params = SolverParams {
                max_outer_iters,
                fixed_point_tol,
                ..SolverParams::default()
            };
            cmd_solve(&spec, grid, &params, &out)
        }
        Command::Oracle { spec, grid, out, order } => {
            let spec = spec.load()?;
            let grid = grid.build(&spec)?;
            let order = match order {
                OrderArg::Infsup => Order::InfSup,
                OrderArg::Supinf => Order::SupInf,
            };
            save_field(&out, &spec, &oracle_field(&spec, &grid, order)?)?;
            Ok(0)
        }
        Command::Simulate { spec, field, out, seed, paths, dt, x0, t0 } => {
            cmd_simulate(spec.load()?, &field, &out, seed, paths, dt, x0, t0)
        }
        Command::Verify { spec, field, mode, out, seed, paths, dt, x0 } => {
            let seed = seed.context("--seed is required for verify")?;
            cmd_verify(spec.load()?, &field, mode, &out, seed, (paths, dt, x0))
        }
        Command::Validate { spec, out } => {
            let spec = spec.load()?;
            let report = validate_assumptions(&spec, 64);
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write_json(&dir.join("validate.json"), &report)?;
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(if report.all_pass() { 0 } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAIL } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
