//! Zero-sum games between an impulse controller (minimizer) and a stopper
//! (maximizer) driven by a diffusion on a box domain.
//!
//! The crate solves the double obstacle HJBI quasi-variational inequality
//! on a tensor grid ([`qvi`]), extracts feedback strategies ([`policy`]),
//! and checks the result against brute-force lattice games ([`oracle`]),
//! Monte-Carlo play ([`mc`]) and the one-step dynamic programming identity.

pub mod dynamics;
pub mod error;
pub mod io;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod payoff;
pub mod policy;
pub mod qvi;
pub(crate) mod stats;

pub use dynamics::{
    generator_apply, moment_diagnostics, simulate_path, Controller, Event, ImpulseEvent,
    ImpulseSchedule, MomentReport, NeverIntervene, NeverStop, PathOutcome, PathSample, Stopper,
};
pub use error::{DomainError, Error, Result, SpecError};
pub use mc::{
    estimate_value, regularity_probe, McEstimate, Regularity, StopAtRandomTime, StopImmediately,
};
pub use model::{
    load_spec, validate_assumptions, CoefficientFn, CoefficientKind, DomainSpec, ImpulseResponse,
    ImpulseSet, ProblemSpec, Stopping, ValidationReport,
};
pub use oracle::{
    discrete_game_value, lattice_impulse_value, lattice_stopping_value, LatticeError, Order,
};
pub use payoff::{batch_payoff, evaluate_payoff, summarize, BatchSummary, PayoffBreakdown};
pub use policy::{
    default_act_tol, dpp_residual, dpp_residual_summary, extract_policy, ControllerPolicy,
    StopperPolicy,
};
pub use qvi::{
    build_grid, intervention_operator, pde_residual, solve_qvi, Grid, Intervention, SolverParams,
    ValueField,
};
