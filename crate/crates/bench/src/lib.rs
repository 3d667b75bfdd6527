//! Fixtures shared by the criterion benches.

use qvigame::{build_grid, Grid, ProblemSpec};

pub const CANONICAL: &str = include_str!("../../../problems/canonical.json");
pub const STOPPING: &str = include_str!("../../../problems/stopping.json");

pub fn problem(text: &str) -> ProblemSpec {
    ProblemSpec::from_json_str(text).expect("bundled problem documents are valid")
}

/// Uniform `n x n` space-time grid on the problem's domain.
pub fn square_grid(spec: &ProblemSpec, n: usize) -> Grid {
    build_grid(&spec.domain, n, &vec![n; spec.dim()]).expect("grid sizes are positive")
}
