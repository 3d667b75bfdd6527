//! Problem description: domain, coefficient catalog, impulse set and costs.
//!
//! A [`ProblemSpec`] is built from a JSON document (see [`load_spec`]) and is
//! immutable afterwards. Coefficients come from a closed catalog of
//! parameterised functions so that every evaluation is total and
//! deterministic on `[0, T] x closure(S)`.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, SpecError};

/// Catalog entry kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientKind {
    /// `params` holds the output verbatim (or one value to broadcast).
    Constant,
    /// Per output component `[a, b, w_1 .. w_p]`: `a + b t + w . y`.
    Affine,
    /// `[a, s, q, delta?, side?, b?]`: `exp(-delta t) (a + s r(y)^q) + b` where
    /// `r` is the Euclidean norm (`side = 0`), the positive part of the
    /// first coordinate (`side = 1`) or of its negation (`side = -1`).
    ScaledPower,
    /// `[k_0 .. k_{n-1}, v_0 .. v_{n-1}]`: piecewise linear in the first
    /// coordinate, flat outside the knots.
    TabulatedGrid,
}

/// Output shape a coefficient must produce for its role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Square `p x p` matrix, row-major.
    Matrix(usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(p) => p,
            Shape::Matrix(p) => p * p,
        }
    }
}

/// A parameterised catalog function `(t, y) -> value(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFn {
    pub kind: CoefficientKind,
    pub params: Vec<f64>,
}

impl CoefficientFn {
    pub fn constant(value: f64) -> Self {
        Self {
            kind: CoefficientKind::Constant,
            params: vec![value],
        }
    }

    pub fn new(kind: CoefficientKind, params: Vec<f64>) -> Self {
        Self { kind, params }
    }

    /// True when the parameters describe one scalar that is broadcast
    /// into vector and matrix roles.
    fn is_scalar(&self, input_dim: usize) -> bool {
        match self.kind {
            CoefficientKind::Constant => self.params.len() == 1,
            CoefficientKind::Affine => self.params.len() == input_dim + 2,
            CoefficientKind::ScaledPower | CoefficientKind::TabulatedGrid => true,
        }
    }

    /// Checks parameter counts against the role's shape.
    pub fn check(&self, key: &str, shape: Shape, input_dim: usize) -> Result<(), SpecError> {
        let invalid = |msg: String| SpecError::Invalid {
            key: key.to_string(),
            msg,
        };
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(invalid("params must be finite".into()));
        }
        let k = shape.len();
        match self.kind {
            CoefficientKind::Constant => {
                if self.params.len() != 1 && self.params.len() != k {
                    return Err(invalid(format!(
                        "constant expects 1 or {k} params, got {}",
                        self.params.len()
                    )));
                }
            }
            CoefficientKind::Affine => {
                let per = input_dim + 2;
                if self.params.len() != per && self.params.len() != k * per {
                    return Err(invalid(format!(
                        "affine expects {per} or {} params, got {}",
                        k * per,
                        self.params.len()
                    )));
                }
            }
            CoefficientKind::ScaledPower => {
                if !(3..=6).contains(&self.params.len()) {
                    return Err(invalid(format!(
                        "scaled-power expects 3 to 6 params, got {}",
                        self.params.len()
                    )));
                }
                if self.params[2] < 0.0 {
                    return Err(invalid("scaled-power exponent must be >= 0".into()));
                }
                if let Some(&side) = self.params.get(4) {
                    if side != 0.0 && side != 1.0 && side != -1.0 {
                        return Err(invalid("scaled-power side must be -1, 0 or 1".into()));
                    }
                }
            }
            CoefficientKind::TabulatedGrid => {
                let n = self.params.len();
                if n < 4 || n % 2 != 0 {
                    return Err(invalid(format!(
                        "tabulated-grid expects an even count >= 4 (knots then values), got {n}"
                    )));
                }
                let knots = &self.params[..n / 2];
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(SpecError::Knots {
                        key: key.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn scalar(&self, t: f64, y: &[f64]) -> f64 {
        let p = &self.params;
        match self.kind {
            CoefficientKind::Constant => p[0],
            CoefficientKind::Affine => {
                p[0] + p[1] * t + p[2..].iter().zip(y).map(|(w, v)| w * v).sum::<f64>()
            }
            CoefficientKind::ScaledPower => {
                let (a, s, q) = (p[0], p[1], p[2]);
                let delta = p.get(3).copied().unwrap_or(0.0);
                let side = p.get(4).copied().unwrap_or(0.0);
                let r = if side > 0.0 {
                    y[0].max(0.0)
                } else if side < 0.0 {
                    (-y[0]).max(0.0)
                } else {
                    norm(y)
                };
                let core = if q == 0.0 { a + s } else { a + s * r.powf(q) };
                (-delta * t).exp() * core + p.get(5).copied().unwrap_or(0.0)
            }
            CoefficientKind::TabulatedGrid => {
                let n = p.len() / 2;
                let (knots, values) = p.split_at(n);
                let x = y[0];
                if x <= knots[0] {
                    return values[0];
                }
                if x >= knots[n - 1] {
                    return values[n - 1];
                }
                let i = knots.partition_point(|&k| k <= x) - 1;
                let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    /// Evaluates into `out`, whose length fixes the shape.
    pub fn eval_into(&self, t: f64, y: &[f64], shape: Shape, out: &mut [f64]) {
        debug_assert_eq!(out.len(), shape.len());
        if self.is_scalar(y.len()) {
            let s = self.scalar(t, y);
            match shape {
                Shape::Matrix(p) => {
                    out.fill(0.0);
                    for i in 0..p {
                        out[i * p + i] = s;
                    }
                }
                _ => out.fill(s),
            }
            return;
        }
        match self.kind {
            CoefficientKind::Constant => out.copy_from_slice(&self.params),
            CoefficientKind::Affine => {
                let per = y.len() + 2;
                for (r, o) in out.iter_mut().enumerate() {
                    let c = &self.params[r * per..(r + 1) * per];
                    *o = c[0] + c[1] * t + c[2..].iter().zip(y).map(|(w, v)| w * v).sum::<f64>();
                }
            }
            _ => unreachable!("scalar kinds handled above"),
        }
    }

    pub fn eval_scalar(&self, t: f64, y: &[f64]) -> f64 {
        self.scalar(t, y)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finite impulse set in canonical lexicographic order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImpulseSet {
    impulses: Vec<Vec<f64>>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl ImpulseSet {
    /// Sorts into canonical order; rejects duplicates.
    pub fn new(mut impulses: Vec<Vec<f64>>) -> Result<Self, SpecError> {
        impulses.sort_by(|a, b| lex_cmp(a, b));
        if impulses.windows(2).any(|w| w[0] == w[1]) {
            return Err(SpecError::Invalid {
                key: "impulse_set".into(),
                msg: "entries must be distinct".into(),
            });
        }
        Ok(Self { impulses })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.impulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.impulses[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.impulses.iter().map(Vec::as_slice)
    }

    pub fn index_of(&self, z: &[f64]) -> Option<usize> {
        self.impulses.iter().position(|v| v.as_slice() == z)
    }
}

/// How an impulse moves the state.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseResponse {
    /// `(x, z) -> x + z`
    Translation,
    /// `(x, z) -> A x + z`, `A` row-major `p x p`.
    CustomAffine { matrix: Vec<f64> },
}

impl ImpulseResponse {
    pub fn apply_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            ImpulseResponse::Translation => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(z) {
                    *o = a + b;
                }
            }
            ImpulseResponse::CustomAffine { matrix } => {
                let p = x.len();
                for (r, o) in out.iter_mut().enumerate() {
                    let row = &matrix[r * p..(r + 1) * p];
                    *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + z[r];
                }
            }
        }
    }
}

/// Open box `S = (lower, upper)` with horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub horizon: f64,
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Strictly inside the open box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    /// Inside the closed box.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Last point of the segment `from -> to` that stays in the closed box.
    /// `from` must lie in the closed box.
    pub fn exit_point(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        let mut s = 1.0_f64;
        for i in 0..from.len() {
            let d = to[i] - from[i];
            if to[i] > self.upper[i] && d > 0.0 {
                s = s.min((self.upper[i] - from[i]) / d);
            } else if to[i] < self.lower[i] && d < 0.0 {
                s = s.min((self.lower[i] - from[i]) / d);
            }
        }
        let s = s.clamp(0.0, 1.0);
        from.iter()
            .zip(to)
            .enumerate()
            .map(|(i, (a, b))| (a + s * (b - a)).clamp(self.lower[i], self.upper[i]))
            .collect()
    }

    fn check(&self) -> Result<(), SpecError> {
        let invalid = |msg: &str| SpecError::Invalid {
            key: "domain".into(),
            msg: msg.into(),
        };
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(invalid("lower and upper must be non-empty and equally long"));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(invalid("lower < upper must hold componentwise"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        Ok(())
    }
}

/// Whether the stopper may end the game before the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stopping {
    #[default]
    Enabled,
    /// Degenerate impulse-control problem: the stopping obstacle is pushed
    /// to a large negative floor away from the terminal slice.
    Disabled,
}

/// Complete, validated game description.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub drift: CoefficientFn,
    pub vol: CoefficientFn,
    pub running_cost: CoefficientFn,
    pub bequest: CoefficientFn,
    pub intervention_cost: CoefficientFn,
    pub impulse_response: ImpulseResponse,
    pub impulse_set: ImpulseSet,
    pub cost_floor: f64,
    pub stopping: Stopping,
}

/// Number of probe times used by the cost-floor check in [`load_spec`].
const FLOOR_PROBE_TIMES: usize = 11;

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.domain.horizon
    }

    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.drift.eval_into(t, x, Shape::Vector(self.dim()), out);
    }

    pub fn vol_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.vol.eval_into(t, x, Shape::Matrix(self.dim()), out);
    }

    pub fn running_cost(&self, t: f64, x: &[f64]) -> f64 {
        self.running_cost.eval_scalar(t, x)
    }

    pub fn bequest(&self, t: f64, x: &[f64]) -> f64 {
        self.bequest.eval_scalar(t, x)
    }

    pub fn intervention_cost(&self, t: f64, z: &[f64]) -> f64 {
        self.intervention_cost.eval_scalar(t, z)
    }

    /// `Gamma(x, z)`; the result may leave the domain.
    pub fn impulse_response(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>, DomainError> {
        if x.len() != self.dim() {
            return Err(DomainError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.impulse_set.index_of(z).is_none() {
            return Err(DomainError::UnknownImpulse(z.to_vec()));
        }
        let mut out = vec![0.0; x.len()];
        self.impulse_response.apply_into(x, z, &mut out);
        Ok(out)
    }

    /// Same spec with stopping disabled.
    pub fn without_stopping(mut self) -> Self {
        self.stopping = Stopping::Disabled;
        self
    }

    /// Parses a JSON document.
    pub fn from_json_str(text: &str) -> Result<Self, SpecError> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        load_spec(&doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Runs the load-time checks: shapes, knots, cost floor.
    pub fn validate(&self) -> Result<(), SpecError> {
        self.domain.check()?;
        let p = self.dim();
        self.drift.check("drift", Shape::Vector(p), p)?;
        self.vol.check("vol", Shape::Matrix(p), p)?;
        self.running_cost.check("running_cost", Shape::Scalar, p)?;
        self.bequest.check("bequest", Shape::Scalar, p)?;
        self.intervention_cost
            .check("intervention_cost", Shape::Scalar, p)?;
        if let ImpulseResponse::CustomAffine { matrix } = &self.impulse_response {
            if matrix.len() != p * p {
                return Err(SpecError::Invalid {
                    key: "impulse_response".into(),
                    msg: format!("custom-affine expects {} params", p * p),
                });
            }
        }
        for z in self.impulse_set.iter() {
            if z.len() != p || z.iter().any(|v| !v.is_finite()) {
                return Err(SpecError::Invalid {
                    key: "impulse_set".into(),
                    msg: format!("impulse {z:?} must be a finite vector of length {p}"),
                });
            }
        }
        if !(self.cost_floor > 0.0) {
            return Err(SpecError::NonPositiveFloor(self.cost_floor));
        }
        let t_end = self.horizon();
        for k in 0..FLOOR_PROBE_TIMES {
            let t = t_end * k as f64 / (FLOOR_PROBE_TIMES - 1) as f64;
            for z in self.impulse_set.iter() {
                let cost = self.intervention_cost(t, z);
                if !(cost >= self.cost_floor) {
                    return Err(SpecError::CostFloor {
                        t,
                        z: z.to_vec(),
                        cost,
                        floor: self.cost_floor,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResponseDoc {
    kind: String,
    #[serde(default)]
    params: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ImpulseDoc {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    domain: DomainSpec,
    drift: CoefficientFn,
    vol: CoefficientFn,
    running_cost: CoefficientFn,
    bequest: CoefficientFn,
    intervention_cost: CoefficientFn,
    impulse_set: Vec<ImpulseDoc>,
    impulse_response: ResponseDoc,
    cost_floor: f64,
}

/// Builds a [`ProblemSpec`] from a parsed document.
///
/// Top-level keys: `domain{lower,upper,horizon}`, `drift`, `vol`,
/// `running_cost`, `bequest`, `intervention_cost`, `impulse_set`,
/// `impulse_response`, `cost_floor`. Unknown keys are rejected.
pub fn load_spec(doc: &serde_json::Value) -> Result<ProblemSpec, SpecError> {
    let raw: ProblemDoc =
        serde_json::from_value(doc.clone()).map_err(|e| SpecError::Parse(e.to_string()))?;
    let impulse_response = match raw.impulse_response.kind.as_str() {
        "translation" => ImpulseResponse::Translation,
        "custom-affine" => ImpulseResponse::CustomAffine {
            matrix: raw.impulse_response.params,
        },
        other => {
            return Err(SpecError::Invalid {
                key: "impulse_response".into(),
                msg: format!("unknown kind `{other}`"),
            })
        }
    };
    let impulses = raw
        .impulse_set
        .into_iter()
        .map(|z| match z {
            ImpulseDoc::Scalar(v) => vec![v],
            ImpulseDoc::Vector(v) => v,
        })
        .collect();
    let spec = ProblemSpec {
        domain: raw.domain,
        drift: raw.drift,
        vol: raw.vol,
        running_cost: raw.running_cost,
        bequest: raw.bequest,
        intervention_cost: raw.intervention_cost,
        impulse_response,
        impulse_set: ImpulseSet::new(impulses)?,
        cost_floor: raw.cost_floor,
        stopping: Stopping::Enabled,
    };
    spec.validate()?;
    Ok(spec)
}

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail { detail: String },
    /// The quantifier ranged over an empty set.
    Skipped,
}

impl CheckStatus {
    pub fn ok(&self) -> bool {
        !matches!(self, CheckStatus::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEstimates {
    pub drift: f64,
    pub vol: f64,
    pub running_cost: f64,
    pub bequest: f64,
}

/// Sampled evidence for the standing assumptions. Failures are entries,
/// not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_probe: usize,
    /// Largest difference quotient over probe pairs.
    pub lipschitz: CoefficientEstimates,
    /// `max |g(t,x)| / (1 + |x|)` for drift and vol.
    pub growth_drift: f64,
    pub growth_vol: f64,
    pub cost_subadditive: CheckStatus,
    pub cost_nonincreasing_in_time: CheckStatus,
    pub cost_floor: CheckStatus,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.cost_subadditive.ok() && self.cost_nonincreasing_in_time.ok() && self.cost_floor.ok()
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Probe states: a uniform lattice for `p = 1`, a Halton set otherwise.
fn probe_points(domain: &DomainSpec, n: usize) -> Vec<Vec<f64>> {
    let p = domain.dim();
    (0..n)
        .map(|i| {
            (0..p)
                .map(|a| {
                    let u = if p == 1 {
                        i as f64 / (n - 1) as f64
                    } else {
                        radical_inverse(i + 1, PRIMES[a % PRIMES.len()])
                    };
                    domain.lower[a] + u * (domain.upper[a] - domain.lower[a])
                })
                .collect()
        })
        .collect()
}

fn max_quotient(points: &[Vec<f64>], values: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = norm(
                &points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            if dx == 0.0 {
                continue;
            }
            let dv = norm(
                &values[i]
                    .iter()
                    .zip(&values[j])
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            best = best.max(dv / dx);
        }
    }
    best
}

/// Samples the standing assumptions on `n_probe` states and times.
///
/// Lipschitz constants are taken over all probe pairs at `t in {0, T/2, T}`;
/// cost monotonicity and the floor are checked on `n_probe` uniform times.
pub fn validate_assumptions(spec: &ProblemSpec, n_probe: usize) -> ValidationReport {
    let n_probe = n_probe.max(2);
    let p = spec.dim();
    let t_end = spec.horizon();
    let points = probe_points(&spec.domain, n_probe);
    let lip_times = [0.0, 0.5 * t_end, t_end];

    let sample = |f: &dyn Fn(f64, &[f64], &mut [f64]), k: usize| -> (f64, f64) {
        let mut lip: f64 = 0.0;
        let mut growth: f64 = 0.0;
        for &t in &lip_times {
            let values: Vec<Vec<f64>> = points
                .iter()
                .map(|x| {
                    let mut out = vec![0.0; k];
                    f(t, x, &mut out);
                    out
                })
                .collect();
            lip = lip.max(max_quotient(&points, &values));
            for (x, v) in points.iter().zip(&values) {
                growth = growth.max(norm(v) / (1.0 + norm(x)));
            }
        }
        (lip, growth)
    };

    let (lip_drift, growth_drift) = sample(&|t, x, o| spec.drift_into(t, x, o), p);
    let (lip_vol, growth_vol) = sample(&|t, x, o| spec.vol_into(t, x, o), p * p);
    let (lip_f, _) = sample(&|t, x, o| o[0] = spec.running_cost(t, x), 1);
    let (lip_g, _) = sample(&|t, x, o| o[0] = spec.bequest(t, x), 1);

    let times: Vec<f64> = (0..n_probe)
        .map(|k| t_end * k as f64 / (n_probe - 1) as f64)
        .collect();
    let z_set = &spec.impulse_set;

    let mut sub = CheckStatus::Skipped;
    'outer: for a in z_set.iter() {
        for b in z_set.iter() {
            let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            if z_set.index_of(&sum).is_none() {
                continue;
            }
            for &t in &times {
                let lhs = spec.intervention_cost(t, &sum);
                let rhs = spec.intervention_cost(t, a) + spec.intervention_cost(t, b);
                if lhs > rhs {
                    sub = CheckStatus::Fail {
                        detail: format!("c({t}, {sum:?}) = {lhs} > {rhs}"),
                    };
                    break 'outer;
                }
            }
            sub = CheckStatus::Pass;
        }
    }

    let mut mono = if z_set.is_empty() {
        CheckStatus::Skipped
    } else {
        CheckStatus::Pass
    };
    let mut floor = mono.clone();
    for z in z_set.iter() {
        let costs: Vec<f64> = times.iter().map(|&t| spec.intervention_cost(t, z)).collect();
        if mono.ok() {
            if let Some(w) = costs.windows(2).position(|w| w[1] > w[0]) {
                mono = CheckStatus::Fail {
                    detail: format!("c increases after t = {} for z = {z:?}", times[w]),
                };
            }
        }
        if floor.ok() {
            if let Some(k) = costs.iter().position(|&c| !(c >= spec.cost_floor)) {
                floor = CheckStatus::Fail {
                    detail: format!(
                        "c({}, {z:?}) = {} < {}",
                        times[k], costs[k], spec.cost_floor
                    ),
                };
            }
        }
    }

    ValidationReport {
        n_probe,
        lipschitz: CoefficientEstimates {
            drift: lip_drift,
            vol: lip_vol,
            running_cost: lip_f,
            bequest: lip_g,
        },
        growth_drift,
        growth_vol,
        cost_subadditive: sub,
        cost_nonincreasing_in_time: mono,
        cost_floor: floor,
    }
}
