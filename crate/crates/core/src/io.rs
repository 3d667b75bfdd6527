//! CSV and JSON artifacts. Floats are written in shortest round-trip form so
//! a saved field reloads bit-for-bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::PathOutcome;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::payoff::running_cost_profile;
use crate::policy::{default_act_tol, ControllerPolicy, StopperPolicy};
use crate::qvi::{Diagnostics, Grid, StopObstacle, ValueField};

pub const FIELD_CSV: &str = "value.csv";
pub const FIELD_JSON: &str = "diagnostics.json";

/// JSON header stored next to a field CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub grid: Grid,
    pub diagnostics: Diagnostics,
    /// Tolerance used for the `active_constraint` column.
    pub active_tol: f64,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn axis_names(prefix: &str, p: usize) -> Vec<String> {
    if p == 1 {
        vec![prefix.to_string()]
    } else {
        (0..p).map(|i| format!("{prefix}{i}")).collect()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Which constraint binds at a node: `impulse` when `V` is within `tol` of
/// `MV`, else `stop` when within `tol` of the stopping obstacle, else `pde`.
pub fn active_constraint(v: f64, mv: f64, lower: f64, tol: f64) -> &'static str {
    if (v - mv).abs() <= tol {
        "impulse"
    } else if (v - lower).abs() <= tol {
        "stop"
    } else {
        "pde"
    }
}

/// Writes `value.csv` and its `diagnostics.json` header into `dir`.
pub fn save_field(dir: &Path, spec: &ProblemSpec, field: &ValueField) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let grid = &field.grid;
    let n = grid.n_space();
    let tol = default_act_tol(spec, field);
    let obstacle = StopObstacle::new(spec, grid);
    let mv = field.intervention(spec);
    let mut w = csv::Writer::from_path(dir.join(FIELD_CSV))?;
    let mut head = vec!["t".to_string()];
    head.extend(axis_names("x", grid.dim()));
    head.extend(["V", "MV", "G", "active_constraint"].map(String::from));
    w.write_record(&head)?;
    for k in 0..grid.n_times() {
        let t = grid.time(k);
        for node in 0..n {
            let x = grid.coords(node);
            let v = field.at(k, node);
            let lower = obstacle.at(spec, k, t, &x);
            let mut row = vec![num(t)];
            row.extend(x.iter().map(|&c| num(c)));
            row.push(num(v));
            row.push(num(mv[k].values[node]));
            row.push(num(spec.bequest(t, &x)));
            row.push(active_constraint(v, mv[k].values[node], lower, tol).into());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    write_json(
        &dir.join(FIELD_JSON),
        &FieldHeader {
            grid: grid.clone(),
            diagnostics: field.diagnostics.clone(),
            active_tol: tol,
        },
    )
}

/// Reads a field written by [`save_field`]; `path` is the CSV or its
/// directory, the header is expected beside it.
pub fn load_field(path: &Path) -> Result<ValueField> {
    let (csv_path, json_path) = if path.is_dir() {
        (path.join(FIELD_CSV), path.join(FIELD_JSON))
    } else {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        (path.to_path_buf(), dir.join(FIELD_JSON))
    };
    let header: FieldHeader = serde_json::from_reader(File::open(&json_path)?)?;
    let grid = header.grid;
    let p = grid.dim();
    let mut reader = csv::Reader::from_path(&csv_path)?;
    let col = reader
        .headers()?
        .iter()
        .position(|h| h == "V")
        .ok_or_else(|| Error::Artifact("missing V column".into()))?;
    if col != p + 1 {
        return Err(Error::Artifact(format!(
            "V column at {col}, expected {} for dimension {p}",
            p + 1
        )));
    }
    let mut values = Vec::with_capacity(grid.len());
    for rec in reader.records() {
        let rec = rec?;
        let v: f64 = rec[col]
            .parse()
            .map_err(|e| Error::Artifact(format!("bad value {:?}: {e}", &rec[col])))?;
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(Error::Artifact(format!(
            "expected {} rows, found {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(ValueField {
        grid,
        values,
        diagnostics: header.diagnostics,
    })
}

#[derive(Serialize)]
struct PolicyHeader<'a> {
    act_tol: f64,
    intervention_nodes: usize,
    stop_nodes: usize,
    impulse_set: &'a [Vec<f64>],
}

/// Writes `controller_policy.csv`, `stopper_policy.csv` and `policy.json`.
pub fn save_policy(dir: &Path, controller: &ControllerPolicy, stopper: &StopperPolicy) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let grid = &controller.grid;
    let p = grid.dim();
    let n = grid.n_space();
    let zdim = controller.impulses.first().map_or(p, Vec::len);

    let mut cw = csv::Writer::from_path(dir.join("controller_policy.csv"))?;
    let mut sw = csv::Writer::from_path(dir.join("stopper_policy.csv"))?;
    let mut head = vec!["t".to_string()];
    head.extend(axis_names("x", p));
    head.push("act".into());
    sw.write_record(&head)?;
    head.extend(axis_names("z", zdim));
    cw.write_record(&head)?;
    for k in 0..grid.n_times() {
        let t = grid.time(k);
        for node in 0..n {
            let i = k * n + node;
            let mut row = vec![num(t)];
            row.extend(grid.coords(node).iter().map(|&c| num(c)));
            let mut srow = row.clone();
            srow.push(u8::from(stopper.stop[i]).to_string());
            sw.write_record(&srow)?;
            row.push(u8::from(controller.intervene[i]).to_string());
            match controller.impulse[i] {
                Some(z) => row.extend(controller.impulses[z].iter().map(|&c| num(c))),
                None => row.extend(std::iter::repeat_n(String::new(), zdim)),
            }
            cw.write_record(&row)?;
        }
    }
    cw.flush()?;
    sw.flush()?;
    write_json(
        &dir.join("policy.json"),
        &PolicyHeader {
            act_tol: controller.act_tol,
            intervention_nodes: controller.region_size(),
            stop_nodes: stopper.region_size(),
            impulse_set: &controller.impulses,
        },
    )
}

/// One row per trajectory sample: time, state, event, impulse applied at
/// that time (blank if none), cumulative running cost.
pub fn write_path_csv(path: &Path, spec: &ProblemSpec, outcome: &PathOutcome) -> Result<()> {
    let p = spec.dim();
    let zdim = spec.impulse_set.iter().next().map_or(p, <[f64]>::len);
    let accum = running_cost_profile(spec, outcome)?;
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["time".to_string()];
    head.extend(axis_names("x", p));
    head.push("event".into());
    head.extend(axis_names("z", zdim));
    head.push("running_cost_accum".into());
    w.write_record(&head)?;
    for (n, s) in outcome.trajectory.iter().enumerate() {
        let mut row = vec![num(s.time)];
        row.extend(s.state.iter().map(|&c| num(c)));
        row.push(s.event.as_str().into());
        match outcome.schedule.events.iter().find(|e| e.step == n) {
            Some(e) => row.extend(e.impulse.iter().map(|&c| num(c))),
            None => row.extend(std::iter::repeat_n(String::new(), zdim)),
        }
        row.push(num(accum[n]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
