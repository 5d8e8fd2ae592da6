//! Trace CSV and controls JSON.
//!
//! Numbers are written in Rust's shortest round-trip form, so reading a file
//! back yields bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strel_core::spatial::{ControlSequence, TeamTrace};

use crate::CliError;

/// `step,agent,attr,x0,..,x{dim-1}`, one row per agent per step.
pub fn trace_to_csv(trace: &TeamTrace) -> String {
    let mut out = String::from("step,agent,attr");
    for a in 0..trace.dim {
        write!(out, ",x{a}").unwrap();
    }
    out.push('\n');
    for k in 0..trace.len() {
        for (l, attr) in trace.attributes.iter().enumerate() {
            write!(out, "{k},{l},{attr}").unwrap();
            for v in trace.position(k, l) {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<TeamTrace, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("empty trace file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 4 || cols[..3] != ["step", "agent", "attr"] {
        return Err("trace header must start with step,agent,attr,x0".into());
    }
    let dim = cols.len() - 3;
    for (a, c) in cols[3..].iter().enumerate() {
        if *c != format!("x{a}") {
            return Err(format!("header column {} should be x{a}, found {c:?}", a + 4));
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(format!("line {no}: expected {} fields, found {}", cols.len(), f.len()));
        }
        let step: usize = f[0].parse().map_err(|_| format!("line {no}: bad step {:?}", f[0]))?;
        let agent: usize = f[1].parse().map_err(|_| format!("line {no}: bad agent {:?}", f[1]))?;
        let mut xs = Vec::with_capacity(dim);
        for v in &f[3..] {
            let x: f64 = v.parse().map_err(|_| format!("line {no}: bad number {v:?}"))?;
            if !x.is_finite() {
                return Err(format!("line {no}: non-finite position"));
            }
            xs.push(x);
        }
        rows.push((no, step, agent, f[2].to_string(), xs));
    }
    // Rows are step-major with agents in order; step 0 fixes the team.
    let n = rows.iter().take_while(|r| r.1 == 0).count();
    if n == 0 || rows.len() % n != 0 {
        return Err("trace is empty or ends in the middle of a step".into());
    }
    let attributes: Vec<String> = rows[..n].iter().map(|r| r.3.clone()).collect();
    let mut positions = Vec::with_capacity(rows.len() * dim);
    for (i, (no, step, agent, attr, xs)) in rows.into_iter().enumerate() {
        if (step, agent) != (i / n, i % n) {
            return Err(format!("line {no}: expected step {} agent {}", i / n, i % n));
        }
        if attr != attributes[agent] {
            return Err(format!("line {no}: agent {agent} changes attribute"));
        }
        positions.extend(xs);
    }
    Ok(TeamTrace::new(dim, attributes, positions))
}

pub fn write_trace(trace: &TeamTrace, path: &Path) -> Result<(), CliError> {
    fs::write(path, trace_to_csv(trace))?;
    let back = read_trace(path)?;
    if back != *trace {
        return Err(CliError::Input(format!("{} does not read back identically", path.display())));
    }
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TeamTrace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read trace {}: {e}", path.display())))?;
    trace_from_csv(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Synthesized controls plus the numbers that describe them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ControlsFile {
    pub method: String,
    pub seed: u64,
    pub robustness: f64,
    pub objective: f64,
    pub cost: f64,
    pub success: bool,
    pub controllable: Vec<usize>,
    pub dim: usize,
    /// One row per step: controllable agents' controls, flattened.
    pub controls: Vec<Vec<f64>>,
}

impl ControlsFile {
    pub fn sequence(&self) -> Result<ControlSequence, String> {
        let w = self.controllable.len() * self.dim;
        if self.controls.iter().any(|r| r.len() != w) {
            return Err(format!("every control row needs {w} values"));
        }
        Ok(ControlSequence {
            steps: self.controls.len(),
            agents: self.controllable.len(),
            dim: self.dim,
            values: self.controls.concat(),
        })
    }

    pub fn rows(u: &ControlSequence) -> Vec<Vec<f64>> {
        (0..u.steps).map(|k| u.step(k).to_vec()).collect()
    }
}

pub fn write_json<T: Serialize + for<'de> Deserialize<'de> + PartialEq>(value: &T, path: &Path) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value).expect("value serializes") + "\n")?;
    let back: T = read_json(path)?;
    if back != *value {
        return Err(CliError::Input(format!("{} does not read back identically", path.display())));
    }
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
