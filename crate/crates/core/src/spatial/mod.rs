//! Team state, single-integrator rollout and the per-step connection graphs.

mod graph;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{connection_graph, enumerate_routes, hops, voronoi_neighbors, ConnectionGraph, Route};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("control sequence shape {got:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("control {value} at step {step}, controllable agent {agent}, axis {axis} is outside [{lo}, {hi}]")]
    ControlOutOfBox {
        step: usize,
        agent: usize,
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("agents {0} and {1} share a position; Voronoi adjacency is undefined")]
    DuplicatePositions(usize, usize),
    #[error("Voronoi adjacency needs at least 2 planar points, got {0}")]
    TooFewPoints(usize),
    #[error("Voronoi adjacency is only supported in 2 dimensions, got {0}")]
    UnsupportedDimension(usize),
    #[error("non-finite position for agent {0}")]
    NonFinite(usize),
}

/// How agents decide whether they can communicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConnectivityPolicy {
    /// Communication range; pairs farther apart are never connected.
    pub range: f64,
    /// Additionally require the two Voronoi cells to be adjacent.
    #[serde(rename = "voronoi")]
    pub require_voronoi: bool,
}

/// Static description of a team and its admissible controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    pub dim: usize,
    /// One attribute label per agent; the agent count is its length.
    pub attributes: Vec<String>,
    pub initial_positions: Vec<Vec<f64>>,
    /// Indices of agents that receive controls, strictly increasing.
    pub controllable: Vec<usize>,
    /// Per-axis admissible control interval `[lo, hi]`.
    pub control_box: Vec<[f64; 2]>,
    pub connectivity: ConnectivityPolicy,
    pub horizon: usize,
}

impl Scenario {
    pub fn n_agents(&self) -> usize {
        self.attributes.len()
    }

    pub fn validate(&self) -> Result<(), SpatialError> {
        let bad = |msg: String| Err(SpatialError::InvalidScenario(msg));
        let n = self.n_agents();
        if n == 0 {
            return bad("no agents".into());
        }
        if self.dim == 0 {
            return bad("dimension must be positive".into());
        }
        if self.initial_positions.len() != n {
            return bad(format!(
                "{} initial positions for {n} agents",
                self.initial_positions.len()
            ));
        }
        for (l, q) in self.initial_positions.iter().enumerate() {
            if q.len() != self.dim {
                return bad(format!("agent {l} position has {} coordinates", q.len()));
            }
            if q.iter().any(|x| !x.is_finite()) {
                return Err(SpatialError::NonFinite(l));
            }
        }
        if self.controllable.windows(2).any(|w| w[0] >= w[1]) {
            return bad("controllable indices must be strictly increasing".into());
        }
        if let Some(&l) = self.controllable.iter().find(|&&l| l >= n) {
            return bad(format!("controllable agent {l} out of range"));
        }
        if self.control_box.len() != self.dim {
            return bad(format!(
                "control box has {} axes, dimension is {}",
                self.control_box.len(),
                self.dim
            ));
        }
        if self.control_box.iter().any(|[lo, hi]| !(lo < hi)) {
            return bad("control box needs lo < hi on every axis".into());
        }
        if !(self.connectivity.range > 0.0) {
            return bad("communication range must be positive".into());
        }
        if self.connectivity.require_voronoi && self.dim != 2 {
            return Err(SpatialError::UnsupportedDimension(self.dim));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        Ok(())
    }

    /// Shape `(steps, controllable agents, dim)` of a control sequence.
    pub fn control_shape(&self) -> (usize, usize, usize) {
        (self.horizon, self.controllable.len(), self.dim)
    }

    pub fn n_controls(&self) -> usize {
        self.horizon * self.controllable.len() * self.dim
    }

    /// Same team with different starting positions.
    pub fn with_initial_positions(&self, positions: Vec<Vec<f64>>) -> Scenario {
        Scenario {
            initial_positions: positions,
            ..self.clone()
        }
    }

    /// Distinct attribute labels, first-occurrence order.
    pub fn attribute_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.attributes {
            if !out.contains(a) {
                out.push(a.clone());
            }
        }
        out
    }
}

/// Controls for the controllable agents, laid out `[step][agent][axis]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub steps: usize,
    pub agents: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ControlSequence {
    pub fn zeros(steps: usize, agents: usize, dim: usize) -> Self {
        ControlSequence {
            steps,
            agents,
            dim,
            values: vec![0.0; steps * agents * dim],
        }
    }

    pub fn for_scenario(scn: &Scenario, values: Vec<f64>) -> Self {
        let (steps, agents, dim) = scn.control_shape();
        ControlSequence {
            steps,
            agents,
            dim,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.steps, self.agents, self.dim)
    }

    pub fn at(&self, step: usize, agent: usize) -> &[f64] {
        let i = (step * self.agents + agent) * self.dim;
        &self.values[i..i + self.dim]
    }

    pub fn step(&self, step: usize) -> &[f64] {
        let w = self.agents * self.dim;
        &self.values[step * w..(step + 1) * w]
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|u| u * u).sum()
    }
}

/// Positions of every agent at steps `0..=H`, plus the static attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamTrace {
    pub dim: usize,
    pub attributes: Vec<String>,
    /// Flattened `[step][agent][axis]`.
    pub positions: Vec<f64>,
}

impl TeamTrace {
    pub fn new(dim: usize, attributes: Vec<String>, positions: Vec<f64>) -> Self {
        let n = attributes.len();
        assert!(n > 0 && dim > 0 && positions.len().is_multiple_of(n * dim) && !positions.is_empty());
        TeamTrace {
            dim,
            attributes,
            positions,
        }
    }

    /// A trace where nobody moves for `horizon` steps.
    pub fn constant(dim: usize, attributes: Vec<String>, state: &[Vec<f64>], horizon: usize) -> Self {
        let flat: Vec<f64> = state.iter().flatten().copied().collect();
        let positions = flat.repeat(horizon + 1);
        TeamTrace::new(dim, attributes, positions)
    }

    pub fn n_agents(&self) -> usize {
        self.attributes.len()
    }

    /// Number of recorded steps, `H + 1`.
    pub fn len(&self) -> usize {
        self.positions.len() / (self.n_agents() * self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Last step index `H`.
    pub fn horizon(&self) -> usize {
        self.len() - 1
    }

    pub fn position(&self, step: usize, agent: usize) -> &[f64] {
        let i = (step * self.n_agents() + agent) * self.dim;
        &self.positions[i..i + self.dim]
    }

    /// All agent positions at one step, flattened.
    pub fn state(&self, step: usize) -> &[f64] {
        let w = self.n_agents() * self.dim;
        &self.positions[step * w..(step + 1) * w]
    }

    /// One connection graph per step.
    pub fn graphs(&self, policy: &ConnectivityPolicy) -> Result<Vec<ConnectionGraph>, SpatialError> {
        (0..self.len())
            .map(|k| connection_graph(self.state(k), self.dim, policy))
            .collect()
    }
}

/// Integrates `q[k+1] = q[k] + u[k]` for controllable agents; the rest stay put.
pub fn rollout(scn: &Scenario, controls: &ControlSequence) -> Result<TeamTrace, SpatialError> {
    scn.validate()?;
    if controls.shape() != scn.control_shape() || controls.values.len() != scn.n_controls() {
        return Err(SpatialError::ShapeMismatch {
            expected: scn.control_shape(),
            got: controls.shape(),
        });
    }
    for k in 0..controls.steps {
        for j in 0..controls.agents {
            for (axis, &value) in controls.at(k, j).iter().enumerate() {
                let [lo, hi] = scn.control_box[axis];
                if !(value >= lo && value <= hi) {
                    return Err(SpatialError::ControlOutOfBox {
                        step: k,
                        agent: j,
                        axis,
                        value,
                        lo,
                        hi,
                    });
                }
            }
        }
    }
    Ok(rollout_unchecked(scn, controls))
}

pub(crate) fn rollout_unchecked(scn: &Scenario, controls: &ControlSequence) -> TeamTrace {
    let n = scn.n_agents();
    let dim = scn.dim;
    let w = n * dim;
    let mut positions = Vec::with_capacity(w * (scn.horizon + 1));
    positions.extend(scn.initial_positions.iter().flatten().copied());
    for k in 0..scn.horizon {
        let prev = positions.len() - w;
        positions.extend_from_within(prev..prev + w);
        let base = positions.len() - w;
        for (j, &agent) in scn.controllable.iter().enumerate() {
            for (axis, u) in controls.at(k, j).iter().enumerate() {
                positions[base + agent * dim + axis] += u;
            }
        }
    }
    TeamTrace::new(dim, scn.attributes.clone(), positions)
}
