use std::time::Instant;

use super::{encode_input, input_len, LstmModel, LstmState, NeuroError};
use crate::spatial::{connection_graph, ConnectionGraph, ControlSequence, TeamTrace};
use crate::synthesis::SynthesisProblem;

impl LstmModel {
    /// Randomly initialized model sized for `p`, with positions divided by
    /// `position_scale` on input and outputs spanning the control box.
    pub fn for_problem(p: &SynthesisProblem, hidden: Vec<usize>, position_scale: f64, seed: u64) -> Self {
        let scn = &p.scenario;
        let labels = scn.attribute_labels();
        let input_dim = input_len(scn.n_agents(), scn.dim, labels.len(), true);
        let output_dim = scn.controllable.len() * scn.dim;
        let mut m = LstmModel::new(input_dim, hidden, output_dim, seed);
        for v in &mut m.input_scale[..scn.n_agents() * scn.dim] {
            *v = 1.0 / position_scale;
        }
        m.output_scale = scn.control_box.iter().map(|[lo, hi]| lo.abs().max(hi.abs())).fold(0.0, f64::max);
        m.labels = labels;
        m
    }

    pub fn check_problem(&self, p: &SynthesisProblem) -> Result<(), NeuroError> {
        let scn = &p.scenario;
        let expected = input_len(scn.n_agents(), scn.dim, self.labels.len(), self.adjacency);
        if self.input_dim != expected || self.output_dim != scn.controllable.len() * scn.dim {
            return Err(NeuroError::Incompatible(format!(
                "model maps {} inputs to {} outputs, scenario needs {expected} to {}",
                self.input_dim,
                self.output_dim,
                scn.controllable.len() * scn.dim
            )));
        }
        Ok(())
    }
}

/// A model plus its recurrent state, producing in-box controls step by step.
pub struct Controller<'m> {
    model: &'m LstmModel,
    state: LstmState,
    attributes: Vec<String>,
    control_box: Vec<[f64; 2]>,
}

impl<'m> Controller<'m> {
    pub fn new(model: &'m LstmModel, p: &SynthesisProblem) -> Self {
        Controller {
            model,
            state: model.initial_state(),
            attributes: p.scenario.attributes.clone(),
            control_box: p.scenario.control_box.clone(),
        }
    }

    /// Control for the current step, clamped to the box.
    pub fn act(&mut self, positions: &[f64], graph: &ConnectionGraph) -> Result<Vec<f64>, NeuroError> {
        let x = encode_input(positions, graph, &self.attributes, &self.model.labels, self.model.adjacency);
        let mut u = self.model.step(&mut self.state, &x)?;
        let dim = self.control_box.len();
        for (i, v) in u.iter_mut().enumerate() {
            let [lo, hi] = self.control_box[i % dim];
            *v = v.clamp(lo, hi);
        }
        Ok(u)
    }
}

/// Closed-loop rollout: graphs are recomputed from the model's own
/// trajectory at every step.
pub fn closed_loop(model: &LstmModel, p: &SynthesisProblem) -> Result<(ControlSequence, TeamTrace), NeuroError> {
    let scn = &p.scenario;
    let (n, dim) = (scn.n_agents(), scn.dim);
    let w = n * dim;
    let mut ctl = Controller::new(model, p);
    let mut positions: Vec<f64> = scn.initial_positions.iter().flatten().copied().collect();
    let mut controls = Vec::with_capacity(scn.n_controls());
    for k in 0..scn.horizon {
        let cur = positions[k * w..(k + 1) * w].to_vec();
        let g = connection_graph(&cur, dim, &scn.connectivity).map_err(|e| NeuroError::Incompatible(e.to_string()))?;
        let u = ctl.act(&cur, &g)?;
        let mut next = cur;
        for (j, &agent) in scn.controllable.iter().enumerate() {
            for a in 0..dim {
                next[agent * dim + a] += u[j * dim + a];
            }
        }
        controls.extend_from_slice(&u);
        positions.extend(next);
    }
    Ok((
        ControlSequence::for_scenario(scn, controls),
        TeamTrace::new(dim, scn.attributes.clone(), positions),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub runs: usize,
    pub successes: usize,
    /// `None` when there were no runs.
    pub success_rate: Option<f64>,
    pub mean_robustness: Option<f64>,
    /// Mean wall time of one closed-loop rollout, in seconds.
    pub mean_inference_seconds: Option<f64>,
    pub robustness: Vec<f64>,
}

/// Closed-loop success rate of `model` from each initial team state.
pub fn evaluate(model: &LstmModel, p: &SynthesisProblem, inits: &[Vec<Vec<f64>>]) -> Result<EvalReport, NeuroError> {
    model.check_problem(p)?;
    let mut robustness = Vec::with_capacity(inits.len());
    let mut seconds = 0.0;
    for init in inits {
        let q = p.with_initial_positions(init.clone());
        let start = Instant::now();
        let (_, trace) = closed_loop(model, &q)?;
        seconds += start.elapsed().as_secs_f64();
        let rho = q.robustness_of(&trace).map_err(|e| NeuroError::Incompatible(e.to_string()))?;
        robustness.push(rho);
    }
    let runs = inits.len();
    let successes = robustness.iter().filter(|&&r| r >= p.eps_min).count();
    let mean = |x: f64| (runs > 0).then(|| x / runs as f64);
    Ok(EvalReport {
        runs,
        successes,
        success_rate: mean(successes as f64),
        mean_robustness: mean(robustness.iter().sum()),
        mean_inference_seconds: mean(seconds),
        robustness,
    })
}
