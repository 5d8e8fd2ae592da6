//! Stacked LSTM that maps the team state history to controls, trained by
//! backpropagation through time on optimized trajectories.
//!
//! Each layer computes, with gates stacked in the order input, forget,
//! candidate, output:
//!
//! ```text
//! z = W x + U h[k-1] + b
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c[k] = f ⊙ c[k-1] + i ⊙ g
//! h[k] = o ⊙ tanh(c[k])
//! ```
//!
//! The readout is affine on the top hidden state, multiplied by a stored
//! output scale.

mod closed_loop;
mod train;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::ConnectionGraph;

pub use closed_loop::{closed_loop, evaluate, Controller, EvalReport};
pub use train::{loss_and_gradient, sequence_loss, train, training_pairs, Optimizer, Sample, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum NeuroError {
    #[error("input has length {got}, model expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("empty input sequence")]
    EmptySequence,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("incompatible dataset: {0}")]
    Incompatible(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Input features of one step: positions, then the row-major 0/1 adjacency
/// matrix (when `adjacency` is set), then a one-hot attribute block per agent
/// over `labels`.
pub fn encode_input(
    state: &[f64],
    graph: &ConnectionGraph,
    attributes: &[String],
    labels: &[String],
    adjacency: bool,
) -> Vec<f64> {
    let n = attributes.len();
    let mut x = Vec::with_capacity(state.len() + n * n + n * labels.len());
    x.extend_from_slice(state);
    if adjacency {
        x.extend(graph.adjacency_matrix());
    }
    for a in attributes {
        x.extend(labels.iter().map(|l| if l == a { 1.0 } else { 0.0 }));
    }
    x
}

/// Length of [`encode_input`]'s output.
pub fn input_len(n: usize, dim: usize, n_labels: usize, adjacency: bool) -> usize {
    n * dim + if adjacency { n * n } else { 0 } + n * n_labels
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub inp: usize,
    pub hid: usize,
    /// Offsets of `W` (4h × inp), `U` (4h × h) and `b` (4h).
    pub w: usize,
    pub u: usize,
    pub b: usize,
}

/// LSTM stack plus readout. All parameters live in one row-major vector:
/// per layer `W`, `U`, `b`, then the readout matrix and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LstmModel {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub params: Vec<f64>,
    /// Per-feature multiplier applied to inputs before the first layer.
    pub input_scale: Vec<f64>,
    /// Multiplier applied to the readout.
    pub output_scale: f64,
    /// Attribute vocabulary of the one-hot block.
    #[serde(default)]
    pub labels: Vec<String>,
    /// Whether inputs include the adjacency matrix.
    #[serde(default = "yes")]
    pub adjacency: bool,
    /// Header hash of the dataset the weights were fitted to.
    #[serde(default)]
    pub dataset_hash: Option<String>,
}

fn yes() -> bool {
    true
}

/// Hidden and cell states of every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmModel {
    /// Parameter count of a model with these widths.
    pub fn param_count(input_dim: usize, hidden: &[usize], output_dim: usize) -> usize {
        let mut inp = input_dim;
        let mut total = 0;
        for &h in hidden {
            total += 4 * h * (inp + h + 1);
            inp = h;
        }
        total + output_dim * (inp + 1)
    }

    /// All-zero parameters; outputs are identically zero.
    pub fn zeros(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        assert!(!hidden.is_empty() && hidden.iter().all(|&h| h > 0), "at least one non-empty layer");
        let count = Self::param_count(input_dim, &hidden, output_dim);
        LstmModel {
            input_dim,
            hidden,
            output_dim,
            params: vec![0.0; count],
            input_scale: vec![1.0; input_dim],
            output_scale: 1.0,
            labels: Vec::new(),
            adjacency: true,
            dataset_hash: None,
        }
    }

    /// Uniform `±1/√fanIn` weights, zero biases except `+1` on the forget gate.
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, seed: u64) -> Self {
        let mut m = Self::zeros(input_dim, hidden, output_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |s: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng| {
            let a = 1.0 / (fan_in as f64).sqrt();
            s.iter_mut().for_each(|v| *v = rng.gen_range(-a..a));
        };
        for l in m.layout() {
            let h = l.hid;
            fill(&mut m.params[l.w..l.u], l.inp, &mut rng);
            fill(&mut m.params[l.u..l.b], h, &mut rng);
            m.params[l.b + h..l.b + 2 * h].iter_mut().for_each(|v| *v = 1.0);
        }
        let (rw, rb) = m.readout_offsets();
        let top = *m.hidden.last().expect("non-empty");
        fill(&mut m.params[rw..rb], top, &mut rng);
        m
    }

    pub(crate) fn layout(&self) -> Vec<LayerLayout> {
        let mut out = Vec::with_capacity(self.hidden.len());
        let mut inp = self.input_dim;
        let mut off = 0;
        for &h in &self.hidden {
            let w = off;
            let u = w + 4 * h * inp;
            let b = u + 4 * h * h;
            out.push(LayerLayout { inp, hid: h, w, u, b });
            off = b + 4 * h;
            inp = h;
        }
        out
    }

    /// Offsets of the readout matrix and bias.
    pub(crate) fn readout_offsets(&self) -> (usize, usize) {
        let l = *self.layout().last().expect("non-empty");
        let rw = l.b + 4 * l.hid;
        (rw, rw + self.output_dim * l.hid)
    }

    pub fn initial_state(&self) -> LstmState {
        LstmState {
            h: self.hidden.iter().map(|&h| vec![0.0; h]).collect(),
            c: self.hidden.iter().map(|&h| vec![0.0; h]).collect(),
        }
    }

    /// One recurrent step: updates `state` and returns the control.
    pub fn step(&self, state: &mut LstmState, x: &[f64]) -> Result<Vec<f64>, NeuroError> {
        if x.len() != self.input_dim {
            return Err(NeuroError::InputDim {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let p = &self.params;
        let mut inp: Vec<f64> = x.iter().zip(&self.input_scale).map(|(a, s)| a * s).collect();
        for (li, l) in self.layout().into_iter().enumerate() {
            let h = l.hid;
            let mut z = p[l.b..l.b + 4 * h].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                let wr = &p[l.w + r * l.inp..l.w + (r + 1) * l.inp];
                let ur = &p[l.u + r * h..l.u + (r + 1) * h];
                *zr += dot(wr, &inp) + dot(ur, &state.h[li]);
            }
            let c = &mut state.c[li];
            let hv = &mut state.h[li];
            for j in 0..h {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[h + j]);
                let g = z[2 * h + j].tanh();
                let o = sigmoid(z[3 * h + j]);
                c[j] = f * c[j] + i * g;
                hv[j] = o * c[j].tanh();
            }
            inp.clone_from(hv);
        }
        let (rw, rb) = self.readout_offsets();
        let top = inp.len();
        Ok((0..self.output_dim)
            .map(|o| (p[rb + o] + dot(&p[rw + o * top..rw + (o + 1) * top], &inp)) * self.output_scale)
            .collect())
    }

    /// Runs the whole sequence from zero state.
    pub fn forward(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NeuroError> {
        if xs.is_empty() {
            return Err(NeuroError::EmptySequence);
        }
        let mut st = self.initial_state();
        xs.iter().map(|x| self.step(&mut st, x)).collect()
    }

    pub fn validate(&self) -> Result<(), NeuroError> {
        let bad = |m: String| Err(NeuroError::Checkpoint(m));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be non-empty and positive".into());
        }
        let expected = Self::param_count(self.input_dim, &self.hidden, self.output_dim);
        if self.params.len() != expected {
            return bad(format!("{} parameters, expected {expected}", self.params.len()));
        }
        if self.input_scale.len() != self.input_dim {
            return bad(format!("{} input scales for input dimension {}", self.input_scale.len(), self.input_dim));
        }
        if !self.params.iter().chain(&self.input_scale).all(|v| v.is_finite()) || !self.output_scale.is_finite() {
            return bad("non-finite parameter".into());
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuroError> {
        fs::write(path, serde_json::to_string(self).expect("model serializes"))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuroError> {
        let text = fs::read_to_string(path)?;
        let m: LstmModel = serde_json::from_str(&text).map_err(|e| NeuroError::Checkpoint(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
