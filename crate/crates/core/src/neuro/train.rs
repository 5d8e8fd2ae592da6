use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dot, encode_input, sigmoid, LstmModel, NeuroError};
use crate::dataset::Dataset;
use crate::spatial::ConnectivityPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    /// Drop probability on the inputs of layers above the first.
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 700,
            learning_rate: 1e-3,
            batch_size: 16,
            seed: 0,
            clip_norm: 1.0,
            optimizer: Optimizer::Adam,
            dropout: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuroError> {
        let bad = |m: &str| Err(NeuroError::Config(m.into()));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return bad("learning rate and clip norm must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// One training sequence: an input vector and a target control per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sequence loss of each epoch, before that epoch's updates.
    pub loss_curve: Vec<f64>,
}

/// Turns every record into a sequence of encoded states and the recorded
/// controls, using the model's encoding settings.
pub fn training_pairs(model: &LstmModel, data: &Dataset, policy: &ConnectivityPolicy) -> Result<Vec<Sample>, NeuroError> {
    let attrs = &data.header.attributes;
    let mut out = Vec::with_capacity(data.records.len());
    for r in &data.records {
        let steps = r.controls.steps;
        let mut inputs = Vec::with_capacity(steps);
        for k in 0..steps {
            let g = crate::spatial::connection_graph(r.trace.state(k), r.trace.dim, policy)
                .map_err(|e| NeuroError::Incompatible(e.to_string()))?;
            inputs.push(encode_input(r.trace.state(k), &g, attrs, &model.labels, model.adjacency));
        }
        let targets = (0..steps).map(|k| r.controls.step(k).to_vec()).collect();
        let s = Sample { inputs, targets };
        check_sample(model, &s)?;
        out.push(s);
    }
    Ok(out)
}

fn check_sample(model: &LstmModel, s: &Sample) -> Result<(), NeuroError> {
    if s.inputs.is_empty() || s.inputs.len() != s.targets.len() {
        return Err(NeuroError::Incompatible("inputs and targets must be non-empty and of equal length".into()));
    }
    if let Some(x) = s.inputs.iter().find(|x| x.len() != model.input_dim) {
        return Err(NeuroError::InputDim {
            expected: model.input_dim,
            got: x.len(),
        });
    }
    if s.targets.iter().any(|t| t.len() != model.output_dim) {
        return Err(NeuroError::Incompatible(format!("targets must have length {}", model.output_dim)));
    }
    Ok(())
}

struct Cache {
    /// Layer input, after any dropout mask.
    x: Vec<f64>,
    mask: Option<Vec<f64>>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Gate activations `[i | f | g | o]`.
    gates: Vec<f64>,
    tc: Vec<f64>,
}

/// Sum over steps of `‖û[k]/s − u[k]/s‖²`, where `s` is the output scale.
pub fn sequence_loss(model: &LstmModel, s: &Sample) -> Result<f64, NeuroError> {
    let out = model.forward(&s.inputs)?;
    let sc = model.output_scale;
    Ok(out
        .iter()
        .zip(&s.targets)
        .flat_map(|(y, t)| y.iter().zip(t).map(move |(a, b)| (a / sc - b / sc).powi(2)))
        .sum())
}

/// [`sequence_loss`] and its exact gradient by backpropagation through time.
pub fn loss_and_gradient(model: &LstmModel, s: &Sample) -> Result<(f64, Vec<f64>), NeuroError> {
    check_sample(model, s)?;
    let mut grad = vec![0.0; model.params.len()];
    let loss = backprop(model, s, None, &mut grad);
    Ok((loss, grad))
}

/// Adds this sequence's gradient to `grad` and returns its loss.
fn backprop(model: &LstmModel, s: &Sample, mut dropout: Option<(f64, &mut ChaCha8Rng)>, grad: &mut [f64]) -> f64 {
    let p = &model.params;
    let layout = model.layout();
    let (rw, rb) = model.readout_offsets();
    let nl = layout.len();
    let top = layout[nl - 1].hid;
    let steps = s.inputs.len();
    let inv = 1.0 / model.output_scale;

    let mut h: Vec<Vec<f64>> = layout.iter().map(|l| vec![0.0; l.hid]).collect();
    let mut c = h.clone();
    let mut caches: Vec<Vec<Cache>> = Vec::with_capacity(steps);
    let mut dys: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut tops: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut loss = 0.0;

    for k in 0..steps {
        let mut inp: Vec<f64> = s.inputs[k].iter().zip(&model.input_scale).map(|(a, b)| a * b).collect();
        let mut row = Vec::with_capacity(nl);
        for (li, l) in layout.iter().enumerate() {
            let hd = l.hid;
            let mut mask = None;
            if li > 0 {
                if let Some((rate, rng)) = dropout.as_mut() {
                    let keep = 1.0 - *rate;
                    let m: Vec<f64> = (0..inp.len())
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    inp.iter_mut().zip(&m).for_each(|(v, w)| *v *= w);
                    mask = Some(m);
                }
            }
            let mut z = p[l.b..l.b + 4 * hd].to_vec();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&p[l.w + r * l.inp..l.w + (r + 1) * l.inp], &inp)
                    + dot(&p[l.u + r * hd..l.u + (r + 1) * hd], &h[li]);
            }
            let mut gates = vec![0.0; 4 * hd];
            let mut tc = vec![0.0; hd];
            let h_prev = h[li].clone();
            let c_prev = c[li].clone();
            for j in 0..hd {
                let (i, f, g, o) = (
                    sigmoid(z[j]),
                    sigmoid(z[hd + j]),
                    z[2 * hd + j].tanh(),
                    sigmoid(z[3 * hd + j]),
                );
                gates[j] = i;
                gates[hd + j] = f;
                gates[2 * hd + j] = g;
                gates[3 * hd + j] = o;
                c[li][j] = f * c_prev[j] + i * g;
                tc[j] = c[li][j].tanh();
                h[li][j] = o * tc[j];
            }
            row.push(Cache {
                x: inp,
                mask,
                h_prev,
                c_prev,
                gates,
                tc,
            });
            inp = h[li].clone();
        }
        let dy: Vec<f64> = (0..model.output_dim)
            .map(|o| {
                let y = p[rb + o] + dot(&p[rw + o * top..rw + (o + 1) * top], &inp);
                let e = y - s.targets[k][o] * inv;
                loss += e * e;
                2.0 * e
            })
            .collect();
        caches.push(row);
        dys.push(dy);
        tops.push(inp);
    }

    let mut dh_rec: Vec<Vec<f64>> = layout.iter().map(|l| vec![0.0; l.hid]).collect();
    let mut dc_rec = dh_rec.clone();
    for k in (0..steps).rev() {
        let mut dh_in = vec![0.0; top];
        for (o, &d) in dys[k].iter().enumerate() {
            grad[rb + o] += d;
            for j in 0..top {
                grad[rw + o * top + j] += d * tops[k][j];
                dh_in[j] += d * p[rw + o * top + j];
            }
        }
        for li in (0..nl).rev() {
            let l = layout[li];
            let hd = l.hid;
            let cache = &caches[k][li];
            let mut dz = vec![0.0; 4 * hd];
            for j in 0..hd {
                let (i, f, g, o) = (
                    cache.gates[j],
                    cache.gates[hd + j],
                    cache.gates[2 * hd + j],
                    cache.gates[3 * hd + j],
                );
                let dh = dh_in[j] + dh_rec[li][j];
                let tc = cache.tc[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_rec[li][j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[hd + j] = dc * cache.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - g * g);
                dz[3 * hd + j] = d_o * o * (1.0 - o);
                dc_rec[li][j] = dc * f;
            }
            let mut dh_prev = vec![0.0; hd];
            let mut dx = vec![0.0; l.inp];
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad[l.b + r] += d;
                let wrow = l.w + r * l.inp;
                for (q, &xv) in cache.x.iter().enumerate() {
                    grad[wrow + q] += d * xv;
                    dx[q] += d * p[wrow + q];
                }
                let urow = l.u + r * hd;
                for (q, &hv) in cache.h_prev.iter().enumerate() {
                    grad[urow + q] += d * hv;
                    dh_prev[q] += d * p[urow + q];
                }
            }
            dh_rec[li] = dh_prev;
            if let Some(m) = &cache.mask {
                dx.iter_mut().zip(m).for_each(|(v, w)| *v *= w);
            }
            dh_in = dx;
        }
    }
    loss
}

/// Minibatch training. Returns the fitted model and its loss curve.
pub fn train(mut model: LstmModel, samples: &[Sample], cfg: &TrainConfig) -> Result<(LstmModel, TrainReport), NeuroError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(NeuroError::EmptyDataset);
    }
    for s in samples {
        check_sample(&model, s)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let np = model.params.len();
    let (mut m1, mut m2) = (vec![0.0; np], vec![0.0; np]);
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut grad = vec![0.0; np];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let drop = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut rng));
                epoch_loss += backprop(&model, &samples[i], drop, &mut grad);
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let c = cfg.clip_norm / norm;
                grad.iter_mut().for_each(|g| *g *= c);
            }
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (w, g) in model.params.iter_mut().zip(&grad) {
                        *w -= cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam => {
                    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
                    t += 1;
                    let c1 = 1.0 - f64::powi(b1, t);
                    let c2 = 1.0 - f64::powi(b2, t);
                    for j in 0..np {
                        m1[j] = b1 * m1[j] + (1.0 - b1) * grad[j];
                        m2[j] = b2 * m2[j] + (1.0 - b2) * grad[j] * grad[j];
                        model.params[j] -= cfg.learning_rate * (m1[j] / c1) / ((m2[j] / c2).sqrt() + eps);
                    }
                }
            }
        }
        loss_curve.push(epoch_loss / samples.len() as f64);
    }
    Ok((model, TrainReport { loss_curve }))
}
