use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Finite-difference half step.
    pub grad_step: f64,
    /// Stop once the projected gradient's largest component is below this.
    pub tolerance: f64,
    /// Number of curvature pairs kept by the quasi-Newton update.
    pub memory: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iters: 50,
            grad_step: 1e-5,
            tolerance: 1e-6,
            memory: 8,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.grad_step > 0.0) {
            return Err(format!("gradient step must be positive, got {}", self.grad_step));
        }
        if !(self.tolerance > 0.0) {
            return Err(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Finite-difference gradient, central where the probes fit in the box and
/// one-sided at the bounds.
pub fn fd_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], fx: f64, bounds: &[[f64; 2]], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let [lo, hi] = bounds[i];
        let xi = x[i];
        let up = xi + h <= hi;
        let down = xi - h >= lo;
        g[i] = match (up, down) {
            (true, true) => {
                probe[i] = xi + h;
                let a = f(&probe);
                probe[i] = xi - h;
                let b = f(&probe);
                (a - b) / (2.0 * h)
            }
            (true, false) => {
                probe[i] = xi + h;
                (f(&probe) - fx) / h
            }
            (false, true) => {
                probe[i] = xi - h;
                (fx - f(&probe)) / h
            }
            (false, false) => 0.0,
        };
        probe[i] = xi;
    }
    g
}

fn project(x: &mut [f64], bounds: &[[f64; 2]]) {
    for (v, [lo, hi]) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Components of the ascent direction `g` that are not blocked by an active bound.
fn projected(g: &[f64], x: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    g.iter()
        .zip(x)
        .zip(bounds)
        .map(|((&gi, &xi), &[lo, hi])| {
            if (xi <= lo && gi < 0.0) || (xi >= hi && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS two-loop product `H g` with the stored pairs, `H` approximating the
/// inverse Hessian of `-f`. The result is an ascent direction for `f`.
pub fn lbfgs_direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push((a, rho));
    }
    if let Some((s, y)) = pairs.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y), (a, rho)) in pairs.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q
}

/// Projected quasi-Newton ascent on `f` over the box, starting from `x0`
/// (clamped first). Only improving steps are accepted, so the returned
/// value is never below `f(x0)`.
pub fn refine_maximize(
    mut f: impl FnMut(&[f64]) -> f64,
    bounds: &[[f64; 2]],
    x0: &[f64],
    cfg: &RefineConfig,
) -> Result<RefineOutcome, String> {
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return Err(format!("objective is not finite at the initial point: {fx}"));
    }
    let max_width = bounds.iter().map(|[lo, hi]| hi - lo).fold(0.0, f64::max);
    let mut g = fd_gradient(&mut eval, &x, fx, bounds, cfg.grad_step);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let pg = projected(&g, &x, bounds);
        if pg.iter().all(|v| v.abs() < cfg.tolerance) {
            break;
        }
        iterations += 1;

        let mut accepted = None;
        let tries: &[bool] = if pairs.is_empty() { &[false] } else { &[true, false] };
        for &use_memory in tries {
            let mut d = if use_memory { lbfgs_direction(&pg, &pairs) } else { pg.clone() };
            d = projected(&d, &x, bounds);
            if dot(&d, &pg) <= 0.0 {
                continue;
            }
            // Without curvature information the step length is unknown; cap
            // the first trial at the box width.
            if !use_memory {
                let big = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if big > max_width {
                    d.iter_mut().for_each(|v| *v *= max_width / big);
                }
            }
            let mut t = 1.0;
            for _ in 0..40 {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project(&mut xn, bounds);
                let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let gain = dot(&g, &step);
                if gain > 0.0 {
                    let fxn = eval(&xn);
                    if fxn.is_finite() && fxn >= fx + 1e-4 * gain && fxn > fx {
                        accepted = Some((xn, fxn, step));
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((xn, fxn, s)) = accepted else { break };
        let gn = fd_gradient(&mut eval, &xn, fxn, bounds, cfg.grad_step);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| b - a).collect();
        if dot(&s, &y) > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && cfg.memory > 0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y));
        }
        let stalled = fxn - fx <= 1e-14 * (1.0 + fx.abs());
        x = xn;
        fx = fxn;
        g = gn;
        if stalled {
            break;
        }
    }
    Ok(RefineOutcome {
        x,
        value: fx,
        iterations,
        evaluations,
    })
}
