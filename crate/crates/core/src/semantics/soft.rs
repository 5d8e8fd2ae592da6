//! Log-sum-exp min/max and the logistic counting factors.

use super::SemanticsError;

/// Smooth maximum `(1/β) ln Σ exp(β aᵢ)`, shifted by the hard max so it never
/// overflows. Over-approximates the max by at most `ln(n)/β`.
pub fn soft_max(values: &[f64], beta: f64) -> Result<f64, SemanticsError> {
    if values.is_empty() {
        return Err(SemanticsError::EmptyAggregate);
    }
    let mut acc = Lse::new(beta);
    for &v in values {
        acc.push(v);
    }
    Ok(acc.value())
}

/// `-soft_max(-a)`.
pub fn soft_min(values: &[f64], beta: f64) -> Result<f64, SemanticsError> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    soft_max(&neg, beta).map(|v| -v)
}

/// Running log-sum-exp, kept as `(max, Σ exp(β (aᵢ - max)))`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lse {
    beta: f64,
    max: f64,
    sum: f64,
    count: usize,
}

impl Lse {
    pub(crate) fn new(beta: f64) -> Self {
        Lse {
            beta,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        if x == self.max {
            self.sum += 1.0;
        } else if x > self.max {
            self.sum = self.sum * (self.beta * (self.max - x)).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (self.beta * (x - self.max)).exp();
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max.is_infinite() {
            self.max
        } else {
            self.max + self.sum.ln() / self.beta
        }
    }
}

/// Distance gate: `σ≤(x) = -tanh(k (x - 1))`, `σ>(x) = tanh(k (x - 1))`,
/// with `x = f(l, l') / d`. An infinite ratio gives the limits ∓1.
pub fn sigma_dist(d_norm: f64, le: bool, k_dist: f64) -> f64 {
    let t = if d_norm.is_infinite() {
        1.0
    } else {
        (k_dist * (d_norm - 1.0)).tanh()
    };
    if le {
        -t
    } else {
        t
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `max(1/(1+e^{k R⁻}), 1/(1+e^{-k (R⁺ - R⁻)}))`, in `(0, 1)`.
pub fn sigma_routes(r_plus: usize, r_minus: usize, k_routes: f64) -> f64 {
    let (p, m) = (r_plus as f64, r_minus as f64);
    logistic(-k_routes * m).max(logistic(k_routes * (p - m)))
}

/// `max(1/(1+e^{-k Ag⁻}), 1/(1+e^{k (Ag⁻ - Ag⁺)}))`, in `(0, 1)`.
///
/// With `flip_first` the first term becomes `1/(1+e^{k Ag⁻})`, mirroring
/// the route factor.
pub fn sigma_ag(ag_plus: usize, ag_minus: usize, k_ag: f64, flip_first: bool) -> f64 {
    let (p, m) = (ag_plus as f64, ag_minus as f64);
    let first = if flip_first {
        logistic(-k_ag * m)
    } else {
        logistic(k_ag * m)
    };
    first.max(logistic(k_ag * (p - m)))
}
