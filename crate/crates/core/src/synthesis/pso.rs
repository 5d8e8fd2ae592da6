use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PsoConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            particles: 64,
            iterations: 50,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.particles < 2 {
            return Err(format!("PSO needs at least 2 particles, got {}", self.particles));
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return Err(format!("PSO inertia must lie in (0, 1), got {}", self.inertia));
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0) {
            return Err("PSO acceleration coefficients must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    /// Global best value after initialization and after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Global-best particle swarm maximizing `f` over the box `bounds`.
///
/// Positions are clamped to the box and velocities to the box width after
/// every move. Ties keep the earlier best, and among particles the lowest
/// index wins.
pub fn pso_maximize(mut f: impl FnMut(&[f64]) -> f64, bounds: &[[f64; 2]], cfg: &PsoConfig) -> PsoOutcome {
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width: Vec<f64> = bounds.iter().map(|[lo, hi]| hi - lo).collect();
    let sample = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..=hi) } else { lo };

    let mut pos: Vec<Vec<f64>> = Vec::with_capacity(cfg.particles);
    let mut vel: Vec<Vec<f64>> = Vec::with_capacity(cfg.particles);
    for _ in 0..cfg.particles {
        pos.push(bounds.iter().map(|&[lo, hi]| sample(&mut rng, lo, hi)).collect());
        vel.push(width.iter().map(|&w| sample(&mut rng, -0.5 * w, 0.5 * w)).collect());
    }
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut pbest = pos.clone();
    let mut pbest_val: Vec<f64> = pos.iter().map(|x| eval(x)).collect();
    let mut g = 0;
    for i in 1..cfg.particles {
        if pbest_val[i] > pbest_val[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_val = pbest_val[g];
    let mut history = vec![gbest_val];

    for _ in 0..cfg.iterations {
        for i in 0..cfg.particles {
            for d in 0..dim {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let v = cfg.inertia * vel[i][d]
                    + cfg.cognitive * r1 * (pbest[i][d] - pos[i][d])
                    + cfg.social * r2 * (gbest[d] - pos[i][d]);
                vel[i][d] = v.clamp(-width[d], width[d]);
                pos[i][d] = (pos[i][d] + vel[i][d]).clamp(bounds[d][0], bounds[d][1]);
            }
        }
        let mut improved = None;
        for i in 0..cfg.particles {
            let v = eval(&pos[i]);
            if v > pbest_val[i] {
                pbest_val[i] = v;
                pbest[i].clone_from(&pos[i]);
            }
            if v > gbest_val && improved.is_none_or(|(_, bv)| v > bv) {
                improved = Some((i, v));
            }
        }
        if let Some((i, v)) = improved {
            gbest.clone_from(&pos[i]);
            gbest_val = v;
        }
        history.push(gbest_val);
    }
    PsoOutcome {
        best: gbest,
        value: gbest_val,
        history,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target(x: &[f64]) -> f64 {
        -x.iter().map(|v| (v - 0.1) * (v - 0.1)).sum::<f64>()
    }

    #[test]
    fn history_is_monotone_and_box_respected() {
        let bounds = vec![[-0.2, 0.2]; 6];
        let mut inside = true;
        let out = pso_maximize(
            |x| {
                inside &= x.iter().zip(&bounds).all(|(v, [lo, hi])| v >= lo && v <= hi);
                target(x)
            },
            &bounds,
            &PsoConfig {
                iterations: 30,
                ..Default::default()
            },
        );
        assert!(inside);
        assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.evaluations, 64 * 31);
    }

    #[test]
    fn finds_analytic_optimum() {
        let bounds = vec![[-0.2, 0.2]; 4];
        for seed in 0..10 {
            let cfg = PsoConfig {
                iterations: 200,
                seed,
                ..Default::default()
            };
            let out = pso_maximize(target, &bounds, &cfg);
            assert!(out.value > -1e-3, "seed {seed}: {}", out.value);
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let bounds = vec![[-1.0, 2.0]; 5];
        let cfg = PsoConfig {
            iterations: 20,
            seed: 42,
            ..Default::default()
        };
        let a = pso_maximize(|x| (x[0] * 3.0).sin() - x[1] * x[2], &bounds, &cfg);
        let b = pso_maximize(|x| (x[0] * 3.0).sin() - x[1] * x[2], &bounds, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn config_checks() {
        assert!(PsoConfig::default().validate().is_ok());
        assert!(PsoConfig {
            particles: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(PsoConfig {
            inertia: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
