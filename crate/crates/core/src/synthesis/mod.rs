//! Control synthesis: maximize team robustness at step 0 minus a control
//! cost, over controls confined to a box.
//!
//! The dynamics are eliminated by forward simulation, so the decision vector
//! is the flattened control sequence `[step][controllable agent][axis]`.

mod pso;
mod refine;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;
use crate::semantics::{Monitor, SemanticsConfig, SemanticsError};
use crate::spatial::{rollout, rollout_unchecked, ControlSequence, Scenario, SpatialError, TeamTrace};

pub use pso::{pso_maximize, PsoConfig, PsoOutcome};
pub use refine::{fd_gradient, lbfgs_direction, refine_maximize, RefineConfig, RefineOutcome};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
}

/// Running cost `J` summed over the horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CostKind {
    /// `Σ_k ‖u[k]‖²`.
    #[default]
    SumSquaredControls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Quasi-Newton refinement from a random point in the box.
    #[serde(rename = "grad")]
    GradOnly,
    #[serde(rename = "pso")]
    PsoOnly,
    /// PSO, then refinement from its best particle.
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::GradOnly, Method::PsoOnly, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::GradOnly => "grad",
            Method::PsoOnly => "pso",
            Method::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grad" => Ok(Method::GradOnly),
            "pso" => Ok(Method::PsoOnly),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(format!("unknown method {other:?}, expected grad, pso or hybrid")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthesisProblem {
    pub scenario: Scenario,
    pub formula: Formula,
    pub gamma: f64,
    #[serde(default)]
    pub cost: CostKind,
    pub semantics: SemanticsConfig,
    /// Robustness a solution needs to count as a success.
    pub eps_min: f64,
}

/// Objective value and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub robustness: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub controls: ControlSequence,
    pub trace: TeamTrace,
    pub objective: f64,
    pub robustness: f64,
    pub cost: f64,
    pub success: bool,
    pub evaluations: usize,
    pub wall_time: f64,
}

impl SynthesisProblem {
    pub fn new(
        scenario: Scenario,
        formula: Formula,
        gamma: f64,
        semantics: SemanticsConfig,
        eps_min: f64,
    ) -> Result<Self, SynthesisError> {
        let p = SynthesisProblem {
            scenario,
            formula: formula.expand_surround(semantics.surround_variant),
            gamma,
            cost: CostKind::SumSquaredControls,
            semantics,
            eps_min,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks the problem, including that `eps_min` covers the smoothing
    /// error `ln(maxArity)/β` of an evaluation at zero controls.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        self.scenario.validate()?;
        self.semantics.validate()?;
        if self.formula.horizon() > self.scenario.horizon {
            return Err(SynthesisError::Invalid(format!(
                "formula horizon {} exceeds scenario horizon {}",
                self.formula.horizon(),
                self.scenario.horizon
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(SynthesisError::Invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.eps_min > 0.0) {
            return Err(SynthesisError::Invalid(format!("epsMin must be positive, got {}", self.eps_min)));
        }
        if self.semantics.smooth {
            let trace = rollout_unchecked(&self.scenario, &self.zero_controls());
            let graphs = trace.graphs(&self.scenario.connectivity)?;
            let (_, _, stats) = Monitor::new(&trace, &graphs, self.semantics.clone())?.team_with_stats(&self.formula, 0)?;
            let eps_beta = (stats.max_arity.max(1) as f64).ln() / self.semantics.beta;
            if self.eps_min < eps_beta {
                return Err(SynthesisError::Invalid(format!(
                    "epsMin {} is below the smoothing error {eps_beta:.3e}; raise beta or epsMin",
                    self.eps_min
                )));
            }
        }
        Ok(())
    }

    pub fn zero_controls(&self) -> ControlSequence {
        let (steps, agents, dim) = self.scenario.control_shape();
        ControlSequence::zeros(steps, agents, dim)
    }

    /// Box bounds of every decision variable, in flattened order.
    pub fn bounds(&self) -> Vec<[f64; 2]> {
        let dim = self.scenario.dim;
        (0..self.scenario.n_controls()).map(|i| self.scenario.control_box[i % dim]).collect()
    }

    /// Same problem with a different initial team state.
    pub fn with_initial_positions(&self, positions: Vec<Vec<f64>>) -> SynthesisProblem {
        SynthesisProblem {
            scenario: self.scenario.with_initial_positions(positions),
            ..self.clone()
        }
    }

    pub fn cost_of(&self, controls: &ControlSequence) -> f64 {
        match self.cost {
            CostKind::SumSquaredControls => controls.sum_squares(),
        }
    }

    /// Team robustness at step 0 of an already simulated trace.
    pub fn robustness_of(&self, trace: &TeamTrace) -> Result<f64, SynthesisError> {
        let graphs = trace.graphs(&self.scenario.connectivity)?;
        let r = Monitor::new(trace, &graphs, self.semantics.clone())?.team(&self.formula, 0)?;
        if r.team.is_nan() {
            return Err(SynthesisError::Optimizer("robustness is NaN".into()));
        }
        Ok(r.team)
    }

    /// `robustness − γ · cost` for in-box controls.
    pub fn objective(&self, controls: &ControlSequence) -> Result<Evaluation, SynthesisError> {
        let trace = rollout(&self.scenario, controls)?;
        self.evaluate_trace(&trace, controls)
    }

    fn evaluate_trace(&self, trace: &TeamTrace, controls: &ControlSequence) -> Result<Evaluation, SynthesisError> {
        if let Some(bad) = trace.positions.iter().position(|v| !v.is_finite()) {
            return Err(SpatialError::NonFinite(bad / trace.dim % trace.n_agents()).into());
        }
        let robustness = self.robustness_of(trace)?;
        let cost = self.cost_of(controls);
        Ok(Evaluation {
            objective: robustness - self.gamma * cost,
            robustness,
            cost,
        })
    }

    /// Objective of a flattened in-box control vector; failures score `-∞`.
    pub fn objective_flat(&self, x: &[f64]) -> f64 {
        let controls = ControlSequence::for_scenario(&self.scenario, x.to_vec());
        let trace = rollout_unchecked(&self.scenario, &controls);
        self.evaluate_trace(&trace, &controls)
            .map_or(f64::NEG_INFINITY, |e| e.objective)
    }
}

/// Free-function form of [`SynthesisProblem::objective`].
pub fn objective(p: &SynthesisProblem, controls: &ControlSequence) -> Result<Evaluation, SynthesisError> {
    p.objective(controls)
}

/// Swarm stage: best controls found and their objective.
pub fn pso_stage(p: &SynthesisProblem, cfg: &PsoConfig) -> (ControlSequence, f64) {
    let out = pso_maximize(|x| p.objective_flat(x), &p.bounds(), cfg);
    (ControlSequence::for_scenario(&p.scenario, out.best), out.value)
}

/// Refinement stage from `init`; the result is never worse than `init`.
pub fn refine_stage(
    p: &SynthesisProblem,
    init: &ControlSequence,
    cfg: &RefineConfig,
) -> Result<(ControlSequence, f64), SynthesisError> {
    let out = refine_maximize(|x| p.objective_flat(x), &p.bounds(), &init.values, cfg)
        .map_err(SynthesisError::Optimizer)?;
    Ok((ControlSequence::for_scenario(&p.scenario, out.x), out.value))
}

/// Runs `method`; `seed` drives the swarm and the random start of `GradOnly`.
pub fn synthesize(
    p: &SynthesisProblem,
    method: Method,
    pso_cfg: &PsoConfig,
    refine_cfg: &RefineConfig,
    seed: u64,
) -> Result<SynthesisResult, SynthesisError> {
    pso_cfg.validate().map_err(SynthesisError::Invalid)?;
    refine_cfg.validate().map_err(SynthesisError::Invalid)?;
    let start = Instant::now();
    let bounds = p.bounds();
    let pso_cfg = PsoConfig {
        seed,
        ..pso_cfg.clone()
    };
    let f = |x: &[f64]| p.objective_flat(x);
    let (x, evaluations) = match method {
        Method::GradOnly => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0: Vec<f64> = bounds
                .iter()
                .map(|&[lo, hi]| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect();
            let out = refine_maximize(f, &bounds, &x0, refine_cfg).map_err(SynthesisError::Optimizer)?;
            (out.x, out.evaluations)
        }
        Method::PsoOnly => {
            let out = pso_maximize(f, &bounds, &pso_cfg);
            (out.best, out.evaluations)
        }
        Method::Hybrid => {
            let first = pso_maximize(f, &bounds, &pso_cfg);
            let out = refine_maximize(f, &bounds, &first.best, refine_cfg).map_err(SynthesisError::Optimizer)?;
            (out.x, first.evaluations + out.evaluations)
        }
    };
    let controls = ControlSequence::for_scenario(&p.scenario, x);
    let trace = rollout(&p.scenario, &controls)?;
    let e = p.evaluate_trace(&trace, &controls)?;
    Ok(SynthesisResult {
        controls,
        trace,
        objective: e.objective,
        robustness: e.robustness,
        cost: e.cost,
        success: e.robustness >= p.eps_min,
        evaluations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
