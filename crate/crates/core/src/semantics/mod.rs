//! Boolean satisfaction and quantitative robustness of STREL formulas over a
//! team trace, in the original max-min form and in the counting form that
//! rewards extra satisfying routes and agents.
//!
//! All evaluation goes through [`Monitor`]. The free functions are thin
//! wrappers that build a monitor for one query.

mod eval;
mod qualitative;
mod soft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Formula, PredicateFn, SurroundVariant};
use crate::spatial::{ConnectionGraph, TeamTrace};

pub use eval::{soft_depth, Monitor, SoftStats};
pub use soft::{sigma_ag, sigma_dist, sigma_routes, soft_max, soft_min};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("formula needs {needed} steps after k but the trace only has {available}")]
    HorizonOverflow { needed: usize, available: usize },
    #[error("expected one connection graph per step ({expected}), got {got}")]
    GraphCount { expected: usize, got: usize },
    #[error("connection graph at step {step} has {got} nodes, expected {expected}")]
    GraphSize { step: usize, expected: usize, got: usize },
    #[error("agent index {agent} out of range for {n} agents")]
    AgentOutOfRange { agent: usize, n: usize },
    #[error("predicate needs dimension {needed}, trace has {dim}")]
    Dimension { needed: usize, dim: usize },
    #[error("soft min/max over an empty list")]
    EmptyAggregate,
    #[error("invalid semantics configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountingMode {
    /// Plain max-min recursion.
    Original,
    /// Spatial operators scaled by route counts and gated by distance; the
    /// team score is scaled by agent counts.
    #[default]
    Counting,
}

/// How a route whose robustness is exactly zero is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroRouteTie {
    #[default]
    Violating,
    Satisfying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SemanticsConfig {
    /// Sharpness of the log-sum-exp soft min/max.
    pub beta: f64,
    pub k_dist: f64,
    pub k_routes: f64,
    pub k_ag: f64,
    /// Node cap on enumerated routes; `None` means the agent count.
    pub max_route_len: Option<usize>,
    /// Magnitude of attribute-atom robustness.
    pub rho_max: f64,
    pub smooth: bool,
    pub counting_mode: CountingMode,
    pub zero_route_tie: ZeroRouteTie,
    pub surround_variant: SurroundVariant,
    /// Use `1/(1+e^{k Ag⁻})` as the first term of the agent-count factor.
    pub flip_ag_sign: bool,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        SemanticsConfig {
            beta: 50.0,
            k_dist: 2.0,
            k_routes: 1.0,
            k_ag: 1.0,
            max_route_len: None,
            rho_max: 1.0,
            smooth: false,
            counting_mode: CountingMode::Counting,
            zero_route_tie: ZeroRouteTie::Violating,
            surround_variant: SurroundVariant::NegatedEscape,
            flip_ag_sign: false,
        }
    }
}

impl SemanticsConfig {
    pub fn original() -> Self {
        SemanticsConfig {
            counting_mode: CountingMode::Original,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), SemanticsError> {
        let positive = [
            ("beta", self.beta),
            ("kDist", self.k_dist),
            ("kRoutes", self.k_routes),
            ("kAg", self.k_ag),
            ("rhoMax", self.rho_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SemanticsError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.max_route_len == Some(0) {
            return Err(SemanticsError::InvalidConfig("maxRouteLen must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn route_cap(&self, n: usize) -> usize {
        self.max_route_len.unwrap_or(n).min(n)
    }
}

/// Per-agent and team robustness at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RobustnessReport {
    pub per_agent: Vec<f64>,
    pub team: f64,
    /// Agent-count factor; 1 in original mode.
    pub sigma_ag: f64,
    pub ag_plus: usize,
    pub ag_minus: usize,
}

/// Boolean satisfaction of `f` by agent `l` at step `k`.
pub fn qualitative_sat(
    trace: &TeamTrace,
    graphs: &[ConnectionGraph],
    f: &Formula,
    k: usize,
    l: usize,
    cfg: &SemanticsConfig,
) -> Result<bool, SemanticsError> {
    check_inputs(trace, graphs, f, k, Some(l))?;
    let f = f.expand_surround(cfg.surround_variant);
    Ok(qualitative::sat(trace, graphs, &f, k, l, cfg.route_cap(trace.n_agents())))
}

/// Max-min robustness, regardless of `cfg.counting_mode`.
pub fn robustness_original(
    trace: &TeamTrace,
    graphs: &[ConnectionGraph],
    f: &Formula,
    k: usize,
    l: usize,
    cfg: &SemanticsConfig,
) -> Result<f64, SemanticsError> {
    let cfg = SemanticsConfig {
        counting_mode: CountingMode::Original,
        ..cfg.clone()
    };
    Monitor::new(trace, graphs, cfg)?.agent(f, k, l)
}

/// Counting robustness, regardless of `cfg.counting_mode`.
pub fn robustness_counting(
    trace: &TeamTrace,
    graphs: &[ConnectionGraph],
    f: &Formula,
    k: usize,
    l: usize,
    cfg: &SemanticsConfig,
) -> Result<f64, SemanticsError> {
    let cfg = SemanticsConfig {
        counting_mode: CountingMode::Counting,
        ..cfg.clone()
    };
    Monitor::new(trace, graphs, cfg)?.agent(f, k, l)
}

/// Team robustness at step `k` in the configured mode.
pub fn robustness_team(
    trace: &TeamTrace,
    graphs: &[ConnectionGraph],
    f: &Formula,
    k: usize,
    cfg: &SemanticsConfig,
) -> Result<RobustnessReport, SemanticsError> {
    Monitor::new(trace, graphs, cfg.clone())?.team(f, k)
}

pub(crate) fn check_graphs(trace: &TeamTrace, graphs: &[ConnectionGraph]) -> Result<(), SemanticsError> {
    if graphs.len() != trace.len() {
        return Err(SemanticsError::GraphCount {
            expected: trace.len(),
            got: graphs.len(),
        });
    }
    for (step, g) in graphs.iter().enumerate() {
        if g.n_nodes() != trace.n_agents() {
            return Err(SemanticsError::GraphSize {
                step,
                expected: trace.n_agents(),
                got: g.n_nodes(),
            });
        }
    }
    Ok(())
}

pub(crate) fn check_inputs(
    trace: &TeamTrace,
    graphs: &[ConnectionGraph],
    f: &Formula,
    k: usize,
    l: Option<usize>,
) -> Result<(), SemanticsError> {
    check_graphs(trace, graphs)?;
    let needed = k + f.horizon();
    if needed > trace.horizon() {
        return Err(SemanticsError::HorizonOverflow {
            needed: f.horizon(),
            available: trace.horizon().saturating_sub(k),
        });
    }
    if let Some(l) = l {
        if l >= trace.n_agents() {
            return Err(SemanticsError::AgentOutOfRange {
                agent: l,
                n: trace.n_agents(),
            });
        }
    }
    check_dims(f, trace.dim)
}

fn check_dims(f: &Formula, dim: usize) -> Result<(), SemanticsError> {
    match f {
        Formula::True | Formula::Atom(_) => Ok(()),
        Formula::Predicate { func, .. } => match func {
            PredicateFn::DistTo(p) if p.len() != dim => Err(SemanticsError::Dimension { needed: p.len(), dim }),
            PredicateFn::Coord(i) if *i >= dim => Err(SemanticsError::Dimension { needed: i + 1, dim }),
            _ => Ok(()),
        },
        Formula::Not(x) => check_dims(x, dim),
        Formula::Eventually { body, .. } | Formula::Always { body, .. } | Formula::Escape { body, .. } => {
            check_dims(body, dim)
        }
        Formula::And(a, b)
        | Formula::Or(a, b)
        | Formula::Until { lhs: a, rhs: b, .. }
        | Formula::Reach { lhs: a, rhs: b, .. }
        | Formula::Surround { lhs: a, rhs: b, .. } => {
            check_dims(a, dim)?;
            check_dims(b, dim)
        }
    }
}

/// Value of a predicate function for one agent at one step.
pub(crate) fn predicate_value(trace: &TeamTrace, func: &PredicateFn, k: usize, l: usize) -> f64 {
    let q = trace.position(k, l);
    match func {
        PredicateFn::DistTo(p) => euclid(q, p),
        PredicateFn::Coord(i) => q[*i],
        PredicateFn::MinPairDist => (0..trace.n_agents())
            .filter(|&j| j != l)
            .map(|j| euclid(q, trace.position(k, j)))
            .fold(f64::INFINITY, f64::min),
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
