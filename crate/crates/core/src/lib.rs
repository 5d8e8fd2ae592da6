//! Monitoring and control synthesis for multi-agent teams specified in
//! Spatio-Temporal Reach and Escape Logic (STREL).
//!
//! - [`formula`]: syntax, parser, printer, surround expansion.
//! - [`spatial`]: team traces, rollout, connection graphs, routes.
//! - [`semantics`]: Boolean, original and counting robustness.
//! - [`synthesis`]: PSO and projected quasi-Newton control synthesis.
//! - [`dataset`]: batches of satisfying trajectories on disk.
//! - [`neuro`]: a stacked LSTM imitation controller.

pub mod dataset;
pub mod formula;
pub mod neuro;
pub mod semantics;
pub mod spatial;
pub mod synthesis;

pub use formula::{parse, Formula};
pub use semantics::{Monitor, RobustnessReport, SemanticsConfig};
pub use spatial::{rollout, ConnectionGraph, ControlSequence, Scenario, TeamTrace};
pub use synthesis::{synthesize, Method, SynthesisProblem, SynthesisResult};
