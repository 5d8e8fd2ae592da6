//! The scenario file: a team, its controls, a formula and the solver,
//! training and sampling settings, as one JSON document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strel_core::dataset::{InitSampler, Region};
use strel_core::formula::parse_with_labels;
use strel_core::semantics::{CountingMode, SemanticsConfig};
use strel_core::spatial::{ConnectivityPolicy, Scenario};
use strel_core::synthesis::{PsoConfig, RefineConfig, SynthesisProblem};
use strel_core::neuro::TrainConfig;

use crate::CliError;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub dim: usize,
    pub attributes: Vec<String>,
    /// Full label vocabulary; defaults to the labels used in `attributes`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute_labels: Option<Vec<String>>,
    pub initial_positions: Vec<Vec<f64>>,
    pub controllable: Vec<usize>,
    pub control_box: Vec<[f64; 2]>,
    pub connectivity: ConnectivityPolicy,
    pub horizon: usize,
    pub formula: String,
    pub gamma: f64,
    pub eps_min: f64,
    #[serde(default)]
    pub semantics: SemanticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(default)]
    pub pso: PsoConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SamplerSpec {
    /// One box per controllable agent.
    pub regions: Vec<Region>,
    pub workspace: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

/// Shape of the imitation controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden: Vec<usize>,
    /// Positions are divided by this before entering the network.
    pub position_scale: f64,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            hidden: vec![64; 4],
            position_scale: 2.0,
            seed: 0,
        }
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub formula: Option<String>,
    pub counting_mode: Option<CountingMode>,
    pub smooth: Option<bool>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let s: ScenarioFile = serde_json::from_str(text).map_err(|e| format!("scenario schema: {e}"))?;
        s.check().map_err(|e| format!("scenario schema: {e}"))?;
        Ok(s)
    }

    fn check(&self) -> Result<(), String> {
        if self.version != SCENARIO_VERSION {
            return Err(format!("version {} is not supported, expected {SCENARIO_VERSION}", self.version));
        }
        if self.n != self.attributes.len() {
            return Err(format!("N = {} but {} attributes are given", self.n, self.attributes.len()));
        }
        if let Some(labels) = &self.attribute_labels {
            if let Some(a) = self.attributes.iter().find(|a| !labels.contains(a)) {
                return Err(format!("attribute {a:?} is missing from attributeLabels"));
            }
        }
        if let Some(s) = &self.sampler {
            if s.regions.len() != self.controllable.len() {
                return Err(format!(
                    "sampler has {} regions for {} controllable agents",
                    s.regions.len(),
                    self.controllable.len()
                ));
            }
        }
        self.pso.validate()?;
        self.refine.validate()?;
        self.training.validate().map_err(|e| e.to_string())?;
        if self.model.hidden.is_empty() || self.model.hidden.contains(&0) || !(self.model.position_scale > 0.0) {
            return Err("model needs at least one non-empty layer and a positive position scale".into());
        }
        self.scenario().validate().map_err(|e| e.to_string())?;
        self.problem(&Overrides::default()).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.attribute_labels.clone().unwrap_or_else(|| self.scenario().attribute_labels())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            dim: self.dim,
            attributes: self.attributes.clone(),
            initial_positions: self.initial_positions.clone(),
            controllable: self.controllable.clone(),
            control_box: self.control_box.clone(),
            connectivity: self.connectivity,
            horizon: self.horizon,
        }
    }

    pub fn semantics(&self, o: &Overrides) -> SemanticsConfig {
        let mut cfg = self.semantics.clone();
        if let Some(m) = o.counting_mode {
            cfg.counting_mode = m;
        }
        if let Some(s) = o.smooth {
            cfg.smooth = s;
        }
        cfg
    }

    /// The synthesis problem, with the formula parsed against the label
    /// vocabulary. A bad `--formula` is a usage error, a bad file formula an
    /// input error.
    pub fn problem(&self, o: &Overrides) -> Result<SynthesisProblem, CliError> {
        let (text, bad) = match &o.formula {
            Some(f) => (f.as_str(), CliError::Usage as fn(String) -> CliError),
            None => (self.formula.as_str(), CliError::Input as fn(String) -> CliError),
        };
        let formula = parse_with_labels(text, &self.labels()).map_err(|e| bad(format!("formula: {e}")))?;
        SynthesisProblem::new(self.scenario(), formula, self.gamma, self.semantics(o), self.eps_min)
            .map_err(|e| bad(e.to_string()))
    }

    pub fn sampler(&self, seed: Option<u64>) -> Result<InitSampler, CliError> {
        let s = self
            .sampler
            .as_ref()
            .ok_or_else(|| CliError::Input("the scenario has no sampler section".into()))?;
        Ok(InitSampler {
            regions: s.regions.clone(),
            workspace: s.workspace.clone(),
            seed: seed.unwrap_or(s.seed),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../scenarios/case_study.json");

    #[test]
    fn shipped_scenario_loads() {
        let s = ScenarioFile::from_json(EXAMPLE).unwrap();
        assert_eq!(s.n, 7);
        let p = s.problem(&Overrides::default()).unwrap();
        assert_eq!(p.formula.horizon(), 13);
        s.sampler(None).unwrap().validate(&p).unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let s = ScenarioFile::from_json(EXAMPLE).unwrap();
        let again = ScenarioFile::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        v["colour"] = "red".into();
        assert!(ScenarioFile::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        v["semantics"]["betta"] = 3.0.into();
        assert!(ScenarioFile::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn inconsistent_documents_are_rejected() {
        let base: serde_json::Value = serde_json::from_str(EXAMPLE).unwrap();
        let edits: [(&str, serde_json::Value); 4] = [
            ("N", 6.into()),
            ("version", 2.into()),
            ("horizon", 5.into()),
            ("formula", "G[0,3] purple".into()),
        ];
        for (key, val) in edits {
            let mut v = base.clone();
            v[key] = val;
            assert!(ScenarioFile::from_json(&v.to_string()).is_err(), "{key}");
        }
    }

    #[test]
    fn overrides_apply() {
        let s = ScenarioFile::from_json(EXAMPLE).unwrap();
        let o = Overrides {
            formula: Some("G[0,2] minPairDist > 0.1".into()),
            counting_mode: Some(CountingMode::Original),
            smooth: Some(false),
        };
        let p = s.problem(&o).unwrap();
        assert_eq!(p.formula.horizon(), 2);
        assert_eq!(p.semantics.counting_mode, CountingMode::Original);
        assert!(!p.semantics.smooth);
        let bad = Overrides {
            formula: Some("G[0,2] (".into()),
            ..Default::default()
        };
        assert!(matches!(s.problem(&bad), Err(CliError::Usage(_))));
    }
}
