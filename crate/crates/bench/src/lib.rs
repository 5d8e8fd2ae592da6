//! Shared fixtures for the benchmarks.

use strel_cli::scenario::{Overrides, ScenarioFile};
use strel_core::synthesis::SynthesisProblem;

pub const CASE_STUDY: &str = include_str!("../../cli/scenarios/case_study.json");

pub fn case_study() -> (ScenarioFile, SynthesisProblem) {
    let file = ScenarioFile::from_json(CASE_STUDY).expect("shipped scenario is valid");
    let p = file.problem(&Overrides::default()).expect("shipped scenario is valid");
    (file, p)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_loads() {
        let (_, p) = super::case_study();
        assert_eq!(p.scenario.n_agents(), 7);
    }
}
