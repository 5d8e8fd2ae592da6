//! Success rate, robustness and wall time per (method, semantics) pair over
//! a shared set of sampled initializations.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use strel_core::dataset::{derive_seeds, InitSampler};
use strel_core::semantics::CountingMode;
use strel_core::synthesis::{synthesize, Method, PsoConfig, RefineConfig, SynthesisProblem};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunOutcome {
    pub init_id: usize,
    pub seed: u64,
    pub robustness: f64,
    pub success: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub method: Method,
    pub semantics: CountingMode,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean robustness over the successful runs; `None` without successes.
    pub mean_robustness: Option<f64>,
    pub mean_seconds: f64,
    pub outcomes: Vec<RunOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub runs: usize,
    pub methods: Vec<Method>,
    pub semantics: Vec<CountingMode>,
    pub pso: PsoConfig,
    pub refine: RefineConfig,
    /// Master seed; run `i` uses the `i`-th derived seed for both its
    /// initialization and its solver.
    pub seed: u64,
    pub jobs: usize,
}

pub fn mode_name(m: CountingMode) -> &'static str {
    match m {
        CountingMode::Original => "original",
        CountingMode::Counting => "counting",
    }
}

pub fn run_bench(p: &SynthesisProblem, sampler: &InitSampler, o: &BenchOptions) -> Result<BenchReport, CliError> {
    if o.runs == 0 {
        return Err(CliError::Usage("at least one run is required".into()));
    }
    sampler.validate(p)?;
    let seeds = derive_seeds(o.seed, o.runs);
    let inits: Vec<_> = seeds.iter().map(|&s| sampler.sample_with_seed(p, s)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(o.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = Vec::new();
    for &mode in &o.semantics {
        let mut base = p.clone();
        base.semantics.counting_mode = mode;
        for &method in &o.methods {
            let outcomes: Result<Vec<RunOutcome>, CliError> = pool.install(|| {
                (0..o.runs)
                    .into_par_iter()
                    .map(|i| {
                        let q = base.with_initial_positions(inits[i].clone());
                        let r = synthesize(&q, method, &o.pso, &o.refine, seeds[i])?;
                        Ok(RunOutcome {
                            init_id: i,
                            seed: seeds[i],
                            robustness: r.robustness,
                            success: r.success,
                            seconds: r.wall_time,
                        })
                    })
                    .collect()
            });
            rows.push(summarize(method, mode, outcomes?));
        }
    }
    Ok(BenchReport { rows })
}

fn summarize(method: Method, semantics: CountingMode, outcomes: Vec<RunOutcome>) -> BenchRow {
    let runs = outcomes.len();
    let ok: Vec<f64> = outcomes.iter().filter(|r| r.success).map(|r| r.robustness).collect();
    BenchRow {
        method,
        semantics,
        runs,
        successes: ok.len(),
        success_rate: ok.len() as f64 / runs as f64,
        mean_robustness: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
        mean_seconds: outcomes.iter().map(|r| r.seconds).sum::<f64>() / runs as f64,
        outcomes,
    }
}

impl BenchReport {
    pub fn row(&self, method: Method, semantics: CountingMode) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.method == method && r.semantics == semantics)
    }

    /// One line per (method, semantics). Without `timing` the seconds column
    /// is left empty so the file depends on the seed alone.
    pub fn to_csv(&self, timing: bool) -> String {
        let mut out = String::from("method,semantics,runs,successes,successRate,meanRobustness,meanSeconds\n");
        for r in &self.rows {
            let rob = r.mean_robustness.map(|v| format!("{v:?}")).unwrap_or_default();
            let secs = if timing { format!("{:?}", r.mean_seconds) } else { String::new() };
            writeln!(
                out,
                "{},{},{},{},{:?},{rob},{secs}",
                r.method.name(),
                mode_name(r.semantics),
                r.runs,
                r.successes,
                r.success_rate
            )
            .unwrap();
        }
        out
    }
}

/// Parses a CSV written by [`BenchReport::to_csv`] back into its cells,
/// checking the header and the row invariants.
pub fn check_csv(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("method,semantics,runs,successes,successRate,meanRobustness,meanSeconds") {
        return Err("unexpected bench header".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<String> = line.split(',').map(String::from).collect();
        if cells.len() != 7 {
            return Err(format!("row {} has {} cells", i + 1, cells.len()));
        }
        let runs: usize = cells[2].parse().map_err(|_| format!("row {}: bad runs", i + 1))?;
        let successes: usize = cells[3].parse().map_err(|_| format!("row {}: bad successes", i + 1))?;
        let rate: f64 = cells[4].parse().map_err(|_| format!("row {}: bad rate", i + 1))?;
        if successes > runs || !(0.0..=1.0).contains(&rate) {
            return Err(format!("row {}: inconsistent counts", i + 1));
        }
        rows.push(cells);
    }
    Ok(rows)
}
