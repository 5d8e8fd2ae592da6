//! Batches of satisfying state-control trajectories and their JSON-lines
//! file format.
//!
//! The first line is a header carrying the format version, a hash of the
//! synthesis problem and the record count. Every following line is one
//! record. Loading is fail-closed: any malformed, missing or extra line is an
//! error.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::semantics::SemanticsConfig;
use crate::spatial::{rollout, ControlSequence, TeamTrace};
use crate::synthesis::{synthesize, Method, PsoConfig, RefineConfig, SynthesisError, SynthesisProblem};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("dataset format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("dataset was generated for problem {found}, expected {expected}")]
    HashMismatch { found: String, expected: String },
    #[error("invalid sampler: {0}")]
    Sampler(String),
    #[error("record {init_id} does not re-verify: {msg}")]
    Verification { init_id: usize, msg: String },
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// Axis-aligned box, one interval per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Random initial team states: each controllable agent is drawn uniformly
/// from its own region, everyone else keeps the scenario position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InitSampler {
    /// One region per controllable agent, in `controllable` order.
    pub regions: Vec<Region>,
    /// Workspace bounds per axis; regions must lie inside.
    pub workspace: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

impl InitSampler {
    pub fn validate(&self, p: &SynthesisProblem) -> Result<(), DatasetError> {
        let scn = &p.scenario;
        if self.regions.len() != scn.controllable.len() {
            return Err(DatasetError::Sampler(format!(
                "{} regions for {} controllable agents",
                self.regions.len(),
                scn.controllable.len()
            )));
        }
        if self.workspace.len() != scn.dim {
            return Err(DatasetError::Sampler(format!(
                "workspace has {} axes, scenario dimension is {}",
                self.workspace.len(),
                scn.dim
            )));
        }
        for (j, r) in self.regions.iter().enumerate() {
            if r.lo.len() != scn.dim || r.hi.len() != scn.dim {
                return Err(DatasetError::Sampler(format!("region {j} has the wrong dimension")));
            }
            for a in 0..scn.dim {
                let [wlo, whi] = self.workspace[a];
                if !(r.lo[a] <= r.hi[a] && r.lo[a] >= wlo && r.hi[a] <= whi) {
                    return Err(DatasetError::Sampler(format!(
                        "region {j} axis {a} [{}, {}] is empty or outside the workspace [{wlo}, {whi}]",
                        r.lo[a], r.hi[a]
                    )));
                }
            }
        }
        Ok(())
    }

    /// One initial team state drawn from `rng`.
    pub fn sample(&self, p: &SynthesisProblem, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let mut positions = p.scenario.initial_positions.clone();
        for (j, &agent) in p.scenario.controllable.iter().enumerate() {
            let r = &self.regions[j];
            positions[agent] = (0..p.scenario.dim)
                .map(|a| if r.hi[a] > r.lo[a] { rng.gen_range(r.lo[a]..r.hi[a]) } else { r.lo[a] })
                .collect();
        }
        positions
    }

    /// Initial state for the `i`-th seed of [`derive_seeds`].
    pub fn sample_with_seed(&self, p: &SynthesisProblem, seed: u64) -> Vec<Vec<f64>> {
        self.sample(p, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// `count` per-run seeds drawn from a master seed.
pub fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.gen()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub init_id: usize,
    pub seed: u64,
    pub robustness: f64,
    pub controls: ControlSequence,
    pub trace: TeamTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetHeader {
    pub version: u32,
    /// SHA-256 of the serialized synthesis problem.
    pub scenario_hash: String,
    pub eps_min: f64,
    pub semantics: SemanticsConfig,
    pub dim: usize,
    pub attributes: Vec<String>,
    pub controllable: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

/// Hex SHA-256 of the problem's JSON form.
pub fn scenario_hash(p: &SynthesisProblem) -> String {
    let bytes = serde_json::to_vec(p).expect("problem serializes");
    hex::encode(Sha256::digest(&bytes))
}

impl Dataset {
    pub fn new(p: &SynthesisProblem, records: Vec<DatasetRecord>) -> Dataset {
        Dataset {
            header: DatasetHeader {
                version: FORMAT_VERSION,
                scenario_hash: scenario_hash(p),
                eps_min: p.eps_min,
                semantics: p.semantics.clone(),
                dim: p.scenario.dim,
                attributes: p.scenario.attributes.clone(),
                controllable: p.scenario.controllable.clone(),
                count: records.len(),
            },
            records,
        }
    }

    pub fn check_problem(&self, p: &SynthesisProblem) -> Result<(), DatasetError> {
        let expected = scenario_hash(p);
        if self.header.scenario_hash != expected {
            return Err(DatasetError::HashMismatch {
                found: self.header.scenario_hash.clone(),
                expected,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RecordLine {
    init_id: usize,
    seed: u64,
    robustness: f64,
    /// One row per step: controllable agents' controls, flattened.
    controls: Vec<Vec<f64>>,
    /// One row per step: all agents' positions, flattened.
    trace: Vec<Vec<f64>>,
}

pub fn save(data: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let mut header = data.header.clone();
    header.count = data.records.len();
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for r in &data.records {
        let (steps, agents, dim) = r.controls.shape();
        let w = agents * dim;
        let tw = r.trace.n_agents() * r.trace.dim;
        let line = RecordLine {
            init_id: r.init_id,
            seed: r.seed,
            robustness: r.robustness,
            controls: (0..steps).map(|k| r.controls.values[k * w..(k + 1) * w].to_vec()).collect(),
            trace: r.trace.positions.chunks(tw).map(<[f64]>::to_vec).collect(),
        };
        writeln!(out, "{}", serde_json::to_string(&line).expect("record serializes"))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let schema = |line: usize, msg: String| DatasetError::Schema { line, msg };
    let first = lines.next().ok_or_else(|| schema(1, "missing header".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| schema(1, e.to_string()))?;
    if header.version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }
    let n = header.attributes.len();
    if n == 0 || header.dim == 0 {
        return Err(schema(1, "header has no agents or zero dimension".into()));
    }
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            return Err(schema(no, "empty line".into()));
        }
        let r: RecordLine = serde_json::from_str(&line).map_err(|e| schema(no, e.to_string()))?;
        let steps = r.controls.len();
        let cw = header.controllable.len() * header.dim;
        if r.trace.len() != steps + 1 {
            return Err(schema(no, format!("{} trace rows for {steps} control steps", r.trace.len())));
        }
        if r.controls.iter().any(|row| row.len() != cw) || r.trace.iter().any(|row| row.len() != n * header.dim) {
            return Err(schema(no, "row width does not match the header".into()));
        }
        records.push(DatasetRecord {
            init_id: r.init_id,
            seed: r.seed,
            robustness: r.robustness,
            controls: ControlSequence {
                steps,
                agents: header.controllable.len(),
                dim: header.dim,
                values: r.controls.concat(),
            },
            trace: TeamTrace::new(header.dim, header.attributes.clone(), r.trace.concat()),
        });
    }
    if records.len() != header.count {
        return Err(schema(
            records.len() + 2,
            format!("header announces {} records, file has {}", header.count, records.len()),
        ));
    }
    Ok(Dataset { header, records })
}

/// Re-simulates a record and re-evaluates its robustness.
pub fn verify_record(p: &SynthesisProblem, r: &DatasetRecord) -> Result<(), DatasetError> {
    let fail = |msg: String| DatasetError::Verification { init_id: r.init_id, msg };
    let n = r.trace.n_agents();
    let init: Vec<Vec<f64>> = (0..n).map(|l| r.trace.position(0, l).to_vec()).collect();
    let q = p.with_initial_positions(init);
    let trace = rollout(&q.scenario, &r.controls).map_err(|e| fail(e.to_string()))?;
    if trace != r.trace {
        return Err(fail("rollout does not reproduce the stored trace".into()));
    }
    let rho = q.robustness_of(&trace)?;
    if (rho - r.robustness).abs() > 1e-9 {
        return Err(fail(format!("stored robustness {} but re-evaluated {rho}", r.robustness)));
    }
    if rho < p.eps_min {
        return Err(fail(format!("robustness {rho} is below epsMin {}", p.eps_min)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub method: Method,
    pub pso: PsoConfig,
    pub refine: RefineConfig,
    /// Extra attempts with fresh seeds after a failed solve.
    pub retries: usize,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            method: Method::Hybrid,
            pso: PsoConfig::default(),
            refine: RefineConfig::default(),
            retries: 0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateReport {
    pub records: Vec<DatasetRecord>,
    pub attempted: usize,
    pub failures: usize,
    /// Synthesis wall time per attempt, in init order.
    pub solve_seconds: Vec<f64>,
}

struct Attempt {
    record: Option<DatasetRecord>,
    tries: usize,
    seconds: Vec<f64>,
}

fn attempt(p: &SynthesisProblem, sampler: &InitSampler, opts: &GenerateOptions, init_id: usize, seed: u64) -> Attempt {
    let init = sampler.sample_with_seed(p, seed);
    let q = p.with_initial_positions(init);
    let mut seeds = vec![seed];
    seeds.extend(derive_seeds(seed, opts.retries));
    let mut seconds = Vec::new();
    for (t, &s) in seeds.iter().enumerate() {
        let Ok(res) = synthesize(&q, opts.method, &opts.pso, &opts.refine, s) else {
            continue;
        };
        seconds.push(res.wall_time);
        if res.success {
            return Attempt {
                record: Some(DatasetRecord {
                    init_id,
                    seed: s,
                    robustness: res.robustness,
                    controls: res.controls,
                    trace: res.trace,
                }),
                tries: t + 1,
                seconds,
            };
        }
    }
    Attempt {
        record: None,
        tries: seeds.len(),
        seconds,
    }
}

/// Solves `m` sampled initializations and keeps the satisfying ones, in
/// init order. Init `i` uses the `i`-th seed derived from `sampler.seed`.
pub fn generate(
    p: &SynthesisProblem,
    sampler: &InitSampler,
    m: usize,
    opts: &GenerateOptions,
) -> Result<GenerateReport, DatasetError> {
    sampler.validate(p)?;
    if m == 0 {
        return Err(DatasetError::Sampler("at least one initialization is required".into()));
    }
    let seeds = derive_seeds(sampler.seed, m);
    let jobs = opts.jobs.clamp(1, m);
    let mut slots: Vec<Option<Attempt>> = (0..m).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = m.div_ceil(jobs);
        for (c, part) in slots.chunks_mut(chunk).enumerate() {
            let seeds = &seeds;
            s.spawn(move || {
                for (j, slot) in part.iter_mut().enumerate() {
                    let i = c * chunk + j;
                    *slot = Some(attempt(p, sampler, opts, i, seeds[i]));
                }
            });
        }
    });
    let mut report = GenerateReport {
        records: Vec::new(),
        attempted: 0,
        failures: 0,
        solve_seconds: Vec::new(),
    };
    for a in slots.into_iter().map(|a| a.expect("every slot is filled")) {
        report.attempted += a.tries;
        report.solve_seconds.extend(a.seconds);
        match a.record {
            Some(r) => report.records.push(r),
            None => report.failures += 1,
        }
    }
    Ok(report)
}
