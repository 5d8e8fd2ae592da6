//! Subcommands. Each one writes its report to `out` and returns whether the
//! result was satisfactory; errors carry their exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use strel_core::dataset::{self, derive_seeds, generate, scenario_hash, Dataset, GenerateOptions};
use strel_core::neuro::{evaluate, train, training_pairs, LstmModel, TrainConfig};
use strel_core::semantics::{CountingMode, Monitor};
use strel_core::synthesis::{synthesize, Method, SynthesisProblem};

use crate::bench::{check_csv, mode_name, run_bench, BenchOptions};
use crate::files::{read_json, read_trace, write_json, write_trace, ControlsFile};
use crate::scenario::{Overrides, ScenarioFile};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "strel", version, about = "STREL monitoring, control synthesis and imitation control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Robustness of a stored trace.
    Monitor(MonitorArgs),
    /// Optimize controls for the scenario's initial state.
    Synth(SynthArgs),
    /// Solve sampled initializations and keep the satisfying trajectories.
    Dataset(DatasetArgs),
    /// Fit the recurrent controller to a dataset.
    Train(TrainArgs),
    /// Closed-loop success of a trained controller on fresh initializations.
    Eval(EvalArgs),
    /// Success rates per optimizer and semantics.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SemanticsArg {
    Original,
    Counting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchSemantics {
    Original,
    Counting,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Replaces the scenario's formula.
    #[arg(long)]
    pub formula: Option<String>,
    #[arg(long, value_enum)]
    pub smooth: Option<Switch>,
}

#[derive(Debug, Clone, Args)]
pub struct Seeded {
    /// Master seed; falls back to STREL_SEED, then to the scenario file.
    #[arg(long, env = "STREL_SEED")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    #[arg(long)]
    pub trace: PathBuf,
    /// Report a single agent instead of the whole team.
    #[arg(long, conflicts_with = "team")]
    pub agent: Option<usize>,
    #[arg(long)]
    pub team: bool,
    #[arg(long, default_value_t = 0)]
    pub at: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seeded: Seeded,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    #[arg(long, default_value = "hybrid", value_parser = parse_method)]
    pub method: Method,
    /// Directory for trace.csv and controls.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seeded: Seeded,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    #[arg(long, default_value = "hybrid", value_parser = parse_method)]
    pub method: Method,
    /// Number of initializations to solve.
    #[arg(long = "M", visible_alias = "count")]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub retries: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    #[arg(long, env = "STREL_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated layer widths, e.g. 64,64.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss as CSV.
    #[arg(long)]
    pub loss_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seeded: Seeded,
    #[arg(long, value_enum)]
    pub semantics: Option<SemanticsArg>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub inits: usize,
    /// Also solve this many of the inits with the hybrid optimizer for a
    /// side-by-side row.
    #[arg(long, default_value_t = 0)]
    pub compare: usize,
    /// Leave measured times out of the report.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub seeded: Seeded,
    #[arg(long, value_enum, default_value = "both")]
    pub semantics: BenchSemantics,
    #[arg(long, default_value_t = 30)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_value = "grad,pso,hybrid", value_parser = parse_method)]
    pub methods: Vec<Method>,
    /// Overrides the scenario's swarm iteration count.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave the seconds column empty so the file depends only on the seed.
    #[arg(long)]
    pub no_timing: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn counting(s: Option<SemanticsArg>) -> Option<CountingMode> {
    s.map(|s| match s {
        SemanticsArg::Original => CountingMode::Original,
        SemanticsArg::Counting => CountingMode::Counting,
    })
}

fn load(common: &Common, semantics: Option<SemanticsArg>) -> Result<(ScenarioFile, SynthesisProblem), CliError> {
    let file = ScenarioFile::load(&common.scenario)?;
    let o = Overrides {
        formula: common.formula.clone(),
        counting_mode: counting(semantics),
        smooth: common.smooth.map(|s| s == Switch::On),
    };
    let p = file.problem(&o)?;
    Ok((file, p))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<bool, CliError> {
    match cli.command {
        Command::Monitor(a) => monitor(a, out),
        Command::Synth(a) => synth(a, out),
        Command::Dataset(a) => make_dataset(a, out),
        Command::Train(a) => fit(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

fn monitor(a: MonitorArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (_, p) = load(&a.common, a.semantics)?;
    let trace = read_trace(&a.trace)?;
    if trace.attributes != p.scenario.attributes || trace.dim != p.scenario.dim {
        return Err(CliError::Input("trace team does not match the scenario".into()));
    }
    let need = a.at + p.formula.horizon() + 1;
    if trace.len() < need {
        return Err(CliError::Input(format!(
            "trace has {} steps, evaluating at {} needs {need}",
            trace.len(),
            a.at
        )));
    }
    if a.agent.is_some_and(|l| l >= trace.n_agents()) {
        return Err(CliError::Usage(format!("agent index out of range 0..{}", trace.n_agents())));
    }
    let graphs = trace.graphs(&p.scenario.connectivity).map_err(|e| CliError::Input(e.to_string()))?;
    let m = Monitor::new(&trace, &graphs, p.semantics.clone()).map_err(|e| CliError::Input(e.to_string()))?;
    let sem = |e: strel_core::semantics::SemanticsError| CliError::Input(e.to_string());
    writeln!(
        out,
        "semantics: {}{}",
        mode_name(p.semantics.counting_mode),
        if p.semantics.smooth { ", smooth" } else { "" }
    )?;
    if let Some(l) = a.agent {
        let v = m.agent(&p.formula, a.at, l).map_err(sem)?;
        writeln!(out, "agent {l}: {v}")?;
        return Ok(v >= 0.0);
    }
    let (soft, hard, stats) = m.team_with_stats(&p.formula, a.at).map_err(sem)?;
    if !a.team {
        for (l, v) in soft.per_agent.iter().enumerate() {
            writeln!(out, "agent {l}: {v}")?;
        }
    }
    writeln!(out, "team: {}", soft.team)?;
    if p.semantics.counting_mode == CountingMode::Counting {
        writeln!(
            out,
            "agents satisfied/violated: {}/{} sigmaAg: {}",
            soft.ag_plus, soft.ag_minus, soft.sigma_ag
        )?;
    }
    if p.semantics.smooth {
        writeln!(out, "hard team: {}", hard.team)?;
        writeln!(out, "smoothing bound: {}", stats.bound(p.semantics.beta))?;
    }
    Ok(soft.team >= 0.0)
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (file, p) = load(&a.common, a.semantics)?;
    let seed = a.seeded.seed.unwrap_or(file.pso.seed);
    writeln!(out, "seed: {seed}")?;
    let r = synthesize(&p, a.method, &file.pso, &file.refine, seed)?;
    writeln!(out, "method: {}", a.method.name())?;
    writeln!(out, "robustness: {}", r.robustness)?;
    writeln!(out, "cost: {}", r.cost)?;
    writeln!(out, "objective: {}", r.objective)?;
    writeln!(out, "success: {}", r.success)?;
    writeln!(out, "evaluations: {}", r.evaluations)?;
    writeln!(out, "seconds: {:.3}", r.wall_time)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        write_trace(&r.trace, &dir.join("trace.csv"))?;
        let doc = ControlsFile {
            method: a.method.name().into(),
            seed,
            robustness: r.robustness,
            objective: r.objective,
            cost: r.cost,
            success: r.success,
            controllable: p.scenario.controllable.clone(),
            dim: p.scenario.dim,
            controls: ControlsFile::rows(&r.controls),
        };
        write_json(&doc, &dir.join("controls.json"))?;
        writeln!(out, "wrote {}", dir.display())?;
    }
    Ok(r.success)
}

fn make_dataset(a: DatasetArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (file, p) = load(&a.common, a.semantics)?;
    let sampler = file.sampler(a.seeded.seed)?;
    writeln!(out, "seed: {}", sampler.seed)?;
    let opts = GenerateOptions {
        method: a.method,
        pso: file.pso.clone(),
        refine: file.refine.clone(),
        retries: a.retries,
        jobs: a.seeded.jobs,
    };
    let rep = generate(&p, &sampler, a.m, &opts)?;
    let data = Dataset::new(&p, rep.records);
    dataset::save(&data, &a.out)?;
    let back = dataset::load(&a.out)?;
    if back != data {
        return Err(CliError::Input(format!("{} does not read back identically", a.out.display())));
    }
    for r in &back.records {
        dataset::verify_record(&p, r)?;
    }
    let mean = rep.solve_seconds.iter().sum::<f64>() / rep.solve_seconds.len().max(1) as f64;
    writeln!(out, "kept: {} of {}", data.records.len(), a.m)?;
    writeln!(out, "attempts: {}", rep.attempted)?;
    writeln!(out, "failures: {}", rep.failures)?;
    writeln!(out, "mean solve seconds: {mean:.3}")?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(!data.records.is_empty())
}

fn fit(a: TrainArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (file, p) = load(&a.common, a.semantics)?;
    let data = dataset::load(&a.data)?;
    data.check_problem(&p)?;
    if data.records.is_empty() {
        return Err(CliError::Input(format!("{} holds no records", a.data.display())));
    }
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(file.training.epochs),
        seed: a.seed.unwrap_or(file.training.seed),
        ..file.training.clone()
    };
    writeln!(out, "seed: {}", cfg.seed)?;
    let hidden = a.hidden.unwrap_or_else(|| file.model.hidden.clone());
    if hidden.is_empty() || hidden.contains(&0) {
        return Err(CliError::Usage("--hidden needs positive layer widths".into()));
    }
    let model = LstmModel::for_problem(&p, hidden, file.model.position_scale, file.model.seed);
    let samples = training_pairs(&model, &data, &p.scenario.connectivity)?;
    let (mut model, report) = train(model, &samples, &cfg)?;
    model.dataset_hash = Some(data.header.scenario_hash.clone());
    model.save(&a.out)?;
    let back = LstmModel::load(&a.out)?;
    if back != model {
        return Err(CliError::Input(format!("{} does not read back identically", a.out.display())));
    }
    if let Some(path) = &a.loss_out {
        let mut csv = String::from("epoch,loss\n");
        for (e, l) in report.loss_curve.iter().enumerate() {
            csv.push_str(&format!("{e},{l:?}\n"));
        }
        std::fs::write(path, csv)?;
    }
    let first = report.loss_curve.first().copied().unwrap_or(f64::NAN);
    let last = report.loss_curve.last().copied().unwrap_or(f64::NAN);
    writeln!(out, "records: {}", data.records.len())?;
    writeln!(out, "epochs: {}", cfg.epochs)?;
    writeln!(out, "loss: {first} -> {last}")?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(true)
}

/// Default seed for held-out initializations: distinct from the dataset's.
pub fn heldout_seed(sampler_seed: u64) -> u64 {
    sampler_seed.wrapping_add(1)
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (file, p) = load(&a.common, a.semantics)?;
    let model = LstmModel::load(&a.model)?;
    let expected = scenario_hash(&p);
    if model.dataset_hash.as_deref() != Some(expected.as_str()) {
        return Err(CliError::Input(format!(
            "model was trained for problem {}, scenario is {expected}",
            model.dataset_hash.as_deref().unwrap_or("<none>")
        )));
    }
    let base = file.sampler(None)?;
    let seed = a.seeded.seed.unwrap_or_else(|| heldout_seed(base.seed));
    writeln!(out, "seed: {seed}")?;
    let sampler = file.sampler(Some(seed))?;
    sampler.validate(&p)?;
    let inits: Vec<_> = derive_seeds(seed, a.inits).into_iter().map(|s| sampler.sample_with_seed(&p, s)).collect();
    let rep = evaluate(&model, &p, &inits)?;
    let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| v.to_string());
    writeln!(out, "runs: {}", rep.runs)?;
    writeln!(out, "successes: {}", rep.successes)?;
    writeln!(out, "successRate: {}", show(rep.success_rate))?;
    writeln!(out, "meanRobustness: {}", show(rep.mean_robustness))?;
    if !a.no_timing {
        writeln!(out, "meanInferenceSeconds: {}", show(rep.mean_inference_seconds))?;
    }
    if a.compare > 0 {
        let n = a.compare.min(inits.len());
        let seeds = derive_seeds(seed, a.inits);
        let mut ok = Vec::new();
        let mut seconds = 0.0;
        for i in 0..n {
            let q = p.with_initial_positions(inits[i].clone());
            let start = Instant::now();
            let r = synthesize(&q, Method::Hybrid, &file.pso, &file.refine, seeds[i])?;
            seconds += start.elapsed().as_secs_f64();
            if r.success {
                ok.push(r.robustness);
            }
        }
        let rnn_ok: Vec<f64> = rep.robustness[..n].iter().copied().filter(|&r| r >= p.eps_min).collect();
        writeln!(out, "method,runs,successRate,meanRobustness{}", if a.no_timing { "" } else { ",meanSeconds" })?;
        let mean = |v: &[f64]| if v.is_empty() { "n/a".into() } else { (v.iter().sum::<f64>() / v.len() as f64).to_string() };
        let rnn_secs = rep.mean_inference_seconds.unwrap_or(0.0);
        let opt_secs = seconds / n.max(1) as f64;
        let t = |s: f64| if a.no_timing { String::new() } else { format!(",{s}") };
        writeln!(out, "hybrid,{n},{},{}{}", ok.len() as f64 / n as f64, mean(&ok), t(opt_secs))?;
        writeln!(out, "rnn,{n},{},{}{}", rnn_ok.len() as f64 / n as f64, mean(&rnn_ok), t(rnn_secs))?;
        if !a.no_timing && rnn_secs > 0.0 {
            writeln!(out, "speedup: {:.0}x", opt_secs / rnn_secs)?;
        }
    }
    Ok(true)
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<bool, CliError> {
    let (file, p) = load(&a.common, None)?;
    let sampler = file.sampler(None)?;
    let seed = a.seeded.seed.unwrap_or(sampler.seed);
    writeln!(out, "seed: {seed}")?;
    let semantics = match a.semantics {
        BenchSemantics::Original => vec![CountingMode::Original],
        BenchSemantics::Counting => vec![CountingMode::Counting],
        BenchSemantics::Both => vec![CountingMode::Original, CountingMode::Counting],
    };
    let mut pso = file.pso.clone();
    if let Some(it) = a.iterations {
        pso.iterations = it;
    }
    let o = BenchOptions {
        runs: a.runs,
        methods: a.methods.clone(),
        semantics,
        pso,
        refine: file.refine.clone(),
        seed,
        jobs: a.seeded.jobs,
    };
    let rep = run_bench(&p, &sampler, &o)?;
    let csv = rep.to_csv(!a.no_timing);
    out.write_all(csv.as_bytes())?;
    if let Some(path) = &a.out {
        write_checked(path, &csv)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(true)
}

fn write_checked(path: &Path, csv: &str) -> Result<(), CliError> {
    std::fs::write(path, csv)?;
    let back = std::fs::read_to_string(path)?;
    if back != csv {
        return Err(CliError::Input(format!("{} does not read back identically", path.display())));
    }
    check_csv(&back).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Reads a controls file written by `synth`, for scripting.
pub fn load_controls(path: &Path) -> Result<ControlsFile, CliError> {
    let c: ControlsFile = read_json(path)?;
    c.sequence().map_err(CliError::Input)?;
    Ok(c)
}
