//! Independent oracles and random instance generators shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strel_core::formula::{Cmp, DistanceFn, Formula, PredicateFn};
use strel_core::neuro::{loss_and_gradient, sequence_loss, LstmModel, Sample};
use strel_core::semantics::{qualitative_sat, soft_max, CountingMode, Monitor, SemanticsConfig};
use strel_core::spatial::{voronoi_neighbors, ConnectionGraph, TeamTrace};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- geometry

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`.
fn in_circle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let r = |p: [f64; 2]| [p[0] - d[0], p[1] - d[1], (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)];
    let (a, b, c) = (r(a), r(b), r(c));
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Points with no three nearly collinear and no four nearly cocircular.
pub fn general_position_points(rng: &mut impl Rng, n: usize) -> Vec<[f64; 2]> {
    'retry: loop {
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    if orient(pts[i], pts[j], pts[k]).abs() < 1e-3 {
                        continue 'retry;
                    }
                    for m in 0..n {
                        if m != i && m != j && m != k {
                            let (a, b, c) = ccw(pts[i], pts[j], pts[k]);
                            if in_circle(a, b, c, pts[m]).abs() < 1e-3 {
                                continue 'retry;
                            }
                        }
                    }
                }
            }
        }
        return pts;
    }
}

fn ccw(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], [f64; 2], [f64; 2]) {
    if orient(a, b, c) > 0.0 {
        (a, b, c)
    } else {
        (a, c, b)
    }
}

/// Delaunay edges by brute force: `(i, j)` is an edge when some triangle
/// `i, j, k` has an empty circumcircle. Voronoi cells are adjacent exactly
/// for these pairs.
pub fn brute_force_voronoi_pairs(pts: &[[f64; 2]]) -> BTreeSet<(usize, usize)> {
    let n = pts.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = ccw(pts[i], pts[j], pts[k]);
                let empty = (0..n).all(|m| m == i || m == j || m == k || in_circle(a, b, c, pts[m]) < 0.0);
                if empty {
                    edges.extend([(i, j), (i, k), (j, k)]);
                }
            }
        }
    }
    edges
}

pub fn voronoi_pairs(pts: &[[f64; 2]]) -> BTreeSet<(usize, usize)> {
    voronoi_neighbors(pts)
        .expect("valid point set")
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

// ------------------------------------------------------------------ graphs

pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> ConnectionGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    ConnectionGraph::from_edges(n, edges)
}

/// Simple paths from `start` with at most `cap` nodes, by plain recursion
/// over an adjacency matrix.
pub fn naive_routes(g: &ConnectionGraph, start: usize, cap: usize) -> BTreeSet<Vec<usize>> {
    let n = g.n_nodes();
    let flat = g.adjacency_matrix();
    let adj: Vec<Vec<bool>> = (0..n).map(|a| (0..n).map(|b| flat[a * n + b] != 0.0).collect()).collect();
    let mut out = BTreeSet::new();
    fn go(adj: &[Vec<bool>], path: &mut Vec<usize>, cap: usize, out: &mut BTreeSet<Vec<usize>>) {
        out.insert(path.clone());
        if path.len() == cap {
            return;
        }
        let last = *path.last().unwrap();
        for next in 0..adj.len() {
            if adj[last][next] && !path.contains(&next) {
                path.push(next);
                go(adj, path, cap, out);
                path.pop();
            }
        }
    }
    go(&adj, &mut vec![start], cap, &mut out);
    out
}

// ------------------------------------------------------------- formulas

pub const LABELS: [&str; 3] = ["a", "b", "c"];

/// Random formula of depth at most `depth` over attribute labels and 2-D
/// predicates, with temporal windows small enough to keep its horizon at
/// most `2 * (depth - 1)`.
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    let leaf = |rng: &mut dyn rand::RngCore| -> Formula {
        match rng.gen_range(0..5) {
            0 | 1 => Formula::atom(LABELS[rng.gen_range(0..LABELS.len())]),
            2 => Formula::Predicate {
                func: PredicateFn::DistTo(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]),
                cmp: if rng.gen_bool(0.5) { Cmp::Le } else { Cmp::Gt },
                threshold: rng.gen_range(0.2..1.5),
            },
            3 => Formula::Predicate {
                func: PredicateFn::MinPairDist,
                cmp: if rng.gen_bool(0.5) { Cmp::Le } else { Cmp::Gt },
                threshold: rng.gen_range(0.1..1.0),
            },
            _ => Formula::Predicate {
                func: PredicateFn::Coord(rng.gen_range(0..2)),
                cmp: if rng.gen_bool(0.5) { Cmp::Le } else { Cmp::Gt },
                threshold: rng.gen_range(-1.0..1.0),
            },
        }
    };
    if depth <= 1 || rng.gen_bool(0.2) {
        return leaf(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1);
    let mut r = ChaCha8Rng::seed_from_u64(rng.gen());
    let dist = |rng: &mut ChaCha8Rng| -> (DistanceFn, f64) {
        if rng.gen_bool(0.5) {
            (DistanceFn::Hops, [1.0, 1.5, 2.0, 3.0][rng.gen_range(0..4)])
        } else {
            (DistanceFn::Euclid, rng.gen_range(0.3..2.5))
        }
    };
    let window = |rng: &mut ChaCha8Rng| {
        let a = rng.gen_range(0..=2);
        (a, rng.gen_range(a..=2))
    };
    match r.gen_range(0..10) {
        0 => Formula::not(sub(&mut r)),
        1 => Formula::and(sub(&mut r), sub(&mut r)),
        2 => Formula::or(sub(&mut r), sub(&mut r)),
        3 => {
            let (a, b) = window(&mut r);
            Formula::eventually(a, b, sub(&mut r))
        }
        4 => {
            let (a, b) = window(&mut r);
            Formula::always(a, b, sub(&mut r))
        }
        5 => {
            let (a, b) = window(&mut r);
            Formula::until(a, b, sub(&mut r), sub(&mut r))
        }
        6 | 7 => {
            let (d, bound) = dist(&mut r);
            Formula::reach(d, bound, sub(&mut r), sub(&mut r))
        }
        8 => {
            let (d, bound) = dist(&mut r);
            Formula::escape(d, bound, sub(&mut r))
        }
        _ => {
            let (d, bound) = dist(&mut r);
            Formula::surround(d, bound, sub(&mut r), sub(&mut r))
        }
    }
}

pub struct Instance {
    pub trace: TeamTrace,
    pub graphs: Vec<ConnectionGraph>,
    pub formula: Formula,
}

/// A random team (`N ≤ max_agents`, 2-D) with per-step random graphs, and a
/// random formula whose horizon fits the trace.
pub fn random_instance(rng: &mut ChaCha8Rng, max_agents: usize, max_horizon: usize, max_depth: usize) -> Instance {
    let formula = random_formula(rng, max_depth);
    let n = rng.gen_range(1..=max_agents);
    let h = rng.gen_range(formula.horizon()..=max_horizon.max(formula.horizon()));
    let attrs: Vec<String> = (0..n).map(|_| LABELS[rng.gen_range(0..LABELS.len())].to_string()).collect();
    let positions: Vec<f64> = (0..n * 2 * (h + 1)).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let p = rng.gen_range(0.2..0.8);
    let graphs = (0..=h).map(|_| random_graph(rng, n, p)).collect();
    Instance {
        trace: TeamTrace::new(2, attrs, positions),
        graphs,
        formula,
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SoundnessStats {
    pub instances: usize,
    pub checked: usize,
    pub near_zero: usize,
    pub hops: usize,
    pub euclid: usize,
}

fn uses(f: &Formula, d: DistanceFn) -> bool {
    match f {
        Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => false,
        Formula::Not(g) | Formula::Eventually { body: g, .. } | Formula::Always { body: g, .. } => uses(g, d),
        Formula::Escape { dist, body, .. } => *dist == d || uses(body, d),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Until { lhs: l, rhs: r, .. } => uses(l, d) || uses(r, d),
        Formula::Reach { dist, lhs, rhs, .. } | Formula::Surround { dist, lhs, rhs, .. } => {
            *dist == d || uses(lhs, d) || uses(rhs, d)
        }
    }
}

/// Sign of the non-smooth robustness in `mode` against Boolean satisfaction,
/// for every agent of `count` random instances.
pub fn check_soundness(seed: u64, count: usize, mode: CountingMode) -> Result<SoundnessStats, String> {
    let mut rng = rng(seed);
    let mut stats = SoundnessStats::default();
    let cfg = SemanticsConfig {
        counting_mode: mode,
        smooth: false,
        ..Default::default()
    };
    for i in 0..count {
        let inst = random_instance(&mut rng, 5, 6, 4);
        assert!(inst.formula.depth() <= 4 && inst.trace.horizon() <= 6);
        stats.instances += 1;
        stats.hops += usize::from(uses(&inst.formula, DistanceFn::Hops));
        stats.euclid += usize::from(uses(&inst.formula, DistanceFn::Euclid));
        let m = Monitor::new(&inst.trace, &inst.graphs, cfg.clone()).map_err(|e| e.to_string())?;
        let values = m.agents(&inst.formula, 0).map_err(|e| e.to_string())?;
        for (l, &rho) in values.iter().enumerate() {
            if rho.abs() <= 1e-9 {
                stats.near_zero += 1;
                continue;
            }
            let sat = qualitative_sat(&inst.trace, &inst.graphs, &inst.formula, 0, l, &cfg).map_err(|e| e.to_string())?;
            if sat != (rho > 0.0) {
                return Err(format!(
                    "instance {i}, agent {l}: robustness {rho} but satisfied = {sat} for {}",
                    inst.formula
                ));
            }
            stats.checked += 1;
        }
    }
    Ok(stats)
}

// -------------------------------------------------------------- smoothing

/// Largest `|soft_max − max| − ln(n)/β` over random vectors; must be ≤ 0.
pub fn soft_max_bound_slack(seed: u64, count: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let n = rng.gen_range(1..=50);
        let beta = 10f64.powf(rng.gen_range(-1.0..3.0));
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let hard = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let err = (soft_max(&v, beta).unwrap() - hard).abs();
        worst = worst.max(err - (n as f64).ln() / beta - 1e-12 * hard.abs().max(1.0));
    }
    worst
}

/// Largest `|smooth − hard| − bound` of team and per-agent robustness over
/// random full evaluations; must be ≤ 0.
pub fn smooth_eval_bound_slack(seed: u64, count: usize) -> Result<f64, String> {
    let mut rng = rng(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let inst = random_instance(&mut rng, 5, 6, 4);
        let mode = if rng.gen_bool(0.5) {
            CountingMode::Counting
        } else {
            CountingMode::Original
        };
        let cfg = SemanticsConfig {
            beta: rng.gen_range(5.0..200.0),
            smooth: true,
            counting_mode: mode,
            ..Default::default()
        };
        let m = Monitor::new(&inst.trace, &inst.graphs, cfg.clone()).map_err(|e| e.to_string())?;
        let (soft, hard, stats) = m.team_with_stats(&inst.formula, 0).map_err(|e| e.to_string())?;
        let bound = stats.bound(cfg.beta);
        let tol = 1e-12;
        worst = worst.max((soft.team - hard.team).abs() - bound - tol);
        for (s, h) in soft.per_agent.iter().zip(&hard.per_agent) {
            worst = worst.max((s - h).abs() - bound - tol);
        }
    }
    Ok(worst)
}

// ------------------------------------------------------------------- LSTM

/// Largest relative error between back-propagated and central-difference
/// gradients of the sequence loss; denominators are floored at `1e-6`.
pub fn lstm_gradient_error(seed: u64, hidden: Vec<usize>, steps: usize) -> f64 {
    let mut rng = rng(seed);
    let (inp, out) = (3, 2);
    let mut model = LstmModel::new(inp, hidden, out, seed);
    model.output_scale = 0.7;
    let sample = Sample {
        inputs: (0..steps).map(|_| (0..inp).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        targets: (0..steps).map(|_| (0..out).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect(),
    };
    let (_, grad) = loss_and_gradient(&model, &sample).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..model.params.len() {
        let orig = model.params[i];
        model.params[i] = orig + h;
        let up = sequence_loss(&model, &sample).unwrap();
        model.params[i] = orig - h;
        let down = sequence_loss(&model, &sample).unwrap();
        model.params[i] = orig;
        let num = (up - down) / (2.0 * h);
        let err = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}
