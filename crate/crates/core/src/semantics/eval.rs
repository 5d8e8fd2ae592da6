//! Bottom-up evaluator. Each formula node is evaluated once over a range of
//! steps for every agent, carrying a smooth and a hard value side by side.
//! Route counts, witnesses and agent counts always come from the hard
//! values, so smoothing only perturbs magnitudes.

use std::cell::Cell;

use super::soft::{sigma_ag, sigma_dist, sigma_routes, Lse};
use super::{
    check_inputs, euclid, predicate_value, CountingMode, RobustnessReport, SemanticsConfig, SemanticsError,
    ZeroRouteTie,
};
use crate::formula::{Cmp, DistanceFn, Formula};
use crate::spatial::{ConnectionGraph, TeamTrace};

/// Soft aggregations of two or more values performed by one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SoftStats {
    pub applications: usize,
    pub max_arity: usize,
}

impl SoftStats {
    /// `applications · ln(max_arity) / β`.
    pub fn bound(&self, beta: f64) -> f64 {
        if self.applications == 0 {
            0.0
        } else {
            self.applications as f64 * (self.max_arity as f64).ln() / beta
        }
    }
}

/// Longest chain of nested soft aggregations in a team evaluation of `f`.
pub fn soft_depth(f: &Formula, mode: CountingMode) -> usize {
    1 + node_depth(f, mode)
}

fn node_depth(f: &Formula, mode: CountingMode) -> usize {
    let gate = usize::from(mode == CountingMode::Counting);
    match f {
        Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => 0,
        Formula::Not(x) => node_depth(x, mode),
        Formula::And(a, b) | Formula::Or(a, b) => 1 + node_depth(a, mode).max(node_depth(b, mode)),
        Formula::Eventually { body, .. } | Formula::Always { body, .. } => 1 + node_depth(body, mode),
        Formula::Until { lhs, rhs, .. } => 2 + node_depth(lhs, mode).max(node_depth(rhs, mode)),
        Formula::Reach { lhs, rhs, .. } => 3 + gate + node_depth(lhs, mode).max(node_depth(rhs, mode)),
        Formula::Escape { body, .. } => 3 + gate + node_depth(body, mode),
        Formula::Surround { .. } => node_depth(&f.expand_surround(Default::default()), mode),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct V {
    s: f64,
    h: f64,
}

impl V {
    fn exact(x: f64) -> V {
        V { s: x, h: x }
    }

    fn neg(self) -> V {
        V { s: -self.s, h: -self.h }
    }

    fn scale(self, c: f64) -> V {
        V {
            s: c * self.s,
            h: c * self.h,
        }
    }
}

/// Running min or max of `V`s.
#[derive(Debug, Clone, Copy)]
struct Agg {
    is_max: bool,
    smooth: bool,
    hard: f64,
    lse: Lse,
    n: usize,
}

impl Agg {
    fn push(&mut self, v: V) {
        self.n += 1;
        if self.is_max {
            self.hard = self.hard.max(v.h);
            if self.smooth {
                self.lse.push(v.s);
            }
        } else {
            self.hard = self.hard.min(v.h);
            if self.smooth {
                self.lse.push(-v.s);
            }
        }
    }

    fn with(mut self, v: V) -> Agg {
        self.push(v);
        self
    }
}

/// Values of one formula node for steps `lo..` and every agent.
struct Table {
    lo: usize,
    n: usize,
    vals: Vec<V>,
}

impl Table {
    fn at(&self, k: usize, l: usize) -> V {
        self.vals[(k - self.lo) * self.n + l]
    }

    fn row(&self, k: usize) -> &[V] {
        let i = (k - self.lo) * self.n;
        &self.vals[i..i + self.n]
    }
}

/// A trace, its connection graphs and a semantics configuration, ready to
/// answer robustness queries.
pub struct Monitor<'a> {
    trace: &'a TeamTrace,
    graphs: &'a [ConnectionGraph],
    cfg: SemanticsConfig,
    stats: Cell<SoftStats>,
}

impl<'a> Monitor<'a> {
    pub fn new(
        trace: &'a TeamTrace,
        graphs: &'a [ConnectionGraph],
        cfg: SemanticsConfig,
    ) -> Result<Self, SemanticsError> {
        cfg.validate()?;
        super::check_graphs(trace, graphs)?;
        Ok(Monitor {
            trace,
            graphs,
            cfg,
            stats: Cell::new(SoftStats::default()),
        })
    }

    pub fn config(&self) -> &SemanticsConfig {
        &self.cfg
    }

    /// Robustness of agent `l` at step `k` (smooth when configured).
    pub fn agent(&self, f: &Formula, k: usize, l: usize) -> Result<f64, SemanticsError> {
        check_inputs(self.trace, self.graphs, f, k, Some(l))?;
        Ok(self.value(self.top(f, k).at(k, l)))
    }

    /// Robustness of every agent at step `k`.
    pub fn agents(&self, f: &Formula, k: usize) -> Result<Vec<f64>, SemanticsError> {
        check_inputs(self.trace, self.graphs, f, k, None)?;
        Ok(self.top(f, k).row(k).iter().map(|&v| self.value(v)).collect())
    }

    pub fn team(&self, f: &Formula, k: usize) -> Result<RobustnessReport, SemanticsError> {
        self.team_with_stats(f, k).map(|(r, _, _)| r)
    }

    /// Team report, the same report from hard values only, and the soft-op
    /// statistics of this evaluation.
    pub fn team_with_stats(
        &self,
        f: &Formula,
        k: usize,
    ) -> Result<(RobustnessReport, RobustnessReport, SoftStats), SemanticsError> {
        check_inputs(self.trace, self.graphs, f, k, None)?;
        self.stats.set(SoftStats::default());
        let table = self.top(f, k);
        let row = table.row(k);
        let ag_plus = row.iter().filter(|v| v.h > 0.0).count();
        let ag_minus = row.len() - ag_plus;
        let mut acc = self.agg(false);
        for &v in row {
            acc.push(v);
        }
        let min = self.finish(&acc);
        let sigma = match self.cfg.counting_mode {
            CountingMode::Original => 1.0,
            CountingMode::Counting => sigma_ag(ag_plus, ag_minus, self.cfg.k_ag, self.cfg.flip_ag_sign),
        };
        let team = min.scale(sigma);
        let report = |pick: fn(&V) -> f64| RobustnessReport {
            per_agent: row.iter().map(pick).collect(),
            team: pick(&team),
            sigma_ag: sigma,
            ag_plus,
            ag_minus,
        };
        let smooth = if self.cfg.smooth { report(|v| v.s) } else { report(|v| v.h) };
        Ok((smooth, report(|v| v.h), self.stats.get()))
    }

    fn top(&self, f: &Formula, k: usize) -> Table {
        if f.contains_surround() {
            self.eval(&f.expand_surround(self.cfg.surround_variant), k, k)
        } else {
            self.eval(f, k, k)
        }
    }

    fn value(&self, v: V) -> f64 {
        if self.cfg.smooth {
            v.s
        } else {
            v.h
        }
    }

    fn agg(&self, is_max: bool) -> Agg {
        Agg {
            is_max,
            smooth: self.cfg.smooth,
            hard: if is_max { f64::NEG_INFINITY } else { f64::INFINITY },
            lse: Lse::new(self.cfg.beta),
            n: 0,
        }
    }

    fn finish(&self, a: &Agg) -> V {
        if !self.cfg.smooth {
            return V::exact(a.hard);
        }
        debug_assert_eq!(a.lse.count(), a.n);
        if a.n >= 2 {
            let mut st = self.stats.get();
            st.applications += 1;
            st.max_arity = st.max_arity.max(a.n);
            self.stats.set(st);
        }
        let s = a.lse.value();
        V {
            s: if a.is_max { s } else { -s },
            h: a.hard,
        }
    }

    fn pair(&self, x: V, y: V, is_max: bool) -> V {
        self.finish(&self.agg(is_max).with(x).with(y))
    }

    fn eval(&self, f: &Formula, lo: usize, hi: usize) -> Table {
        let n = self.trace.n_agents();
        let mut vals = Vec::with_capacity((hi - lo + 1) * n);
        match f {
            Formula::True => vals.resize((hi - lo + 1) * n, V::exact(self.cfg.rho_max)),
            Formula::Atom(label) => {
                for _ in lo..=hi {
                    for a in &self.trace.attributes {
                        let r = if a == label { self.cfg.rho_max } else { -self.cfg.rho_max };
                        vals.push(V::exact(r));
                    }
                }
            }
            Formula::Predicate { func, cmp, threshold } => {
                for k in lo..=hi {
                    for l in 0..n {
                        let g = predicate_value(self.trace, func, k, l);
                        let r = match cmp {
                            Cmp::Le => threshold - g,
                            Cmp::Gt => g - threshold,
                        };
                        vals.push(V::exact(r));
                    }
                }
            }
            Formula::Not(x) => {
                let t = self.eval(x, lo, hi);
                vals.extend(t.vals.iter().map(|v| v.neg()));
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let is_max = matches!(f, Formula::Or(..));
                let (ta, tb) = (self.eval(a, lo, hi), self.eval(b, lo, hi));
                for (&x, &y) in ta.vals.iter().zip(&tb.vals) {
                    vals.push(self.pair(x, y, is_max));
                }
            }
            Formula::Eventually { a, b, body } | Formula::Always { a, b, body } => {
                let is_max = matches!(f, Formula::Eventually { .. });
                let t = self.eval(body, lo + a, hi + b);
                for k in lo..=hi {
                    for l in 0..n {
                        let mut acc = self.agg(is_max);
                        for j in k + a..=k + b {
                            acc.push(t.at(j, l));
                        }
                        vals.push(self.finish(&acc));
                    }
                }
            }
            Formula::Until { a, b, lhs, rhs } => {
                let t1 = self.eval(lhs, lo, hi + b);
                let t2 = self.eval(rhs, lo + a, hi + b);
                for k in lo..=hi {
                    for l in 0..n {
                        let mut prefix = self.agg(false);
                        let mut outer = self.agg(true);
                        for j in k..=k + b {
                            prefix.push(t1.at(j, l));
                            if j >= k + a {
                                outer.push(self.finish(&prefix.with(t2.at(j, l))));
                            }
                        }
                        vals.push(self.finish(&outer));
                    }
                }
            }
            Formula::Reach { dist, bound, lhs, rhs } => {
                let t1 = self.eval(lhs, lo, hi);
                let t2 = self.eval(rhs, lo, hi);
                for k in lo..=hi {
                    for l in 0..n {
                        vals.push(self.spatial(k, l, *dist, *bound, t1.row(k), Some(t2.row(k))));
                    }
                }
            }
            Formula::Escape { dist, bound, body } => {
                let t = self.eval(body, lo, hi);
                for k in lo..=hi {
                    for l in 0..n {
                        vals.push(self.spatial(k, l, *dist, *bound, t.row(k), None));
                    }
                }
            }
            Formula::Surround { .. } => {
                return self.eval(&f.expand_surround(self.cfg.surround_variant), lo, hi);
            }
        }
        Table { lo, n, vals }
    }

    /// Reach (`goal` given) or escape (`goal` absent) from agent `l` at step `k`.
    fn spatial(&self, k: usize, l: usize, dist: DistanceFn, bound: f64, path: &[V], goal: Option<&[V]>) -> V {
        let g = &self.graphs[k];
        let n = g.n_nodes();
        let dists: Vec<f64> = match dist {
            DistanceFn::Hops => g
                .hops_from(l)
                .into_iter()
                .map(|h| h.map_or(f64::INFINITY, |h| h as f64))
                .collect(),
            DistanceFn::Euclid => (0..n)
                .map(|j| euclid(self.trace.position(k, l), self.trace.position(k, j)))
                .collect(),
        };
        let mut walk = Walk {
            m: self,
            g,
            dists: &dists,
            bound,
            path,
            goal,
            cap: self.cfg.route_cap(n),
            visited: vec![false; n],
            routes: self.agg(true),
            r_plus: 0,
            r_minus: 0,
            witness: None,
        };
        walk.visit(l, 0, None, self.agg(true));
        let val = self.finish(&walk.routes);
        match self.cfg.counting_mode {
            CountingMode::Original => val,
            CountingMode::Counting => {
                let sr = sigma_routes(walk.r_plus, walk.r_minus, self.cfg.k_routes);
                let star = walk.witness.map_or(l, |(_, j)| j);
                let d_norm = normalized_distance(dists[star], dist, bound);
                let gate = sigma_dist(d_norm, goal.is_some(), self.cfg.k_dist);
                self.pair(val.scale(sr), V::exact(gate), false)
            }
        }
    }
}

/// `f / d`, except that hop counts are measured against the midpoint
/// `⌊d⌋ + ½` between the last admitted and the first excluded hop count, so
/// a witness exactly `d` hops away is not gated to zero.
fn normalized_distance(f: f64, dist: DistanceFn, bound: f64) -> f64 {
    let boundary = match dist {
        DistanceFn::Hops => bound.floor() + 0.5,
        DistanceFn::Euclid => bound,
    };
    if boundary > 0.0 {
        f / boundary
    } else if f == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Depth-first walk over the simple routes from one agent.
struct Walk<'m, 'a> {
    m: &'m Monitor<'a>,
    g: &'m ConnectionGraph,
    dists: &'m [f64],
    bound: f64,
    /// Values that must hold along the route before the target.
    path: &'m [V],
    /// Target values for reach; `None` for escape.
    goal: Option<&'m [V]>,
    cap: usize,
    visited: Vec<bool>,
    routes: Agg,
    r_plus: usize,
    r_minus: usize,
    /// Best hard candidate so far and the agent carrying it.
    witness: Option<(f64, usize)>,
}

impl Walk<'_, '_> {
    /// `before` holds the path values of the route nodes preceding `node`;
    /// `best` the candidates met so far on this route.
    fn visit(&mut self, node: usize, depth: usize, before: Option<Agg>, best: Agg) {
        let m = self.m;
        let d = self.dists[node];
        let candidate = match self.goal {
            // The start agent must satisfy the path formula even when it is
            // the target itself.
            Some(goal) if d <= self.bound => {
                let start = before.unwrap_or_else(|| m.agg(false).with(self.path[node]));
                Some(m.finish(&start.with(goal[node])))
            }
            None if d > self.bound => before.map(|b| m.finish(&b)),
            _ => None,
        };
        let mut best = best;
        if let Some(c) = candidate {
            best.push(c);
            if self.witness.is_none_or(|(w, _)| c.h > w) {
                self.witness = Some((c.h, node));
            }
        }
        let rho = if best.n == 0 {
            V::exact(-m.cfg.rho_max)
        } else {
            m.finish(&best)
        };
        let satisfied = rho.h > 0.0 || (rho.h == 0.0 && m.cfg.zero_route_tie == ZeroRouteTie::Satisfying);
        if satisfied {
            self.r_plus += 1;
        } else {
            self.r_minus += 1;
        }
        self.routes.push(rho);

        if depth + 1 < self.cap {
            let through = before.unwrap_or_else(|| m.agg(false)).with(self.path[node]);
            self.visited[node] = true;
            for &next in self.g.neighbors(node) {
                if !self.visited[next] {
                    self.visit(next, depth + 1, Some(through), best);
                }
            }
            self.visited[node] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::formula::parse;

    /// Seven agents on a line graph fixture, 0-based: edges 0-2, 2-3, 2-1,
    /// 2-5, 1-4, 5-4; agent 6 isolated.
    fn fixture() -> (TeamTrace, Vec<ConnectionGraph>) {
        let attrs = ["blue", "black", "red", "black", "red", "red", "blue"];
        let state: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, 0.0]).collect();
        let trace = TeamTrace::constant(2, attrs.iter().map(|s| s.to_string()).collect(), &state, 0);
        let g = ConnectionGraph::from_edges(7, [(0, 2), (2, 3), (2, 1), (2, 5), (1, 4), (5, 4)]);
        (trace, vec![g])
    }

    #[test]
    fn reach_fixture_values() {
        let (trace, graphs) = fixture();
        let f = parse("black R{hops <= 1} red").unwrap();
        let m = Monitor::new(&trace, &graphs, SemanticsConfig::original()).unwrap();
        let v = m.agents(&f, 0).unwrap();
        // Black agents adjacent to a red one; everyone else fails at the start.
        assert_eq!(v, vec![-1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn escape_without_candidates_is_bottom() {
        let (trace, graphs) = fixture();
        let f = parse("E{hops > 2} red").unwrap();
        let m = Monitor::new(&trace, &graphs, SemanticsConfig::original()).unwrap();
        assert_eq!(m.agent(&f, 0, 6).unwrap(), -1.0);
    }

    #[test]
    fn negation_is_exact_in_hard_mode() {
        let (trace, graphs) = fixture();
        let f = parse("(black R{hops <= 2} red) & E{euclid > 1.5} !blue").unwrap();
        let nf = Formula::not(f.clone());
        let m = Monitor::new(&trace, &graphs, SemanticsConfig::default()).unwrap();
        let a = m.agents(&f, 0).unwrap();
        let b = m.agents(&nf, 0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn more_satisfying_routes_score_higher() {
        // Agent 0 reaches red agent 3 around a diamond, agent 4 reaches red
        // agent 6 along a single path.
        let attrs = ["black", "black", "black", "red", "black", "black", "red"];
        let state: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, 0.0]).collect();
        let trace = TeamTrace::constant(2, attrs.iter().map(|s| s.to_string()).collect(), &state, 0);
        let g = ConnectionGraph::from_edges(7, [(0, 1), (0, 2), (1, 3), (2, 3), (4, 5), (5, 6)]);
        let graphs = vec![g];
        let f = parse("black R{hops <= 3} red").unwrap();
        let orig = Monitor::new(&trace, &graphs, SemanticsConfig::original()).unwrap();
        assert_eq!(orig.agent(&f, 0, 0).unwrap(), 1.0);
        assert_eq!(orig.agent(&f, 0, 4).unwrap(), 1.0);
        let cnt = Monitor::new(&trace, &graphs, SemanticsConfig::default()).unwrap();
        let (a, b) = (cnt.agent(&f, 0, 0).unwrap(), cnt.agent(&f, 0, 4).unwrap());
        assert!(a > b && b > 0.0);
        // Four of seven routes from agent 0 succeed, one of three from agent 4.
        let gate = sigma_dist(2.0 / 3.5, true, 2.0);
        assert!((a - sigma_routes(4, 3, 1.0).min(gate)).abs() < 1e-15);
        assert!((b - sigma_routes(1, 2, 1.0).min(gate)).abs() < 1e-15);
    }

    #[test]
    fn smooth_error_respects_depth_bound() {
        let (trace, graphs) = fixture();
        let cfg = SemanticsConfig {
            smooth: true,
            beta: 20.0,
            ..Default::default()
        };
        let f = parse("G[0,0] ((black R{hops <= 2} red) | E{hops > 1} !blue)").unwrap();
        let m = Monitor::new(&trace, &graphs, cfg.clone()).unwrap();
        let (s, h, st) = m.team_with_stats(&f, 0).unwrap();
        let depth = soft_depth(&f, cfg.counting_mode) as f64;
        let tight = depth * (st.max_arity as f64).ln() / cfg.beta;
        assert!((s.team - h.team).abs() <= tight + 1e-12);
        assert!(tight <= st.bound(cfg.beta));
        assert!(st.applications > 0);
    }

    #[test]
    fn surround_is_expanded() {
        let (trace, graphs) = fixture();
        let f = parse("blue O{hops <= 2} red").unwrap();
        let m = Monitor::new(&trace, &graphs, SemanticsConfig::original()).unwrap();
        let v = m.agents(&f, 0).unwrap();
        assert!(v[0] > 0.0);
        assert!(v[6] < 0.0);
    }
}
