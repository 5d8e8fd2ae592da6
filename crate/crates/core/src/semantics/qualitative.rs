//! Direct recursive Boolean semantics. Deliberately independent of the
//! quantitative evaluator: it enumerates routes explicitly.

use super::{euclid, predicate_value};
use crate::formula::{Cmp, DistanceFn, Formula};
use crate::spatial::{enumerate_routes, hops, ConnectionGraph, TeamTrace};

pub(crate) fn sat(trace: &TeamTrace, graphs: &[ConnectionGraph], f: &Formula, k: usize, l: usize, cap: usize) -> bool {
    let rec = |g: &Formula, k: usize, l: usize| sat(trace, graphs, g, k, l, cap);
    match f {
        Formula::True => true,
        Formula::Atom(label) => trace.attributes[l] == *label,
        Formula::Predicate { func, cmp, threshold } => {
            let g = predicate_value(trace, func, k, l);
            match cmp {
                Cmp::Le => g <= *threshold,
                Cmp::Gt => g > *threshold,
            }
        }
        Formula::Not(x) => !rec(x, k, l),
        Formula::And(a, b) => rec(a, k, l) && rec(b, k, l),
        Formula::Or(a, b) => rec(a, k, l) || rec(b, k, l),
        Formula::Eventually { a, b, body } => (k + a..=k + b).any(|j| rec(body, j, l)),
        Formula::Always { a, b, body } => (k + a..=k + b).all(|j| rec(body, j, l)),
        Formula::Until { a, b, lhs, rhs } => {
            (k + a..=k + b).any(|j| rec(rhs, j, l) && (k..=j).all(|i| rec(lhs, i, l)))
        }
        Formula::Reach { dist, bound, lhs, rhs } => {
            let g = &graphs[k];
            enumerate_routes(g, l, cap).iter().any(|route| {
                let nodes = &route.nodes;
                rec(lhs, k, nodes[0])
                    && (0..nodes.len()).any(|i| {
                        distance(trace, g, *dist, k, l, nodes[i]) <= *bound
                            && rec(rhs, k, nodes[i])
                            && nodes[..i].iter().all(|&j| rec(lhs, k, j))
                    })
            })
        }
        Formula::Escape { dist, bound, body } => {
            let g = &graphs[k];
            enumerate_routes(g, l, cap).iter().any(|route| {
                let nodes = &route.nodes;
                (1..nodes.len()).any(|i| {
                    distance(trace, g, *dist, k, l, nodes[i]) > *bound && nodes[..i].iter().all(|&j| rec(body, k, j))
                })
            })
        }
        Formula::Surround { .. } => rec(&f.expand_surround(Default::default()), k, l),
    }
}

fn distance(trace: &TeamTrace, g: &ConnectionGraph, dist: DistanceFn, k: usize, a: usize, b: usize) -> f64 {
    match dist {
        DistanceFn::Hops => hops(g, a, b).map_or(f64::INFINITY, |h| h as f64),
        DistanceFn::Euclid => euclid(trace.position(k, a), trace.position(k, b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn fixture() -> (TeamTrace, Vec<ConnectionGraph>) {
        let attrs = ["blue", "black", "red", "black", "red", "red", "blue"];
        let state: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, 0.0]).collect();
        let trace = TeamTrace::constant(2, attrs.iter().map(|s| s.to_string()).collect(), &state, 0);
        let g = ConnectionGraph::from_edges(7, [(0, 2), (2, 3), (2, 1), (2, 5), (1, 4), (5, 4)]);
        (trace, vec![g])
    }

    #[test]
    fn reach_on_fixture() {
        let (trace, graphs) = fixture();
        let f = parse("black R{hops <= 1} red").unwrap();
        let got: Vec<bool> = (0..7).map(|l| sat(&trace, &graphs, &f, 0, l, 7)).collect();
        assert_eq!(got, vec![false, true, false, true, false, false, false]);
    }

    #[test]
    fn surround_on_fixture() {
        let (trace, graphs) = fixture();
        let f = parse("blue O{hops <= 2} red").unwrap();
        assert!(sat(&trace, &graphs, &f, 0, 0, 7));
        assert!(!sat(&trace, &graphs, &f, 0, 6, 7));
    }

    #[test]
    fn until_needs_lhs_through_witness() {
        let trace = TeamTrace::new(1, vec!["a".into()], vec![1.0, 1.0, -1.0, 5.0]);
        let graphs = vec![ConnectionGraph::empty(1); 4];
        let f = parse("coord(0) > 0 U[0,3] coord(0) > 4").unwrap();
        assert!(!sat(&trace, &graphs, &f, 0, 0, 1));
        let f = parse("coord(0) > -2 U[0,3] coord(0) > 4").unwrap();
        assert!(sat(&trace, &graphs, &f, 0, 0, 1));
    }
}
