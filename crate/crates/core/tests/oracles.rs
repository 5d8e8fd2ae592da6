mod support;

use rand::Rng;
use strel_core::spatial::enumerate_routes;
use support::*;

#[test]
fn voronoi_neighbors_match_empty_circle_brute_force() {
    let mut r = rng(11);
    for case in 0..200 {
        let n = r.gen_range(3..=10);
        let pts = general_position_points(&mut r, n);
        assert_eq!(voronoi_pairs(&pts), brute_force_voronoi_pairs(&pts), "case {case}: {pts:?}");
    }
}

#[test]
fn route_enumeration_matches_naive_search() {
    let mut r = rng(12);
    for case in 0..200 {
        let n = r.gen_range(1..=8);
        let p = r.gen_range(0.1..0.9);
        let g = random_graph(&mut r, n, p);
        let start = r.gen_range(0..n);
        let cap = r.gen_range(1..=n);
        let routes = enumerate_routes(&g, start, cap);
        let got: Vec<Vec<usize>> = routes.iter().map(|r| r.nodes.clone()).collect();
        let mut sorted = got.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), got.len(), "case {case}: duplicate routes");
        let want: Vec<Vec<usize>> = naive_routes(&g, start, cap).into_iter().collect();
        assert_eq!(sorted, want, "case {case}");
    }
}
