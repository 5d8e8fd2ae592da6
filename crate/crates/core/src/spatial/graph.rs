use std::collections::VecDeque;

use super::{ConnectivityPolicy, SpatialError};

/// Undirected adjacency between agents at one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionGraph {
    neighbors: Vec<Vec<usize>>,
}

impl ConnectionGraph {
    pub fn empty(n: usize) -> Self {
        ConnectionGraph {
            neighbors: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from unordered pairs. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = ConnectionGraph::empty(n);
        for (a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
            if a != b && !g.neighbors[a].contains(&b) {
                g.neighbors[a].push(b);
                g.neighbors[b].push(a);
            }
        }
        for list in &mut g.neighbors {
            list.sort_unstable();
        }
        g
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// Neighbors of `l` in ascending order.
    pub fn neighbors(&self, l: usize) -> &[usize] {
        &self.neighbors[l]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Edges as `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&b| b > a).map(|&b| (a, b)));
        }
        out
    }

    /// Row-major 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut m = vec![0.0; n * n];
        for (a, list) in self.neighbors.iter().enumerate() {
            for &b in list {
                m[a * n + b] = 1.0;
            }
        }
        m
    }

    /// Shortest-path edge counts from `source`; `None` marks unreachable nodes.
    pub fn hops_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_nodes()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Number of edges on a shortest path, or `None` when unreachable.
pub fn hops(g: &ConnectionGraph, from: usize, to: usize) -> Option<usize> {
    g.hops_from(from)[to]
}

/// A simple path in a connection graph; `nodes[0]` is the start agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Route {
    pub nodes: Vec<usize>,
}

/// All simple paths starting at `start` with at most `max_len` nodes, in
/// lexicographic order. The single-node route `(start)` is always first.
pub fn enumerate_routes(g: &ConnectionGraph, start: usize, max_len: usize) -> Vec<Route> {
    assert!(max_len >= 1, "routes need at least one node");
    let mut out = Vec::new();
    let mut path = vec![start];
    let mut on_path = vec![false; g.n_nodes()];
    on_path[start] = true;
    extend_routes(g, max_len, &mut path, &mut on_path, &mut out);
    out
}

fn extend_routes(
    g: &ConnectionGraph,
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<Route>,
) {
    out.push(Route {
        nodes: path.clone(),
    });
    if path.len() == max_len {
        return;
    }
    let last = *path.last().expect("route is never empty");
    for &next in g.neighbors(last) {
        if !on_path[next] {
            on_path[next] = true;
            path.push(next);
            extend_routes(g, max_len, path, on_path, out);
            path.pop();
            on_path[next] = false;
        }
    }
}

/// Builds the connection graph for one team state (`positions` flattened
/// `[agent][axis]`). An edge needs `dist <= range`, and, when required,
/// adjacent Voronoi cells.
pub fn connection_graph(
    positions: &[f64],
    dim: usize,
    policy: &ConnectivityPolicy,
) -> Result<ConnectionGraph, SpatialError> {
    let n = positions.len() / dim;
    for l in 0..n {
        if positions[l * dim..(l + 1) * dim].iter().any(|x| !x.is_finite()) {
            return Err(SpatialError::NonFinite(l));
        }
    }
    let point = |l: usize| &positions[l * dim..(l + 1) * dim];
    let r2 = policy.range * policy.range;
    let in_range = |a: usize, b: usize| {
        let d2: f64 = point(a).iter().zip(point(b)).map(|(x, y)| (x - y) * (x - y)).sum();
        d2 <= r2
    };
    if !policy.require_voronoi {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if in_range(a, b) {
                    edges.push((a, b));
                }
            }
        }
        return Ok(ConnectionGraph::from_edges(n, edges));
    }
    if dim != 2 {
        return Err(SpatialError::UnsupportedDimension(dim));
    }
    if n < 2 {
        return Ok(ConnectionGraph::empty(n));
    }
    let pts: Vec<[f64; 2]> = (0..n).map(|l| [positions[2 * l], positions[2 * l + 1]]).collect();
    let edges = voronoi_neighbors(&pts)?
        .into_iter()
        .filter(|&(a, b)| in_range(a, b));
    Ok(ConnectionGraph::from_edges(n, edges))
}

/// Pairs of sites whose Voronoi cells touch, sorted `(a, b)` with `a < b`.
///
/// For each pair the perpendicular bisector is clipped against every other
/// site's half-plane; the cells touch when a non-empty piece survives. A
/// piece that shrinks to a single point (four or more cocircular sites)
/// still counts, matching the open-disk Delaunay rule. Collinear sites come
/// out as a chain of consecutive neighbors.
pub fn voronoi_neighbors(points: &[[f64; 2]]) -> Result<Vec<(usize, usize)>, SpatialError> {
    let n = points.len();
    if n < 2 {
        return Err(SpatialError::TooFewPoints(n));
    }
    for a in 0..n {
        for b in a + 1..n {
            if points[a] == points[b] {
                return Err(SpatialError::DuplicatePositions(a, b));
            }
        }
    }
    let mut out = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if bisector_survives(points, a, b) {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

fn bisector_survives(points: &[[f64; 2]], a: usize, b: usize) -> bool {
    let (pa, pb) = (points[a], points[b]);
    let mid = [(pa[0] + pb[0]) * 0.5, (pa[1] + pb[1]) * 0.5];
    // Direction of the bisector; |dir| = |pb - pa|.
    let dir = [-(pb[1] - pa[1]), pb[0] - pa[0]];
    let scale = dir[0] * dir[0] + dir[1] * dir[1];
    let eps = 1e-10 * scale;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let ra = (pa[0] - mid[0]).powi(2) + (pa[1] - mid[1]).powi(2);
    for (c, pc) in points.iter().enumerate() {
        if c == a || c == b {
            continue;
        }
        // |x(t) - pa|^2 <= |x(t) - pc|^2  <=>  slope * t <= rhs
        let slope = 2.0 * (dir[0] * (pc[0] - pa[0]) + dir[1] * (pc[1] - pa[1]));
        let rhs = (pc[0] - mid[0]).powi(2) + (pc[1] - mid[1]).powi(2) - ra;
        if slope.abs() <= eps {
            if rhs < -eps {
                return false;
            }
        } else if slope > 0.0 {
            hi = hi.min(rhs / slope);
        } else {
            lo = lo.max(rhs / slope);
        }
        if lo > hi + 1e-9 * (1.0 + lo.abs().min(hi.abs())) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ConnectionGraph {
        // Agents 1..7 in 0-based form: 1-3, 3-4, 3-2, 3-6, 2-5, 6-5; 7 isolated.
        ConnectionGraph::from_edges(7, [(0, 2), (2, 3), (2, 1), (2, 5), (1, 4), (5, 4)])
    }

    #[test]
    fn fixture_hops() {
        let g = fixture();
        assert_eq!(hops(&g, 1, 1), Some(0));
        assert_eq!(hops(&g, 1, 2), Some(1));
        assert_eq!(hops(&g, 0, 4), Some(3));
        assert_eq!(hops(&g, 0, 6), None);
    }

    #[test]
    fn isolated_node_has_only_trivial_route() {
        let g = fixture();
        assert_eq!(enumerate_routes(&g, 6, 7), vec![Route { nodes: vec![6] }]);
    }

    #[test]
    fn triangle_routes() {
        let g = ConnectionGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
        let routes: Vec<Vec<usize>> = enumerate_routes(&g, 0, 3).into_iter().map(|r| r.nodes).collect();
        assert_eq!(
            routes,
            vec![vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 2], vec![0, 2, 1]]
        );
        assert_eq!(enumerate_routes(&g, 0, 1).len(), 1);
        assert_eq!(enumerate_routes(&g, 0, 2).len(), 3);
    }

    #[test]
    fn two_points_are_neighbors() {
        assert_eq!(voronoi_neighbors(&[[0.0, 0.0], [1.0, 0.0]]).unwrap(), vec![(0, 1)]);
        let policy = ConnectivityPolicy {
            range: 2.0,
            require_voronoi: true,
        };
        let g = connection_graph(&[0.0, 0.0, 1.0, 0.0], 2, &policy).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        let g = connection_graph(&[0.0, 0.0, 3.0, 0.0], 2, &policy).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn triangle_is_its_own_triangulation() {
        let pts = [[0.0, 0.0], [2.0, 0.1], [0.7, 1.5]];
        assert_eq!(voronoi_neighbors(&pts).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn cocircular_square_keeps_both_diagonals() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let e = voronoi_neighbors(&pts).unwrap();
        assert_eq!(e, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn collinear_points_form_a_chain() {
        let pts = [[2.0, 2.0], [0.0, 0.0], [3.0, 3.0], [1.0, 1.0]];
        assert_eq!(voronoi_neighbors(&pts).unwrap(), vec![(0, 2), (0, 3), (1, 3)]);
    }

    #[test]
    fn a_blocking_site_removes_the_edge() {
        // Two sites straddle the segment between the outer pair.
        let pts = [[0.0, 0.0], [1.0, 0.3], [2.0, 0.0], [1.0, -0.3]];
        let e = voronoi_neighbors(&pts).unwrap();
        assert!(!e.contains(&(0, 2)));
    }

    #[test]
    fn errors() {
        assert_eq!(voronoi_neighbors(&[[0.0, 0.0]]), Err(SpatialError::TooFewPoints(1)));
        assert_eq!(
            voronoi_neighbors(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]),
            Err(SpatialError::DuplicatePositions(0, 2))
        );
        let policy = ConnectivityPolicy {
            range: 1.0,
            require_voronoi: false,
        };
        assert_eq!(
            connection_graph(&[0.0, f64::NAN], 2, &policy),
            Err(SpatialError::NonFinite(0))
        );
    }

    #[test]
    fn range_only_graph_respects_range() {
        let policy = ConnectivityPolicy {
            range: 1.5,
            require_voronoi: false,
        };
        let g = connection_graph(&[0.0, 0.0, 1.0, 0.0, 2.0, 0.0], 2, &policy).unwrap();
        assert_eq!(g.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(g.adjacency_matrix(), vec![0., 1., 0., 1., 0., 1., 0., 1., 0.]);
    }
}
