//! Agent network topologies and combination matrices.
//!
//! A topology is an undirected graph over `N` agents; the neighborhood of
//! node `k` always includes `k` itself, which keeps the self-weight of every
//! combination rule positive. Combination matrices are left-stochastic
//! (every column sums to one) and supported on the graph; the Metropolis
//! rule additionally yields a symmetric doubly stochastic matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Retry budget for the random-geometric generator before giving up on
/// drawing a connected graph.
const GEOMETRIC_RETRY_BUDGET: usize = 1000;

/// An undirected agent graph. Adjacency is symmetric and carries no self
/// loops; self-inclusion is handled by [`NetworkTopology::neighbors`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n_nodes: usize,
    adjacency: Vec<bool>,
    positions: Option<Vec<(f64, f64)>>,
}

impl NetworkTopology {
    /// Build a topology from an undirected edge list. Self loops are
    /// rejected; duplicate edges collapse.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Topology("need at least one node".into()));
        }
        let mut adjacency = vec![false; n_nodes * n_nodes];
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::Topology(format!("self loop at node {a}")));
            }
            adjacency[a * n_nodes + b] = true;
            adjacency[b * n_nodes + a] = true;
        }
        Ok(Self {
            n_nodes,
            adjacency,
            positions: None,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Node coordinates in the unit square, when the topology was generated
    /// geometrically or imported with attributes.
    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.adjacency[a * self.n_nodes + b]
    }

    /// Neighbor set of `k` including `k` itself, sorted ascending.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_nodes).filter(|&l| self.has_edge(l, k)).collect();
        out.push(k);
        out.sort_unstable();
        out
    }

    /// Neighborhood size `n_k = |N_k|`, counting the self-inclusion.
    pub fn degree(&self, k: usize) -> usize {
        1 + (0..self.n_nodes).filter(|&l| self.has_edge(l, k)).count()
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(k) = queue.pop_front() {
            for l in 0..self.n_nodes {
                if self.has_edge(k, l) && !seen[l] {
                    seen[l] = true;
                    visited += 1;
                    queue.push_back(l);
                }
            }
        }
        visited == self.n_nodes
    }

    /// All undirected edges `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.n_nodes {
            for b in a + 1..self.n_nodes {
                if self.has_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Draw nodes uniformly in the unit square and connect pairs within
/// `radius`. Draws are repeated (bounded retries) until the graph is
/// connected; the result is deterministic in `(n, radius, seed)`.
pub fn random_geometric_topology(n: usize, radius: f64, seed: u64) -> Result<NetworkTopology> {
    if n == 0 {
        return Err(Error::Topology("need at least one node".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Topology(format!("radius must be positive, got {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GEOMETRIC_RETRY_BUDGET {
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let mut adjacency = vec![false; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let (dx, dy) = (positions[a].0 - positions[b].0, positions[a].1 - positions[b].1);
                if (dx * dx + dy * dy).sqrt() <= radius {
                    adjacency[a * n + b] = true;
                    adjacency[b * n + a] = true;
                }
            }
        }
        let topo = NetworkTopology {
            n_nodes: n,
            adjacency,
            positions: Some(positions),
        };
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(Error::Topology(format!(
        "no connected geometric graph with n={n}, radius={radius} within {GEOMETRIC_RETRY_BUDGET} draws"
    )))
}

/// Left-stochastic combination weights `a_lk` supported on the graph:
/// `a_lk = 0` off the neighborhood, `a_lk > 0` on it, and every column sums
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    n: usize,
    a: Vec<f64>,
}

impl CombinationMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut a = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "combination matrix rows",
                    expected: n,
                    got: row.len(),
                });
            }
            a.extend_from_slice(row);
        }
        Ok(Self { n, a })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Weight `a_lk` that node `k` assigns to neighbor `l`.
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.a[l * self.n + k]
    }

    fn set(&mut self, l: usize, k: usize, v: f64) {
        self.a[l * self.n + k] = v;
    }
}

/// Metropolis combination weights: `a_lk = 1 / max(n_k, n_l)` for a
/// neighbor `l != k` (neighborhood sizes count the self-inclusion) and the
/// diagonal absorbs the remainder. Symmetric and doubly stochastic for any
/// topology.
pub fn metropolis_weights(topology: &NetworkTopology) -> CombinationMatrix {
    let n = topology.n_nodes();
    let degrees: Vec<usize> = (0..n).map(|k| topology.degree(k)).collect();
    let mut a = CombinationMatrix { n, a: vec![0.0; n * n] };
    for k in 0..n {
        let mut off_diagonal = 0.0;
        for l in 0..n {
            if topology.has_edge(l, k) {
                let w = 1.0 / degrees[k].max(degrees[l]) as f64;
                a.set(l, k, w);
                off_diagonal += w;
            }
        }
        a.set(k, k, 1.0 - off_diagonal);
    }
    a
}

/// A single violated combination-weight condition.
#[derive(Debug, Clone, PartialEq)]
pub enum CombinationViolation {
    /// Nonzero weight outside the neighborhood.
    SupportOutsideNeighborhood { l: usize, k: usize, value: f64 },
    /// Non-positive weight on a neighborhood member.
    NonPositiveWeight { l: usize, k: usize, value: f64 },
    /// Column `k` does not sum to one.
    ColumnSum { k: usize, sum: f64 },
}

impl std::fmt::Display for CombinationViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::SupportOutsideNeighborhood { l, k, value } => {
                write!(f, "a[{l}][{k}] = {value} but {l} is not a neighbor of {k}")
            }
            Self::NonPositiveWeight { l, k, value } => {
                write!(f, "a[{l}][{k}] = {value} must be positive on the neighborhood")
            }
            Self::ColumnSum { k, sum } => {
                write!(f, "column {k} sums to {sum}, expected 1")
            }
        }
    }
}

/// Outcome of checking a combination matrix against a topology.
#[derive(Debug, Clone, Default)]
pub struct CombinationReport {
    pub violations: Vec<CombinationViolation>,
}

impl CombinationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const COLUMN_SUM_TOL: f64 = 1e-12;

/// Check all three combination-weight conditions; the report lists every
/// violation with its indices.
pub fn validate_combination(a: &CombinationMatrix, topology: &NetworkTopology) -> CombinationReport {
    let n = topology.n_nodes();
    let mut report = CombinationReport::default();
    if a.n_nodes() != n {
        report.violations.push(CombinationViolation::ColumnSum {
            k: usize::MAX,
            sum: f64::NAN,
        });
        return report;
    }
    for k in 0..n {
        let mut sum = 0.0;
        for l in 0..n {
            let value = a.get(l, k);
            sum += value;
            let in_neighborhood = l == k || topology.has_edge(l, k);
            if in_neighborhood {
                if value <= 0.0 {
                    report
                        .violations
                        .push(CombinationViolation::NonPositiveWeight { l, k, value });
                }
            } else if value != 0.0 {
                report
                    .violations
                    .push(CombinationViolation::SupportOutsideNeighborhood { l, k, value });
            }
        }
        if (sum - 1.0).abs() > COLUMN_SUM_TOL {
            report.violations.push(CombinationViolation::ColumnSum { k, sum });
        }
    }
    report
}

/// Kronecker product `A (x) I_m`: the `NM x NM` network operator acting on
/// stacked per-node vectors of length `m`. Returned row-major.
pub fn lift_combination(a: &CombinationMatrix, m: usize) -> Vec<Vec<f64>> {
    let n = a.n_nodes();
    let dim = n * m;
    let mut out = vec![vec![0.0; dim]; dim];
    for bl in 0..n {
        for bk in 0..n {
            let w = a.a[bl * n + bk];
            if w != 0.0 {
                for i in 0..m {
                    out[bl * m + i][bk * m + i] = w;
                }
            }
        }
    }
    out
}

/// Serialize the edge list as CSV (`node_a,node_b`) plus a node-attribute
/// CSV (`node,x,y`; coordinate columns are empty when the topology has no
/// embedding).
pub fn export_topology(topology: &NetworkTopology) -> (String, String) {
    let mut edges = String::from("node_a,node_b\n");
    for (a, b) in topology.edges() {
        edges.push_str(&format!("{a},{b}\n"));
    }
    let mut nodes = String::from("node,x,y\n");
    for k in 0..topology.n_nodes() {
        match topology.positions() {
            Some(p) => nodes.push_str(&format!("{k},{},{}\n", p[k].0, p[k].1)),
            None => nodes.push_str(&format!("{k},,\n")),
        }
    }
    (edges, nodes)
}

/// Rebuild a topology from the CSV pair written by [`export_topology`]. The
/// node file fixes the node count (isolated nodes included); positions are
/// restored when both coordinate columns are present.
pub fn import_topology(edges_csv: &str, nodes_csv: &str) -> Result<NetworkTopology> {
    let parse_err = |line: &str, what: &str| Error::Topology(format!("bad {what} row: {line:?}"));
    let mut n_nodes = 0usize;
    let mut positions = Vec::new();
    let mut all_positioned = true;
    for (i, line) in nodes_csv.lines().enumerate() {
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(line, "node"));
        }
        let node: usize = fields[0].trim().parse().map_err(|_| parse_err(line, "node"))?;
        n_nodes = n_nodes.max(node + 1);
        if fields[1].trim().is_empty() || fields[2].trim().is_empty() {
            all_positioned = false;
            positions.push((0.0, 0.0));
        } else {
            let x: f64 = fields[1].trim().parse().map_err(|_| parse_err(line, "node"))?;
            let y: f64 = fields[2].trim().parse().map_err(|_| parse_err(line, "node"))?;
            positions.push((x, y));
        }
    }
    let mut edges = Vec::new();
    for (i, line) in edges_csv.lines().enumerate() {
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(line, "edge"));
        }
        let a: usize = fields[0].trim().parse().map_err(|_| parse_err(line, "edge"))?;
        let b: usize = fields[1].trim().parse().map_err(|_| parse_err(line, "edge"))?;
        edges.push((a, b));
        n_nodes = n_nodes.max(a.max(b) + 1);
    }
    let mut topo = NetworkTopology::from_edges(n_nodes, &edges)?;
    if all_positioned && positions.len() == n_nodes {
        topo.positions = Some(positions);
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Union-find connectivity oracle, independent of the BFS used by the
    /// implementation.
    fn connected_oracle(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        let root = find(&mut parent, 0);
        (0..n).all(|x| find(&mut parent, x) == root)
    }

    #[test]
    fn single_node_topology() {
        let t = random_geometric_topology(1, 0.35, 3).unwrap();
        assert_eq!(t.n_nodes(), 1);
        assert!(t.is_connected());
        assert_eq!(t.neighbors(0), vec![0]);
        assert_eq!(metropolis_weights(&t).get(0, 0), 1.0);
    }

    #[test]
    fn geometric_topology_is_connected_with_degrees() {
        let t = random_geometric_topology(20, 0.35, 7).unwrap();
        assert!(connected_oracle(20, &t.edges()));
        for k in 0..20 {
            assert!(t.degree(k) >= 2, "node {k} has no neighbor besides itself");
        }
    }

    #[test]
    fn geometric_topology_is_deterministic() {
        let a = random_geometric_topology(20, 0.35, 7).unwrap();
        let b = random_geometric_topology(20, 0.35, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn geometric_topology_retry_budget() {
        // A radius this small cannot connect 30 nodes.
        assert!(matches!(
            random_geometric_topology(30, 0.01, 1),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn metropolis_triangle() {
        let t = NetworkTopology::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let a = metropolis_weights(&t);
        for k in 0..3 {
            for l in 0..3 {
                assert!((a.get(l, k) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_two_node_line() {
        let t = NetworkTopology::from_edges(2, &[(0, 1)]).unwrap();
        let a = metropolis_weights(&t);
        for k in 0..2 {
            for l in 0..2 {
                assert!((a.get(l, k) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn metropolis_is_valid_symmetric_doubly_stochastic() {
        for seed in 0..100u64 {
            let n = 3 + (seed as usize % 15);
            let t = random_geometric_topology(n, 0.6, seed).unwrap();
            let a = metropolis_weights(&t);
            assert!(validate_combination(&a, &t).passed(), "seed {seed}");
            for k in 0..n {
                let row: f64 = (0..n).map(|l| a.get(k, l)).sum();
                assert!((row - 1.0).abs() < 1e-12, "row {k} sums to {row}");
                for l in 0..n {
                    assert_eq!(a.get(l, k), a.get(k, l));
                }
            }
        }
    }

    #[test]
    fn metropolis_second_eigenvalue_below_one() {
        // Power iteration on A restricted to the complement of the ones
        // vector; for a connected graph the second-largest modulus is < 1.
        for seed in [2u64, 5, 11] {
            let n = 8;
            let t = random_geometric_topology(n, 0.5, seed).unwrap();
            let a = metropolis_weights(&t);
            let mut v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
            let deflate = |v: &mut Vec<f64>| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
            };
            deflate(&mut v);
            let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm0);
            let mut lambda = 0.0;
            for _ in 0..2000 {
                let mut next = vec![0.0; n];
                for l in 0..n {
                    for k in 0..n {
                        next[l] += a.get(l, k) * v[k];
                    }
                }
                deflate(&mut next);
                let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    lambda = 0.0;
                    break;
                }
                lambda = norm;
                next.iter_mut().for_each(|x| *x /= norm);
                v = next;
            }
            assert!(lambda < 1.0 - 1e-6, "seed {seed}: SLEM = {lambda}");
        }
    }

    #[test]
    fn validate_flags_each_violation_kind() {
        let t = NetworkTopology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        // Column 0 sums to 0.9 and entry (2,0) sits outside the
        // neighborhood; column 1 zeroes the (2,1) edge weight.
        let a = CombinationMatrix::from_rows(&[
            vec![0.5, 0.8, 0.0],
            vec![0.3, 0.2, 0.5],
            vec![0.1, 0.0, 0.5],
        ])
        .unwrap();
        let report = validate_combination(&a, &t);
        assert!(!report.passed());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, CombinationViolation::ColumnSum { k: 0, .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, CombinationViolation::SupportOutsideNeighborhood { l: 2, k: 0, .. })));
        // Zero on a neighborhood edge is a non-positive weight.
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, CombinationViolation::NonPositiveWeight { l: 2, k: 1, .. })));
        // The Metropolis output passes.
        assert!(validate_combination(&metropolis_weights(&t), &t).passed());
    }

    #[test]
    fn lift_identity_and_blocks() {
        let single = CombinationMatrix::from_rows(&[vec![1.0]]).unwrap();
        let c = lift_combination(&single, 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }

        let a = CombinationMatrix::from_rows(&[vec![0.25, 0.5], vec![0.75, 0.5]]).unwrap();
        let c = lift_combination(&a, 2);
        for bl in 0..2 {
            for bk in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        let want = if i == j { a.get(bl, bk) } else { 0.0 };
                        assert_eq!(c[bl * 2 + i][bk * 2 + j], want);
                    }
                }
            }
        }
    }

    #[test]
    fn lift_preserves_stacked_fixed_point() {
        // C (1 (x) w) = 1 (x) w for the doubly stochastic Metropolis rule.
        let t = random_geometric_topology(6, 0.6, 9).unwrap();
        let a = metropolis_weights(&t);
        let m = 3;
        let c = lift_combination(&a, m);
        let w = [0.3, -1.2, 0.7];
        let stacked: Vec<f64> = (0..6 * m).map(|i| w[i % m]).collect();
        for (i, row) in c.iter().enumerate() {
            let out: f64 = row.iter().zip(&stacked).map(|(a, b)| a * b).sum();
            assert!((out - stacked[i]).abs() < 1e-12);
        }
        // Blockwise stochasticity: every block column of C sums to I_m.
        for bk in 0..6 {
            for i in 0..m {
                for j in 0..m {
                    let mut sum = 0.0;
                    for bl in 0..6 {
                        sum += c[bl * m + i][bk * m + j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((sum - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn topology_csv_round_trip() {
        let t = random_geometric_topology(10, 0.5, 4).unwrap();
        let (edges, nodes) = export_topology(&t);
        assert!(edges.starts_with("node_a,node_b\n"));
        assert!(nodes.starts_with("node,x,y\n"));
        let back = import_topology(&edges, &nodes).unwrap();
        assert_eq!(back, t);

        // Positions survive only when both coordinates are present.
        let bare = NetworkTopology::from_edges(3, &[(0, 2)]).unwrap();
        let (e, v) = export_topology(&bare);
        let back = import_topology(&e, &v).unwrap();
        assert_eq!(back, bare);
        assert!(back.positions().is_none());
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(NetworkTopology::from_edges(0, &[]).is_err());
        assert!(NetworkTopology::from_edges(3, &[(0, 3)]).is_err());
        assert!(NetworkTopology::from_edges(3, &[(1, 1)]).is_err());
    }
}
