//! Edge-indexed DAGs with a designated source and sink, plus the dynamic
//! programs every DAG-based component shares (path extremes, path counts,
//! path enumeration, vertex flows).

use std::collections::VecDeque;
use std::fmt;

use crate::domain::Vertex;
use crate::error::{Error, Result};

/// A structural problem found by [`dag_validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DagDefect {
    /// Vertices that could not be topologically ordered.
    Cycle { vertices: Vec<usize> },
    /// Vertex not reachable from the source.
    Unreachable(usize),
    /// Vertex that cannot reach the sink.
    CannotReachSink(usize),
    SourceIsSink,
    /// The sink has outgoing edges (only possible together with a cycle).
    SinkHasOutEdges,
}

impl fmt::Display for DagDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DagDefect::Cycle { vertices } => write!(f, "cycle detected through vertices {vertices:?}"),
            DagDefect::Unreachable(v) => write!(f, "vertex {v} unreachable from source"),
            DagDefect::CannotReachSink(v) => write!(f, "vertex {v} cannot reach sink"),
            DagDefect::SourceIsSink => write!(f, "source equals sink"),
            DagDefect::SinkHasOutEdges => write!(f, "sink has outgoing edges"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dag {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    /// Topological order; shorter than `n_vertices` when the graph is cyclic.
    topo: Vec<usize>,
}

impl Dag {
    /// Builds the graph without checking acyclicity or reachability. Only
    /// index ranges are checked. Use [`dag_validate`] to inspect defects.
    pub fn from_edges_unchecked(
        n_vertices: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
    ) -> Result<Self> {
        if source >= n_vertices || sink >= n_vertices {
            return Err(Error::Parse(format!(
                "source {source} / sink {sink} out of range for {n_vertices} vertices"
            )));
        }
        let mut out_edges = vec![Vec::new(); n_vertices];
        let mut in_edges = vec![Vec::new(); n_vertices];
        for (idx, &(u, v)) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::Parse(format!(
                    "edge {idx} = ({u}, {v}) out of range for {n_vertices} vertices"
                )));
            }
            out_edges[u].push(idx);
            in_edges[v].push(idx);
        }
        let topo = kahn_order(n_vertices, &edges, &in_edges, &out_edges);
        Ok(Dag { n_vertices, edges, source, sink, out_edges, in_edges, topo })
    }

    /// Builds and validates the graph.
    pub fn new(
        n_vertices: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
    ) -> Result<Self> {
        let dag = Self::from_edges_unchecked(n_vertices, edges, source, sink)?;
        dag_validate(&dag).map_err(Error::InvalidDag)?;
        Ok(dag)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn tail(&self, e: usize) -> usize {
        self.edges[e].0
    }

    pub fn head(&self, e: usize) -> usize {
        self.edges[e].1
    }

    /// δ⁺(v)
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// δ⁻(v)
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo.len() == self.n_vertices
    }

    /// Parses the one-graph-per-file text format:
    /// `dag <n_vertices> <n_edges> <s> <t>` followed by one `<tail> <head>`
    /// line per edge. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty DAG file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "dag" {
            return Err(Error::Parse(format!(
                "expected header `dag <n_vertices> <n_edges> <s> <t>`, got `{header}`"
            )));
        }
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<usize>().map_err(|e| Error::Parse(format!("header field `{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (n, m, s, t) = (nums[0], nums[1], nums[2], nums[3]);
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let pair: Vec<&str> = line.split_whitespace().collect();
            if pair.len() != 2 {
                return Err(Error::Parse(format!("expected `<tail> <head>`, got `{line}`")));
            }
            let u = pair[0].parse::<usize>().map_err(|e| Error::Parse(format!("`{line}`: {e}")))?;
            let v = pair[1].parse::<usize>().map_err(|e| Error::Parse(format!("`{line}`: {e}")))?;
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header declares {m} edges, found {}", edges.len())));
        }
        Dag::new(n, edges, s, t)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "dag {} {} {} {}\n",
            self.n_vertices,
            self.edges.len(),
            self.source,
            self.sink
        );
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Shortest and longest path weight from the source to every vertex.
    pub fn forward_extremes(&self, weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dmin = vec![f64::INFINITY; self.n_vertices];
        let mut dmax = vec![f64::NEG_INFINITY; self.n_vertices];
        dmin[self.source] = 0.0;
        dmax[self.source] = 0.0;
        for &v in &self.topo {
            for &e in &self.in_edges[v] {
                let u = self.edges[e].0;
                dmin[v] = dmin[v].min(dmin[u] + weights[e]);
                dmax[v] = dmax[v].max(dmax[u] + weights[e]);
            }
        }
        (dmin, dmax)
    }

    /// Minimum-weight s–t path. Among equal-weight continuations the edge with
    /// the smallest index is taken at every vertex.
    pub fn shortest_path(&self, weights: &[f64]) -> (Vertex, f64) {
        let mut dist = vec![f64::INFINITY; self.n_vertices];
        let mut choice = vec![usize::MAX; self.n_vertices];
        dist[self.sink] = 0.0;
        for &v in self.topo.iter().rev() {
            if v == self.sink {
                continue;
            }
            for &e in &self.out_edges[v] {
                let cand = weights[e] + dist[self.edges[e].1];
                if cand < dist[v] {
                    dist[v] = cand;
                    choice[v] = e;
                }
            }
        }
        let mut path = vec![0u8; self.edges.len()];
        let mut u = self.source;
        while u != self.sink {
            let e = choice[u];
            path[e] = 1;
            u = self.edges[e].1;
        }
        // Re-sum along the path so the reported value is exactly ⟨x, w⟩.
        let value = path
            .iter()
            .zip(weights)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &w)| w)
            .sum();
        (path, value)
    }

    /// Natural log of the number of s–t paths, by a log-space DP.
    pub fn ln_path_count(&self) -> f64 {
        let mut lc = vec![f64::NEG_INFINITY; self.n_vertices];
        lc[self.sink] = 0.0;
        for &v in self.topo.iter().rev() {
            if v == self.sink {
                continue;
            }
            lc[v] = log_sum_exp(self.out_edges[v].iter().map(|&e| lc[self.edges[e].1]));
        }
        lc[self.source]
    }

    /// Number of s–t paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        let mut c = vec![0u128; self.n_vertices];
        c[self.sink] = 1;
        for &v in self.topo.iter().rev() {
            if v == self.sink {
                continue;
            }
            c[v] = self.out_edges[v]
                .iter()
                .fold(0u128, |acc, &e| acc.saturating_add(c[self.edges[e].1]));
        }
        c[self.source]
    }

    /// All s–t path indicators, found by DFS from the source. Order is the
    /// DFS order (edges in index order); callers sort as needed.
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<Vertex>> {
        if self.path_count() > cap as u128 {
            return Err(Error::CapExceeded { what: "DAG paths".into(), cap });
        }
        let mut out = Vec::new();
        let mut current = vec![0u8; self.edges.len()];
        self.dfs_paths(self.source, &mut current, &mut out);
        Ok(out)
    }

    fn dfs_paths(&self, u: usize, current: &mut Vertex, out: &mut Vec<Vertex>) {
        if u == self.sink {
            out.push(current.clone());
            return;
        }
        for &e in &self.out_edges[u] {
            current[e] = 1;
            self.dfs_paths(self.edges[e].1, current, out);
            current[e] = 0;
        }
    }

    /// x[v] = Σ_{δ⁺(v)} x[e] for v ≠ t, and x[t] = 1.
    pub fn vertex_flow(&self, x: &[f64]) -> Vec<f64> {
        let mut xv: Vec<f64> = (0..self.n_vertices)
            .map(|v| self.out_edges[v].iter().map(|&e| x[e]).sum())
            .collect();
        xv[self.sink] = 1.0;
        xv
    }

    /// Returns the vertices visited by a path indicator, in order from s.
    pub fn path_vertices(&self, path: &[u8]) -> Option<Vec<usize>> {
        let mut vs = vec![self.source];
        let mut u = self.source;
        let mut used = 0;
        while u != self.sink {
            let next: Vec<usize> = self.out_edges[u].iter().copied().filter(|&e| path[e] == 1).collect();
            if next.len() != 1 {
                return None;
            }
            used += 1;
            u = self.edges[next[0]].1;
            vs.push(u);
        }
        let total = path.iter().filter(|&&b| b == 1).count();
        (used == total).then_some(vs)
    }

    /// Whether `path` is the indicator of an s–t path.
    pub fn is_path(&self, path: &[u8]) -> bool {
        path.len() == self.edges.len()
            && path.iter().all(|&b| b <= 1)
            && self.path_vertices(path).is_some()
    }
}

fn kahn_order(
    n: usize,
    edges: &[(usize, usize)],
    in_edges: &[Vec<usize>],
    out_edges: &[Vec<usize>],
) -> Vec<usize> {
    let mut indeg: Vec<usize> = in_edges.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &e in &out_edges[u] {
            let v = edges[e].1;
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    order
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Checks acyclicity, reachability from s, and co-reachability of t.
pub fn dag_validate(dag: &Dag) -> std::result::Result<(), Vec<DagDefect>> {
    let mut defects = Vec::new();
    if dag.source == dag.sink {
        defects.push(DagDefect::SourceIsSink);
    }
    if !dag.is_acyclic() {
        let mut ordered = vec![false; dag.n_vertices];
        for &v in &dag.topo {
            ordered[v] = true;
        }
        // Kahn leaves cycles plus everything downstream of them; peel off
        // leftovers with no leftover successor to keep only cycle vertices.
        let mut live: Vec<bool> = ordered.iter().map(|o| !o).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..dag.n_vertices {
                if live[v] && !dag.out_edges[v].iter().any(|&e| live[dag.edges[e].1]) {
                    live[v] = false;
                    changed = true;
                }
            }
        }
        let vertices = (0..dag.n_vertices).filter(|&v| live[v]).collect();
        defects.push(DagDefect::Cycle { vertices });
    }
    if !dag.out_edges[dag.sink].is_empty() && dag.source != dag.sink {
        defects.push(DagDefect::SinkHasOutEdges);
    }
    let forward = reach(dag.source, &dag.out_edges, |e| dag.edges[e].1, dag.n_vertices);
    let backward = reach(dag.sink, &dag.in_edges, |e| dag.edges[e].0, dag.n_vertices);
    for v in 0..dag.n_vertices {
        if !forward[v] {
            defects.push(DagDefect::Unreachable(v));
        }
    }
    for v in 0..dag.n_vertices {
        if !backward[v] {
            defects.push(DagDefect::CannotReachSink(v));
        }
    }
    if defects.is_empty() {
        Ok(())
    } else {
        Err(defects)
    }
}

fn reach(start: usize, adj: &[Vec<usize>], step: impl Fn(usize) -> usize, n: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &e in &adj[u] {
            let v = step(e);
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Outcome of [`flow_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCheck {
    pub residual: f64,
    pub ok: bool,
}

/// Membership tolerance for the flow polytope.
pub const FLOW_TOL: f64 = 1e-9;

/// Largest violation of the unit-flow constraints and the [0, 1] box.
pub fn flow_check(dag: &Dag, x: &[f64]) -> FlowCheck {
    assert_eq!(x.len(), dag.n_edges(), "flow vector must be indexed by edges");
    let sum = |es: &[usize]| es.iter().map(|&e| x[e]).sum::<f64>();
    let mut residual = (sum(dag.out_edges(dag.source)) - 1.0).abs();
    residual = residual.max((sum(dag.in_edges(dag.sink)) - 1.0).abs());
    for v in 0..dag.n_vertices() {
        if v == dag.source || v == dag.sink {
            continue;
        }
        residual = residual.max((sum(dag.in_edges(v)) - sum(dag.out_edges(v))).abs());
    }
    for &xe in x {
        residual = residual.max(-xe).max(xe - 1.0);
    }
    FlowCheck { residual, ok: residual <= FLOW_TOL }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Dag {
        Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
    }

    #[test]
    fn diamond_is_valid() {
        assert_eq!(dag_validate(&diamond()), Ok(()));
    }

    #[test]
    fn isolated_vertex_is_reported() {
        let g = Dag::from_edges_unchecked(5, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap();
        let defects = dag_validate(&g).unwrap_err();
        assert!(defects.contains(&DagDefect::Unreachable(4)));
        assert!(defects.contains(&DagDefect::CannotReachSink(4)));
    }

    #[test]
    fn two_cycle_is_reported() {
        let g = Dag::from_edges_unchecked(4, vec![(0, 1), (1, 2), (2, 1), (2, 3)], 0, 3).unwrap();
        let defects = dag_validate(&g).unwrap_err();
        assert!(defects.iter().any(|d| matches!(d, DagDefect::Cycle { vertices } if vertices == &vec![1, 2])));
    }

    #[test]
    fn flow_check_examples() {
        let g = diamond();
        let uniform = flow_check(&g, &[0.5; 4]);
        assert!(uniform.ok);
        assert_eq!(uniform.residual, 0.0);

        let bad = flow_check(&g, &[0.7, 0.7, 0.3, 0.3]);
        assert!(!bad.ok);
        assert!((bad.residual - 0.4).abs() < 1e-12);

        let line = Dag::new(4, vec![(0, 1), (1, 2), (2, 3)], 0, 3).unwrap();
        assert!(flow_check(&line, &[1.0; 3]).ok);
    }

    #[test]
    fn text_format_round_trips() {
        let g = diamond();
        let parsed = Dag::parse(&g.to_text()).unwrap();
        assert_eq!(parsed, g);
        assert!(Dag::parse("dag 2 1 0 1\n0 1\n0 1\n").is_err());
        assert!(Dag::parse("graph 2 1 0 1\n0 1\n").is_err());
    }

    #[test]
    fn path_counts_and_extremes() {
        let g = diamond();
        assert_eq!(g.path_count(), 2);
        assert!((g.ln_path_count() - 2f64.ln()).abs() < 1e-15);
        let w = [0.3, -0.2, 0.4, 0.1];
        let (dmin, dmax) = g.forward_extremes(&w);
        assert!((dmin[3] - (-0.1)).abs() < 1e-15);
        assert!((dmax[3] - 0.7).abs() < 1e-15);
        let (p, v) = g.shortest_path(&w);
        assert_eq!(p, vec![0, 1, 0, 1]);
        assert!((v + 0.1).abs() < 1e-15);
        let paths = g.enumerate_paths(10).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.iter().all(|p| g.is_path(p)));
        assert!(g.enumerate_paths(1).is_err());
    }

    #[test]
    fn shortest_path_ties_take_smallest_edge() {
        let g = Dag::new(2, vec![(0, 1), (0, 1), (0, 1)], 0, 1).unwrap();
        let (p, _) = g.shortest_path(&[0.0, 0.0, 0.0]);
        assert_eq!(p, vec![1, 0, 0]);
    }
}
