use std::cmp::Ordering;
use std::ops::Range;

use itertools::Itertools;

use crate::domain::dag::Dag;
use crate::domain::Vertex;
use crate::error::{Error, Result};

/// Default cap on explicit vertex enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Canonical vertex order: supports compared lexicographically as index
/// sets, so `1100 < 1010 < 1001 < 0110 < 0101 < 0011`.
pub fn canonical_cmp(a: &[u8], b: &[u8]) -> Ordering {
    b.cmp(a)
}

/// A finite list of distinct binary vectors of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSet {
    dim: usize,
    vertices: Vec<Vertex>,
}

impl ExplicitSet {
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Precondition("explicit decision set must be non-empty".into()))?;
        if dim == 0 {
            return Err(Error::Precondition("explicit vertices must have dimension ≥ 1".into()));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::Precondition(format!(
                    "explicit vertex of length {} in a set of dimension {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|&b| b > 1) {
                return Err(Error::Precondition("explicit vertices must be binary".into()));
            }
        }
        vertices.sort_by(|a, b| canonical_cmp(a, b));
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Precondition("explicit vertices must be distinct".into()));
        }
        Ok(ExplicitSet { dim, vertices })
    }

    /// One vertex per non-empty line, written as 0/1 characters. Spaces and
    /// commas between digits are ignored; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            let digits: Vec<u8> = line
                .chars()
                .filter(|c| !c.is_whitespace() && *c != ',')
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(Error::Parse(format!("unexpected character `{other}` in vertex list"))),
                })
                .collect::<Result<_>>()?;
            if !digits.is_empty() {
                vertices.push(digits);
            }
        }
        Self::new(vertices)
    }

    /// The full hypercube {0,1}^d.
    pub fn hypercube(d: usize) -> Self {
        let vertices = (0..d).map(|_| [1u8, 0u8]).multi_cartesian_product().collect();
        Self::new(vertices).expect("hypercube is a valid explicit set")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices in canonical order.
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }
}

/// The decision set X ⊆ {0,1}^d.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionSet {
    Explicit(ExplicitSet),
    /// All binary d-vectors with exactly m ones.
    MSet { d: usize, m: usize },
    /// One expert per block; block sizes d_1..d_m.
    Multitask { blocks: Vec<usize> },
    /// Indicators of s–t paths; d = |E|.
    DagPaths(Dag),
}

impl DecisionSet {
    pub fn explicit(vertices: Vec<Vertex>) -> Result<Self> {
        Ok(DecisionSet::Explicit(ExplicitSet::new(vertices)?))
    }

    pub fn mset(d: usize, m: usize) -> Result<Self> {
        if m < 1 || 2 * m > d {
            return Err(Error::Precondition(format!("m-set requires 1 ≤ m ≤ d/2, got d={d}, m={m}")));
        }
        Ok(DecisionSet::MSet { d, m })
    }

    pub fn multitask(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Precondition("multitask set needs at least one block".into()));
        }
        if let Some(&b) = blocks.iter().find(|&&b| b < 2) {
            return Err(Error::Precondition(format!("multitask blocks need ≥ 2 experts, got {b}")));
        }
        Ok(DecisionSet::Multitask { blocks })
    }

    pub fn dag_paths(dag: Dag) -> Result<Self> {
        crate::domain::dag_validate(&dag).map_err(Error::InvalidDag)?;
        Ok(DecisionSet::DagPaths(dag))
    }

    pub fn dim(&self) -> usize {
        match self {
            DecisionSet::Explicit(e) => e.dim(),
            DecisionSet::MSet { d, .. } => *d,
            DecisionSet::Multitask { blocks } => blocks.iter().sum(),
            DecisionSet::DagPaths(dag) => dag.n_edges(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            DecisionSet::Explicit(_) => "explicit",
            DecisionSet::MSet { .. } => "mset",
            DecisionSet::Multitask { .. } => "multitask",
            DecisionSet::DagPaths(_) => "dag",
        }
    }

    pub fn as_dag(&self) -> Option<&Dag> {
        match self {
            DecisionSet::DagPaths(dag) => Some(dag),
            _ => None,
        }
    }

    /// |X|, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        match self {
            DecisionSet::Explicit(e) => e.vertices().len() as u128,
            DecisionSet::MSet { d, m } => binomial(*d, *m),
            DecisionSet::Multitask { blocks } => {
                blocks.iter().fold(1u128, |acc, &b| acc.saturating_mul(b as u128))
            }
            DecisionSet::DagPaths(dag) => dag.path_count(),
        }
    }

    /// ln|X| in closed form per variant.
    pub fn ln_cardinality(&self) -> f64 {
        match self {
            DecisionSet::Explicit(e) => (e.vertices().len() as f64).ln(),
            DecisionSet::MSet { d, m } => ln_binomial(*d, *m),
            DecisionSet::Multitask { blocks } => blocks.iter().map(|&b| (b as f64).ln()).sum(),
            DecisionSet::DagPaths(dag) => dag.ln_path_count(),
        }
    }

    /// Index ranges of the multitask blocks.
    pub fn block_ranges(&self) -> Option<Vec<Range<usize>>> {
        match self {
            DecisionSet::Multitask { blocks } => Some(block_ranges(blocks)),
            _ => None,
        }
    }

    /// Every vertex of X exactly once, in canonical order.
    pub fn enumerate_vertices(&self, cap: usize) -> Result<Vec<Vertex>> {
        if self.cardinality() > cap as u128 {
            return Err(Error::CapExceeded { what: format!("{} decision set", self.kind()), cap });
        }
        let mut out = match self {
            DecisionSet::Explicit(e) => return Ok(e.vertices().to_vec()),
            DecisionSet::MSet { d, m } => (0..*d)
                .combinations(*m)
                .map(|support| {
                    let mut v = vec![0u8; *d];
                    for i in support {
                        v[i] = 1;
                    }
                    v
                })
                .collect(),
            DecisionSet::Multitask { blocks } => {
                let d = self.dim();
                block_ranges(blocks)
                    .into_iter()
                    .multi_cartesian_product()
                    .map(|picks| {
                        let mut v = vec![0u8; d];
                        for i in picks {
                            v[i] = 1;
                        }
                        v
                    })
                    .collect()
            }
            DecisionSet::DagPaths(dag) => dag.enumerate_paths(cap)?,
        };
        out.sort_by(|a, b| canonical_cmp(a, b));
        Ok(out)
    }

    /// argmin_{x ∈ X} ⟨x, z⟩ with its value, by the closed-form minimizer of
    /// each variant. Ties go to the canonically first vertex (for DAGs: the
    /// smallest-index edge at every branching).
    pub fn min_vertex(&self, z: &[f64]) -> (Vertex, f64) {
        debug_assert_eq!(z.len(), self.dim());
        match self {
            DecisionSet::Explicit(e) => {
                let mut best: Option<(usize, f64)> = None;
                for (i, v) in e.vertices().iter().enumerate() {
                    let val = dot_binary(v, z);
                    if best.is_none_or(|(_, b)| val < b) {
                        best = Some((i, val));
                    }
                }
                let (i, val) = best.expect("explicit set is non-empty");
                (e.vertices()[i].clone(), val)
            }
            DecisionSet::MSet { d, m } => {
                let mut idx: Vec<usize> = (0..*d).collect();
                idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
                let mut v = vec![0u8; *d];
                for &i in &idx[..*m] {
                    v[i] = 1;
                }
                let val = dot_binary(&v, z);
                (v, val)
            }
            DecisionSet::Multitask { blocks } => {
                let mut v = vec![0u8; self.dim()];
                for r in block_ranges(blocks) {
                    let mut best = r.start;
                    for i in r {
                        if z[i] < z[best] {
                            best = i;
                        }
                    }
                    v[best] = 1;
                }
                let val = dot_binary(&v, z);
                (v, val)
            }
            DecisionSet::DagPaths(dag) => dag.shortest_path(z),
        }
    }

    /// argmax_{x ∈ X} ⟨x, z⟩ with its value.
    pub fn max_vertex(&self, z: &[f64]) -> (Vertex, f64) {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let (v, val) = self.min_vertex(&neg);
        (v, -val)
    }

    /// Whether `x` is a vertex of X.
    pub fn contains(&self, x: &[u8]) -> bool {
        if x.len() != self.dim() || x.iter().any(|&b| b > 1) {
            return false;
        }
        match self {
            DecisionSet::Explicit(e) => e.vertices().iter().any(|v| v == x),
            DecisionSet::MSet { m, .. } => x.iter().filter(|&&b| b == 1).count() == *m,
            DecisionSet::Multitask { blocks } => block_ranges(blocks)
                .into_iter()
                .all(|r| x[r].iter().filter(|&&b| b == 1).count() == 1),
            DecisionSet::DagPaths(dag) => dag.is_path(x),
        }
    }
}

pub(crate) fn block_ranges(blocks: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    blocks
        .iter()
        .map(|&b| {
            let r = start..start + b;
            start += b;
            r
        })
        .collect()
}

pub fn dot_binary(x: &[u8], z: &[f64]) -> f64 {
    x.iter().zip(z).filter(|(&b, _)| b == 1).map(|(_, &v)| v).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// C(n, k), saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at each step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}
