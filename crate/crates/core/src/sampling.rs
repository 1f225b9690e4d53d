//! Drawing vertices whose expectation equals a given mixed policy.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{block_ranges, Dag, DecisionSet, Vertex};
use crate::error::{Error, Result};

/// Deterministic random stream. Streams with the same seed produce the same
/// draws; [`RngStream::derive`] gives independent substreams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn derive(master: u64, index: u64) -> Self {
        Self::new(derive_seed(master, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fair ±1 sign.
    pub fn rademacher(&mut self) -> f64 {
        if self.rng.random::<bool>() {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

const DEGENERATE_MASS: f64 = 1e-12;

/// Markovian path sampling: from each vertex u follow edge e with
/// probability x[e] / x[u].
pub fn sample_path(dag: &Dag, x: &[f64], rng: &mut RngStream) -> Result<Vertex> {
    let mut path = vec![0u8; dag.n_edges()];
    let mut u = dag.source();
    while u != dag.sink() {
        let out = dag.out_edges(u);
        let mass: f64 = out.iter().map(|&e| x[e].max(0.0)).sum();
        if mass <= DEGENERATE_MASS {
            return Err(Error::DegenerateVertex { vertex: u, mass });
        }
        let r = rng.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut chosen = None;
        for &e in out {
            let w = x[e].max(0.0);
            if w <= 0.0 {
                continue;
            }
            acc += w;
            chosen = Some(e);
            if r < acc {
                break;
            }
        }
        let e = chosen.expect("positive mass implies a positive edge");
        path[e] = 1;
        u = dag.head(e);
    }
    Ok(path)
}

const MSET_SUM_TOL: f64 = 1e-9;

/// Systematic (Madow) sampling over a randomly permuted coordinate order:
/// exactly m ones, and coordinate i is included with probability x[i].
pub fn sample_mset(x: &[f64], m: usize, rng: &mut RngStream) -> Result<Vertex> {
    let total: f64 = x.iter().sum();
    if (total - m as f64).abs() > MSET_SUM_TOL {
        return Err(Error::Precondition(format!("m-set policy sums to {total}, expected {m}")));
    }
    if x.iter().any(|&v| !(-MSET_SUM_TOL..=1.0 + MSET_SUM_TOL).contains(&v)) {
        return Err(Error::Precondition("m-set policy must lie in [0,1]^d".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(rng);
    let u: f64 = rng.random();
    let mut out = vec![0u8; x.len()];
    let mut prefix = 0.0;
    let mut count = 0;
    for &i in &order {
        let next = prefix + x[i].clamp(0.0, 1.0);
        if (next - u).ceil() > (prefix - u).ceil() {
            out[i] = 1;
            count += 1;
        }
        prefix = next;
    }
    // Round-off in the prefix sums can drop or add one point at the very end.
    while count < m {
        let i = (0..x.len())
            .filter(|&i| out[i] == 0)
            .max_by(|&a, &b| x[a].total_cmp(&x[b]))
            .expect("fewer than m ones leaves a free coordinate");
        out[i] = 1;
        count += 1;
    }
    while count > m {
        let i = (0..x.len())
            .filter(|&i| out[i] == 1)
            .min_by(|&a, &b| x[a].total_cmp(&x[b]))
            .expect("more than m ones leaves a selected coordinate");
        out[i] = 0;
        count -= 1;
    }
    Ok(out)
}

/// Categorical draw of an index proportional to `weights`.
pub fn sample_index(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::Precondition(format!("invalid sampling weights: {e}")))?;
    Ok(dist.sample(rng))
}

/// Categorical draw over listed vertices.
pub fn sample_explicit(vertices: &[Vertex], weights: &[f64], rng: &mut RngStream) -> Result<Vertex> {
    if vertices.len() != weights.len() {
        return Err(Error::Precondition("one weight per vertex required".into()));
    }
    Ok(vertices[sample_index(weights, rng)?].clone())
}

/// One categorical draw per multitask block.
pub fn sample_multitask(blocks: &[usize], x: &[f64], rng: &mut RngStream) -> Result<Vertex> {
    let mut out = vec![0u8; x.len()];
    for r in block_ranges(blocks) {
        let start = r.start;
        let i = sample_index(&x[r], rng)?;
        out[start + i] = 1;
    }
    Ok(out)
}

/// Marginal-matching draw for the structured variants.
pub fn sample_vertex(set: &DecisionSet, x: &[f64], rng: &mut RngStream) -> Result<Vertex> {
    match set {
        DecisionSet::MSet { m, .. } => sample_mset(x, *m, rng),
        DecisionSet::Multitask { blocks } => sample_multitask(blocks, x, rng),
        DecisionSet::DagPaths(dag) => sample_path(dag, x, rng),
        DecisionSet::Explicit(_) => Err(Error::Precondition(
            "explicit sets are sampled from the learner's distribution over vertices".into(),
        )),
    }
}
