//! Loss streams: the hard instances behind each lower bound, plus the
//! combinatorial pieces they are built from.

mod lower_bounds;
mod shattered;

pub use lower_bounds::{
    bad_set_mass, dag_hard_instance, hedge_killer, hedge_killer_threshold, mset_lb_adversary,
    multitask_adversary, phase_lengths, DagHardInstance, DagLayeredStream, HedgeKillerStream,
    MSetLbStream, MultitaskStream,
};
pub use shattered::{find_shattered_set, ShatteredSet};

use rand::Rng;

use crate::domain::{dual_norm, DecisionSet};
use crate::error::{Error, Result};
use crate::sampling::RngStream;

/// A source of loss vectors, one call per round.
pub trait LossStream: Send {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// The loss vector of the next round.
    fn next_loss(&mut self) -> Vec<f64>;
}

/// Threshold on K above which D_K is uniform on {−1,+1}^K.
pub const DK_THRESHOLD: usize = 8;

/// A draw from the zero-mean K-expert distribution D_K: ±e_1 for small K,
/// uniform signs for K ≥ 8.
pub fn dk_sample(k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Precondition(format!("D_K needs K ≥ 2, got {k}")));
    }
    if k < DK_THRESHOLD {
        let mut z = vec![0.0; k];
        z[0] = rng.rademacher();
        Ok(z)
    } else {
        Ok((0..k).map(|_| rng.rademacher()).collect())
    }
}

/// The same vector every round.
#[derive(Debug, Clone)]
pub struct ConstantStream {
    y: Vec<f64>,
}

impl ConstantStream {
    pub fn new(y: Vec<f64>) -> Self {
        ConstantStream { y }
    }
}

impl LossStream for ConstantStream {
    fn name(&self) -> &str {
        "constant"
    }

    fn dim(&self) -> usize {
        self.y.len()
    }

    fn next_loss(&mut self) -> Vec<f64> {
        self.y.clone()
    }
}

/// Uniform draws from [−1,1]^d, rescaled into the unit dual ball when needed.
#[derive(Debug, Clone)]
pub struct RandomFeasibleStream {
    set: DecisionSet,
    rng: RngStream,
}

impl RandomFeasibleStream {
    pub fn new(set: DecisionSet, rng: RngStream) -> Self {
        RandomFeasibleStream { set, rng }
    }
}

impl LossStream for RandomFeasibleStream {
    fn name(&self) -> &str {
        "random"
    }

    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn next_loss(&mut self) -> Vec<f64> {
        let y: Vec<f64> = (0..self.set.dim()).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        let scale = dual_norm(&self.set, &y).max(1.0);
        y.into_iter().map(|v| v / scale).collect()
    }
}

/// Rademacher losses on one coordinate of a shattered set at a time, the
/// horizon split into |I| contiguous segments.
#[derive(Debug, Clone)]
pub struct UniversalStream {
    dim: usize,
    shattered: ShatteredSet,
    segment_ends: Vec<usize>,
    t: usize,
    rng: RngStream,
}

impl UniversalStream {
    pub fn shattered(&self) -> &ShatteredSet {
        &self.shattered
    }

    /// Coordinate hit in round t (1-based).
    pub fn coordinate_at(&self, t: usize) -> usize {
        let seg = self.segment_ends.iter().position(|&end| t <= end).unwrap_or(self.segment_ends.len() - 1);
        self.shattered.indices[seg]
    }
}

/// Splits `total` into `parts` contiguous lengths differing by at most one,
/// the longer ones first.
fn equal_split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|j| total / parts + usize::from(j < total % parts)).collect()
}

/// k = max{⌊ln|X| / ln(2ed)⌋, 1}.
pub fn universal_k(set: &DecisionSet) -> usize {
    let d = set.dim() as f64;
    ((set.ln_cardinality() / (2.0 * std::f64::consts::E * d).ln()).floor() as usize).max(1)
}

/// The universal lower-bound adversary. `k` overrides the shattered-set size
/// (default [`universal_k`]).
pub fn universal_adversary(set: &DecisionSet, t: usize, k: Option<usize>, rng: RngStream) -> Result<UniversalStream> {
    let k = k.unwrap_or_else(|| universal_k(set));
    let shattered = find_shattered_set(set, k)?;
    let mut end = 0;
    let segment_ends = equal_split(t.max(k), k)
        .into_iter()
        .map(|len| {
            end += len;
            end
        })
        .collect();
    Ok(UniversalStream { dim: set.dim(), shattered, segment_ends, t: 0, rng })
}

impl LossStream for UniversalStream {
    fn name(&self) -> &str {
        "universal"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn next_loss(&mut self) -> Vec<f64> {
        self.t += 1;
        let mut y = vec![0.0; self.dim];
        y[self.coordinate_at(self.t)] = self.rng.rademacher();
        y
    }
}
