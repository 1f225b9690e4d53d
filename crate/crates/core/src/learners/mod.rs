//! Online learners. Every learner follows predict-then-observe: `policy()` is
//! the mixed policy x̃_t for the current round and `observe` absorbs y_t.
//! Losses are assumed validated by the caller.

mod flow_entropy;
mod hedge;
mod kkt;
mod omd;

pub use flow_entropy::{entropy_flow_projection, shift_losses, EntropyDagOmd};
pub use hedge::{
    log_partitions, mset_marginals, pushed_log_conditionals, weight_pushing_marginals, DagHedge,
    ExplicitHedge, MSetHedge, MultitaskHedge,
};
pub use kkt::{flow_constraints, newton_prox, uniform_split_flow, LinearConstraints, NumericOmd};
pub use omd::{mset_prox, DilatedOmd, MSetOmd, MSetProx, MultitaskEntropyOmd};

pub use crate::domain::best_in_hindsight;

use crate::domain::{DecisionSet, Vertex};
use crate::error::Result;
use crate::sampling::RngStream;

/// Convergence controls shared by the iterative proximal solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls { tol: 1e-10, max_iter: 500 }
    }
}

pub trait Learner: Send {
    fn name(&self) -> &str;

    fn eta(&self) -> f64;

    /// The current mixed policy x̃_t.
    fn policy(&self) -> &[f64];

    /// Absorbs the round's loss vector and moves to the next policy.
    fn observe(&mut self, y: &[f64]) -> Result<()>;

    /// Draws x_t with E[x_t] = x̃_t.
    fn sample(&self, rng: &mut RngStream) -> Result<Vertex>;

    /// Returns the pre-update policy, then observes `y`.
    fn step(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        let policy = self.policy().to_vec();
        self.observe(y)?;
        Ok(policy)
    }
}

/// Hedge's rate √(ln|X| / T).
pub fn default_learning_rate(set: &DecisionSet, t: usize) -> f64 {
    (set.ln_cardinality() / t.max(1) as f64).sqrt()
}

/// √(2(m + ln(d/m)) / (9T)).
pub fn mset_omd_learning_rate(d: usize, m: usize, t: usize) -> f64 {
    let (d, m) = (d as f64, m as f64);
    (2.0 * (m + (d / m).ln()) / (9.0 * t.max(1) as f64)).sqrt()
}

/// √(18Tm + 18T ln(d/m)).
pub fn mset_omd_regret_bound(d: usize, m: usize, t: usize) -> f64 {
    let (d, m, t) = (d as f64, m as f64, t as f64);
    (18.0 * t * m + 18.0 * t * (d / m).ln()).sqrt()
}

/// √(ln|X| · ln d / T) for negative-entropy OMD on shifted DAG losses.
pub fn entropy_dag_learning_rate(set: &DecisionSet, t: usize) -> f64 {
    (set.ln_cardinality() * (set.dim() as f64).ln() / t.max(1) as f64).sqrt()
}
