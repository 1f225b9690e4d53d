use crate::domain::{block_ranges, dot_binary, log_sum_exp, Dag, DecisionSet, Vertex, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::learners::Learner;
use crate::sampling::{sample_explicit, sample_vertex, RngStream};

/// Hedge over an enumerated vertex list. Also the reference oracle for the
/// structured variants.
#[derive(Debug, Clone)]
pub struct ExplicitHedge {
    eta: f64,
    vertices: Vec<Vertex>,
    cum_loss: Vec<f64>,
    probs: Vec<f64>,
    policy: Vec<f64>,
}

fn softmax_neg(eta: f64, cum: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = cum.iter().map(|c| -eta * c).collect();
    let norm = log_sum_exp(logits.iter().copied());
    logits.iter().map(|l| (l - norm).exp()).collect()
}

impl ExplicitHedge {
    pub fn new(set: &DecisionSet, eta: f64) -> Result<Self> {
        Self::from_vertices(set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)?, eta)
    }

    pub fn from_vertices(vertices: Vec<Vertex>, eta: f64) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Precondition("Hedge needs a non-empty vertex list".into()));
        }
        let n = vertices.len();
        let mut h = ExplicitHedge {
            eta,
            cum_loss: vec![0.0; n],
            probs: vec![1.0 / n as f64; n],
            policy: Vec::new(),
            vertices,
        };
        h.policy = h.mean();
        Ok(h)
    }

    /// Probability of each vertex, in the order of [`ExplicitHedge::vertices`].
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    fn mean(&self) -> Vec<f64> {
        let d = self.vertices[0].len();
        let mut x = vec![0.0; d];
        for (v, p) in self.vertices.iter().zip(&self.probs) {
            for (xi, &b) in x.iter_mut().zip(v) {
                if b == 1 {
                    *xi += p;
                }
            }
        }
        x
    }
}

impl Learner for ExplicitHedge {
    fn name(&self) -> &str {
        "hedge"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.policy
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        for (c, v) in self.cum_loss.iter_mut().zip(&self.vertices) {
            *c += dot_binary(v, y);
        }
        self.probs = softmax_neg(self.eta, &self.cum_loss);
        self.policy = self.mean();
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_explicit(&self.vertices, &self.probs, rng)
    }
}

/// Hedge on m-sets without enumeration: the marginals of the product-form
/// distribution P(x) ∝ Π w_i^{x_i} come from elementary symmetric
/// polynomials, evaluated in log-space.
#[derive(Debug, Clone)]
pub struct MSetHedge {
    eta: f64,
    m: usize,
    set: DecisionSet,
    cum_loss: Vec<f64>,
    policy: Vec<f64>,
}

/// Inclusion probabilities of P(x) ∝ exp(Σ x_i l_i) over the m-set.
pub fn mset_marginals(log_weights: &[f64], m: usize) -> Vec<f64> {
    let d = log_weights.len();
    let ninf = f64::NEG_INFINITY;
    // prefix[i][k] = ln e_k(w_0..w_{i-1}); suffix[i][k] = ln e_k(w_i..w_{d-1}).
    let mut prefix = vec![vec![ninf; m + 1]; d + 1];
    let mut suffix = vec![vec![ninf; m + 1]; d + 1];
    prefix[0][0] = 0.0;
    suffix[d][0] = 0.0;
    for i in 0..d {
        for k in 0..=m {
            let skip = prefix[i][k];
            let take = if k > 0 { prefix[i][k - 1] + log_weights[i] } else { ninf };
            prefix[i + 1][k] = log_sum_exp([skip, take].into_iter());
        }
    }
    for i in (0..d).rev() {
        for k in 0..=m {
            let skip = suffix[i + 1][k];
            let take = if k > 0 { suffix[i + 1][k - 1] + log_weights[i] } else { ninf };
            suffix[i][k] = log_sum_exp([skip, take].into_iter());
        }
    }
    let total = prefix[d][m];
    (0..d)
        .map(|i| {
            let rest = log_sum_exp((0..m).map(|a| prefix[i][a] + suffix[i + 1][m - 1 - a]));
            (log_weights[i] + rest - total).exp().min(1.0)
        })
        .collect()
}

impl MSetHedge {
    pub fn new(d: usize, m: usize, eta: f64) -> Result<Self> {
        let set = DecisionSet::mset(d, m)?;
        Ok(MSetHedge { eta, m, set, cum_loss: vec![0.0; d], policy: vec![m as f64 / d as f64; d] })
    }
}

impl Learner for MSetHedge {
    fn name(&self) -> &str {
        "hedge"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.policy
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        for (c, v) in self.cum_loss.iter_mut().zip(y) {
            *c += v;
        }
        let lw: Vec<f64> = self.cum_loss.iter().map(|c| -self.eta * c).collect();
        self.policy = mset_marginals(&lw, self.m);
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.policy, rng)
    }
}

/// Hedge on a product of simplices; the distribution factorizes per block.
#[derive(Debug, Clone)]
pub struct MultitaskHedge {
    eta: f64,
    set: DecisionSet,
    blocks: Vec<usize>,
    cum_loss: Vec<f64>,
    policy: Vec<f64>,
}

impl MultitaskHedge {
    pub fn new(blocks: Vec<usize>, eta: f64) -> Result<Self> {
        let set = DecisionSet::multitask(blocks.clone())?;
        let policy = blocks.iter().flat_map(|&b| std::iter::repeat_n(1.0 / b as f64, b)).collect();
        Ok(MultitaskHedge { eta, set, cum_loss: vec![0.0; blocks.iter().sum()], blocks, policy })
    }
}

impl Learner for MultitaskHedge {
    fn name(&self) -> &str {
        "hedge"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.policy
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        for (c, v) in self.cum_loss.iter_mut().zip(y) {
            *c += v;
        }
        for r in block_ranges(&self.blocks) {
            let p = softmax_neg(self.eta, &self.cum_loss[r.clone()]);
            self.policy[r].copy_from_slice(&p);
        }
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.policy, rng)
    }
}

/// Backward log-partition ln Z(v) = ln Σ_{paths v→t} Π w(e) and forward
/// ln R(v) = ln Σ_{paths s→v} Π w(e) for log edge weights `lw`.
pub fn log_partitions(dag: &Dag, lw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = dag.n_vertices();
    let mut log_z = vec![f64::NEG_INFINITY; n];
    let mut log_r = vec![f64::NEG_INFINITY; n];
    log_z[dag.sink()] = 0.0;
    for &v in dag.topo_order().iter().rev() {
        if v != dag.sink() {
            log_z[v] = log_sum_exp(dag.out_edges(v).iter().map(|&e| lw[e] + log_z[dag.head(e)]));
        }
    }
    log_r[dag.source()] = 0.0;
    for &v in dag.topo_order() {
        if v != dag.source() {
            log_r[v] = log_sum_exp(dag.in_edges(v).iter().map(|&e| log_r[dag.tail(e)] + lw[e]));
        }
    }
    (log_z, log_r)
}

/// Edge marginals x[e=(u,v)] = R(u)·w(e)·Z(v)/Z(s) of the path distribution
/// P(p) ∝ Π_{e∈p} w(e).
pub fn weight_pushing_marginals(dag: &Dag, lw: &[f64]) -> Vec<f64> {
    let (log_z, log_r) = log_partitions(dag, lw);
    let total = log_z[dag.source()];
    dag.edges()
        .iter()
        .zip(lw)
        .map(|(&(u, v), &l)| (log_r[u] + l + log_z[v] - total).exp())
        .collect()
}

/// Log conditional edge probabilities ln(w(e)·Z(v)/Z(u)) after pushing.
pub fn pushed_log_conditionals(dag: &Dag, lw: &[f64]) -> Vec<f64> {
    let (log_z, _) = log_partitions(dag, lw);
    dag.edges().iter().zip(lw).map(|(&(u, v), &l)| l + log_z[v] - log_z[u]).collect()
}

/// Hedge over the paths of a DAG by weight pushing on cumulative edge losses.
#[derive(Debug, Clone)]
pub struct DagHedge {
    eta: f64,
    set: DecisionSet,
    cum_loss: Vec<f64>,
    policy: Vec<f64>,
}

impl DagHedge {
    pub fn new(dag: Dag, eta: f64) -> Result<Self> {
        let policy = weight_pushing_marginals(&dag, &vec![0.0; dag.n_edges()]);
        Ok(DagHedge { eta, cum_loss: vec![0.0; dag.n_edges()], policy, set: DecisionSet::dag_paths(dag)? })
    }

    fn dag(&self) -> &Dag {
        self.set.as_dag().expect("constructed from a DAG")
    }
}

impl Learner for DagHedge {
    fn name(&self) -> &str {
        "hedge-dag"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.policy
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        for (c, v) in self.cum_loss.iter_mut().zip(y) {
            *c += v;
        }
        let lw: Vec<f64> = self.cum_loss.iter().map(|c| -self.eta * c).collect();
        self.policy = weight_pushing_marginals(self.dag(), &lw);
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.policy, rng)
    }
}
