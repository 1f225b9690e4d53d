//! Negative-entropy OMD over the flow polytope, run on losses shifted to be
//! non-negative.

use crate::domain::{flow_check, log_sum_exp, Dag, DecisionSet, Vertex};
use crate::error::{Error, Result, SolverDiagnostics};
use crate::learners::{Learner, SolverControls};
use crate::sampling::{sample_vertex, RngStream};

/// Potential-shifted losses y'[(u,v)] = y[(u,v)] + d(u) − d(v), where d(v)
/// is the shortest-path weight from s to v. Returns y' and α = −d(t), so
/// that ⟨x, y'⟩ = ⟨x, y⟩ + α on every path.
pub fn shift_losses(dag: &Dag, y: &[f64]) -> (Vec<f64>, f64) {
    let (dmin, _) = dag.forward_extremes(y);
    let shifted = dag.edges().iter().zip(y).map(|(&(u, v), &w)| w + dmin[u] - dmin[v]).collect();
    (shifted, -dmin[dag.sink()])
}

fn conservation_residual(dag: &Dag, x: &[f64]) -> f64 {
    flow_check(dag, x).residual
}

/// Bregman projection, under the negative entropy, of the positive weights
/// exp(log_w) onto the flow polytope.
///
/// The minimizer has the form x[e=(u,v)] = w[e]·exp(μ_u − μ_v); the vertex
/// potentials μ are found by exact coordinate ascent on the dual, sweeping in
/// topological order and back.
pub fn entropy_flow_projection(dag: &Dag, log_w: &[f64], controls: SolverControls) -> Result<(Vec<f64>, SolverDiagnostics)> {
    let n = dag.n_vertices();
    let (s, t) = (dag.source(), dag.sink());
    let mut mu = vec![0.0; n];
    let flow = |mu: &[f64]| -> Vec<f64> {
        dag.edges().iter().zip(log_w).map(|(&(u, v), &l)| (l + mu[u] - mu[v]).exp()).collect()
    };
    let update = |v: usize, mu: &mut Vec<f64>| {
        let ln_a = log_sum_exp(dag.out_edges(v).iter().map(|&e| log_w[e] - mu[dag.head(e)]));
        let ln_b = log_sum_exp(dag.in_edges(v).iter().map(|&e| log_w[e] + mu[dag.tail(e)]));
        mu[v] = if v == s {
            -ln_a
        } else if v == t {
            ln_b
        } else {
            0.5 * (ln_b - ln_a)
        };
    };
    let order = dag.topo_order().to_vec();
    let mut diag = SolverDiagnostics {
        solver: "entropy flow projection",
        iterations: 0,
        residual: f64::INFINITY,
        tolerance: controls.tol,
    };
    for sweep in 0..=controls.max_iter {
        if sweep > 0 {
            for &v in order.iter().chain(order.iter().rev()) {
                update(v, &mut mu);
            }
        }
        let x = flow(&mu);
        diag.iterations = sweep;
        diag.residual = conservation_residual(dag, &x);
        if diag.residual <= controls.tol {
            return Ok((x, diag));
        }
    }
    Err(Error::SolverFailure(diag))
}

/// OMD with the negative entropy on the flow polytope, fed shifted losses.
#[derive(Debug, Clone)]
pub struct EntropyDagOmd {
    eta: f64,
    set: DecisionSet,
    x: Vec<f64>,
    controls: SolverControls,
    last_diagnostics: Option<SolverDiagnostics>,
}

impl EntropyDagOmd {
    pub fn default_controls() -> SolverControls {
        SolverControls { tol: 1e-10, max_iter: 100_000 }
    }

    /// Starts at the projection of the all-ones vector.
    pub fn new(dag: Dag, eta: f64) -> Result<Self> {
        Self::with_controls(dag, eta, Self::default_controls())
    }

    pub fn with_controls(dag: Dag, eta: f64, controls: SolverControls) -> Result<Self> {
        let (x, diag) = entropy_flow_projection(&dag, &vec![0.0; dag.n_edges()], controls)?;
        Ok(EntropyDagOmd { eta, set: DecisionSet::dag_paths(dag)?, x, controls, last_diagnostics: Some(diag) })
    }

    pub fn last_diagnostics(&self) -> Option<&SolverDiagnostics> {
        self.last_diagnostics.as_ref()
    }

    fn dag(&self) -> &Dag {
        self.set.as_dag().expect("constructed from a DAG")
    }
}

impl Learner for EntropyDagOmd {
    fn name(&self) -> &str {
        "omd-entropy-dag"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        let (shifted, _) = shift_losses(self.dag(), y);
        let log_w: Vec<f64> = self.x.iter().zip(&shifted).map(|(x, v)| x.ln() - self.eta * v).collect();
        let (x, diag) = entropy_flow_projection(self.dag(), &log_w, self.controls)?;
        self.x = x;
        self.last_diagnostics = Some(diag);
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.x, rng)
    }
}
