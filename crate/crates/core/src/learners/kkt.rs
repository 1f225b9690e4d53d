//! Numeric proximal solver: damped Newton on the equality-constrained KKT
//! system. Slow but generic; used as an oracle against the closed-form paths.

use nalgebra::{DMatrix, DVector};

use crate::domain::{block_ranges, Dag, DecisionSet, Vertex};
use crate::error::{Error, Result, SolverDiagnostics};
use crate::learners::{Learner, SolverControls};
use crate::regularizers::Regularizer;
use crate::sampling::{sample_vertex, RngStream};

/// Affine constraints Ax = b.
#[derive(Debug, Clone)]
pub struct LinearConstraints {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearConstraints {
    /// Constraints describing the affine hull of co(X) for the structured
    /// variants.
    pub fn for_set(set: &DecisionSet) -> Result<Self> {
        match set {
            DecisionSet::MSet { d, m } => Ok(LinearConstraints {
                a: DMatrix::from_element(1, *d, 1.0),
                b: DVector::from_element(1, *m as f64),
            }),
            DecisionSet::Multitask { blocks } => {
                let d = set.dim();
                let mut a = DMatrix::zeros(blocks.len(), d);
                for (row, r) in block_ranges(blocks).into_iter().enumerate() {
                    for i in r {
                        a[(row, i)] = 1.0;
                    }
                }
                Ok(LinearConstraints { a, b: DVector::from_element(blocks.len(), 1.0) })
            }
            DecisionSet::DagPaths(dag) => Ok(flow_constraints(dag)),
            DecisionSet::Explicit(_) => {
                Err(Error::Precondition("no linear description of an explicit decision set".into()))
            }
        }
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        (&self.a * x - &self.b).amax()
    }
}

/// Unit source outflow plus conservation at every vertex other than s and t.
/// The sink row is implied by the others.
pub fn flow_constraints(dag: &Dag) -> LinearConstraints {
    let internal: Vec<usize> =
        (0..dag.n_vertices()).filter(|&v| v != dag.source() && v != dag.sink()).collect();
    let rows = 1 + internal.len();
    let mut a = DMatrix::zeros(rows, dag.n_edges());
    let mut b = DVector::zeros(rows);
    for &e in dag.out_edges(dag.source()) {
        a[(0, e)] = 1.0;
    }
    b[0] = 1.0;
    for (k, &v) in internal.iter().enumerate() {
        for &e in dag.in_edges(v) {
            a[(k + 1, e)] += 1.0;
        }
        for &e in dag.out_edges(v) {
            a[(k + 1, e)] -= 1.0;
        }
    }
    LinearConstraints { a, b }
}

/// The flow that splits mass evenly over the out-edges of every vertex.
pub fn uniform_split_flow(dag: &Dag) -> Vec<f64> {
    let mut mass = vec![0.0; dag.n_vertices()];
    mass[dag.source()] = 1.0;
    let mut x = vec![0.0; dag.n_edges()];
    for &u in dag.topo_order() {
        let out = dag.out_edges(u);
        for &e in out {
            x[e] = mass[u] / out.len() as f64;
            mass[dag.head(e)] += x[e];
        }
    }
    x
}

fn hessian_matrix(reg: &Regularizer, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    match reg {
        Regularizer::MSetPhi { m } => {
            let inv_m = 1.0 / *m as f64;
            DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|&v| 2.0 + inv_m / v)))
        }
        Regularizer::NegativeEntropy => {
            DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|&v| 1.0 / v)))
        }
        Regularizer::DilatedEntropy(dag) => {
            let mut h = DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|&v| 1.0 / v)));
            for u in 0..dag.n_vertices() {
                let out = dag.out_edges(u);
                let mass: f64 = out.iter().map(|&e| x[e]).sum();
                if mass <= 0.0 {
                    continue;
                }
                for &e in out {
                    for &f in out {
                        h[(e, f)] -= 1.0 / mass;
                    }
                }
            }
            h
        }
    }
}

/// Minimizes ⟨g, x⟩ + R(x) subject to Ax = b, starting from a feasible
/// interior `x0`. Returns the minimizer and its stationarity residual.
pub fn newton_prox(
    reg: &Regularizer,
    cons: &LinearConstraints,
    g: &[f64],
    x0: &[f64],
    controls: SolverControls,
) -> Result<(Vec<f64>, SolverDiagnostics)> {
    let n = x0.len();
    let p = cons.a.nrows();
    let mut x = x0.to_vec();
    let objective = |x: &[f64]| -> Result<f64> {
        Ok(g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + reg.value(x)?)
    };
    let mut diag = SolverDiagnostics { solver: "KKT Newton", iterations: 0, residual: f64::INFINITY, tolerance: controls.tol };
    for it in 1..=controls.max_iter {
        diag.iterations = it;
        let grad: Vec<f64> = reg.grad(&x)?.iter().zip(g).map(|(a, b)| a + b).collect();
        let h = hessian_matrix(reg, &x);
        let mut kkt = DMatrix::zeros(n + p, n + p);
        kkt.view_mut((0, 0), (n, n)).copy_from(&h);
        kkt.view_mut((n, 0), (p, n)).copy_from(&cons.a);
        kkt.view_mut((0, n), (n, p)).copy_from(&cons.a.transpose());
        let mut rhs = DVector::zeros(n + p);
        for i in 0..n {
            rhs[i] = -grad[i];
        }
        let primal_gap = &cons.b - &cons.a * DVector::from_column_slice(&x);
        rhs.rows_mut(n, p).copy_from(&primal_gap);
        let sol = kkt.lu().solve(&rhs).ok_or_else(|| Error::SolverFailure(diag.clone()))?;
        let delta: Vec<f64> = sol.rows(0, n).iter().copied().collect();

        // HΔ + Aᵀν = −∇f, so ‖HΔ‖ is the stationarity gap of the current x.
        let h_delta = &h * DVector::from_column_slice(&delta);
        diag.residual = h_delta.amax().max(primal_gap.amax());
        let step_size = delta.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if diag.residual <= controls.tol || step_size <= 1e-15 {
            return Ok((x, diag));
        }

        let mut alpha = 1.0f64;
        for (xi, di) in x.iter().zip(&delta) {
            if *di < 0.0 {
                alpha = alpha.min(-0.99 * xi / di);
            }
        }
        let slope: f64 = grad.iter().zip(&delta).map(|(a, b)| a * b).sum();
        let f0 = objective(&x)?;
        let decrement = -slope;
        loop {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi + alpha * di).collect();
            let f1 = objective(&trial)?;
            // Once the decrement is at round-off level the objective cannot
            // discriminate steps any more; take the (boundary-safe) step.
            if f1 <= f0 + 0.25 * alpha * slope || decrement < 1e-12 || alpha < 1e-12 {
                x = trial;
                break;
            }
            alpha *= 0.5;
        }
    }
    if diag.residual <= controls.tol {
        Ok((x, diag))
    } else {
        Err(Error::SolverFailure(diag))
    }
}

/// Generic OMD whose every proximal step is a numeric KKT solve.
#[derive(Debug, Clone)]
pub struct NumericOmd {
    eta: f64,
    reg: Regularizer,
    cons: LinearConstraints,
    set: DecisionSet,
    x: Vec<f64>,
    controls: SolverControls,
    last_residual: f64,
}

impl NumericOmd {
    /// Starts at argmin R over the constraint set, solved numerically from
    /// the feasible interior point `x0`.
    pub fn new(set: DecisionSet, reg: Regularizer, eta: f64, x0: &[f64], controls: SolverControls) -> Result<Self> {
        let cons = LinearConstraints::for_set(&set)?;
        let zeros = vec![0.0; x0.len()];
        let (x, diag) = newton_prox(&reg, &cons, &zeros, x0, controls)?;
        Ok(NumericOmd { eta, reg, cons, set, x, controls, last_residual: diag.residual })
    }

    /// Dilated-entropy OMD on a DAG, started from the even-split flow.
    pub fn dilated(dag: Dag, eta: f64, controls: SolverControls) -> Result<Self> {
        let x0 = uniform_split_flow(&dag);
        let reg = Regularizer::DilatedEntropy(dag.clone());
        Self::new(DecisionSet::dag_paths(dag)?, reg, eta, &x0, controls)
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }
}

impl Learner for NumericOmd {
    fn name(&self) -> &str {
        "omd-numeric"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        let grad_old = self.reg.grad(&self.x)?;
        let g: Vec<f64> = y.iter().zip(&grad_old).map(|(yi, gi)| self.eta * yi - gi).collect();
        let (x, diag) = newton_prox(&self.reg, &self.cons, &g, &self.x, self.controls)?;
        self.x = x;
        self.last_residual = diag.residual;
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.x, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::mset_prox;

    fn diamond() -> Dag {
        Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
    }

    #[test]
    fn flow_rows() {
        let cons = flow_constraints(&diamond());
        assert_eq!(cons.a.nrows(), 3);
        assert!(cons.residual(&[0.5; 4]) < 1e-15);
        assert!(cons.residual(&[0.7, 0.7, 0.3, 0.3]) > 0.1);
    }

    #[test]
    fn newton_agrees_with_mset_bisection() {
        let set = DecisionSet::mset(4, 2).unwrap();
        let reg = Regularizer::MSetPhi { m: 2 };
        let cons = LinearConstraints::for_set(&set).unwrap();
        let x_old = [0.5; 4];
        let y = [0.5, 0.0, 0.0, 0.0];
        let eta = 0.1;
        let grad_old = reg.grad(&x_old).unwrap();
        let g: Vec<f64> = y.iter().zip(&grad_old).map(|(yi, gi)| eta * yi - gi).collect();
        let (x, diag) = newton_prox(&reg, &cons, &g, &x_old, SolverControls { tol: 1e-12, max_iter: 100 }).unwrap();
        assert!(diag.residual <= 1e-12);
        let fast = mset_prox(&x_old, &y, eta, 2, SolverControls::default()).unwrap();
        for (a, b) in x.iter().zip(&fast.x) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn dilated_minimizer_is_uniform_over_paths() {
        // Two paths through the upper branch, one through the lower.
        let dag = Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (1, 3), (2, 3)], 0, 3).unwrap();
        let omd = NumericOmd::dilated(dag, 0.1, SolverControls::default()).unwrap();
        let x = omd.policy();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-9);
    }
}
