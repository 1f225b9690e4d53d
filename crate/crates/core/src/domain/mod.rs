//! Decision sets, the dual/primal norm pair, loss validation and DAG utilities.

mod dag;
mod ledger;
mod set;

use std::fmt;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

pub use dag::{dag_validate, flow_check, Dag, DagDefect, FlowCheck, FLOW_TOL};
pub(crate) use dag::log_sum_exp;
pub use ledger::{best_in_hindsight, regret_of, RegretLedger, RegretRow};
pub use set::{
    binomial, canonical_cmp, dot, dot_binary, ln_binomial, DecisionSet, ExplicitSet,
    DEFAULT_ENUMERATION_CAP,
};
pub(crate) use set::block_ranges;

use crate::error::{Error, Result, SolverDiagnostics};

/// A binary characteristic vector.
pub type Vertex = Vec<u8>;

/// Feasibility slack for the loss set and membership checks.
pub const TOL_FEAS: f64 = 1e-9;

/// ‖z‖* = max over X of |⟨x, z⟩|.
pub fn dual_norm(set: &DecisionSet, z: &[f64]) -> f64 {
    let (_, lo) = set.min_vertex(z);
    let (_, hi) = set.max_vertex(z);
    lo.abs().max(hi.abs())
}

/// Why a loss vector was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum LossViolation {
    WrongLength { expected: usize, got: usize },
    NonFinite { index: usize },
    /// `witness` achieves |⟨witness, y⟩| = `value` > 1 + tol.
    OutOfRange { witness: Vertex, value: f64 },
}

impl fmt::Display for LossViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossViolation::WrongLength { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            LossViolation::NonFinite { index } => write!(f, "entry {index} is not finite"),
            LossViolation::OutOfRange { witness, value } => {
                let bits: String = witness.iter().map(|b| char::from(b'0' + b)).collect();
                write!(f, "action {bits} has loss of magnitude {value}")
            }
        }
    }
}

/// Accepts `y` iff every action's loss lies in [−1 − tol, 1 + tol].
pub fn validate_loss(set: &DecisionSet, y: &[f64]) -> std::result::Result<(), LossViolation> {
    if y.len() != set.dim() {
        return Err(LossViolation::WrongLength { expected: set.dim(), got: y.len() });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(LossViolation::NonFinite { index });
    }
    let (lo_vertex, lo) = set.min_vertex(y);
    let (hi_vertex, hi) = set.max_vertex(y);
    let (witness, value) = if hi.abs() >= lo.abs() { (hi_vertex, hi) } else { (lo_vertex, lo) };
    if value.abs() > 1.0 + TOL_FEAS {
        return Err(LossViolation::OutOfRange { witness, value: value.abs() });
    }
    Ok(())
}

/// Largest violation of the co(X) equalities for the structured variants:
/// the m-set sum, the per-block sums, or the flow constraints.
/// Explicit sets only get the box check.
pub fn policy_residual(set: &DecisionSet, x: &[f64]) -> f64 {
    let boxed = x.iter().map(|&v| (-v).max(v - 1.0).max(0.0)).fold(0.0, f64::max);
    match set {
        DecisionSet::Explicit(_) => boxed,
        DecisionSet::MSet { m, .. } => boxed.max((x.iter().sum::<f64>() - *m as f64).abs()),
        DecisionSet::Multitask { blocks } => block_ranges(blocks)
            .into_iter()
            .map(|r| (x[r].iter().sum::<f64>() - 1.0).abs())
            .fold(boxed, f64::max),
        DecisionSet::DagPaths(dag) => flow_check(dag, x).residual,
    }
}

const LP_TOL: f64 = 1e-8;

/// Vertices chosen greedily to form a basis of span(X), by Gram–Schmidt.
fn vertex_basis(vertices: &[Vertex]) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::new();
    for (idx, x) in vertices.iter().enumerate() {
        let mut r: Vec<f64> = x.iter().map(|&b| f64::from(b)).collect();
        for q in &basis {
            let c = dot(q, &r);
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= c * qi;
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm > 1e-9 {
            basis.push(r.into_iter().map(|v| v / norm).collect());
            chosen.push(idx);
        }
    }
    chosen
}

/// The primal norm ‖z‖ = max {⟨y, z⟩ : |⟨x, y⟩| ≤ 1 ∀x ∈ X}, by linear
/// programming over the enumerated vertices. z must lie in span(X).
///
/// Both LPs are posed in the coordinates of a vertex basis B of span(X):
/// y enters only through w_j = ⟨b_j, y⟩, which removes the unconstrained
/// directions orthogonal to span(X). The dual LP
/// min {Σ|c_x| : Σ c_x x = z} is solved too and the two optima must agree
/// to 1e-8.
pub fn primal_norm_bruteforce(set: &DecisionSet, z: &[f64], cap: usize) -> Result<f64> {
    let vertices = set.enumerate_vertices(cap)?;
    if z.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let d = set.dim();
    let chosen = vertex_basis(&vertices);
    let r = chosen.len();
    let basis = DMatrix::from_fn(d, r, |i, j| f64::from(vertices[chosen[j]][i]));
    let pinv = basis.clone().pseudo_inverse(1e-12).map_err(|e| Error::Internal(e.to_string()))?;
    let coords = |v: &DVector<f64>| -> (DVector<f64>, f64) {
        let a = &pinv * v;
        let residual = (&basis * &a - v).amax();
        (a, residual)
    };
    let (zc, z_residual) = coords(&DVector::from_column_slice(z));
    if z_residual > 1e-9 * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
        return Err(Error::Precondition(format!("z is not in span(X) (residual {z_residual:.2e})")));
    }
    let vertex_coords: Vec<DVector<f64>> = vertices
        .iter()
        .map(|x| coords(&DVector::from_iterator(d, x.iter().map(|&b| f64::from(b)))).0)
        .collect();
    let lp_failure = |what: &str, residual: f64| {
        Error::SolverFailure(SolverDiagnostics {
            solver: if what == "primal" { "primal-norm LP" } else { "primal-norm dual LP" },
            iterations: 0,
            residual,
            tolerance: LP_TOL,
        })
    };
    let sparse_row = |a: &DVector<f64>| a.iter().enumerate().filter(|(_, v)| v.abs() > 1e-12).map(|(j, &v)| (j, v)).collect::<Vec<_>>();

    let mut primal = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = zc.iter().map(|&c| primal.add_var(c, (-1.0, 1.0))).collect();
    for (idx, a) in vertex_coords.iter().enumerate() {
        if chosen.contains(&idx) {
            continue;
        }
        let row: Vec<_> = sparse_row(a).into_iter().map(|(j, v)| (w[j], v)).collect();
        primal.add_constraint(row.as_slice(), ComparisonOp::Le, 1.0);
        primal.add_constraint(row.as_slice(), ComparisonOp::Ge, -1.0);
    }
    let primal_value = primal
        .solve()
        .ok()
        .and_then(|o| o.into_solution().ok())
        .map(|s| s.objective())
        .ok_or_else(|| lp_failure("primal", f64::INFINITY))?;

    let mut dual = Problem::new(OptimizationDirection::Minimize);
    let coeffs: Vec<_> = vertices
        .iter()
        .map(|_| (dual.add_var(1.0, (0.0, f64::INFINITY)), dual.add_var(1.0, (0.0, f64::INFINITY))))
        .collect();
    let mut rows: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); r];
    for (a, &(p, q)) in vertex_coords.iter().zip(&coeffs) {
        for (j, v) in sparse_row(a) {
            rows[j].push((p, v));
            rows[j].push((q, -v));
        }
    }
    for (row, &target) in rows.iter().zip(zc.iter()) {
        dual.add_constraint(row.as_slice(), ComparisonOp::Eq, target);
    }
    let dual_value = dual
        .solve()
        .ok()
        .and_then(|o| o.into_solution().ok())
        .map(|s| s.objective())
        .ok_or_else(|| lp_failure("dual", f64::INFINITY))?;

    let gap = (primal_value - dual_value).abs();
    if gap > LP_TOL * (1.0 + primal_value.abs()) {
        return Err(lp_failure("primal", gap));
    }
    Ok(primal_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Dag {
        Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
    }

    #[test]
    fn dual_norm_examples() {
        let set = DecisionSet::mset(4, 2).unwrap();
        assert_eq!(dual_norm(&set, &[1.0, 1.0, 0.0, 0.0]), 2.0);
        assert!((dual_norm(&set, &[1.0, -1.0, 0.5, -0.5]) - 1.5).abs() < 1e-15);
        let parallel = DecisionSet::dag_paths(Dag::new(2, vec![(0, 1), (0, 1)], 0, 1).unwrap()).unwrap();
        assert!((dual_norm(&parallel, &[0.3, -0.9]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn validate_loss_examples() {
        let set = DecisionSet::mset(4, 2).unwrap();
        assert!(validate_loss(&set, &[0.5; 4]).is_ok());
        match validate_loss(&set, &[1.0, 1.0, 0.0, 0.0]) {
            Err(LossViolation::OutOfRange { witness, value }) => {
                assert_eq!(witness, vec![1, 1, 0, 0]);
                assert_eq!(value, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let path = DecisionSet::dag_paths(Dag::new(4, vec![(0, 1), (1, 2), (2, 3)], 0, 3).unwrap()).unwrap();
        assert!(validate_loss(&path, &[0.5, 0.5, 0.5]).is_err());
        assert!(matches!(
            validate_loss(&set, &[f64::NAN, 0.0, 0.0, 0.0]),
            Err(LossViolation::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn primal_norm_examples() {
        let set = DecisionSet::mset(4, 2).unwrap();
        let cap = DEFAULT_ENUMERATION_CAP;
        assert_eq!(primal_norm_bruteforce(&set, &[0.0; 4], cap).unwrap(), 0.0);
        let e1 = primal_norm_bruteforce(&set, &[1.0, 0.0, 0.0, 0.0], cap).unwrap();
        assert!(e1 <= 3.5 + 1e-8, "{e1}");
        let ones = primal_norm_bruteforce(&set, &[1.0; 4], cap).unwrap();
        assert!((ones - 2.0).abs() < 1e-8, "{ones}");
    }

    #[test]
    fn primal_norm_on_rank_deficient_paths() {
        let set = DecisionSet::dag_paths(diamond()).unwrap();
        let cap = DEFAULT_ENUMERATION_CAP;
        let diff = primal_norm_bruteforce(&set, &[1.0, -1.0, 1.0, -1.0], cap).unwrap();
        assert!((diff - 2.0).abs() < 1e-8, "{diff}");
        assert!(matches!(
            primal_norm_bruteforce(&set, &[1.0, 0.0, 0.0, 0.0], cap),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn diamond_policy_residual() {
        let set = DecisionSet::dag_paths(diamond()).unwrap();
        assert!(policy_residual(&set, &[0.5; 4]) < 1e-15);
        assert!((policy_residual(&set, &[0.7, 0.7, 0.3, 0.3]) - 0.4).abs() < 1e-12);
    }
}
