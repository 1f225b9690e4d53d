use serde::Serialize;

use crate::adversaries::LossStream;
use crate::domain::{validate_loss, Dag, DecisionSet};
use crate::error::{Error, Result};
use crate::learners::{DagHedge, Learner, NumericOmd, SolverControls};

pub const DEFAULT_EQUIVALENCE_TOL: f64 = 1e-6;

/// Controls for the numeric dilated-entropy solve on the OMD side.
pub const ORACLE_CONTROLS: SolverControls = SolverControls { tol: 1e-11, max_iter: 200 };

/// Per-round sup-norm gaps between the two iterates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub tol: f64,
    pub pass: bool,
    /// Largest KKT residual the numeric oracle returned.
    pub max_kkt_residual: f64,
}

/// Runs dilated-entropy OMD (solved by damped Newton on the KKT system) and
/// weight-pushing Hedge over paths on the same `horizon` losses, comparing
/// the edge marginals before every update.
pub fn check_iterate_equivalence(
    dag: &Dag,
    stream: &mut dyn LossStream,
    eta: f64,
    horizon: usize,
    tol: f64,
) -> Result<EquivalenceReport> {
    let set = DecisionSet::dag_paths(dag.clone())?;
    let mut omd = NumericOmd::dilated(dag.clone(), eta, ORACLE_CONTROLS)?;
    let mut hedge = DagHedge::new(dag.clone(), eta)?;
    let mut gaps = Vec::with_capacity(horizon);
    let mut max_kkt_residual = omd.last_residual();
    let sup_gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    for round in 1..=horizon {
        gaps.push(sup_gap(omd.policy(), hedge.policy()));
        let y = stream.next_loss();
        validate_loss(&set, &y).map_err(|v| Error::Context {
            trial: 0,
            round,
            learner: "equivalence".into(),
            source: Box::new(Error::Validation(v)),
        })?;
        omd.observe(&y)?;
        hedge.observe(&y)?;
        max_kkt_residual = max_kkt_residual.max(omd.last_residual());
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(EquivalenceReport { gaps, max_gap, tol, pass: max_gap <= tol, max_kkt_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{ConstantStream, RandomFeasibleStream};
    use crate::sampling::RngStream;

    #[test]
    fn single_path_has_no_gap() {
        let dag = Dag::new(3, vec![(0, 1), (1, 2)], 0, 2).unwrap();
        let mut stream = ConstantStream::new(vec![0.5, -0.5]);
        let report = check_iterate_equivalence(&dag, &mut stream, 0.5, 10, 1e-6).unwrap();
        assert!(report.gaps.iter().all(|&g| g == 0.0));
        assert!(report.pass);
    }

    #[test]
    fn diamond_random_stream() {
        let dag = Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap();
        let set = DecisionSet::dag_paths(dag.clone()).unwrap();
        let mut stream = RandomFeasibleStream::new(set, RngStream::new(11));
        let report = check_iterate_equivalence(&dag, &mut stream, 0.3, 50, 1e-6).unwrap();
        assert_eq!(report.gaps.len(), 50);
        assert!(report.pass, "max gap {}", report.max_gap);
    }
}
