use crate::domain::{block_ranges, log_sum_exp, Dag, DecisionSet, Vertex};
use crate::error::{Error, Result, SolverDiagnostics};
use crate::learners::hedge::{pushed_log_conditionals, weight_pushing_marginals};
use crate::learners::{Learner, SolverControls};
use crate::sampling::{sample_vertex, RngStream};

/// Tolerance on |Σx − m| for the m-set proximal step.
const SUM_TOL: f64 = 1e-12;

/// Result of one m-set proximal step.
#[derive(Debug, Clone)]
pub struct MSetProx {
    pub x: Vec<f64>,
    /// Multiplier of the sum constraint.
    pub lambda: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
}

fn phi_grad(x: f64, inv_m: f64) -> f64 {
    2.0 * x + (x.ln() + 1.0) * inv_m
}

/// Solves 2x + (ln x + 1)/m = r for x ∈ (0, 1], clipping at 1.
fn solve_coordinate(r: f64, inv_m: f64) -> f64 {
    if r >= 2.0 + inv_m {
        return 1.0;
    }
    // h(u) = 2e^u + (u + 1)/m − r is convex and increasing in u = ln x with
    // h(0) > 0, so Newton from u = 0 decreases monotonically to the root.
    let mut u = 0.0f64;
    for _ in 0..200 {
        let eu = u.exp();
        let h = 2.0 * eu + (u + 1.0) * inv_m - r;
        let step = h / (2.0 * eu + inv_m);
        u -= step;
        if step.abs() <= 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    u.exp().min(1.0)
}

/// argmin over {x ∈ [0,1]^d : Σx = m} of η⟨y, x⟩ + D_φ(x ‖ x_old).
///
/// Stationarity reads ∇φ(x) = ∇φ(x_old) − ηy − λ1 (minus box multipliers);
/// each coordinate is a monotone scalar solve and λ is found by safeguarded
/// Newton on the sum constraint.
pub fn mset_prox(x_old: &[f64], y: &[f64], eta: f64, m: usize, controls: SolverControls) -> Result<MSetProx> {
    let d = x_old.len();
    let inv_m = 1.0 / m as f64;
    let c: Vec<f64> = x_old.iter().zip(y).map(|(&x, &yi)| phi_grad(x, inv_m) - eta * yi).collect();
    let solve_all = |lambda: f64| -> Vec<f64> { c.iter().map(|&ci| solve_coordinate(ci - lambda, inv_m)).collect() };
    let excess = |x: &[f64]| x.iter().sum::<f64>() - m as f64;

    let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = c_min - (2.0 + inv_m) - 1.0;
    let mut hi = c_max - phi_grad(m as f64 / (2.0 * d as f64), inv_m);

    let mut lambda = 0.0f64.clamp(lo, hi);
    let mut x = solve_all(lambda);
    let mut g = excess(&x);
    let mut iterations = 0;
    while g.abs() > SUM_TOL {
        iterations += 1;
        if iterations > controls.max_iter {
            return Err(Error::SolverFailure(SolverDiagnostics {
                solver: "m-set proximal step",
                iterations,
                residual: g.abs(),
                tolerance: SUM_TOL,
            }));
        }
        if g > 0.0 {
            lo = lo.max(lambda);
        } else {
            hi = hi.min(lambda);
        }
        let slope: f64 = x.iter().filter(|&&xi| xi < 1.0).map(|&xi| 1.0 / (2.0 + inv_m / xi)).sum();
        let newton = if slope > 0.0 { lambda + g / slope } else { f64::NAN };
        lambda = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        x = solve_all(lambda);
        g = excess(&x);
        if hi - lo <= f64::EPSILON * (1.0 + lambda.abs()) && g.abs() > SUM_TOL {
            return Err(Error::SolverFailure(SolverDiagnostics {
                solver: "m-set proximal step",
                iterations,
                residual: g.abs(),
                tolerance: SUM_TOL,
            }));
        }
    }

    let kkt_residual = c
        .iter()
        .zip(&x)
        .map(|(&ci, &xi)| {
            let r = ci - lambda;
            if xi >= 1.0 {
                (2.0 + inv_m - r).max(0.0)
            } else {
                (phi_grad(xi, inv_m) - r).abs()
            }
        })
        .fold(g.abs(), f64::max);
    Ok(MSetProx { x, lambda, iterations, kkt_residual })
}

/// OMD with the m-set regularizer φ.
#[derive(Debug, Clone)]
pub struct MSetOmd {
    eta: f64,
    m: usize,
    set: DecisionSet,
    x: Vec<f64>,
    controls: SolverControls,
    last_kkt_residual: f64,
}

impl MSetOmd {
    /// Starts at the φ-minimizer over co(X), the uniform point m/d.
    pub fn new(d: usize, m: usize, eta: f64) -> Result<Self> {
        let set = DecisionSet::mset(d, m)?;
        Ok(MSetOmd {
            eta,
            m,
            set,
            x: vec![m as f64 / d as f64; d],
            controls: SolverControls::default(),
            last_kkt_residual: 0.0,
        })
    }

    pub fn with_controls(mut self, controls: SolverControls) -> Self {
        self.controls = controls;
        self
    }

    pub fn last_kkt_residual(&self) -> f64 {
        self.last_kkt_residual
    }
}

impl Learner for MSetOmd {
    fn name(&self) -> &str {
        "omd-mset"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        let prox = mset_prox(&self.x, y, self.eta, self.m, self.controls)?;
        self.last_kkt_residual = prox.kkt_residual;
        self.x = prox.x;
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.x, rng)
    }
}

/// OMD with the dilated entropy on a DAG. The proximal step has the closed
/// form of one round of weight pushing seeded with the current conditional
/// edge probabilities.
#[derive(Debug, Clone)]
pub struct DilatedOmd {
    eta: f64,
    set: DecisionSet,
    log_cond: Vec<f64>,
    x: Vec<f64>,
}

impl DilatedOmd {
    /// Starts at the ψ-minimizer: the flow of the uniform path distribution.
    pub fn new(dag: Dag, eta: f64) -> Result<Self> {
        let zeros = vec![0.0; dag.n_edges()];
        let log_cond = pushed_log_conditionals(&dag, &zeros);
        let x = weight_pushing_marginals(&dag, &log_cond);
        Ok(DilatedOmd { eta, log_cond, x, set: DecisionSet::dag_paths(dag)? })
    }

    fn dag(&self) -> &Dag {
        self.set.as_dag().expect("constructed from a DAG")
    }
}

impl Learner for DilatedOmd {
    fn name(&self) -> &str {
        "omd-dilated"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        let lw: Vec<f64> = self.log_cond.iter().zip(y).map(|(l, v)| l - self.eta * v).collect();
        self.log_cond = pushed_log_conditionals(self.dag(), &lw);
        self.x = weight_pushing_marginals(self.dag(), &self.log_cond);
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.x, rng)
    }
}

/// Negative-entropy OMD on a product of simplices: multiplicative update and
/// per-block normalization.
#[derive(Debug, Clone)]
pub struct MultitaskEntropyOmd {
    eta: f64,
    set: DecisionSet,
    blocks: Vec<usize>,
    x: Vec<f64>,
}

impl MultitaskEntropyOmd {
    pub fn new(blocks: Vec<usize>, eta: f64) -> Result<Self> {
        let set = DecisionSet::multitask(blocks.clone())?;
        let x = blocks.iter().flat_map(|&b| std::iter::repeat_n(1.0 / b as f64, b)).collect();
        Ok(MultitaskEntropyOmd { eta, set, blocks, x })
    }
}

impl Learner for MultitaskEntropyOmd {
    fn name(&self) -> &str {
        "omd-entropy"
    }

    fn eta(&self) -> f64 {
        self.eta
    }

    fn policy(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, y: &[f64]) -> Result<()> {
        for r in block_ranges(&self.blocks) {
            let logits: Vec<f64> = r.clone().map(|i| self.x[i].ln() - self.eta * y[i]).collect();
            let norm = log_sum_exp(logits.iter().copied());
            for (i, l) in r.zip(logits) {
                self.x[i] = (l - norm).exp();
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut RngStream) -> Result<Vertex> {
        sample_vertex(&self.set, &self.x, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::DagHedge;

    #[test]
    fn zero_loss_is_identity() {
        let x = vec![0.5; 4];
        let prox = mset_prox(&x, &[0.0; 4], 0.1, 2, SolverControls::default()).unwrap();
        for (a, b) in prox.x.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn penalized_coordinate_decreases() {
        let x = vec![0.5; 4];
        let prox = mset_prox(&x, &[0.5, 0.0, 0.0, 0.0], 0.1, 2, SolverControls::default()).unwrap();
        assert!(prox.x[0] < 0.5);
        assert!((prox.x[1] - prox.x[2]).abs() < 1e-15 && (prox.x[2] - prox.x[3]).abs() < 1e-15);
        assert!((prox.x.iter().sum::<f64>() - 2.0).abs() <= 1e-12);
        assert!(prox.kkt_residual <= 1e-9);
    }

    #[test]
    fn cap_at_one_is_respected() {
        let x = vec![0.25; 8];
        let mut y = vec![0.0; 8];
        y[0] = -1.0;
        let prox = mset_prox(&x, &y, 50.0, 2, SolverControls::default()).unwrap();
        assert_eq!(prox.x[0], 1.0);
        assert!((prox.x.iter().sum::<f64>() - 2.0).abs() <= 1e-12);
        assert!(prox.kkt_residual <= 1e-9);
    }

    #[test]
    fn dilated_omd_tracks_dag_hedge() {
        let dag = Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap();
        let mut omd = DilatedOmd::new(dag.clone(), 1.0).unwrap();
        let mut hedge = DagHedge::new(dag, 1.0).unwrap();
        for y in [[0.5, 0.0, 0.5, 0.0], [0.0, 0.3, 0.0, -0.6], [-0.2, 0.1, 0.4, 0.2]] {
            omd.observe(&y).unwrap();
            hedge.observe(&y).unwrap();
            for (a, b) in omd.policy().iter().zip(hedge.policy()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multitask_entropy_omd_matches_hedge() {
        let mut omd = MultitaskEntropyOmd::new(vec![3, 2], 0.4).unwrap();
        let mut hedge = crate::learners::MultitaskHedge::new(vec![3, 2], 0.4).unwrap();
        for y in [[0.1, -0.4, 0.2, 0.5, -0.5], [0.3, 0.0, -0.1, 0.0, 0.2]] {
            omd.observe(&y).unwrap();
            hedge.observe(&y).unwrap();
            for (a, b) in omd.policy().iter().zip(hedge.policy()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
