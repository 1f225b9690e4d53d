//! Random instances for the property suite and the certificates.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{dual_norm, Dag, DecisionSet, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::sampling::RngStream;

const MAX_ATTEMPTS: usize = 10_000;

/// A random DAG with at most `max_edges` edges and at most `max_paths`
/// source–sink paths. Vertex 0 is the source and the last vertex the sink;
/// edge order is shuffled.
pub fn random_dag(rng: &mut RngStream, max_edges: usize, max_paths: u128) -> Result<Dag> {
    if max_edges < 1 || max_paths < 1 {
        return Err(Error::Precondition("need room for at least one edge and one path".into()));
    }
    for _ in 0..MAX_ATTEMPTS {
        let internal = rng.random_range(0..=(max_edges.saturating_sub(1) / 2).min(8));
        let n = internal + 2;
        let sink = n - 1;
        let mut edges = Vec::new();
        if internal == 0 {
            edges.push((0, sink));
        }
        for v in 1..=internal {
            edges.push((rng.random_range(0..v), v));
            edges.push((v, rng.random_range(v + 1..n)));
        }
        let extra = rng.random_range(0..=max_edges - edges.len().min(max_edges));
        for _ in 0..extra {
            let u = rng.random_range(0..sink);
            let w = rng.random_range(u + 1..n);
            edges.push((u, w));
        }
        if edges.len() > max_edges {
            continue;
        }
        edges.shuffle(rng);
        let dag = Dag::new(n, edges, 0, sink)?;
        if dag.path_count() <= max_paths {
            return Ok(dag);
        }
    }
    Err(Error::Internal("random DAG generation did not meet its budgets".into()))
}

/// Per-edge conditionals drawn uniformly from [0.05, 1] and normalized at
/// each tail.
pub fn random_conditionals(dag: &Dag, rng: &mut RngStream) -> Vec<f64> {
    let mut cond: Vec<f64> = (0..dag.n_edges()).map(|_| rng.random_range(0.05..=1.0)).collect();
    for v in 0..dag.n_vertices() {
        let out = dag.out_edges(v);
        let total: f64 = out.iter().map(|&e| cond[e]).sum();
        for &e in out {
            cond[e] /= total;
        }
    }
    cond
}

/// The unit flow induced by per-edge conditionals.
pub fn flow_from_conditionals(dag: &Dag, cond: &[f64]) -> Vec<f64> {
    let mut mass = vec![0.0; dag.n_vertices()];
    mass[dag.source()] = 1.0;
    let mut x = vec![0.0; dag.n_edges()];
    for &v in dag.topo_order() {
        for &e in dag.out_edges(v) {
            x[e] = mass[v] * cond[e];
            mass[dag.head(e)] += x[e];
        }
    }
    x
}

/// A strictly positive unit flow.
pub fn random_interior_flow(dag: &Dag, rng: &mut RngStream) -> Vec<f64> {
    flow_from_conditionals(dag, &random_conditionals(dag, rng))
}

/// A point in the relative interior of the m-set polytope: random positive
/// weights rescaled to sum m, pulled toward m/d until every entry is below 1.
pub fn random_interior_mset(d: usize, m: usize, rng: &mut RngStream) -> Vec<f64> {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..=1.0)).collect();
    let total: f64 = w.iter().sum();
    let center = m as f64 / d as f64;
    let x: Vec<f64> = w.iter().map(|v| v * m as f64 / total).collect();
    let top = x.iter().copied().fold(0.0, f64::max);
    let reach = if top > center { ((0.999 - center) / (top - center)).min(1.0) } else { 1.0 };
    let a = reach * rng.random_range(0.0..=1.0);
    x.into_iter().map(|v| center + a * (v - center)).collect()
}

/// A loss vector with dual norm at most 1: uniform on [−1, 1]^d, then either
/// rescaled onto the unit sphere of the dual norm or only into the ball.
pub fn random_dual_ball_loss(set: &DecisionSet, rng: &mut RngStream) -> Vec<f64> {
    let y: Vec<f64> = (0..set.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let norm = dual_norm(set, &y);
    if norm == 0.0 {
        return y;
    }
    let scale = if rng.random::<bool>() { norm } else { norm.max(1.0) };
    y.into_iter().map(|v| v / scale).collect()
}

/// A random direction in span(X − X): a combination of differences of
/// enumerated vertices.
pub fn random_tangent(set: &DecisionSet, rng: &mut RngStream) -> Result<Vec<f64>> {
    let vertices = set.enumerate_vertices(DEFAULT_ENUMERATION_CAP)?;
    let mut z = vec![0.0; set.dim()];
    let terms = rng.random_range(1..=3);
    for _ in 0..terms {
        let a = &vertices[rng.random_range(0..vertices.len())];
        let b = &vertices[rng.random_range(0..vertices.len())];
        let c: f64 = rng.random_range(-2.0..=2.0);
        for ((zi, &ai), &bi) in z.iter_mut().zip(a).zip(b) {
            *zi += c * (f64::from(ai) - f64::from(bi));
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{flow_check, policy_residual};

    #[test]
    fn dags_respect_budgets() {
        let mut rng = RngStream::new(3);
        for _ in 0..200 {
            let dag = random_dag(&mut rng, 15, 20).unwrap();
            assert!(dag.n_edges() <= 15);
            assert!(dag.path_count() <= 20);
            let x = random_interior_flow(&dag, &mut rng);
            assert!(flow_check(&dag, &x).ok);
            assert!(x.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn interior_mset_points() {
        let mut rng = RngStream::new(5);
        let set = DecisionSet::mset(10, 5).unwrap();
        for _ in 0..200 {
            let x = random_interior_mset(10, 5, &mut rng);
            assert!(policy_residual(&set, &x) < 1e-9, "{x:?}");
            assert!(x.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn losses_in_dual_ball() {
        let mut rng = RngStream::new(8);
        let set = DecisionSet::mset(8, 3).unwrap();
        for _ in 0..100 {
            assert!(dual_norm(&set, &random_dual_ball_loss(&set, &mut rng)) <= 1.0 + 1e-12);
        }
    }
}
