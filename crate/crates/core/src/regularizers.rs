//! The m-set regularizer φ, the dilated entropy ψ on DAG flows, and the
//! negative entropy, with gradients, Hessian quadratic forms and Bregman
//! divergences.

use crate::domain::{dot, Dag};
use crate::error::{Error, Result};

/// Entries below this are rejected as outside the domain.
const NEG_TOL: f64 = 1e-12;
/// Negative Bregman values down to this are treated as round-off.
const BREGMAN_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// φ(x) = Σ x² + (1/m) x ln x.
    MSetPhi { m: usize },
    /// ψ(x) = Σ_E x ln x − Σ_V X_v ln X_v with X_v the outflow of v.
    DilatedEntropy(Dag),
    /// Σ x ln x − x.
    NegativeEntropy,
}

fn xlnx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn check_nonnegative(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| !(v >= -NEG_TOL)) {
        Some(i) => Err(Error::Domain(format!("coordinate {i} is {}", x[i]))),
        None => Ok(()),
    }
}

fn check_positive(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| !(v > 0.0)) {
        Some(i) => Err(Error::Domain(format!("coordinate {i} is {}, expected > 0", x[i]))),
        None => Ok(()),
    }
}

/// Outflow of every vertex; the sink has none.
fn outflows(dag: &Dag, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dag.n_vertices()];
    for (e, &(u, _)) in dag.edges().iter().enumerate() {
        out[u] += x[e];
    }
    out
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::MSetPhi { .. } => "mset-phi",
            Regularizer::DilatedEntropy(_) => "dilated-entropy",
            Regularizer::NegativeEntropy => "negative-entropy",
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_nonnegative(x)?;
        Ok(match self {
            Regularizer::MSetPhi { m } => {
                let inv_m = 1.0 / *m as f64;
                x.iter().map(|&v| v * v + inv_m * xlnx(v)).sum()
            }
            Regularizer::DilatedEntropy(dag) => {
                let edges: f64 = x.iter().map(|&v| xlnx(v)).sum();
                let vertices: f64 = outflows(dag, x).into_iter().map(xlnx).sum();
                edges - vertices
            }
            Regularizer::NegativeEntropy => x.iter().map(|&v| xlnx(v) - v).sum(),
        })
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_positive(x)?;
        Ok(match self {
            Regularizer::MSetPhi { m } => {
                let inv_m = 1.0 / *m as f64;
                x.iter().map(|&v| 2.0 * v + (v.ln() + 1.0) * inv_m).collect()
            }
            Regularizer::DilatedEntropy(dag) => {
                // d/dx_e of x_e ln x_e gives ln x_e + 1; the tail's outflow
                // term contributes −(ln X_u + 1).
                let out = outflows(dag, x);
                dag.edges().iter().zip(x).map(|(&(u, _), &v)| v.ln() - out[u].ln()).collect()
            }
            Regularizer::NegativeEntropy => x.iter().map(|v| v.ln()).collect(),
        })
    }

    /// zᵀ ∇²R(x) z.
    pub fn hessian_quadform(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_positive(x)?;
        Ok(match self {
            Regularizer::MSetPhi { m } => {
                let inv_m = 1.0 / *m as f64;
                x.iter().zip(z).map(|(&xi, &zi)| zi * zi * (2.0 + inv_m / xi)).sum()
            }
            Regularizer::DilatedEntropy(dag) => {
                let out = outflows(dag, x);
                let zout = outflows(dag, z);
                let edges: f64 = x.iter().zip(z).map(|(&xi, &zi)| zi * zi / xi).sum();
                let vertices: f64 = out
                    .iter()
                    .zip(&zout)
                    .filter(|(&xv, _)| xv > 0.0)
                    .map(|(&xv, &zv)| zv * zv / xv)
                    .sum();
                edges - vertices
            }
            Regularizer::NegativeEntropy => x.iter().zip(z).map(|(&xi, &zi)| zi * zi / xi).sum(),
        })
    }

    /// D(x_new ‖ x_old).
    pub fn bregman(&self, x_new: &[f64], x_old: &[f64]) -> Result<f64> {
        let g = self.grad(x_old)?;
        let diff: Vec<f64> = x_new.iter().zip(x_old).map(|(a, b)| a - b).collect();
        let value = self.value(x_new)? - self.value(x_old)? - dot(&g, &diff);
        if value < -BREGMAN_SLACK {
            return Err(Error::Internal(format!("{} Bregman divergence is {value}", self.name())));
        }
        Ok(value.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Dag {
        Dag::new(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3).unwrap()
    }

    fn finite_difference(reg: &Regularizer, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (reg.value(&hi).unwrap() - reg.value(&lo).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn values() {
        assert_eq!(Regularizer::MSetPhi { m: 2 }.value(&[1.0, 1.0, 0.0, 0.0]).unwrap(), 2.0);
        let path = Dag::new(3, vec![(0, 1), (1, 2)], 0, 2).unwrap();
        assert_eq!(Regularizer::DilatedEntropy(path).value(&[1.0, 1.0]).unwrap(), 0.0);
        let psi = Regularizer::DilatedEntropy(diamond()).value(&[0.5; 4]).unwrap();
        assert!((psi + std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(Regularizer::NegativeEntropy.value(&[0.5, -1e-6]), Err(Error::Domain(_))));
        assert!(Regularizer::NegativeEntropy.value(&[0.5, -1e-13]).is_ok());
    }

    #[test]
    fn gradients() {
        assert_eq!(Regularizer::NegativeEntropy.grad(&[1.0; 3]).unwrap(), vec![0.0; 3]);
        let phi = Regularizer::MSetPhi { m: 2 };
        let g = phi.grad(&[0.5; 4]).unwrap();
        let expected = 1.0 + (1.0 - std::f64::consts::LN_2) / 2.0;
        for (gi, fd) in g.iter().zip(finite_difference(&phi, &[0.5; 4])) {
            assert!((gi - expected).abs() < 1e-15);
            assert!((gi - fd).abs() < 1e-6);
        }
        assert!(phi.grad(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn dilated_gradient_matches_finite_differences() {
        let psi = Regularizer::DilatedEntropy(diamond());
        for x in [[0.5, 0.5, 0.5, 0.5], [0.3, 0.7, 0.3, 0.7], [0.2, 0.6, 0.4, 0.5]] {
            let g = psi.grad(&x).unwrap();
            for (gi, fd) in g.iter().zip(finite_difference(&psi, &x)) {
                assert!((gi - fd).abs() < 1e-6, "{gi} vs {fd}");
            }
        }
        let g = psi.grad(&[0.5; 4]).unwrap();
        assert_eq!(g[0], g[1]);
        assert_eq!(g[2], g[3]);
    }

    #[test]
    fn hessian_examples() {
        let phi = Regularizer::MSetPhi { m: 2 };
        assert_eq!(phi.hessian_quadform(&[0.5; 4], &[0.0; 4]).unwrap(), 0.0);
        assert!((phi.hessian_quadform(&[0.5; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap() - 3.0).abs() < 1e-15);
        let path = Dag::new(3, vec![(0, 1), (1, 2)], 0, 2).unwrap();
        let psi = Regularizer::DilatedEntropy(path);
        // The only direction within span(X) is a multiple of the path itself.
        assert!(psi.hessian_quadform(&[1.0, 1.0], &[0.7, 0.7]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bregman_identity_and_kl() {
        for reg in [Regularizer::MSetPhi { m: 2 }, Regularizer::NegativeEntropy, Regularizer::DilatedEntropy(diamond())] {
            assert_eq!(reg.bregman(&[0.5; 4], &[0.5; 4]).unwrap(), 0.0);
        }
        let old = [0.25f64; 4];
        let new = [0.7f64, 0.1, 0.1, 0.1];
        let kl: f64 = new.iter().zip(&old).map(|(p, q)| p * (p / q).ln() - p + q).sum();
        let got = Regularizer::NegativeEntropy.bregman(&new, &old).unwrap();
        assert!((got - kl).abs() < 1e-14);
    }
}
