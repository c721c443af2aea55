//! Perron vector, second-largest eigenvalue modulus and nominal consensus
//! value of the ideal weight matrix.
//!
//! With symmetric legitimate links the ideal matrix is a reversible chain
//! with respect to its Perron vector `v`, so `D_v^{1/2} W D_v^{-1/2}` is
//! symmetric and its spectrum (the spectrum of `W`) is real. Eigenvalues are
//! taken from that symmetric matrix with cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::topology::Topology;
use crate::weights::{build_ideal, IdealMatrix};

const REVERSIBILITY_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector {
    pub v: Vec<f64>,
    /// False when the legitimate subgraph is disconnected; `v` is then the
    /// closed-form vector but not the unique stationary distribution.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub v: Vec<f64>,
    pub rho2: f64,
}

impl PerronData {
    pub fn compute(topo: &Topology, kappa: f64) -> Result<Self> {
        let ideal = build_ideal(topo, kappa)?;
        let perron = perron_vector(&ideal, topo);
        if !perron.valid {
            return Err(Error::InvalidSimulation("legitimate subgraph is disconnected".into()));
        }
        let rho2 = rho2(&ideal, &perron.v)?;
        Ok(PerronData { v: perron.v, rho2 })
    }

    pub fn nominal_value(&self, x0: &[f64]) -> Result<f64> {
        nominal_value(&self.v, x0)
    }

    /// The rank-one limit `1 v'`.
    pub fn limit_matrix(&self) -> DenseMatrix {
        let n = self.v.len();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.row_mut(i).copy_from_slice(&self.v);
        }
        m
    }
}

/// `v_i = max(deg_i + 1, kappa) / sum_j max(deg_j + 1, kappa)`.
pub fn perron_vector(ideal: &IdealMatrix, topo: &Topology) -> PerronVector {
    let weights: Vec<f64> =
        (0..topo.n_legit()).map(|i| ideal.kappa().max((topo.legit_degree(i) + 1) as f64)).collect();
    let total: f64 = weights.iter().sum();
    PerronVector { v: weights.iter().map(|w| w / total).collect(), valid: topo.is_legit_connected() }
}

/// Second-largest eigenvalue modulus of a matrix reversible with respect to `v`.
/// A 1x1 matrix has no second eigenvalue and yields 0.
pub fn rho2(ideal: &IdealMatrix, v: &[f64]) -> Result<f64> {
    let w = ideal.matrix();
    let n = w.rows();
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v.len() });
    }
    if n <= 1 {
        return Ok(0.0);
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotReversible("Perron vector must be positive".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (v[i] * w[(i, j)] - v[j] * w[(j, i)]).abs();
            if gap > REVERSIBILITY_TOLERANCE {
                return Err(Error::NotReversible(format!("detailed balance fails at ({i}, {j}) by {gap:e}")));
            }
        }
    }
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (v[i] / v[j]).sqrt() * w[(i, j)];
        }
    }
    // exact symmetry for the solver
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    let mut moduli: Vec<f64> = symmetric_eigenvalues(&s)?.into_iter().map(f64::abs).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli[1])
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.rows(), got: m.cols() });
    }
    let n = m.rows();
    let mut a = m.clone();
    let frob: f64 = (0..n).flat_map(|i| a.row(i).to_vec()).map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &DenseMatrix| -> f64 {
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sum += a[(i, j)] * a[(i, j)];
                }
            }
        }
        sum.sqrt()
    };

    let mut converged = n <= 1 || off(&a) <= JACOBI_TOLERANCE * frob.max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NotConverged("Jacobi eigenvalue iteration"));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
        converged = off(&a) <= JACOBI_TOLERANCE * frob;
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// `sqrt(sum_i v_i x_i^2)`.
pub fn v_norm(x: &[f64], v: &[f64]) -> Result<f64> {
    if x.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: x.len() });
    }
    Ok(x.iter().zip(v).map(|(xi, vi)| vi * xi * xi).sum::<f64>().sqrt())
}

/// `v' x0`: where the legitimate agents agree when the ideal matrix governs
/// from the start.
pub fn nominal_value(v: &[f64], x0: &[f64]) -> Result<f64> {
    if x0.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), got: x0.len() });
    }
    Ok(crate::matrix::dot(v, x0))
}

/// Whether `W^n` is entrywise positive, `n` being the matrix size.
pub fn is_primitive(ideal: &IdealMatrix) -> bool {
    let m = ideal.matrix();
    let n = m.rows();
    if n == 0 {
        return false;
    }
    match m.pow(n as u32) {
        Ok(p) => (0..n).all(|i| p.row(i).iter().all(|&x| x > 0.0)),
        Err(_) => false,
    }
}
