//! Trust-driven weight matrices.
//!
//! Agent `i` gives every trusted neighbor the weight `1 / max(kappa, |N_i(t)| + 1)`
//! and keeps the remainder for itself, so each row of `W(t) = [W_L(t) W_M(t)]`
//! sums to one. `kappa` caps the total influence neighbors can have.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::topology::Topology;

pub const IDEAL_TOLERANCE: f64 = 1e-15;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidKappa(kappa))
    }
}

/// Rows over legitimate agents, columns over all agents (legitimate block
/// first, then malicious).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n_legit: usize,
    kappa: f64,
    entries: DenseMatrix,
}

impl WeightMatrix {
    pub fn n_legit(&self) -> usize {
        self.n_legit
    }

    pub fn n_agents(&self) -> usize {
        self.entries.cols()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn entries(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn legit_block(&self) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = (0..self.n_legit).map(|i| self.entries.row(i)[..self.n_legit].to_vec()).collect();
        DenseMatrix::from_rows(&rows).unwrap_or_else(|_| DenseMatrix::zeros(0, 0))
    }

    pub fn malicious_block(&self) -> DenseMatrix {
        let rows: Vec<Vec<f64>> = (0..self.n_legit).map(|i| self.entries.row(i)[self.n_legit..].to_vec()).collect();
        DenseMatrix::from_rows(&rows).unwrap_or_else(|_| DenseMatrix::zeros(self.n_legit, 0))
    }

    /// `W_L x`.
    pub fn apply_legit(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_legit);
        (0..self.n_legit).map(|i| crate::matrix::dot(&self.entries.row(i)[..self.n_legit], x)).collect()
    }

    /// `W_M x_M`.
    pub fn apply_malicious(&self, x_malicious: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x_malicious.len(), self.n_agents() - self.n_legit);
        (0..self.n_legit)
            .map(|i| crate::matrix::dot(&self.entries.row(i)[self.n_legit..], x_malicious))
            .collect()
    }

    /// Row sums of the legitimate block; below one exactly when a malicious
    /// neighbor is trusted.
    pub fn legit_row_sums(&self) -> Vec<f64> {
        (0..self.n_legit).map(|i| self.entries.row(i)[..self.n_legit].iter().sum()).collect()
    }
}

/// Weight matrix for the given trusted sets (`trusted[i]` must be a subset of `N_i`).
pub fn build_weights(topo: &Topology, trusted: &[Vec<usize>], kappa: f64) -> Result<WeightMatrix> {
    check_kappa(kappa)?;
    let n_legit = topo.n_legit();
    if trusted.len() != n_legit {
        return Err(Error::DimensionMismatch { expected: n_legit, got: trusted.len() });
    }
    let mut entries = DenseMatrix::zeros(n_legit, topo.n_agents());
    for (i, set) in trusted.iter().enumerate() {
        let n_w = kappa.max((set.len() + 1) as f64);
        let w = 1.0 / n_w;
        let row = entries.row_mut(i);
        for &j in set {
            if !topo.are_neighbors(i, j) {
                return Err(Error::TrustedNonNeighbor { agent: i, other: j });
            }
            row[j] = w;
        }
        let off: f64 = row.iter().sum();
        row[i] = 1.0 - off;
    }
    Ok(WeightMatrix { n_legit, kappa, entries })
}

/// The legitimate block reached once every neighbor is classified correctly.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealMatrix {
    kappa: f64,
    entries: DenseMatrix,
}

impl IdealMatrix {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

pub fn build_ideal(topo: &Topology, kappa: f64) -> Result<IdealMatrix> {
    check_kappa(kappa)?;
    let n = topo.n_legit();
    let mut entries = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let deg = topo.legit_degree(i);
        let n_w = kappa.max((deg + 1) as f64);
        for &j in topo.legit_neighbors(i) {
            entries[(i, j)] = 1.0 / n_w;
        }
        entries[(i, i)] = 1.0 - deg as f64 / n_w;
    }
    Ok(IdealMatrix { kappa, entries })
}

/// True when the legitimate block equals the ideal matrix and no malicious
/// weight remains.
pub fn equals_ideal(w: &WeightMatrix, ideal: &IdealMatrix) -> Result<bool> {
    let n = ideal.n();
    if w.n_legit() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.n_legit() });
    }
    for i in 0..n {
        let row = w.entries.row(i);
        let (legit, malicious) = row.split_at(n);
        if malicious.iter().any(|&x| x != 0.0) {
            return Ok(false);
        }
        if legit.iter().zip(ideal.entries.row(i)).any(|(a, b)| (a - b).abs() > IDEAL_TOLERANCE) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Row sums of `|a - b|`.
pub fn abs_difference_row_sums(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch { expected: a.rows() * a.cols(), got: b.rows() * b.cols() });
    }
    Ok((0..a.rows()).map(|i| a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y).abs()).sum()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::paper_topology;

    fn star(n_leaves: usize) -> Topology {
        let edges: Vec<(usize, usize)> = (1..=n_leaves).map(|j| (0, j)).collect();
        Topology::from_edges(n_leaves + 1, 0, &edges, &[]).unwrap()
    }

    fn hub_only(topo: &Topology, hub_trusted: Vec<usize>) -> Vec<Vec<usize>> {
        let mut trusted = vec![Vec::new(); topo.n_legit()];
        trusted[0] = hub_trusted;
        trusted
    }

    #[test]
    fn empty_trusted_set_gives_identity_row() {
        let topo = star(4);
        let w = build_weights(&topo, &vec![Vec::new(); 5], 10.0).unwrap();
        assert_eq!(w.entries().row(0), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn kappa_caps_neighbor_weight() {
        let topo = star(4);
        let w = build_weights(&topo, &hub_only(&topo, vec![1, 2, 3, 4]), 10.0).unwrap();
        for j in 1..=4 {
            assert!((w.get(0, j) - 0.1).abs() < 1e-15);
        }
        assert!((w.get(0, 0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn small_kappa_uses_degree() {
        let topo = star(4);
        let w = build_weights(&topo, &hub_only(&topo, vec![1, 2, 3, 4]), 1.0).unwrap();
        for j in 1..=4 {
            assert!((w.get(0, j) - 0.2).abs() < 1e-15);
        }
        assert!((w.get(0, 0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_kappa_and_non_neighbors() {
        let topo = star(2);
        assert!(matches!(build_weights(&topo, &vec![vec![]; 3], 0.0), Err(Error::InvalidKappa(_))));
        let mut trusted = vec![vec![]; 3];
        trusted[1] = vec![2];
        assert!(matches!(
            build_weights(&topo, &trusted, 2.0),
            Err(Error::TrustedNonNeighbor { agent: 1, other: 2 })
        ));
        assert!(build_ideal(&topo, -1.0).is_err());
    }

    #[test]
    fn path_ideal_matrix() {
        let topo = Topology::from_edges(3, 0, &[(0, 1), (1, 2)], &[]).unwrap();
        let ideal = build_ideal(&topo, 1.0).unwrap();
        let expected = [[0.5, 0.5, 0.0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.0, 0.5, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((ideal.get(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn paper_ideal_uses_kappa() {
        let topo = paper_topology(15);
        let ideal = build_ideal(&topo, 10.0).unwrap();
        for i in 0..15 {
            for &j in topo.legit_neighbors(i) {
                assert_eq!(ideal.get(i, j), 0.1);
            }
        }
    }

    #[test]
    fn isolated_agent_ideal() {
        let topo = Topology::new(1, 0, &[vec![false]], &[]).unwrap();
        let ideal = build_ideal(&topo, 3.0).unwrap();
        assert_eq!(ideal.matrix().to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn equals_ideal_detects_misclassification() {
        let topo = paper_topology(3);
        let ideal = build_ideal(&topo, 10.0).unwrap();
        let exact: Vec<Vec<usize>> = (0..15).map(|i| topo.legit_neighbors(i).to_vec()).collect();
        assert!(equals_ideal(&build_weights(&topo, &exact, 10.0).unwrap(), &ideal).unwrap());

        let mut with_malicious = exact.clone();
        with_malicious[4].push(16);
        assert!(!equals_ideal(&build_weights(&topo, &with_malicious, 10.0).unwrap(), &ideal).unwrap());

        let mut dropped = exact;
        dropped[2].pop();
        assert!(!equals_ideal(&build_weights(&topo, &dropped, 10.0).unwrap(), &ideal).unwrap());
    }

    #[test]
    fn equals_ideal_dimension_mismatch() {
        let ideal = build_ideal(&paper_topology(0), 10.0).unwrap();
        let small = star(2);
        let w = build_weights(&small, &vec![vec![]; 3], 10.0).unwrap();
        assert!(equals_ideal(&w, &ideal).is_err());
    }

    #[test]
    fn trusting_malicious_makes_legit_block_substochastic() {
        let topo = paper_topology(2);
        let mut trusted: Vec<Vec<usize>> = (0..15).map(|i| topo.legit_neighbors(i).to_vec()).collect();
        trusted[0].push(15);
        let w = build_weights(&topo, &trusted, 10.0).unwrap();
        let sums = w.legit_row_sums();
        assert!(sums[0] < 1.0);
        assert!((sums[1] - 1.0).abs() < 1e-15);
    }
}
