//! Stochastic trust observations and the accumulated trust scores built
//! from them.
//!
//! Each legitimate agent `i` observes a score `alpha_ij(t)` in `[0, 1]` for
//! every neighbor `j` at every step, and keeps the running sum
//! `beta_ij(t) = sum_k (alpha_ij(k) - 1/2)`. Neighbors with `beta_ij(t) >= 0`
//! form the trusted neighborhood.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeClass {
    Legit,
    Malicious,
}

/// Pluggable observation model. `mean` is the class mean configured on the
/// owning [`TrustParams`].
pub trait AlphaSampler: Send + Sync {
    fn sample(&self, class: EdgeClass, mean: f64, rng: &mut dyn RngCore) -> f64;

    /// Variance of `alpha`, if known. Needed only by the variance-aware bounds.
    fn variance(&self, _class: EdgeClass, _mean: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone)]
pub enum AlphaDistribution {
    /// Uniform on `[mean - width/2, mean + width/2]`.
    Uniform,
    /// `alpha` is 1 with probability `mean`, else 0.
    Bernoulli,
    Custom(Arc<dyn AlphaSampler>),
}

impl fmt::Debug for AlphaDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaDistribution::Uniform => f.write_str("Uniform"),
            AlphaDistribution::Bernoulli => f.write_str("Bernoulli"),
            AlphaDistribution::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl AlphaDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            AlphaDistribution::Uniform => "uniform",
            AlphaDistribution::Bernoulli => "bernoulli",
            AlphaDistribution::Custom(_) => "custom",
        }
    }
}

/// Homogeneous observation model: one mean per edge class.
#[derive(Debug, Clone)]
pub struct TrustParams {
    mean_legit: f64,
    mean_malicious: f64,
    width: f64,
    dist: AlphaDistribution,
}

const SUPPORT_EPS: f64 = 1e-12;

impl TrustParams {
    /// Uniform observations of the given width around each class mean.
    pub fn uniform(mean_legit: f64, mean_malicious: f64, width: f64) -> Result<Self> {
        Self::new(mean_legit, mean_malicious, width, AlphaDistribution::Uniform)
    }

    pub fn new(mean_legit: f64, mean_malicious: f64, width: f64, dist: AlphaDistribution) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidTrustParams(msg));
        if !(mean_legit.is_finite() && mean_malicious.is_finite() && width.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if !(mean_legit > 0.5) {
            return bad(format!("legitimate mean {mean_legit} must exceed 1/2"));
        }
        if !(mean_malicious < 0.5) {
            return bad(format!("malicious mean {mean_malicious} must be below 1/2"));
        }
        if !(0.0..=1.0).contains(&mean_legit) || !(0.0..=1.0).contains(&mean_malicious) {
            return bad("means must lie in [0, 1]".into());
        }
        if width < 0.0 {
            return bad(format!("width {width} must be non-negative"));
        }
        if matches!(dist, AlphaDistribution::Uniform) {
            for mean in [mean_legit, mean_malicious] {
                if mean - width / 2.0 < -SUPPORT_EPS || mean + width / 2.0 > 1.0 + SUPPORT_EPS {
                    return bad(format!("support [{}, {}] leaves [0, 1]", mean - width / 2.0, mean + width / 2.0));
                }
            }
        }
        Ok(TrustParams { mean_legit, mean_malicious, width, dist })
    }

    /// The evaluation setting: means 0.55 / 0.45, uniform of the given width.
    pub fn paper(width: f64) -> Result<Self> {
        Self::uniform(0.55, 0.45, width)
    }

    pub fn mean_legit(&self) -> f64 {
        self.mean_legit
    }

    pub fn mean_malicious(&self) -> f64 {
        self.mean_malicious
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn distribution(&self) -> &AlphaDistribution {
        &self.dist
    }

    pub fn mean(&self, class: EdgeClass) -> f64 {
        match class {
            EdgeClass::Legit => self.mean_legit,
            EdgeClass::Malicious => self.mean_malicious,
        }
    }

    /// Expected increment on legitimate edges, `d > 0`.
    pub fn d(&self) -> f64 {
        self.mean_legit - 0.5
    }

    /// Expected increment on malicious edges, `c < 0`.
    pub fn c(&self) -> f64 {
        self.mean_malicious - 0.5
    }

    /// Variance of `alpha` (equivalently of `alpha - 1/2`) on edges of `class`.
    pub fn variance(&self, class: EdgeClass) -> Option<f64> {
        let mean = self.mean(class);
        match &self.dist {
            AlphaDistribution::Uniform => Some(self.width * self.width / 12.0),
            AlphaDistribution::Bernoulli => Some(mean * (1.0 - mean)),
            AlphaDistribution::Custom(s) => s.variance(class, mean),
        }
    }

    /// Copy with a different width, re-validated.
    pub fn with_width(&self, width: f64) -> Result<Self> {
        Self::new(self.mean_legit, self.mean_malicious, width, self.dist.clone())
    }
}

/// One draw of `alpha_ij(t)` for an edge of the given class.
pub fn sample_alpha<R: Rng + ?Sized>(class: EdgeClass, params: &TrustParams, rng: &mut R) -> f64 {
    let mean = params.mean(class);
    let raw = match &params.dist {
        AlphaDistribution::Uniform => mean + params.width * (rng.random::<f64>() - 0.5),
        AlphaDistribution::Bernoulli => {
            if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
        AlphaDistribution::Custom(s) => {
            let mut adapter = DynRng(rng);
            s.sample(class, mean, &mut adapter)
        }
    };
    raw.clamp(0.0, 1.0)
}

struct DynRng<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Accumulated trust scores of every legitimate agent for each of its neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustState {
    n_legit: usize,
    neighbors: Vec<Vec<usize>>,
    beta: Vec<Vec<f64>>,
    rounds: usize,
}

impl TrustState {
    /// All scores start at zero, so every neighbor is trusted before the
    /// first observation.
    pub fn new(topo: &Topology) -> Self {
        let neighbors: Vec<Vec<usize>> = (0..topo.n_legit()).map(|i| topo.neighbors(i).to_vec()).collect();
        let beta = neighbors.iter().map(|n| vec![0.0; n.len()]).collect();
        TrustState { n_legit: topo.n_legit(), neighbors, beta, rounds: 0 }
    }

    /// Index of the last accumulated observation round, `None` before any.
    pub fn t_last(&self) -> Option<usize> {
        self.rounds.checked_sub(1)
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Scores of agent `i`, aligned with [`TrustState::neighbors`].
    pub fn scores(&self, i: usize) -> &[f64] {
        &self.beta[i]
    }

    pub fn beta(&self, i: usize, j: usize) -> Option<f64> {
        let slot = self.neighbors.get(i)?.binary_search(&j).ok()?;
        Some(self.beta[i][slot])
    }

    /// Adds `alpha - 1/2` for one round. `observations[i]` must hold one value
    /// per neighbor of `i`, in neighbor order.
    pub fn accumulate(&mut self, observations: &[Vec<f64>]) -> Result<()> {
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let row = observations.get(i).map_or(&[][..], Vec::as_slice);
            if row.len() < nbrs.len() {
                return Err(Error::MissingObservation(i, nbrs[row.len()]));
            }
        }
        self.accumulate_with(|i, slot, _| observations[i][slot]);
        Ok(())
    }

    /// Adds one round of observations produced by `alpha(i, slot, class)`,
    /// visiting edges agent by agent in neighbor order.
    pub fn accumulate_with<F>(&mut self, mut alpha: F)
    where
        F: FnMut(usize, usize, EdgeClass) -> f64,
    {
        for i in 0..self.n_legit {
            for slot in 0..self.neighbors[i].len() {
                let class = if self.neighbors[i][slot] < self.n_legit {
                    EdgeClass::Legit
                } else {
                    EdgeClass::Malicious
                };
                self.beta[i][slot] += alpha(i, slot, class) - 0.5;
            }
        }
        self.rounds += 1;
    }

    /// `{ j in N_i : beta_ij >= 0 }`.
    pub fn trusted_neighborhood(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n_legit {
            return Err(Error::NotLegitimate(i));
        }
        Ok(self.trusted_iter(i).collect())
    }

    fn trusted_iter(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i].iter().zip(&self.beta[i]).filter(|(_, &b)| b >= 0.0).map(|(&j, _)| j)
    }

    pub fn trusted_sets(&self) -> Vec<Vec<usize>> {
        (0..self.n_legit).map(|i| self.trusted_iter(i).collect()).collect()
    }

    pub fn misclassification_counts(&self, topo: &Topology) -> ClassificationSnapshot {
        let mut false_rejections = 0;
        let mut false_acceptances = 0;
        for i in 0..self.n_legit {
            for (&j, &b) in self.neighbors[i].iter().zip(&self.beta[i]) {
                match (topo.is_legit(j), b >= 0.0) {
                    (true, false) => false_rejections += 1,
                    (false, true) => false_acceptances += 1,
                    _ => {}
                }
            }
        }
        ClassificationSnapshot { trusted: self.trusted_sets(), false_rejections, false_acceptances }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationSnapshot {
    pub trusted: Vec<Vec<usize>>,
    /// Legitimate edges with a negative score.
    pub false_rejections: usize,
    /// Malicious edges with a non-negative score.
    pub false_acceptances: usize,
}

impl ClassificationSnapshot {
    pub fn is_exact(&self) -> bool {
        self.false_rejections == 0 && self.false_acceptances == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::topology::paper_topology;

    fn single_edge() -> Topology {
        Topology::from_edges(2, 0, &[(0, 1)], &[]).unwrap()
    }

    fn sum_sequence(seq: &[f64]) -> f64 {
        let topo = single_edge();
        let mut state = TrustState::new(&topo);
        for &a in seq {
            state.accumulate(&[vec![a], vec![0.5]]).unwrap();
        }
        state.beta(0, 1).unwrap()
    }

    #[test]
    fn accumulate_sums_centered_observations() {
        assert_eq!(sum_sequence(&[0.5, 0.5, 0.5]), 0.0);
        assert!((sum_sequence(&[0.6, 0.7, 0.4]) - 0.2).abs() < 1e-12);
        assert!((sum_sequence(&[0.35]) + 0.15).abs() < 1e-12);
    }

    #[test]
    fn accumulate_tracks_rounds() {
        let topo = single_edge();
        let mut state = TrustState::new(&topo);
        assert_eq!(state.t_last(), None);
        state.accumulate(&[vec![0.6], vec![0.6]]).unwrap();
        assert_eq!(state.t_last(), Some(0));
    }

    #[test]
    fn missing_observation_rejected() {
        let topo = single_edge();
        let mut state = TrustState::new(&topo);
        let err = state.accumulate(&[vec![0.6], vec![]]).unwrap_err();
        assert!(matches!(err, Error::MissingObservation(1, 0)));
        assert_eq!(state.rounds(), 0);
    }

    fn star_with_scores(scores: &[f64]) -> TrustState {
        let edges: Vec<(usize, usize)> = (1..=scores.len()).map(|j| (0, j)).collect();
        let topo = Topology::from_edges(scores.len() + 1, 0, &edges, &[]).unwrap();
        let mut state = TrustState::new(&topo);
        let mut obs: Vec<Vec<f64>> = (0..=scores.len()).map(|i| vec![0.5; topo.neighbors(i).len()]).collect();
        obs[0] = scores.iter().map(|s| s + 0.5).collect();
        state.accumulate(&obs).unwrap();
        state
    }

    #[test]
    fn trusted_neighborhood_threshold_includes_zero() {
        let state = star_with_scores(&[0.2, -0.1, 0.0]);
        assert_eq!(state.trusted_neighborhood(0).unwrap(), vec![1, 3]);
    }

    #[test]
    fn all_negative_scores_trust_nobody() {
        let state = star_with_scores(&[-0.2, -0.1, -0.3]);
        assert!(state.trusted_neighborhood(0).unwrap().is_empty());
    }

    #[test]
    fn initial_state_trusts_everyone() {
        let topo = paper_topology(5);
        let state = TrustState::new(&topo);
        for i in 0..15 {
            assert_eq!(state.trusted_neighborhood(i).unwrap(), topo.neighbors(i));
        }
    }

    #[test]
    fn malicious_agent_has_no_neighborhood() {
        let topo = paper_topology(5);
        let state = TrustState::new(&topo);
        assert!(matches!(state.trusted_neighborhood(15), Err(Error::NotLegitimate(15))));
    }

    #[test]
    fn counts_without_malicious_agents() {
        let topo = paper_topology(0);
        let state = TrustState::new(&topo);
        let snap = state.misclassification_counts(&topo);
        assert_eq!((snap.false_rejections, snap.false_acceptances), (0, 0));
        assert!(snap.is_exact());
    }

    #[test]
    fn zero_score_on_malicious_edge_is_false_acceptance() {
        let topo = Topology::from_edges(2, 1, &[(0, 1)], &[vec![0]]).unwrap();
        let mut state = TrustState::new(&topo);
        // legit edges positive; the single malicious edge stays at exactly 0
        state.accumulate(&[vec![0.7, 0.5], vec![0.7]]).unwrap();
        let snap = state.misclassification_counts(&topo);
        assert_eq!(snap.false_acceptances, 1);
        assert_eq!(snap.false_rejections, 0);
    }

    #[test]
    fn zero_width_uniform_is_degenerate() {
        let params = TrustParams::uniform(0.55, 0.45, 0.0).unwrap();
        let mut rng = rng::stream(rng::trial_key(1, 0), 0);
        for _ in 0..100 {
            assert_eq!(sample_alpha(EdgeClass::Legit, &params, &mut rng), 0.55);
        }
    }

    #[test]
    fn uniform_draws_stay_in_support_and_center_on_mean() {
        let params = TrustParams::paper(0.4).unwrap();
        let mut rng = rng::stream(rng::trial_key(7, 0), 3);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let a = sample_alpha(EdgeClass::Legit, &params, &mut rng);
            assert!((0.35..=0.75).contains(&a));
            sum += a;
            let m = sample_alpha(EdgeClass::Malicious, &params, &mut rng);
            assert!((0.25..=0.65).contains(&m));
        }
        let sigma = (0.4f64 * 0.4 / 12.0 / n as f64).sqrt();
        assert!((sum / n as f64 - 0.55).abs() < 3.0 * sigma);
    }

    #[test]
    fn bernoulli_variance() {
        let params = TrustParams::new(0.7, 0.2, 0.0, AlphaDistribution::Bernoulli).unwrap();
        assert!((params.variance(EdgeClass::Legit).unwrap() - 0.21).abs() < 1e-15);
        let mut rng = rng::stream(rng::trial_key(3, 0), 0);
        let a = sample_alpha(EdgeClass::Malicious, &params, &mut rng);
        assert!(a == 0.0 || a == 1.0);
    }

    struct Fixed(f64);

    impl AlphaSampler for Fixed {
        fn sample(&self, _class: EdgeClass, _mean: f64, _rng: &mut dyn RngCore) -> f64 {
            self.0
        }
    }

    #[test]
    fn custom_sampler_is_used_and_clamped() {
        let params = TrustParams::new(0.6, 0.4, 0.0, AlphaDistribution::Custom(Arc::new(Fixed(1.5)))).unwrap();
        let mut rng = rng::stream(rng::trial_key(3, 0), 0);
        assert_eq!(sample_alpha(EdgeClass::Legit, &params, &mut rng), 1.0);
        assert_eq!(params.variance(EdgeClass::Legit), None);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(TrustParams::uniform(0.45, 0.45, 0.1).is_err());
        assert!(TrustParams::uniform(0.55, 0.55, 0.1).is_err());
        assert!(TrustParams::uniform(0.9, 0.45, 0.4).is_err());
        assert!(TrustParams::uniform(0.55, 0.45, -0.1).is_err());
        assert!(TrustParams::uniform(0.55, 0.45, 0.6).is_ok());
    }

    #[test]
    fn derived_offsets() {
        let p = TrustParams::paper(0.4).unwrap();
        assert!((p.d() - 0.05).abs() < 1e-15);
        assert!((p.c() + 0.05).abs() < 1e-15);
        assert!((p.variance(EdgeClass::Malicious).unwrap() - 0.16 / 12.0).abs() < 1e-15);
    }
}
