use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustcons::attacks::AttackModel;
use trustcons::engine::{self, SimulationConfig};
use trustcons::spectral::{self, PerronData};
use trustcons::trust::{TrustParams, TrustState};
use trustcons::weights::{abs_difference_row_sums, build_ideal, build_weights};
use trustcons::{paper_topology, DenseMatrix, Topology};

/// Random connected graph: a random spanning tree plus extra edges.
fn random_connected(rng: &mut ChaCha8Rng, n: usize, n_malicious: usize, extra: f64) -> Topology {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < extra {
                edges.push((i, j));
            }
        }
    }
    let mal: Vec<Vec<usize>> =
        (0..n_malicious).map(|_| (0..n).filter(|_| rng.random::<f64>() < 0.5).collect()).collect();
    Topology::from_edges(n, n_malicious, &edges, &mal).unwrap()
}

fn random_trusted(rng: &mut ChaCha8Rng, topo: &Topology) -> Vec<Vec<usize>> {
    (0..topo.n_legit())
        .map(|i| topo.neighbors(i).iter().copied().filter(|_| rng.random::<bool>()).collect())
        .collect()
}

fn random_substochastic(rng: &mut ChaCha8Rng, n: usize, gamma: f64) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let diag = gamma + (1.0 - gamma) * rng.random::<f64>();
        let budget = (1.0 - diag) * rng.random::<f64>();
        let raw: Vec<f64> = (0..n).map(|j| if j == i { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = raw.iter().sum();
        for j in 0..n {
            m[(i, j)] = if j == i { diag } else if total > 0.0 { budget * raw[j] / total } else { 0.0 };
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weights_are_row_stochastic(seed in any::<u64>(), n in 2usize..12, m in 0usize..6, kappa in 0.5f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_connected(&mut rng, n, m, 0.3);
        let trusted = random_trusted(&mut rng, &topo);
        let w = build_weights(&topo, &trusted, kappa).unwrap();
        let floor = 1.0 / (topo.n_agents() as f64).max(kappa);
        for i in 0..n {
            let full: f64 = (0..topo.n_agents()).map(|j| w.get(i, j)).sum();
            prop_assert!((full - 1.0).abs() < 1e-12);
            let legit_sum = w.legit_row_sums()[i];
            prop_assert!(legit_sum <= 1.0 + 1e-12);
            let trusts_malicious = trusted[i].iter().any(|&j| !topo.is_legit(j));
            prop_assert_eq!(legit_sum < 1.0 - 1e-15, trusts_malicious);
            prop_assert!(w.get(i, i) >= floor - 1e-15);
            for j in 0..topo.n_agents() {
                prop_assert!(w.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn beta_stays_in_range(seed in any::<u64>(), rounds in 1usize..60, width in 0.0f64..0.7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = paper_topology(4);
        let params = TrustParams::paper(width).unwrap();
        let mut state = TrustState::new(&topo);
        for _ in 0..rounds {
            state.accumulate_with(|_, _, class| trustcons::trust::sample_alpha(class, &params, &mut rng));
        }
        let half = rounds as f64 / 2.0;
        for i in 0..topo.n_legit() {
            for &b in state.scores(i) {
                prop_assert!(b.abs() <= half + 1e-12);
            }
            let n = state.trusted_neighborhood(i).unwrap();
            prop_assert!(n.iter().all(|j| topo.neighbors(i).contains(j)));
        }
    }

    #[test]
    fn convex_hull_and_decomposition(seed in any::<u64>(), attack in 0usize..3, t0 in 0usize..15) {
        let attack = [AttackModel::max_deviation(), AttackModel::drift(), AttackModel::Silent][attack].clone();
        let mut config = SimulationConfig::paper(6, 0.6, attack, t0, t0 + 60).unwrap();
        config.seed = seed;
        config.x_malicious_init = vec![4.0, -4.0, 1.0, 0.0, 2.5, -1.0];
        let trace = engine::run(&config).unwrap();
        prop_assert!(trace.max_decomposition_error() <= 1e-9);
        for pair in trace.records.windows(2) {
            let (now, next) = (&pair[0], &pair[1]);
            let inputs = now.x_legit.iter().chain(&now.update.as_ref().unwrap().x_malicious);
            let (lo, hi) = inputs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            for &x in &next.x_legit {
                prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
            }
        }
        for r in &trace.records {
            prop_assert!(r.x_legit.iter().all(|x| x.abs() <= config.eta + 1e-12));
        }
    }

    #[test]
    fn silent_zero_attack_leaves_phi_zero(seed in any::<u64>()) {
        let mut config = SimulationConfig::paper(5, 0.4, AttackModel::Silent, 3, 50).unwrap();
        config.seed = seed;
        let trace = engine::run(&config).unwrap();
        for r in &trace.records {
            prop_assert!(r.phi.iter().all(|&p| p == 0.0));
        }
    }

    #[test]
    fn ideal_matrix_is_reversible_and_contracts(seed in any::<u64>(), n in 2usize..15, kappa in 0.5f64..12.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_connected(&mut rng, n, 0, 0.25);
        let ideal = build_ideal(&topo, kappa).unwrap();
        let p = PerronData::compute(&topo, kappa).unwrap();
        let w = ideal.matrix();
        let left = w.left_mul_vec(&p.v).unwrap();
        for i in 0..n {
            prop_assert!((left[i] - p.v[i]).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((p.v[i] * w[(i, j)] - p.v[j] * w[(j, i)]).abs() < 1e-15);
            }
        }
        prop_assert!(spectral::is_primitive(&ideal));
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z = spectral::nominal_value(&p.v, &x).unwrap();
        let centered: Vec<f64> = x.iter().map(|xi| xi - z).collect();
        let base = spectral::v_norm(&centered, &p.v).unwrap();
        let mut y = x.clone();
        for t in 1..=20 {
            y = w.mul_vec(&y).unwrap();
            let dev: Vec<f64> = y.iter().map(|yi| yi - z).collect();
            prop_assert!(spectral::v_norm(&dev, &p.v).unwrap() <= p.rho2.powi(t) * base + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn substochastic_difference_lemma(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for gamma in [0.1, 0.5] {
            let a = random_substochastic(&mut rng, n, gamma);
            let b = random_substochastic(&mut rng, n, gamma);
            for s in abs_difference_row_sums(&a, &b).unwrap() {
                prop_assert!(s <= 2.0 * (1.0 - gamma) + 1e-12);
            }
        }
    }
}

#[test]
fn misclassification_counts_agree_with_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let topo = paper_topology(3);
    let params = TrustParams::paper(0.6).unwrap();
    let mut state = TrustState::new(&topo);
    for _ in 0..4 {
        state.accumulate_with(|_, _, class| trustcons::trust::sample_alpha(class, &params, &mut rng));
    }
    let snap = state.misclassification_counts(&topo);
    let (mut fr, mut fa) = (0, 0);
    for i in 0..topo.n_legit() {
        for &j in topo.neighbors(i) {
            let b = state.beta(i, j).unwrap();
            match (topo.is_legit(j), b >= 0.0) {
                (true, false) => fr += 1,
                (false, true) => fa += 1,
                _ => {}
            }
        }
    }
    assert_eq!((snap.false_rejections, snap.false_acceptances), (fr, fa));
}
