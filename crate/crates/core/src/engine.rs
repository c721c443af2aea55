//! Protocol timeline: an observation window followed by trust-weighted
//! consensus updates.
//!
//! Observations are collected at every step `t = 0, 1, ...`. Legitimate
//! values stay frozen until the first update at `t = max(T0, 1) - 1`, which
//! uses every observation gathered so far. From then on, each step observes,
//! rebuilds `W(t)` from the trusted neighborhoods, asks the attacker for
//! `x_M(t)` and applies `x_L(t+1) = W_L(t) x_L(t) + W_M(t) x_M(t)`.
//!
//! Alongside `x_L` the engine propagates the two influence components
//! `x_tilde(t+1) = W_L(t) x_tilde(t)` and `phi(t+1) = W_L(t) phi(t) + W_M(t) x_M(t)`,
//! starting from `x_tilde = x_L(0)` and `phi = 0`, so `x_L = x_tilde + phi`
//! at every step.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attacks::{AttackModel, Attacker};
use crate::error::{Error, Result};
use crate::rng;
use crate::spectral;
use crate::topology::Topology;
use crate::trust::{sample_alpha, TrustParams, TrustState};
use crate::weights::{build_ideal, build_weights};

/// Spread below which a run counts as converged for early stopping.
pub const EARLY_STOP_SPREAD: f64 = 1e-12;
/// Consecutive converged steps required before stopping early.
pub const EARLY_STOP_STEPS: usize = 10;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub topology: Topology,
    pub trust: TrustParams,
    pub attack: AttackModel,
    pub kappa: f64,
    /// Bound on every agent's absolute value.
    pub eta: f64,
    /// Consensus start time.
    pub t0: usize,
    /// Last time index to simulate; the trace ends with `x_L(horizon)`.
    pub horizon: usize,
    pub x_legit_init: Vec<f64>,
    /// Malicious initial values, read by the silent attack.
    pub x_malicious_init: Vec<f64>,
    pub seed: u64,
    /// Trial index; together with `seed` it selects the random streams.
    pub trial: u64,
    pub early_stop: bool,
}

impl SimulationConfig {
    /// Evaluation-network defaults: kappa 10, eta 5, the printed initial values.
    pub fn paper(n_malicious: usize, width: f64, attack: AttackModel, t0: usize, horizon: usize) -> Result<Self> {
        Ok(SimulationConfig {
            topology: crate::topology::paper_topology(n_malicious),
            trust: TrustParams::paper(width)?,
            attack,
            kappa: 10.0,
            eta: 5.0,
            t0,
            horizon,
            x_legit_init: crate::topology::PAPER_INITIAL_VALUES.to_vec(),
            x_malicious_init: vec![0.0; n_malicious],
            seed: 0,
            trial: 0,
            early_stop: false,
        })
    }

    /// First step at which the legitimate values are updated.
    pub fn first_step(&self) -> usize {
        self.t0.saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSimulation(msg));
        let topo = &self.topology;
        if self.x_legit_init.len() != topo.n_legit() {
            return bad(format!(
                "{} legitimate initial values for {} legitimate agents",
                self.x_legit_init.len(),
                topo.n_legit()
            ));
        }
        if self.x_malicious_init.len() != topo.n_malicious() {
            return bad(format!(
                "{} malicious initial values for {} malicious agents",
                self.x_malicious_init.len(),
                topo.n_malicious()
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidKappa(self.kappa));
        }
        if let Some(x) = self.x_legit_init.iter().chain(&self.x_malicious_init).find(|x| x.abs() > self.eta) {
            return bad(format!("initial value {x} exceeds eta = {}", self.eta));
        }
        if self.horizon < self.first_step() {
            return bad(format!("horizon {} precedes the first consensus step {}", self.horizon, self.first_step()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateInfo {
    pub false_rejections: usize,
    pub false_acceptances: usize,
    pub x_malicious: Vec<f64>,
}

impl UpdateInfo {
    pub fn is_exact(&self) -> bool {
        self.false_rejections == 0 && self.false_acceptances == 0
    }
}

/// State at time `t`, and the update applied from it (absent on the last record).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub x_legit: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub phi: Vec<f64>,
    pub update: Option<UpdateInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    /// Observation rounds collected before the first update.
    pub observation_rounds: usize,
    pub first_step: usize,
    pub horizon: usize,
    pub nominal: f64,
    pub records: Vec<StepRecord>,
    pub stop: StopReason,
}

impl SimulationTrace {
    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trace always holds the initial state")
    }

    pub fn final_values(&self) -> &[f64] {
        &self.final_record().x_legit
    }

    pub fn final_spread(&self) -> f64 {
        spread(self.final_values())
    }

    /// Largest `|x_i - nominal|` over legitimate agents at the end of the run.
    pub fn max_deviation(&self, nominal: f64) -> f64 {
        max_deviation(self.final_values(), nominal)
    }

    /// Smallest update step from which every remaining update used exact
    /// classification, or `None` if the last update did not.
    pub fn settling_step(&self) -> Option<usize> {
        let mut updates = self.records.iter().rev().filter_map(|r| r.update.as_ref().map(|u| (r.t, u))).peekable();
        if updates.peek().is_none() {
            return Some(self.first_step);
        }
        let mut settled = None;
        for (t, u) in updates {
            if !u.is_exact() {
                break;
            }
            settled = Some(t);
        }
        settled
    }

    /// Per-record `max_i |x_i(t) - nominal|`.
    pub fn deviation_curve(&self, nominal: f64) -> Vec<f64> {
        self.records.iter().map(|r| max_deviation(&r.x_legit, nominal)).collect()
    }

    /// Largest violation of `x_L = x_tilde + phi`, relative to `1 + |x_L|`.
    pub fn max_decomposition_error(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| {
                r.x_legit
                    .iter()
                    .zip(&r.x_tilde)
                    .zip(&r.phi)
                    .map(|((x, xt), p)| (x - (xt + p)).abs() / (1.0 + x.abs()))
            })
            .fold(0.0, f64::max)
    }
}

pub fn max_deviation(values: &[f64], nominal: f64) -> f64 {
    values.iter().map(|x| (x - nominal).abs()).fold(0.0, f64::max)
}

pub fn spread(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Runs one trial.
pub fn run(config: &SimulationConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let topo = &config.topology;
    if !topo.is_legit_connected() {
        log::warn!("legitimate subgraph is disconnected; consensus is not guaranteed");
    }
    let first_step = config.first_step();
    let n_legit = topo.n_legit();

    let ideal = build_ideal(topo, config.kappa)?;
    let perron = spectral::perron_vector(&ideal, topo);
    let nominal = spectral::nominal_value(&perron.v, &config.x_legit_init)?;

    let key = rng::trial_key(config.seed, config.trial);
    let mut edge_offsets = Vec::with_capacity(n_legit);
    let mut streams: Vec<ChaCha8Rng> = Vec::with_capacity(topo.n_observed_edges());
    for i in 0..n_legit {
        edge_offsets.push(streams.len());
        for _ in topo.neighbors(i) {
            streams.push(rng::stream(key, streams.len() as u64));
        }
    }
    let mut attack_rng = rng::stream(key, rng::ATTACK_STREAM);
    let mut attacker = Attacker::new(
        config.attack.clone(),
        topo,
        &config.x_legit_init,
        &config.x_malicious_init,
        nominal,
        config.eta,
        config.t0,
    )?;

    let mut trust = TrustState::new(topo);
    let mut observe = |trust: &mut TrustState| {
        trust.accumulate_with(|i, slot, class| sample_alpha(class, &config.trust, &mut streams[edge_offsets[i] + slot]))
    };
    for _ in 0..first_step {
        observe(&mut trust);
    }

    let mut x = config.x_legit_init.clone();
    let mut x_tilde = x.clone();
    let mut phi = vec![0.0; n_legit];
    let mut records = Vec::with_capacity(config.horizon - first_step + 1);
    let mut stop = StopReason::Horizon;
    let mut calm_steps = 0;

    for t in first_step..config.horizon {
        observe(&mut trust);
        let snapshot = trust.misclassification_counts(topo);
        let w = build_weights(topo, &snapshot.trusted, config.kappa)?;
        let x_mal = attacker.inputs(t, &x, &mut attack_rng)?;

        let injected = w.apply_malicious(&x_mal);
        let next_x: Vec<f64> = w.apply_legit(&x).iter().zip(&injected).map(|(a, b)| a + b).collect();
        let next_tilde = w.apply_legit(&x_tilde);
        let next_phi: Vec<f64> = w.apply_legit(&phi).iter().zip(&injected).map(|(a, b)| a + b).collect();

        records.push(StepRecord {
            t,
            x_legit: std::mem::replace(&mut x, next_x),
            x_tilde: std::mem::replace(&mut x_tilde, next_tilde),
            phi: std::mem::replace(&mut phi, next_phi),
            update: Some(UpdateInfo {
                false_rejections: snapshot.false_rejections,
                false_acceptances: snapshot.false_acceptances,
                x_malicious: x_mal,
            }),
        });

        if config.early_stop {
            calm_steps = if spread(&x) < EARLY_STOP_SPREAD { calm_steps + 1 } else { 0 };
            if calm_steps >= EARLY_STOP_STEPS {
                stop = StopReason::Converged;
                records.push(StepRecord { t: t + 1, x_legit: x, x_tilde, phi, update: None });
                return Ok(SimulationTrace {
                    observation_rounds: first_step,
                    first_step,
                    horizon: config.horizon,
                    nominal,
                    records,
                    stop,
                });
            }
        }
    }
    records.push(StepRecord { t: config.horizon, x_legit: x, x_tilde, phi, update: None });

    Ok(SimulationTrace { observation_rounds: first_step, first_step, horizon: config.horizon, nominal, records, stop })
}
