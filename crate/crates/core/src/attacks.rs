//! Malicious input strategies.
//!
//! Every malicious agent broadcasts one value per consensus step. All
//! strategies respect the value bound `|x_m(t)| <= eta`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    /// Sign of `x`, with zero mapped to positive.
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }
}

/// Drift strategy: follow the legitimate average with a decaying,
/// randomly scaled offset pushing away from the initial average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftParams {
    pub weight: f64,
    pub decay_base: f64,
    pub decay_rate: f64,
    /// Initial values are drawn from `[-init_fraction * eta, init_fraction * eta]`.
    pub init_fraction: f64,
    /// Width of the re-draw band used when a value leaves `[-eta, eta]`.
    pub overflow_band: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams { weight: 0.15, decay_base: 0.75, decay_rate: 0.05, init_fraction: 0.15, overflow_band: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackModel {
    /// Constant `sign * eta`. Without an explicit sign, the input sits on the
    /// opposite side of the nominal consensus value.
    MaxDeviation { sign: Option<Sign> },
    Drift(DriftParams),
    #[serde(rename = "constant")]
    ConstantVector { values: Vec<f64> },
    /// Malicious agents keep repeating their initial values.
    Silent,
}

impl AttackModel {
    pub fn max_deviation() -> Self {
        AttackModel::MaxDeviation { sign: None }
    }

    pub fn drift() -> Self {
        AttackModel::Drift(DriftParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackModel::MaxDeviation { .. } => "max_deviation",
            AttackModel::Drift(_) => "drift",
            AttackModel::ConstantVector { .. } => "constant",
            AttackModel::Silent => "silent",
        }
    }
}

/// Drift value before overflow handling:
/// `prev_mean + weight * (-away_from * eta * decay_base^(decay_rate * (t - t0)) * u)`.
pub fn drift_value(p: &DriftParams, prev_mean: f64, away_from: Sign, eta: f64, t: usize, t0: usize, u: f64) -> f64 {
    let elapsed = t as f64 - t0 as f64;
    let offset = -away_from.value() * eta * p.decay_base.powf(p.decay_rate * elapsed) * u;
    prev_mean + p.weight * offset
}

/// Per-trial attack state.
#[derive(Debug, Clone)]
pub struct Attacker {
    model: AttackModel,
    eta: f64,
    t0: usize,
    first_step: usize,
    /// Legitimate neighbors of each malicious agent.
    targets: Vec<Vec<usize>>,
    initial: Vec<f64>,
    max_dev_sign: Sign,
    drift_sign: Sign,
    prev: Option<(usize, Vec<f64>)>,
}

impl Attacker {
    /// `nominal` is the consensus value the legitimate agents would reach
    /// without attack; `x_malicious_init` is used by [`AttackModel::Silent`].
    pub fn new(
        model: AttackModel,
        topo: &Topology,
        x_legit_init: &[f64],
        x_malicious_init: &[f64],
        nominal: f64,
        eta: f64,
        t0: usize,
    ) -> Result<Self> {
        let n_mal = topo.n_malicious();
        if !(eta > 0.0) {
            return Err(Error::out_of_range("eta", format!("{eta} must be positive")));
        }
        if x_malicious_init.len() != n_mal {
            return Err(Error::DimensionMismatch { expected: n_mal, got: x_malicious_init.len() });
        }
        if let AttackModel::ConstantVector { values } = &model {
            if values.len() != n_mal {
                return Err(Error::DimensionMismatch { expected: n_mal, got: values.len() });
            }
        }
        let targets = (0..n_mal).map(|k| topo.neighbors(topo.n_legit() + k).to_vec()).collect();
        let initial_mean = mean(x_legit_init);
        let max_dev_sign = match &model {
            AttackModel::MaxDeviation { sign: Some(s) } => *s,
            _ => Sign::of(-nominal),
        };
        Ok(Attacker {
            model,
            eta,
            t0,
            first_step: t0.saturating_sub(1),
            targets,
            initial: x_malicious_init.to_vec(),
            max_dev_sign,
            drift_sign: Sign::of(initial_mean),
            prev: None,
        })
    }

    pub fn model(&self) -> &AttackModel {
        &self.model
    }

    pub fn first_step(&self) -> usize {
        self.first_step
    }

    /// Malicious inputs `x_M(t)` given the current legitimate values `x_L(t)`.
    /// Calls must come at consecutive steps for the drift strategy, which
    /// reads the legitimate values of the previous step.
    pub fn inputs<R: Rng + ?Sized>(&mut self, t: usize, x_legit: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if t < self.first_step {
            return Err(Error::TimeBeforeStart { t: t as i64, first: self.first_step as i64 });
        }
        let eta = self.eta;
        let out: Vec<f64> = match &self.model {
            AttackModel::MaxDeviation { .. } => vec![self.max_dev_sign.value() * eta; self.targets.len()],
            AttackModel::ConstantVector { values } => values.clone(),
            AttackModel::Silent => self.initial.clone(),
            AttackModel::Drift(p) => {
                let p = *p;
                let prev = match &self.prev {
                    Some((pt, x)) if *pt + 1 == t => Some(x.clone()),
                    _ => None,
                };
                match prev {
                    // first consensus step, or no history to drift from
                    None if t == self.first_step => {
                        let half = p.init_fraction * eta;
                        (0..self.targets.len()).map(|_| rng.random_range(-half..=half)).collect()
                    }
                    None => {
                        return Err(Error::InvalidSimulation(format!(
                            "drift attack called at step {t} without the values of step {}",
                            t - 1
                        )))
                    }
                    Some(x_prev) => {
                        let global = mean(&x_prev);
                        (0..self.targets.len())
                            .map(|k| {
                                let local = if self.targets[k].is_empty() {
                                    global
                                } else {
                                    self.targets[k].iter().map(|&i| x_prev[i]).sum::<f64>() / self.targets[k].len() as f64
                                };
                                let u: f64 = rng.random();
                                let x = drift_value(&p, local, self.drift_sign, eta, t, self.t0, u);
                                redraw_overflow(x, eta, p.overflow_band, rng)
                            })
                            .collect()
                    }
                }
            }
        };
        self.prev = Some((t, x_legit.to_vec()));
        Ok(out.into_iter().map(|x| x.clamp(-eta, eta)).collect())
    }
}

fn redraw_overflow<R: Rng + ?Sized>(x: f64, eta: f64, band: f64, rng: &mut R) -> f64 {
    if x > eta {
        rng.random_range((eta - band)..=eta)
    } else if x < -eta {
        rng.random_range(-eta..=(-eta + band))
    } else {
        x
    }
}

fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::topology::paper_topology;

    fn attacker(model: AttackModel, n_mal: usize, nominal: f64, t0: usize) -> Attacker {
        let topo = paper_topology(n_mal);
        let x0 = crate::topology::PAPER_INITIAL_VALUES;
        Attacker::new(model, &topo, &x0, &vec![2.0; n_mal], nominal, 5.0, t0).unwrap()
    }

    #[test]
    fn max_deviation_opposes_nominal() {
        let mut rng = rng::stream(rng::trial_key(0, 0), 0);
        let mut a = attacker(AttackModel::max_deviation(), 3, -0.99, 10);
        let x = crate::topology::PAPER_INITIAL_VALUES;
        for t in 9..20 {
            assert_eq!(a.inputs(t, &x, &mut rng).unwrap(), vec![5.0; 3]);
        }
        let mut b = attacker(AttackModel::max_deviation(), 2, 0.5, 10);
        assert_eq!(b.inputs(9, &x, &mut rng).unwrap(), vec![-5.0; 2]);
        let mut c = attacker(AttackModel::MaxDeviation { sign: Some(Sign::Negative) }, 1, -3.0, 1);
        assert_eq!(c.inputs(0, &x, &mut rng).unwrap(), vec![-5.0]);
    }

    #[test]
    fn silent_echoes_initial_values() {
        let mut rng = rng::stream(rng::trial_key(0, 0), 0);
        let mut a = attacker(AttackModel::Silent, 2, -1.0, 0);
        let x = crate::topology::PAPER_INITIAL_VALUES;
        for t in 0..5 {
            assert_eq!(a.inputs(t, &x, &mut rng).unwrap(), vec![2.0, 2.0]);
        }
    }

    #[test]
    fn constant_vector_is_clamped_and_checked() {
        let mut rng = rng::stream(rng::trial_key(0, 0), 0);
        let mut a = attacker(AttackModel::ConstantVector { values: vec![1.0, 9.0] }, 2, 0.0, 0);
        let x = crate::topology::PAPER_INITIAL_VALUES;
        assert_eq!(a.inputs(0, &x, &mut rng).unwrap(), vec![1.0, 5.0]);
        let topo = paper_topology(3);
        let bad = Attacker::new(AttackModel::ConstantVector { values: vec![1.0] }, &topo, &x, &[0.0; 3], 0.0, 5.0, 0);
        assert!(bad.is_err());
    }

    #[test]
    fn drift_formula_by_hand() {
        let p = DriftParams::default();
        // 5 * 0.75^(0.05 * 20) * 0.4 = 1.5; -1.0 + 0.15 * 1.5 = -0.775
        let x = drift_value(&p, -1.0, Sign::Negative, 5.0, 30, 10, 0.4);
        assert!((x + 0.775).abs() < 1e-12);
    }

    #[test]
    fn drift_decay_is_monotone() {
        let p = DriftParams::default();
        let mut last = f64::INFINITY;
        for t in 10..400 {
            let offset = (drift_value(&p, 0.0, Sign::Negative, 5.0, t, 10, 1.0)).abs();
            assert!(offset <= last);
            last = offset;
        }
    }

    #[test]
    fn drift_start_draw_and_bounds() {
        let mut rng = rng::stream(rng::trial_key(5, 0), rng::ATTACK_STREAM);
        let mut a = attacker(AttackModel::drift(), 4, -1.0, 10);
        let x = crate::topology::PAPER_INITIAL_VALUES;
        let first = a.inputs(9, &x, &mut rng).unwrap();
        assert!(first.iter().all(|v| v.abs() <= 0.75));
        for t in 10..200 {
            let xs = a.inputs(t, &x, &mut rng).unwrap();
            assert!(xs.iter().all(|v| v.abs() <= 5.0));
            // the initial mean is negative, so the drift pushes upwards
            assert!(xs.iter().all(|&v| v >= -0.9913 - 1e-3));
        }
    }

    #[test]
    fn drift_overflow_redraws_near_bound() {
        let mut rng = rng::stream(rng::trial_key(5, 1), 0);
        for _ in 0..100 {
            let hi = redraw_overflow(7.0, 5.0, 0.05, &mut rng);
            assert!((4.95..=5.0).contains(&hi));
            let lo = redraw_overflow(-7.0, 5.0, 0.05, &mut rng);
            assert!((-5.0..=-4.95).contains(&lo));
        }
        assert_eq!(redraw_overflow(1.0, 5.0, 0.05, &mut rng), 1.0);
    }

    #[test]
    fn before_start_rejected() {
        let mut rng = rng::stream(rng::trial_key(0, 0), 0);
        let mut a = attacker(AttackModel::Silent, 1, 0.0, 10);
        let x = crate::topology::PAPER_INITIAL_VALUES;
        assert!(matches!(a.inputs(8, &x, &mut rng), Err(Error::TimeBeforeStart { t: 8, first: 9 })));
    }
}
