//! Closed-form guarantees of the protocol.
//!
//! All probability bounds are returned raw: the formulas may exceed one (or,
//! for lower bounds, drop below zero) for small observation windows, and
//! [`clamp_probability`] gives the displayable companion.
//!
//! Notation: `d = E[alpha] - 1/2` on legitimate edges, `c = E[alpha] - 1/2`
//! on malicious ones, `L`/`M` the legitimate/malicious agent counts.

mod concentration;
mod lambert;

pub use concentration::{bennett, bennett_h, bernstein, improved_bennett, improved_bennett_lambda};
pub use lambert::{lambert_w0, lambert_w0_of_exp};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::Topology;
use crate::trust::{EdgeClass, TrustParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub c: f64,
    pub d: f64,
    /// Variance of `alpha - 1/2` on legitimate edges.
    pub sigma2_legit: f64,
    /// Variance of `alpha - 1/2` on malicious edges.
    pub sigma2_malicious: f64,
    pub eta: f64,
    pub kappa: f64,
    pub n_legit: usize,
    pub n_malicious: usize,
    pub delta: f64,
    pub t0: usize,
}

impl BoundParams {
    pub fn from_trust(
        trust: &TrustParams,
        topo: &Topology,
        kappa: f64,
        eta: f64,
        delta: f64,
        t0: usize,
    ) -> Result<Self> {
        let p = BoundParams {
            c: trust.c(),
            d: trust.d(),
            sigma2_legit: trust.variance(EdgeClass::Legit).unwrap_or(f64::NAN),
            sigma2_malicious: trust.variance(EdgeClass::Malicious).unwrap_or(f64::NAN),
            eta,
            kappa,
            n_legit: topo.n_legit(),
            n_malicious: topo.n_malicious(),
            delta,
            t0,
        };
        p.validate()?;
        Ok(p)
    }

    /// The evaluation setting: `c = -0.05`, `d = 0.05`, uniform width `ell`,
    /// 15 legitimate agents, `kappa = 10`, `eta = 5`.
    pub fn paper(n_malicious: usize, ell: f64, delta: f64, t0: usize) -> Self {
        BoundParams {
            c: -0.05,
            d: 0.05,
            sigma2_legit: ell * ell / 12.0,
            sigma2_malicious: ell * ell / 12.0,
            eta: 5.0,
            kappa: 10.0,
            n_legit: 15,
            n_malicious,
            delta,
            t0,
        }
    }

    pub fn with_t0(self, t0: usize) -> Self {
        BoundParams { t0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c < 0.0 && self.d > 0.0) {
            return Err(Error::out_of_range("c, d", format!("need c < 0 < d, got c = {}, d = {}", self.c, self.d)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::out_of_range("delta", format!("{} must lie in (0, 1)", self.delta)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidKappa(self.kappa));
        }
        if !(self.eta > 0.0) {
            return Err(Error::out_of_range("eta", format!("{} must be positive", self.eta)));
        }
        for (name, s) in [("sigma2_legit", self.sigma2_legit), ("sigma2_malicious", self.sigma2_malicious)] {
            if !s.is_nan() && !(0.0..=0.25).contains(&s) {
                return Err(Error::out_of_range(name, format!("{s} must lie in [0, 1/4]")));
            }
        }
        Ok(())
    }

    pub fn sigma2(&self, class: EdgeClass) -> f64 {
        match class {
            EdgeClass::Legit => self.sigma2_legit,
            EdgeClass::Malicious => self.sigma2_malicious,
        }
    }

    /// `L^2 e^{-2 s d^2} / (1 - e^{-2 d^2}) + L M e^{-2 s c^2} / (1 - e^{-2 c^2})`:
    /// union bound over edges and over all steps from `s - 1` on.
    pub fn not_ideal_tail(&self, s: f64) -> f64 {
        let l = self.n_legit as f64;
        let m = self.n_malicious as f64;
        let legit = l * l * geometric_tail(s, self.d);
        let malicious = if self.n_malicious == 0 { 0.0 } else { l * m * geometric_tail(s, self.c) };
        legit + malicious
    }
}

/// `e^{-2 s x^2} / (1 - e^{-2 x^2})`.
fn geometric_tail(s: f64, x: f64) -> f64 {
    let r = 2.0 * x * x;
    (-s * r).exp() / -(-r).exp_m1()
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// `max(exp(-2 (t+1) d^2), 1{d < 0})`: chance a legitimate neighbor is
/// distrusted at step `t`.
pub fn hoeffding_legit(t: usize, d: f64) -> f64 {
    if d < 0.0 {
        1.0
    } else {
        (-2.0 * (t as f64 + 1.0) * d * d).exp()
    }
}

/// `max(exp(-2 (t+1) c^2), 1{c > 0})`: chance a malicious neighbor is trusted
/// at step `t`.
pub fn hoeffding_malicious(t: usize, c: f64) -> f64 {
    if c > 0.0 {
        1.0
    } else {
        (-2.0 * (t as f64 + 1.0) * c * c).exp()
    }
}

pub fn hoeffding_misclass(t: usize, class: EdgeClass, p: &BoundParams) -> f64 {
    match class {
        EdgeClass::Legit => hoeffding_legit(t, p.d),
        EdgeClass::Malicious => hoeffding_malicious(t, p.c),
    }
}

/// Variance-aware misclassification tail for a drift of magnitude `gap > 0`
/// after `t + 1` observations with per-step variance `sigma2`.
fn variance_tail(t: usize, gap: f64, sigma2: f64) -> Result<f64> {
    if gap == 0.0 {
        return Ok(1.0);
    }
    if !(gap <= 0.5) {
        return Err(Error::out_of_range("mean offset", format!("|{gap}| exceeds 1/2")));
    }
    if sigma2 == 0.0 {
        // deterministic observations never cross zero
        return Ok(0.0);
    }
    let n = t + 1;
    improved_bennett(n as f64 * gap, sigma2, 1.0, n)
}

/// Improved-Bennett bound on `P(beta_ij(t) < 0)` for a legitimate edge.
pub fn bennett_legit(t: usize, d: f64, sigma2: f64) -> Result<f64> {
    if d < 0.0 {
        return Ok(1.0);
    }
    variance_tail(t, d, sigma2)
}

/// Improved-Bennett bound on `P(beta_ij(t) >= 0)` for a malicious edge.
pub fn bennett_malicious(t: usize, c: f64, sigma2: f64) -> Result<f64> {
    if c > 0.0 {
        return Ok(1.0);
    }
    variance_tail(t, -c, sigma2)
}

pub fn bennett_misclass(t: usize, class: EdgeClass, p: &BoundParams) -> Result<f64> {
    match class {
        EdgeClass::Legit => bennett_legit(t, p.d, p.sigma2_legit),
        EdgeClass::Malicious => bennett_malicious(t, p.c, p.sigma2_malicious),
    }
}

/// Bound on the probability that the weights ever differ from the ideal
/// matrix from step `T0 - 1` on. Requires `T0 >= 1`.
pub fn prob_not_ideal(p: &BoundParams) -> Result<f64> {
    if p.t0 < 1 {
        return Err(Error::out_of_range("T0", "must be >= 1"));
    }
    Ok(p.not_ideal_tail(p.t0 as f64))
}

/// Which coefficient to use for the legitimate deviation term: the inline
/// definition carries `2 eta / delta`, the deviation theorem `eta / delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GLegitVariant {
    Inline,
    #[default]
    Theorem,
}

fn check_delta(p: &BoundParams) -> Result<()> {
    if p.delta > 0.0 && p.delta < 1.0 {
        Ok(())
    } else {
        Err(Error::out_of_range("delta", format!("{} must lie in (0, 1)", p.delta)))
    }
}

/// Deviation caused by legitimate neighbors being discarded.
pub fn g_legit(p: &BoundParams, variant: GLegitVariant) -> Result<f64> {
    check_delta(p)?;
    let coef = match variant {
        GLegitVariant::Inline => 2.0 * p.eta,
        GLegitVariant::Theorem => p.eta,
    };
    Ok(coef / p.delta * p.not_ideal_tail(p.t0 as f64))
}

/// Deviation caused by malicious neighbors being trusted.
pub fn g_malicious(p: &BoundParams) -> Result<f64> {
    check_delta(p)?;
    if p.n_malicious == 0 {
        return Ok(0.0);
    }
    let scale = p.eta * p.n_legit as f64 * p.n_malicious as f64 / (p.delta * p.kappa);
    Ok(scale * geometric_tail(p.t0 as f64, p.c))
}

/// `2 (g_legit + g_malicious)`: with probability at least `1 - delta` no
/// legitimate agent ends further than this from the nominal value.
pub fn delta_max(p: &BoundParams) -> Result<f64> {
    delta_max_with(p, GLegitVariant::Theorem)
}

pub fn delta_max_with(p: &BoundParams, variant: GLegitVariant) -> Result<f64> {
    Ok(2.0 * (g_legit(p, variant)? + g_malicious(p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBound {
    /// Bound on `||x_L(t) - z 1||_v`.
    pub deviation: f64,
    /// Probability with which the deviation bound holds (raw, may be negative).
    pub probability_floor: f64,
}

/// Convergence-rate guarantee at time `t` assuming the weights are ideal from
/// step `m` on, `T0 - 1 <= m <= t`.
pub fn rate_bound(t: usize, m: i64, p: &BoundParams, rho2: f64) -> Result<RateBound> {
    let start = p.t0 as i64 - 1;
    if m < start || m > t as i64 {
        return Err(Error::out_of_range("m", format!("{m} must lie in [{start}, {t}]")));
    }
    let deviation = 2.0 * (m - start) as f64 * rho2.powi((t as i64 - m) as i32) * p.eta;
    let probability_floor = 1.0 - p.not_ideal_tail((m + 1) as f64);
    Ok(RateBound { deviation, probability_floor })
}

fn expected_rate_term(t: usize, m: i64, p: &BoundParams, rho2: f64) -> f64 {
    let start = p.t0 as i64 - 1;
    2.0 * (m - start) as f64 * rho2.powi((t as i64 - m) as i32) * p.eta
        + 2.0 * p.eta * p.not_ideal_tail((m + 1) as f64)
}

/// Bound on `E ||x_L(t) - 1 v' x_L(0)||_v`, minimized over the split point
/// `m in {T0 - 1, ..., t - 1}`. Requires `t >= T0`.
pub fn expected_rate_bound(t: usize, p: &BoundParams, rho2: f64) -> Result<f64> {
    if t < p.t0 || t == 0 {
        return Err(Error::out_of_range("t", format!("{t} must be >= T0 = {} and >= 1", p.t0)));
    }
    let start = p.t0 as i64 - 1;
    Ok((start..t as i64).map(|m| expected_rate_term(t, m, p, rho2)).fold(f64::INFINITY, f64::min))
}

/// One line of misclassification curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MisclassificationPoint {
    pub t: usize,
    pub hoeffding_legit: f64,
    pub hoeffding_malicious: f64,
    pub bennett_legit: f64,
    pub bennett_malicious: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub t: usize,
    pub m: i64,
    pub deviation: f64,
    pub probability_floor: f64,
    pub probability_floor_clamped: f64,
}

/// Every guarantee evaluated for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub rho2: f64,
    pub misclassification: Vec<MisclassificationPoint>,
    pub prob_not_ideal: Option<f64>,
    pub prob_not_ideal_clamped: Option<f64>,
    pub g_legit: f64,
    pub g_legit_inline: f64,
    pub g_malicious: f64,
    pub delta_max: f64,
    pub rate: Vec<RatePoint>,
    pub expected_rate: Vec<(usize, f64)>,
}

impl BoundReport {
    /// Curves for `t in 0..=horizon`; the rate table uses the midpoint split
    /// `m = (t + T0) / 2` for every `t >= T0`.
    pub fn evaluate(p: &BoundParams, rho2: f64, horizon: usize) -> Result<Self> {
        p.validate()?;
        let misclassification = (0..=horizon)
            .map(|t| {
                Ok(MisclassificationPoint {
                    t,
                    hoeffding_legit: hoeffding_legit(t, p.d),
                    hoeffding_malicious: hoeffding_malicious(t, p.c),
                    bennett_legit: bennett_legit(t, p.d, p.sigma2_legit)?,
                    bennett_malicious: bennett_malicious(t, p.c, p.sigma2_malicious)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let prob = prob_not_ideal(p).ok();
        let mut rate = Vec::new();
        let mut expected_rate = Vec::new();
        for t in p.t0.max(1)..=horizon {
            let m = midpoint_split(t, p.t0);
            let r = rate_bound(t, m, p, rho2)?;
            rate.push(RatePoint {
                t,
                m,
                deviation: r.deviation,
                probability_floor: r.probability_floor,
                probability_floor_clamped: clamp_probability(r.probability_floor),
            });
            expected_rate.push((t, expected_rate_bound(t, p, rho2)?));
        }
        Ok(BoundReport {
            params: *p,
            rho2,
            misclassification,
            prob_not_ideal: prob,
            prob_not_ideal_clamped: prob.map(clamp_probability),
            g_legit: g_legit(p, GLegitVariant::Theorem)?,
            g_legit_inline: g_legit(p, GLegitVariant::Inline)?,
            g_malicious: g_malicious(p)?,
            delta_max: delta_max(p)?,
            rate,
            expected_rate,
        })
    }
}

/// `m = floor((t + T0) / 2)`.
pub fn midpoint_split(t: usize, t0: usize) -> i64 {
    ((t + t0) / 2) as i64
}

/// One row of the `bounds` CSV for grid value `x`: misclassification curves at
/// `t = x`, window-dependent bounds at `T0 = x`, and rate bounds at `t = x`
/// for the configured `T0` (NaN where a bound is undefined).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub t_or_t0: usize,
    pub hoeffding_legit: f64,
    pub hoeffding_malicious: f64,
    pub bennett_legit: f64,
    pub bennett_malicious: f64,
    pub prob_not_ideal: f64,
    pub g_legit: f64,
    pub g_malicious: f64,
    pub delta_max: f64,
    pub rate_bound: f64,
    pub expected_rate_bound: f64,
}

pub const BOUND_CSV_HEADER: &str = "t_or_T0,hoeffding_legit,hoeffding_malicious,bennett_legit,bennett_malicious,prob_not_ideal,g_legit,g_malicious,delta_max,rate_bound,expected_rate_bound";

pub fn bound_rows(p: &BoundParams, rho2: f64, grid: &[usize]) -> Result<Vec<BoundRow>> {
    p.validate()?;
    grid.iter()
        .map(|&x| {
            let at = p.with_t0(x);
            let (rate, expected) = if x >= p.t0 && x >= 1 {
                (rate_bound(x, midpoint_split(x, p.t0), p, rho2)?.deviation, expected_rate_bound(x, p, rho2)?)
            } else {
                (f64::NAN, f64::NAN)
            };
            Ok(BoundRow {
                t_or_t0: x,
                hoeffding_legit: hoeffding_legit(x, p.d),
                hoeffding_malicious: hoeffding_malicious(x, p.c),
                bennett_legit: bennett_legit(x, p.d, p.sigma2_legit)?,
                bennett_malicious: bennett_malicious(x, p.c, p.sigma2_malicious)?,
                prob_not_ideal: prob_not_ideal(&at).unwrap_or(f64::NAN),
                g_legit: g_legit(&at, GLegitVariant::Theorem)?,
                g_malicious: g_malicious(&at)?,
                delta_max: delta_max(&at)?,
                rate_bound: rate,
                expected_rate_bound: expected,
            })
        })
        .collect()
}

impl BoundRow {
    pub fn csv_line(&self) -> String {
        let f = crate::harness::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t_or_t0,
            f(self.hoeffding_legit),
            f(self.hoeffding_malicious),
            f(self.bennett_legit),
            f(self.bennett_malicious),
            f(self.prob_not_ideal),
            f(self.g_legit),
            f(self.g_malicious),
            f(self.delta_max),
            f(self.rate_bound),
            f(self.expected_rate_bound)
        )
    }
}
