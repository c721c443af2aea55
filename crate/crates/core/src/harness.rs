//! Monte Carlo runner, parameter sweeps and result files.
//!
//! Trials may run in parallel; results are gathered by trial index and summed
//! sequentially with compensated summation, so output bytes depend only on
//! the master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::attacks::AttackModel;
use crate::bounds::{self, BoundParams};
use crate::engine::{self, SimulationConfig, SimulationTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimulationConfig,
    pub trials: usize,
    /// Confidence parameter for the deviation guarantee.
    pub delta: f64,
    /// Cap on worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Scenario {
    /// Evaluation-network scenario with `horizon` steps after T0.
    pub fn paper(n_malicious: usize, ell: f64, attack: AttackModel, t0: usize, horizon: usize, trials: usize) -> Result<Self> {
        Ok(Scenario {
            config: SimulationConfig::paper(n_malicious, ell, attack, t0, t0 + horizon)?,
            trials,
            delta: 0.05,
            jobs: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::out_of_range("trials", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::out_of_range("delta", format!("{} must lie in (0, 1)", self.delta)));
        }
        self.config.validate()
    }

    pub fn bound_params(&self) -> Result<BoundParams> {
        let c = &self.config;
        BoundParams::from_trust(&c.trust, &c.topology, c.kappa, c.eta, self.delta, c.t0)
    }
}

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut s = CompensatedSum::default();
    for x in xs.clone() {
        s.add(x);
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = s.value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::default();
    for x in xs {
        sq.add((x - mean) * (x - mean));
    }
    (mean, (sq.value() / (n - 1) as f64).sqrt())
}

/// What one trial contributes to the aggregates.
#[derive(Debug, Clone, PartialEq)]
struct TrialOutcome {
    deviation: Vec<f64>,
    settling_step: Option<usize>,
    final_spread: f64,
}

impl TrialOutcome {
    fn from_trace(trace: &SimulationTrace, len: usize) -> Self {
        let mut deviation = trace.deviation_curve(trace.nominal);
        // early-stopped runs hold their last value
        let last = *deviation.last().expect("trace is never empty");
        deviation.resize(len, last);
        TrialOutcome { deviation, settling_step: trace.settling_step(), final_spread: trace.final_spread() }
    }
}

/// Aggregates of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub attack: String,
    pub n_malicious: usize,
    pub ell: f64,
    pub t0: usize,
    pub trials: usize,
    pub nominal: f64,
    /// Time index of the first curve entry.
    pub first_step: usize,
    /// Per-step mean of `max_i |x_i(t) - nominal|` across trials.
    pub mean_deviation: Vec<f64>,
    pub std_deviation: Vec<f64>,
    /// Per-trial terminal `max_i |x_i - nominal|`, in trial order.
    pub terminal_deviation: Vec<f64>,
    pub settled_trials: usize,
    /// Mean settling step over trials that settled (NaN if none did).
    pub mean_settling_step: f64,
    pub median_settling_step: f64,
    pub max_settling_step: Option<usize>,
    pub mean_final_spread: f64,
    pub delta: f64,
    pub delta_max: f64,
    /// Fraction of trials whose terminal deviation exceeds `delta_max`.
    pub violation_fraction: f64,
}

impl MonteCarloResult {
    pub fn terminal_mean_deviation(&self) -> f64 {
        *self.mean_deviation.last().expect("curves are never empty")
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.mean_deviation
            .iter()
            .zip(&self.std_deviation)
            .enumerate()
            .map(|(k, (&mean, &std))| SummaryRow {
                attack: self.attack.clone(),
                n_malicious: self.n_malicious,
                ell: self.ell,
                t0: self.t0,
                t: self.first_step + k,
                mean_max_abs_dev: mean,
                std_max_abs_dev: std,
                mean_settling_step: self.mean_settling_step,
                delta_max: self.delta_max,
                violation_fraction: self.violation_fraction,
            })
            .collect()
    }
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub attack: String,
    pub n_malicious: usize,
    pub ell: f64,
    #[serde(rename = "T0")]
    pub t0: usize,
    pub t: usize,
    pub mean_max_abs_dev: f64,
    pub std_max_abs_dev: f64,
    pub mean_settling_step: f64,
    pub delta_max: f64,
    pub violation_fraction: f64,
}

pub const SUMMARY_CSV_HEADER: &str =
    "attack,n_malicious,ell,T0,t,mean_max_abs_dev,std_max_abs_dev,mean_settling_step,delta_max,violation_fraction";

/// Fixed scientific notation with 15 fractional digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.15e}")
    }
}

impl SummaryRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.attack,
            self.n_malicious,
            fmt_f64(self.ell),
            self.t0,
            self.t,
            fmt_f64(self.mean_max_abs_dev),
            fmt_f64(self.std_max_abs_dev),
            fmt_f64(self.mean_settling_step),
            fmt_f64(self.delta_max),
            fmt_f64(self.violation_fraction)
        )
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidSimulation(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `s.trials` independent trials; trial `k` uses the streams of
/// `(seed, k)`.
pub fn run_monte_carlo(s: &Scenario) -> Result<MonteCarloResult> {
    s.validate()?;
    let c = &s.config;
    let len = c.horizon - c.first_step() + 1;
    let outcomes: Vec<TrialOutcome> = in_pool(s.jobs, || {
        (0..s.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let cfg = SimulationConfig { trial, ..c.clone() };
                engine::run(&cfg).map(|trace| TrialOutcome::from_trace(&trace, len))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let params = s.bound_params()?;
    let delta_max = bounds::delta_max(&params)?;
    let ideal = crate::weights::build_ideal(&c.topology, c.kappa)?;
    let v = crate::spectral::perron_vector(&ideal, &c.topology).v;
    let nominal = crate::spectral::nominal_value(&v, &c.x_legit_init)?;

    let (mean_deviation, std_deviation): (Vec<f64>, Vec<f64>) =
        (0..len).map(|k| mean_std(outcomes.iter().map(move |o| o.deviation[k]))).unzip();
    let terminal_deviation: Vec<f64> = outcomes.iter().map(|o| o.deviation[len - 1]).collect();
    let mut settled: Vec<usize> = outcomes.iter().filter_map(|o| o.settling_step).collect();
    let (mean_settling_step, _) = mean_std(settled.iter().map(|&x| x as f64));
    settled.sort_unstable();
    let median_settling_step = match settled.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => settled[n / 2] as f64,
        n => 0.5 * (settled[n / 2 - 1] + settled[n / 2]) as f64,
    };
    let violations = terminal_deviation.iter().filter(|&&d| d > delta_max).count();

    Ok(MonteCarloResult {
        attack: c.attack.name().to_string(),
        n_malicious: c.topology.n_malicious(),
        ell: c.trust.width(),
        t0: c.t0,
        trials: s.trials,
        nominal,
        first_step: c.first_step(),
        mean_deviation,
        std_deviation,
        terminal_deviation,
        settled_trials: settled.len(),
        mean_settling_step,
        median_settling_step,
        max_settling_step: settled.last().copied(),
        mean_final_spread: mean_std(outcomes.iter().map(|o| o.final_spread)).0,
        delta: s.delta,
        delta_max,
        violation_fraction: violations as f64 / s.trials as f64,
    })
}

/// Sweep axes. Every cell reuses the base scenario's master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub t0: Vec<usize>,
    pub ell: Vec<f64>,
    pub n_malicious: Vec<usize>,
    pub attack: Vec<AttackModel>,
}

impl SweepSpec {
    /// The evaluation grid.
    pub fn paper() -> Self {
        SweepSpec {
            t0: vec![0, 25, 50, 100, 150],
            ell: vec![0.2, 0.4, 0.6],
            n_malicious: vec![5, 15, 30],
            attack: vec![AttackModel::max_deviation(), AttackModel::drift()],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.t0.len() * self.ell.len() * self.n_malicious.len() * self.attack.len()
    }

    /// Cell scenarios, ordered attack > n_malicious > ell > T0. `post_t0` is
    /// the number of steps simulated after each cell's T0.
    pub fn scenarios(&self, base: &Scenario, post_t0: usize) -> Result<Vec<Scenario>> {
        if self.n_cells() == 0 {
            return Err(Error::out_of_range("sweep", "every axis needs at least one value"));
        }
        let mut out = Vec::with_capacity(self.n_cells());
        for attack in &self.attack {
            for &m in &self.n_malicious {
                let topology = base.config.topology.with_malicious(m)?;
                for &ell in &self.ell {
                    let trust = base.config.trust.with_width(ell)?;
                    for &t0 in &self.t0 {
                        let mut config = base.config.clone();
                        config.topology = topology.clone();
                        config.trust = trust.clone();
                        config.attack = attack.clone();
                        config.t0 = t0;
                        config.horizon = t0 + post_t0;
                        config.x_malicious_init.resize(m, 0.0);
                        out.push(Scenario { config, ..base.clone() });
                    }
                }
            }
        }
        Ok(out)
    }
}

pub fn sweep(base: &Scenario, spec: &SweepSpec, post_t0: usize) -> Result<Vec<MonteCarloResult>> {
    spec.scenarios(base, post_t0)?.iter().map(run_monte_carlo).collect()
}

/// Theorem-level check of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundComparison {
    pub delta: f64,
    pub delta_max: f64,
    pub violation_fraction: f64,
    pub max_terminal_deviation: f64,
    pub holds: bool,
}

pub fn compare_bounds(s: &Scenario, delta: f64) -> Result<BoundComparison> {
    let s = Scenario { delta, ..s.clone() };
    let r = run_monte_carlo(&s)?;
    Ok(BoundComparison {
        delta,
        delta_max: r.delta_max,
        violation_fraction: r.violation_fraction,
        max_terminal_deviation: r.terminal_deviation.iter().copied().fold(0.0, f64::max),
        holds: r.violation_fraction <= delta,
    })
}

pub fn summary_csv(results: &[MonteCarloResult]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for r in results {
        for row in r.summary_rows() {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
    }
    out
}

/// Per-step, per-agent trace as CSV: `t,agent,x,x_tilde,phi`.
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = String::from("t,agent,x,x_tilde,phi\n");
    for r in &trace.records {
        for (i, ((x, xt), p)) in r.x_legit.iter().zip(&r.x_tilde).zip(&r.phi).enumerate() {
            writeln!(out, "{},{},{},{},{}", r.t, i, fmt_f64(*x), fmt_f64(*xt), fmt_f64(*p)).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub settling_step: Option<usize>,
    pub final_spread: f64,
    pub max_deviation: f64,
    pub nominal: f64,
    pub stop: engine::StopReason,
}

pub fn trace_summary(trace: &SimulationTrace) -> TraceSummary {
    TraceSummary {
        settling_step: trace.settling_step(),
        final_spread: trace.final_spread(),
        max_deviation: trace.max_deviation(trace.nominal),
        nominal: trace.nominal,
        stop: trace.stop,
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run manifest: what was run, with which seed, and a hash of the effective
/// configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub config: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, effective_config: &str, outputs: Vec<String>) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_sha256: sha256_hex(effective_config),
            config: effective_config.to_string(),
            outputs,
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("result types serialize");
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(attack: AttackModel, t0: usize, trials: usize) -> Scenario {
        Scenario::paper(3, 0.4, attack, t0, 40, trials).unwrap()
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn mean_std_values() {
        let (m, sd) = mean_std([1.0, 2.0, 3.0, 4.0].into_iter());
        assert_eq!(m, 2.5);
        assert!((sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std([7.0].into_iter()), (7.0, 0.0));
        assert!(mean_std(std::iter::empty()).0.is_nan());
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_f64(0.5), "5.000000000000000e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(-1234.5), "-1.234500000000000e3");
    }

    #[test]
    fn single_trial_matches_engine() {
        let s = small(AttackModel::max_deviation(), 10, 1);
        let r = run_monte_carlo(&s).unwrap();
        let trace = engine::run(&s.config).unwrap();
        assert_eq!(r.mean_deviation, trace.deviation_curve(trace.nominal));
        assert!(r.std_deviation.iter().all(|&x| x == 0.0));
        assert_eq!(r.first_step, 9);
        assert_eq!(r.mean_deviation.len(), 50 - 9 + 1);
    }

    #[test]
    fn silent_attack_converges_to_nominal() {
        // zero-width observations never misclassify, so the weights stay ideal
        let mut s = Scenario::paper(3, 0.0, AttackModel::Silent, 0, 40, 1).unwrap();
        s.config.topology = s.config.topology.with_malicious(0).unwrap();
        s.config.x_malicious_init.clear();
        s.config.horizon = 1500;
        let r = run_monte_carlo(&s).unwrap();
        assert!(r.terminal_mean_deviation() < 1e-8, "{}", r.terminal_mean_deviation());
        assert_eq!(r.violation_fraction, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut s = small(AttackModel::drift(), 5, 6);
        let a = run_monte_carlo(&s).unwrap();
        s.jobs = Some(1);
        let b = run_monte_carlo(&s).unwrap();
        s.jobs = Some(3);
        let c = run_monte_carlo(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn sweep_cells_and_csv() {
        let spec = SweepSpec { t0: vec![0, 5], ell: vec![0.4], n_malicious: vec![2], attack: vec![AttackModel::max_deviation()] };
        let base = small(AttackModel::Silent, 0, 2);
        let results = sweep(&base, &spec, 10).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!((results[1].t0, results[1].n_malicious, results[1].attack.as_str()), (5, 2, "max_deviation"));
        let single = run_monte_carlo(&spec.scenarios(&base, 10).unwrap()[1]).unwrap();
        assert_eq!(summary_csv(&[single]), summary_csv(&results[1..]));

        let csv = summary_csv(&results);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SUMMARY_CSV_HEADER);
        assert_eq!(lines.len(), 1 + 11 + 12);
        assert!(lines[1].starts_with("max_deviation,2,4.000000000000000e-1,0,0,"));
        assert!(SweepSpec { t0: vec![], ..spec }.scenarios(&base, 10).is_err());
    }

    #[test]
    fn bound_comparison_is_loose() {
        let s = small(AttackModel::max_deviation(), 150, 3);
        let cmp = compare_bounds(&s, 0.05).unwrap();
        assert!(cmp.holds);
        assert_eq!(cmp.violation_fraction, 0.0);
        assert!(cmp.delta_max > 1e3);
    }

    #[test]
    fn trace_export() {
        let s = small(AttackModel::max_deviation(), 2, 1);
        let trace = engine::run(&s.config).unwrap();
        let csv = trace_csv(&trace);
        assert_eq!(csv.lines().count(), 1 + trace.records.len() * 15);
        assert!(csv.starts_with("t,agent,x,x_tilde,phi\n1,0,"));
        let sum = trace_summary(&trace);
        assert_eq!(sum.final_spread, trace.final_spread());
    }

    #[test]
    fn manifest_hash() {
        let m = Manifest::new("sweep", 3, "", vec![]);
        assert_eq!(m.config_sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/out.csv");
        write_file(&p, "x\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x\n");
        let blocked = dir.path().join("a/b/out.csv/child");
        assert!(write_file(&blocked, "").unwrap_err().is_io());
    }
}
