//! Python bindings. Build with `maturin develop -m crates/python/Cargo.toml`
//! (the `extension-module` feature is enabled by pyproject.toml).

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use trustcons::bounds::{self, BoundParams, GLegitVariant};
use trustcons::config::RunConfig;
use trustcons::harness;

fn to_py(e: trustcons::Error) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Topology", module = "trustcons", frozen)]
struct PyTopology(trustcons::Topology);

#[pymethods]
impl PyTopology {
    /// Legitimate links as `(a, b)` pairs; `malicious_neighbors[k]` lists the
    /// legitimate agents malicious agent `k` reaches.
    #[new]
    #[pyo3(signature = (n_legit, edges, malicious_neighbors = Vec::new()))]
    fn new(n_legit: usize, edges: Vec<(usize, usize)>, malicious_neighbors: Vec<Vec<usize>>) -> PyResult<Self> {
        trustcons::Topology::from_edges(n_legit, malicious_neighbors.len(), &edges, &malicious_neighbors)
            .map(PyTopology)
            .map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (n_malicious = 0))]
    fn paper(n_malicious: usize) -> Self {
        PyTopology(trustcons::paper_topology(n_malicious))
    }

    #[getter]
    fn n_legit(&self) -> usize {
        self.0.n_legit()
    }

    #[getter]
    fn n_malicious(&self) -> usize {
        self.0.n_malicious()
    }

    fn neighbors(&self, agent: usize) -> PyResult<Vec<usize>> {
        if agent >= self.0.n_agents() {
            return Err(PyValueError::new_err(format!("no agent {agent}")));
        }
        Ok(self.0.neighbors(agent).to_vec())
    }

    fn is_legit_connected(&self) -> bool {
        self.0.is_legit_connected()
    }

    /// `(v, rho2)` of the ideal weight matrix.
    #[pyo3(signature = (kappa = 10.0))]
    fn spectral(&self, kappa: f64) -> PyResult<(Vec<f64>, f64)> {
        let p = trustcons::PerronData::compute(&self.0, kappa).map_err(to_py)?;
        Ok((p.v, p.rho2))
    }

    #[pyo3(signature = (x0, kappa = 10.0))]
    fn nominal_value(&self, x0: Vec<f64>, kappa: f64) -> PyResult<f64> {
        let p = trustcons::PerronData::compute(&self.0, kappa).map_err(to_py)?;
        p.nominal_value(&x0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Topology(n_legit={}, n_malicious={})", self.0.n_legit(), self.0.n_malicious())
    }
}

/// A scenario: simulation parameters plus trial count and delta.
#[pyclass(name = "Scenario", module = "trustcons")]
struct PyScenario {
    inner: harness::Scenario,
    /// Steps simulated after T0.
    post_t0: usize,
}

#[pymethods]
impl PyScenario {
    /// Parses a scenario document (TOML text).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let rc = RunConfig::from_str(text).map_err(to_py)?;
        Ok(PyScenario { inner: rc.scenario, post_t0: rc.horizon })
    }

    /// Evaluation network with `n_malicious` fully exposed attackers.
    #[staticmethod]
    #[pyo3(signature = (n_malicious = 15, ell = 0.4, attack = "max_deviation", t0 = 150, horizon = 500, trials = 100))]
    fn paper(n_malicious: usize, ell: f64, attack: &str, t0: usize, horizon: usize, trials: usize) -> PyResult<Self> {
        let attack = trustcons::config::attack_by_name(attack).map_err(to_py)?;
        let inner = harness::Scenario::paper(n_malicious, ell, attack, t0, horizon, trials).map_err(to_py)?;
        Ok(PyScenario { inner, post_t0: horizon })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.config.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.config.seed = seed;
    }

    #[getter]
    fn trials(&self) -> usize {
        self.inner.trials
    }

    #[setter]
    fn set_trials(&mut self, trials: usize) {
        self.inner.trials = trials;
    }

    #[getter]
    fn t0(&self) -> usize {
        self.inner.config.t0
    }

    #[getter]
    fn topology(&self) -> PyTopology {
        PyTopology(self.inner.config.topology.clone())
    }

    /// One trial.
    #[pyo3(signature = (trial = 0))]
    fn simulate(&self, py: Python<'_>, trial: u64) -> PyResult<PyTrace> {
        let mut config = self.inner.config.clone();
        config.trial = trial;
        py.detach(|| trustcons::run(&config)).map(PyTrace).map_err(to_py)
    }

    /// Monte Carlo aggregates as a dict.
    fn monte_carlo(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let s = self.inner.clone();
        let r = py.detach(|| harness::run_monte_carlo(&s)).map_err(to_py)?;
        json_to_py(py, &r)
    }

    /// Summary CSV text for one Monte Carlo run.
    fn summary_csv(&self, py: Python<'_>) -> PyResult<String> {
        let s = self.inner.clone();
        let r = py.detach(|| harness::run_monte_carlo(&s)).map_err(to_py)?;
        Ok(harness::summary_csv(&[r]))
    }

    /// Closed-form guarantees for this scenario, evaluated up to `horizon`.
    #[pyo3(signature = (delta = 0.05, horizon = None))]
    fn bounds(&self, py: Python<'_>, delta: f64, horizon: Option<usize>) -> PyResult<Py<PyAny>> {
        let s = harness::Scenario { delta, ..self.inner.clone() };
        let params = s.bound_params().map_err(to_py)?;
        let perron = trustcons::PerronData::compute(&s.config.topology, s.config.kappa).map_err(to_py)?;
        let horizon = horizon.unwrap_or(s.config.t0 + self.post_t0);
        let report = trustcons::BoundReport::evaluate(&params, perron.rho2, horizon).map_err(to_py)?;
        json_to_py(py, &report)
    }
}

#[pyclass(name = "Trace", module = "trustcons", frozen)]
struct PyTrace(trustcons::SimulationTrace);

#[pymethods]
impl PyTrace {
    #[getter]
    fn nominal(&self) -> f64 {
        self.0.nominal
    }

    #[getter]
    fn t(&self) -> Vec<usize> {
        self.0.records.iter().map(|r| r.t).collect()
    }

    #[getter]
    fn x_legit(&self) -> Vec<Vec<f64>> {
        self.0.records.iter().map(|r| r.x_legit.clone()).collect()
    }

    #[getter]
    fn x_tilde(&self) -> Vec<Vec<f64>> {
        self.0.records.iter().map(|r| r.x_tilde.clone()).collect()
    }

    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        self.0.records.iter().map(|r| r.phi.clone()).collect()
    }

    #[getter]
    fn final_values(&self) -> Vec<f64> {
        self.0.final_values().to_vec()
    }

    #[getter]
    fn settling_step(&self) -> Option<usize> {
        self.0.settling_step()
    }

    fn deviation_curve(&self) -> Vec<f64> {
        self.0.deviation_curve(self.0.nominal)
    }

    fn max_decomposition_error(&self) -> f64 {
        self.0.max_decomposition_error()
    }

    fn to_csv(&self) -> String {
        harness::trace_csv(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.records.len()
    }
}

#[pyfunction]
fn lambert_w0(z: f64) -> PyResult<f64> {
    bounds::lambert_w0(z).map_err(to_py)
}

#[pyfunction]
fn hoeffding_legit(t: usize, d: f64) -> f64 {
    bounds::hoeffding_legit(t, d)
}

#[pyfunction]
fn hoeffding_malicious(t: usize, c: f64) -> f64 {
    bounds::hoeffding_malicious(t, c)
}

#[pyfunction]
fn bennett_legit(t: usize, d: f64, sigma2: f64) -> PyResult<f64> {
    bounds::bennett_legit(t, d, sigma2).map_err(to_py)
}

#[pyfunction]
fn bennett_malicious(t: usize, c: f64, sigma2: f64) -> PyResult<f64> {
    bounds::bennett_malicious(t, c, sigma2).map_err(to_py)
}

#[pyfunction]
fn improved_bennett(b: f64, sigma2_mean: f64, m_abs: f64, n: usize) -> PyResult<f64> {
    bounds::improved_bennett(b, sigma2_mean, m_abs, n).map_err(to_py)
}

/// `(prob_not_ideal, g_legit, g_malicious, delta_max)` for the evaluation
/// network; `variant` is "theorem" or "inline".
#[pyfunction]
#[pyo3(signature = (n_malicious, ell, delta, t0, variant = "theorem"))]
fn deviation_bounds(n_malicious: usize, ell: f64, delta: f64, t0: usize, variant: &str) -> PyResult<(f64, f64, f64, f64)> {
    let variant = match variant {
        "theorem" => GLegitVariant::Theorem,
        "inline" => GLegitVariant::Inline,
        other => return Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
    };
    let p = BoundParams::paper(n_malicious, ell, delta, t0);
    p.validate().map_err(to_py)?;
    let prob = bounds::prob_not_ideal(&p).unwrap_or(f64::NAN);
    let gl = bounds::g_legit(&p, variant).map_err(to_py)?;
    let gm = bounds::g_malicious(&p).map_err(to_py)?;
    Ok((prob, gl, gm, bounds::delta_max_with(&p, variant).map_err(to_py)?))
}

#[pymodule]
#[pyo3(name = "trustcons")]
fn trustcons_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTopology>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(lambert_w0, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_legit, m)?)?;
    m.add_function(wrap_pyfunction!(hoeffding_malicious, m)?)?;
    m.add_function(wrap_pyfunction!(bennett_legit, m)?)?;
    m.add_function(wrap_pyfunction!(bennett_malicious, m)?)?;
    m.add_function(wrap_pyfunction!(improved_bennett, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_bounds, m)?)?;
    m.add("PAPER_INITIAL_VALUES", trustcons::PAPER_INITIAL_VALUES.to_vec())?;
    Ok(())
}
