//! Python module `sabr_mc`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sabr_core::cev::{self, CevParams};
use sabr_core::condvar::{self, CondVarInputs};
use sabr_core::engine::{self, SabrParams, Scheme};
use sabr_core::harness::config::parse_config;
use sabr_core::harness::{self, CaseSpec, Fixtures};
use sabr_core::{RngStream, SabrError};

fn to_py(err: SabrError) -> PyErr {
    match err {
        SabrError::Domain { .. }
        | SabrError::Config(_)
        | SabrError::Parse { .. }
        | SabrError::MissingFixture { .. } => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn scheme(name: &str) -> PyResult<Scheme> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "SabrParams", frozen, from_py_object)]
#[derive(Clone)]
struct PySabrParams(SabrParams);

#[pymethods]
impl PySabrParams {
    #[new]
    fn new(f0: f64, sigma0: f64, vov: f64, beta: f64, rho: f64) -> PyResult<Self> {
        SabrParams::new(f0, sigma0, vov, beta, rho).map(Self).map_err(to_py)
    }

    /// Parameters of a built-in case, `"case1"` .. `"case5"`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        CaseSpec::builtin(name).map(|c| Self(c.params)).map_err(to_py)
    }

    #[getter]
    fn f0(&self) -> f64 {
        self.0.f0()
    }
    #[getter]
    fn sigma0(&self) -> f64 {
        self.0.sigma0()
    }
    #[getter]
    fn vov(&self) -> f64 {
        self.0.vov()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho()
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "SabrParams(f0={}, sigma0={}, vov={}, beta={}, rho={})",
            p.f0(),
            p.sigma0(),
            p.vov(),
            p.beta(),
            p.rho()
        )
    }
}

#[pyclass(name = "CevParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyCevParams(CevParams);

#[pymethods]
impl PyCevParams {
    #[new]
    fn new(beta: f64, mean: f64, var_scale: f64) -> PyResult<Self> {
        CevParams::new(beta, mean, var_scale).map(Self).map_err(to_py)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }
    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }
    #[getter]
    fn var_scale(&self) -> f64 {
        self.0.var_scale()
    }

    /// `P(F_T > y)`.
    fn survival(&self, y: f64) -> PyResult<f64> {
        cev::cev_survival(y, &self.0).map_err(to_py)
    }

    /// Mass at zero.
    fn absorption_prob(&self) -> PyResult<f64> {
        cev::absorption_prob(&self.0).map_err(to_py)
    }

    /// `n` exact draws from stream `(seed, 0)`.
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> Vec<f64> {
        let p = self.0;
        py.detach(move || {
            let mut s = RngStream::new(seed, 0);
            (0..n).map(|_| cev::cev_sample(&mut s, &p)).collect()
        })
    }
}

/// Terminal forwards; path `p` uses stream `(seed, p)`.
#[pyfunction]
#[pyo3(signature = (params, t, h, n_paths, seed=1, scheme="cev"))]
fn simulate_terminal(
    py: Python<'_>,
    params: PySabrParams,
    t: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
    scheme: &str,
) -> PyResult<Vec<f64>> {
    let s = self::scheme(scheme)?;
    py.detach(|| engine::simulate_terminal(s, &params.0, t, h, n_paths, seed))
        .map_err(to_py)
}

/// Undiscounted call price `mean((F - K)+)`.
#[pyfunction]
fn call_price(terminal: Vec<f64>, strike: f64) -> f64 {
    harness::price_european_call(&terminal, strike)
}

/// Raw and shape moments of the conditional average variance.
#[pyfunction]
fn cond_moments<'py>(py: Python<'py>, nu_hat: f64, z_hat: f64) -> PyResult<Bound<'py, PyDict>> {
    let inputs = CondVarInputs::new(nu_hat, z_hat).map_err(to_py)?;
    let m = condvar::cond_moments(inputs).map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in [
        ("mu", m.mu),
        ("mu2p", m.mu2p),
        ("mu3p", m.mu3p),
        ("mu4p", m.mu4p),
        ("cv", m.cv),
        ("skew", m.skew),
        ("exkurt", m.exkurt),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Leading small-`nu_hat` `(cv, skew, exkurt)`.
#[pyfunction]
fn small_time_stats(nu_hat: f64) -> (f64, f64, f64) {
    condvar::small_time_stats(nu_hat)
}

/// Run a TOML configuration; one dict per `(T, K)`, `None` where a
/// statistic is unavailable.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, text: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let setup = parse_config(text).map_err(to_py)?;
    let report = py
        .detach(|| harness::run_case(&setup.case, &setup.config, Fixtures::builtin()))
        .map_err(to_py)?;
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("case", &r.case)?;
            d.set_item("scheme", r.scheme.name())?;
            d.set_item("T", r.maturity)?;
            d.set_item("K", r.strike)?;
            d.set_item("h", r.h)?;
            d.set_item("n_paths", r.n_paths)?;
            d.set_item("n_reps", r.n_reps)?;
            d.set_item("price", r.stats.price_mean)?;
            d.set_item("bias", r.stats.bias)?;
            d.set_item("stdev", r.stats.stdev)?;
            d.set_item("rms", r.stats.rms)?;
            d.set_item("cpu_seconds", r.stats.cpu_seconds)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn sabr_mc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySabrParams>()?;
    m.add_class::<PyCevParams>()?;
    m.add_function(wrap_pyfunction!(simulate_terminal, m)?)?;
    m.add_function(wrap_pyfunction!(call_price, m)?)?;
    m.add_function(wrap_pyfunction!(cond_moments, m)?)?;
    m.add_function(wrap_pyfunction!(small_time_stats, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
