//! Python bindings. Structured results come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use lpnorm::birkhoff::{self as lbk, Route};
use lpnorm::dynamics::{self, State};
use lpnorm::equilibria::{refined_equilibrium, Branch};
use lpnorm::expansion as lexp;
use lpnorm::linear_normal_form as lnf;
use lpnorm::poisson_series::{DAlembertSeries, FrequencyPair};
use lpnorm::verify::{self as lverify, Suite};
use lpnorm::{DerivedParams, Error, PerturbationParams};

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain { .. } | Error::Parse { .. } | Error::InvalidTerm(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn branch(name: &str) -> PyResult<Branch> {
    match name {
        "L4" | "l4" => Ok(Branch::L4),
        "L5" | "l5" => Ok(Branch::L5),
        other => Err(PyValueError::new_err(format!("unknown branch {other}"))),
    }
}

/// Derived problem parameters.
#[pyclass(name = "Params", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams(DerivedParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (mu, q1 = 1.0, a2 = 0.0, cd = 1.0))]
    fn new(mu: f64, q1: f64, a2: f64, cd: f64) -> PyResult<Self> {
        let p = PerturbationParams::new(mu, q1, a2, cd).map_err(err)?;
        Ok(PyParams(p.derive().map_err(err)?))
    }

    /// From `(mu, epsilon, A2, W1)` with the drag constant free.
    #[staticmethod]
    fn from_components(mu: f64, epsilon: f64, a2: f64, w1: f64) -> PyResult<Self> {
        DerivedParams::from_components(mu, epsilon, a2, w1).map(PyParams).map_err(err)
    }

    fn scaled(&self, h: f64) -> PyResult<Self> {
        self.0.scaled(h).map(PyParams).map_err(err)
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter]
    fn q1(&self) -> f64 {
        self.0.q1
    }
    #[getter]
    fn a2(&self) -> f64 {
        self.0.a2
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }
    #[getter]
    fn n(&self) -> f64 {
        self.0.n
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }
    #[getter]
    fn w1(&self) -> f64 {
        self.0.w1
    }

    fn __repr__(&self) -> String {
        let d = &self.0;
        format!("Params(mu={}, epsilon={}, A2={}, W1={})", d.mu, d.epsilon, d.a2, d.w1)
    }
}

/// Truncated d'Alembert series in the actions and angles.
#[pyclass(name = "Series", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySeries(DAlembertSeries);

#[pymethods]
impl PySeries {
    #[new]
    fn new() -> Self {
        PySeries(DAlembertSeries::zero())
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        DAlembertSeries::parse(text).map(PySeries).map_err(err)
    }

    /// `kind` is "cos" or "sin".
    #[staticmethod]
    fn monomial(n: u8, m: u8, p: i8, q: i8, kind: &str, coeff: f64) -> PyResult<Self> {
        let k = match kind {
            "cos" => lpnorm::poisson_series::Kind::Cos,
            "sin" => lpnorm::poisson_series::Kind::Sin,
            other => return Err(PyValueError::new_err(format!("unknown kind {other}"))),
        };
        DAlembertSeries::monomial(n, m, p, q, k, coeff).map(PySeries).map_err(err)
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    fn evaluate(&self, i1: f64, i2: f64, phi1: f64, phi2: f64) -> f64 {
        self.0.evaluate(i1, i2, phi1, phi2)
    }

    fn apply_d(&self, omega1: f64, omega2: f64) -> Self {
        PySeries(self.0.apply_d(&FrequencyPair { omega1, omega2 }))
    }

    fn invert_delta(&self, omega1: f64, omega2: f64) -> PyResult<Self> {
        self.0.invert_delta(&FrequencyPair { omega1, omega2 }).map(PySeries).map_err(err)
    }

    fn critical_part(&self) -> Self {
        PySeries(self.0.critical_part())
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __add__(&self, o: &Self) -> Self {
        PySeries(&self.0 + &o.0)
    }

    fn __sub__(&self, o: &Self) -> Self {
        PySeries(&self.0 - &o.0)
    }

    fn __mul__(&self, o: &Self) -> Self {
        PySeries(&self.0 * &o.0)
    }

    fn __neg__(&self) -> Self {
        PySeries(-&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Series({} terms)", self.0.len())
    }
}

/// Refined equilibrium `(x, y)`.
#[pyfunction]
#[pyo3(signature = (params, branch_name = "L4", tol = 1e-14))]
fn equilibrium(params: &PyParams, branch_name: &str, tol: f64) -> PyResult<(f64, f64)> {
    let r = refined_equilibrium(&params.0, branch(branch_name)?, tol).map_err(err)?;
    Ok((r.point.x, r.point.y))
}

#[pyfunction]
fn stability<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &lnf::stability(&params.0))
}

#[pyfunction]
fn frequencies(params: &PyParams) -> PyResult<(f64, f64)> {
    let f = lnf::frequencies(&params.0).map_err(err)?;
    Ok((f.omega1, f.omega2))
}

#[pyfunction]
fn whittaker<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyAny>> {
    let f = lnf::frequencies(&params.0).map_err(err)?;
    to_py(py, &lnf::whittaker_matrix(&params.0, &f).map_err(err)?)
}

#[pyfunction]
fn normal_form_residual(params: &PyParams) -> PyResult<f64> {
    lnf::normal_form_residual(&params.0).map_err(err)
}

/// Tabulated coefficients next to the Taylor oracle.
#[pyfunction]
fn expansion<'py>(py: Python<'py>, params: &PyParams) -> PyResult<Bound<'py, PyAny>> {
    let d = &params.0;
    let rows = lexp::compare_with_oracle(d).map_err(err)?;
    let v = serde_json::json!({
        "quadratic": lexp::quadratic_coeffs(d),
        "cubic": lexp::cubic_coeffs(d),
        "comparison": rows,
    });
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (params, route = "both"))]
fn birkhoff<'py>(py: Python<'py>, params: &PyParams, route: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = match route {
        "closed" => Route::Closed,
        "generic" => Route::Generic,
        "both" => Route::Both,
        other => return Err(PyValueError::new_err(format!("unknown route {other}"))),
    };
    let rep = lbk::birkhoff(&params.0, r).map_err(err)?;
    let v = serde_json::json!({
        "omega1": rep.frequencies.omega1,
        "omega2": rep.frequencies.omega2,
        "r": rep.rs.map(|x| x.r),
        "s": rep.rs.map(|x| x.s),
        "h3": rep.h3,
        "discrepancies": rep.discrepancies,
        "max_rel_discrepancy": rep.max_rel_discrepancy,
    });
    to_py(py, &v)
}

/// Generic second-order solution as `(B2_10, B2_01)`.
#[pyfunction]
fn second_order(params: &PyParams) -> PyResult<(PySeries, PySeries)> {
    let d = &params.0;
    let f = lnf::frequencies(d).map_err(err)?;
    let j = lnf::whittaker_matrix(d, &f).map_err(err)?;
    let s = lbk::generic_second_order_solve(d, &f, &j).map_err(err)?;
    Ok((PySeries(s.b2_10), PySeries(s.b2_01)))
}

/// Integrates from `state = (x, y, vx, vy)`; returns `(times, states)`.
#[pyfunction]
#[pyo3(signature = (params, state, t_end, dt_out = 0.1, tol = 1e-12))]
#[allow(clippy::type_complexity)]
fn simulate(
    params: &PyParams,
    state: (f64, f64, f64, f64),
    t_end: f64,
    dt_out: f64,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<(f64, f64, f64, f64)>)> {
    let s0 = State { x: state.0, y: state.1, vx: state.2, vy: state.3 };
    let t = dynamics::integrate(s0, &params.0, t_end, dt_out, tol).map_err(err)?;
    let states = t.states.iter().map(|s| (s.x, s.y, s.vx, s.vy)).collect();
    Ok((t.times, states))
}

/// Top `k` periodogram peaks of a uniformly sampled signal as `(frequency, amplitude)`.
#[pyfunction]
#[pyo3(signature = (times, signal, k = 2))]
fn dominant_frequencies(times: Vec<f64>, signal: Vec<f64>, k: usize) -> PyResult<Vec<(f64, f64)>> {
    let peaks = dynamics::dominant_frequencies_of(&times, &signal, k).map_err(err)?;
    Ok(peaks.into_iter().map(|p| (p.frequency, p.amplitude)).collect())
}

/// Runs the acceptance suite; returns the report dict.
#[pyfunction]
#[pyo3(signature = (suite = "classical"))]
fn verify<'py>(py: Python<'py>, suite: &str) -> PyResult<Bound<'py, PyAny>> {
    let s: Suite = suite.parse().map_err(err)?;
    to_py(py, &lverify::run_suite(s))
}

#[pymodule]
fn lpnorm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PySeries>()?;
    m.add("MU_CRIT_0", lnf::MU_CRIT_0)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(whittaker, m)?)?;
    m.add_function(wrap_pyfunction!(normal_form_residual, m)?)?;
    m.add_function(wrap_pyfunction!(expansion, m)?)?;
    m.add_function(wrap_pyfunction!(birkhoff, m)?)?;
    m.add_function(wrap_pyfunction!(second_order, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_frequencies, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
