//! Python bindings: model parameters, derived constants, bifurcation
//! reports, spectra, and a small relaxation driver.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use spotlane::continuation::amplitude_mode;
use spotlane::dynamics::{seed_initial, SeedKind, Solver, SolverConfig};
use spotlane::error::Error;
use spotlane::fft3::GridDims;
use spotlane::field::kernel_basis;
use spotlane::{integrals, normal_form, spectrum, theta, verify};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Validation(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> Py<PyAny> {
    match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py).unwrap().to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py).unwrap().unbind().into_any()
            } else {
                n.as_f64().unwrap().into_pyobject(py).unwrap().unbind().into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py).unwrap().unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)).unwrap();
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)).unwrap();
            }
            dict.unbind().into_any()
        }
    }
}

fn serialize_to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(json_to_py(py, &json))
}

/// The seven model parameters.
#[pyclass(name = "ModelParams", skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: spotlane::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (gamma=1.0, sigma_c=1.0, sigma_x=0.03, sigma_theta=1e-3, lam=1.0, chi=0.0, tau=0.0))]
    fn new(
        gamma: f64,
        sigma_c: f64,
        sigma_x: f64,
        sigma_theta: f64,
        lam: f64,
        chi: f64,
        tau: f64,
    ) -> PyResult<Self> {
        let inner = spotlane::ModelParams {
            gamma,
            sigma_c,
            sigma_x,
            sigma_theta,
            lambda: lam,
            chi,
            tau,
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PyModelParams { inner })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[getter]
    fn sigma_c(&self) -> f64 {
        self.inner.sigma_c
    }

    #[getter]
    fn sigma_x(&self) -> f64 {
        self.inner.sigma_x
    }

    #[getter]
    fn sigma_theta(&self) -> f64 {
        self.inner.sigma_theta
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    /// Derived per-wave-number constants as a dict.
    fn rescale(&self, py: Python<'_>, k: u32) -> PyResult<Py<PyAny>> {
        let rc = self.inner.rescale(k).map_err(to_py_err)?;
        serialize_to_py(py, &rc)
    }

    fn elliptic_multiplier(&self, k1: i64, k2: i64) -> f64 {
        self.inner.elliptic_multiplier([k1, k2])
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Bifurcation point `chi_k(sigma_theta)`.
#[pyfunction]
fn chi_k(params: &PyModelParams, k: u32, sigma_theta: f64) -> PyResult<f64> {
    normal_form::chi_k(&params.inner, k, sigma_theta).map_err(to_py_err)
}

/// Full bifurcation report (cubic coefficients, thresholds, criticality).
#[pyfunction]
fn bifurcation_report(
    py: Python<'_>,
    params: &PyModelParams,
    k: u32,
    sigma_theta: f64,
) -> PyResult<Py<PyAny>> {
    let report = normal_form::bifurcation_report(&params.inner, k, sigma_theta).map_err(to_py_err)?;
    serialize_to_py(py, &report)
}

/// Positive roots of the three threshold cubics.
#[pyfunction]
fn tau_thresholds(py: Python<'_>, params: &PyModelParams, k: u32) -> PyResult<Py<PyAny>> {
    let rc = params.inner.rescale(k).map_err(to_py_err)?;
    let th = normal_form::tau_thresholds(&rc, &params.inner).map_err(to_py_err)?;
    serialize_to_py(py, &th)
}

#[pyfunction]
fn is_non_pythagorean(k: u32) -> bool {
    spectrum::is_non_pythagorean(k)
}

/// Near-null directions of the linearized operator at the bifurcation point.
#[pyfunction]
#[pyo3(signature = (params, k, sigma_theta, n_c=24))]
fn kernel_dimension(params: &PyModelParams, k: u32, sigma_theta: f64, n_c: usize) -> PyResult<usize> {
    let report = spectrum::kernel_report(&params.inner, k, sigma_theta, n_c).map_err(to_py_err)?;
    Ok(report.dimension)
}

/// Inviscid dispersion integral at a complex shift; returns (re, im).
#[pyfunction]
fn dispersion_j(params: &PyModelParams, k: u32, mu_re: f64, mu_im: f64) -> PyResult<(f64, f64)> {
    let rc = params.inner.rescale(k).map_err(to_py_err)?;
    let v = integrals::dispersion_j_inviscid(&rc, Complex64::new(mu_re, mu_im)).map_err(to_py_err)?;
    Ok((v.re, v.im))
}

/// Closed form of the inviscid eigenprofile integral.
#[pyfunction]
fn integral_u_inviscid(params: &PyModelParams, k: u32) -> PyResult<f64> {
    theta::integral_u_inviscid(k, &params.inner).map_err(to_py_err)
}

/// Run the closed-form/oracle verification suite; returns a list of rows.
#[pyfunction]
#[pyo3(signature = (sigma_k_grid=None, tau_k_grid=None))]
fn verify_suite(
    py: Python<'_>,
    sigma_k_grid: Option<Vec<f64>>,
    tau_k_grid: Option<Vec<f64>>,
) -> PyResult<Py<PyAny>> {
    let mut opts = verify::VerifyOptions::default();
    if let Some(g) = sigma_k_grid {
        opts.sigma_k_grid = g;
    }
    if let Some(g) = tau_k_grid {
        opts.tau_k_grid = g;
    }
    let rows = verify::run_suite(&opts).map_err(to_py_err)?;
    serialize_to_py(py, &rows)
}

/// Relax a spot seed at `chi = chi_mult * chi_k` on a small grid; returns a
/// dict with the measured kernel amplitude, the residual, and diagnostics.
#[pyfunction]
#[pyo3(signature = (params, chi_mult, n=16, n_theta=32, t_max=80.0, eps=0.01))]
fn relax_spot(
    py: Python<'_>,
    params: &PyModelParams,
    chi_mult: f64,
    n: usize,
    n_theta: usize,
    t_max: f64,
    eps: f64,
) -> PyResult<Py<PyAny>> {
    let p = params.inner;
    let dims = GridDims::new(n, n, n_theta);
    let chi = chi_mult * normal_form::chi_k(&p, 1, p.sigma_theta).map_err(to_py_err)?;
    let mut config = SolverConfig::new(dims);
    config.t_max = t_max;
    config.residual_tol = 1e-7;
    config.symmetry = SeedKind::Spot.symmetry();
    let basis = kernel_basis(&p, 1, p.sigma_theta, dims).map_err(to_py_err)?;
    let f0 = seed_initial(SeedKind::Spot, eps, &basis).map_err(to_py_err)?;
    let mut solver = Solver::new(&p, chi, config).map_err(to_py_err)?;
    let result = solver.evolve_to_stationary(&f0).map_err(to_py_err)?;
    let state = solver.state();
    let amp = amplitude_mode(&state, &basis).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("chi", chi)?;
    dict.set_item("amplitude", amp)?;
    dict.set_item("residual", result.residual)?;
    dict.set_item("converged", result.converged)?;
    dict.set_item("steps", result.steps)?;
    dict.set_item("mass", solver.mass())?;
    dict.set_item("min_value", state.min_value())?;
    Ok(dict.unbind().into_any())
}

#[pymodule]
fn spotlane_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(chi_k, m)?)?;
    m.add_function(wrap_pyfunction!(bifurcation_report, m)?)?;
    m.add_function(wrap_pyfunction!(tau_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(is_non_pythagorean, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_j, m)?)?;
    m.add_function(wrap_pyfunction!(integral_u_inviscid, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    m.add_function(wrap_pyfunction!(relax_spot, m)?)?;
    Ok(())
}
