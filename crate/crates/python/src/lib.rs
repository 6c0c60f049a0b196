//! Python bindings: potentials, spectral measures, certified amplitudes, the
//! Dyson cross-check, and the staged construction with its audits.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sparse_spectra::construct::{run_construction as construct, ConstructionConfig};
use sparse_spectra::dyson::{dyson_amplitude as dyson, DysonConfig};
use sparse_spectra::io::{parse_state, serialize_state, to_canonical_json};
use sparse_spectra::spectral::SpectralConfig;
use sparse_spectra::verify::{run_audits, AuditOptions, AuditSelection};
use sparse_spectra::{Evaluator, Height};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Sparse potential: `(site, height)` pairs with strictly increasing sites
/// `>= 2`; a height may be `float("inf")` on the last barrier only.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Potential {
    inner: sparse_spectra::Potential,
}

#[pymethods]
impl Potential {
    #[new]
    #[pyo3(signature = (barriers = Vec::new()))]
    fn new(barriers: Vec<(usize, f64)>) -> PyResult<Self> {
        let pairs = barriers
            .into_iter()
            .map(|(s, h)| (s, if h == f64::INFINITY { Height::Infinite } else { Height::Finite(h) }));
        Ok(Self { inner: sparse_spectra::Potential::new(pairs).map_err(value_err)? })
    }

    fn barriers(&self) -> Vec<(usize, f64)> {
        self.inner.barriers().iter().map(|b| (b.site, b.height.finite().unwrap_or(f64::INFINITY))).collect()
    }

    /// `V(site)`; sites without a barrier are 0.
    fn value(&self, site: usize) -> f64 {
        self.inner.value(site).unwrap_or(0.0)
    }

    /// Diagonal of the Dirichlet truncation to `{1..size}` with `λ` at site 1.
    fn truncate(&self, lambda_: f64, size: usize) -> PyResult<Vec<f64>> {
        Ok(sparse_spectra::truncate(&self.inner, lambda_, size).map_err(value_err)?.diagonal().to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.barriers().len()
    }

    fn __repr__(&self) -> String {
        format!("Potential({:?})", self.barriers())
    }
}

/// Atomic spectral measure of `δ₁` for a finite block.
#[pyclass(frozen)]
struct SpectralMeasure {
    inner: sparse_spectra::SpectralMeasure,
}

#[pymethods]
impl SpectralMeasure {
    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    /// `Σ w e^{−itE}`.
    fn fourier(&self, t: f64) -> Complex64 {
        sparse_spectra::fourier(&self.inner, t)
    }

    fn time_lipschitz(&self) -> f64 {
        sparse_spectra::time_lipschitz(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(name = "eigendecompose", signature = (potential, lambda_, size))]
fn eigendecompose(potential: &Potential, lambda_: f64, size: usize) -> PyResult<SpectralMeasure> {
    let op = sparse_spectra::truncate(&potential.inner, lambda_, size).map_err(value_err)?;
    let inner = sparse_spectra::eigendecompose(&op).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SpectralMeasure { inner })
}

/// `2 Σ_{m≥n} ((2+M)|t|)^m / m!`.
#[pyfunction]
fn tail_bound(n: usize, m_cap: f64, t: f64) -> f64 {
    sparse_spectra::tail_bound(n, m_cap, t)
}

/// Smallest prefix length whose tail bound at `t_max` is within `tol`.
#[pyfunction]
fn min_prefix(tol: f64, m_cap: f64, t_max: f64) -> PyResult<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(value_err("tol must be positive"));
    }
    Ok(sparse_spectra::min_prefix(tol, m_cap, t_max))
}

/// Certified half-line amplitude: `(value, error_radius, box_size)`.
#[pyfunction]
#[pyo3(signature = (potential, lambda_, t, tol, m_cap = 8.0))]
fn fourier_certified(
    potential: &Potential,
    lambda_: f64,
    t: f64,
    tol: f64,
    m_cap: f64,
) -> PyResult<(Complex64, f64, usize)> {
    let ev = Evaluator::new(SpectralConfig { m_cap, cache_capacity: 0, ..SpectralConfig::default() });
    let a = ev.fourier_certified(&potential.inner, lambda_, t, tol).map_err(value_err)?;
    Ok((a.value, a.error_radius, a.box_size))
}

/// Dyson evaluation on `{1..box_size}`: `(value, analytic_tail, quadrature_tolerance, terms)`.
#[pyfunction]
#[pyo3(signature = (potential, lambda_, t, box_size, order_cap = 25, quad_points = 257))]
fn dyson_amplitude(
    potential: &Potential,
    lambda_: f64,
    t: f64,
    box_size: usize,
    order_cap: usize,
    quad_points: usize,
) -> PyResult<(Complex64, f64, f64, Vec<Complex64>)> {
    let cfg = DysonConfig::new(order_cap, quad_points, t, lambda_).map_err(value_err)?;
    let a = dyson(&potential.inner, &cfg, box_size).map_err(value_err)?;
    Ok((a.value, a.analytic_tail, a.quadrature_tolerance, a.terms))
}

/// Runs the staged construction and returns the canonical state JSON.
#[pyfunction]
#[pyo3(signature = (stages = 4, epsilon = 0.1, l1 = 2))]
fn run_construction(py: Python<'_>, stages: usize, epsilon: f64, l1: usize) -> PyResult<String> {
    let config = ConstructionConfig { epsilon, l1, ..ConstructionConfig::default() };
    let state = py.detach(|| construct(stages, &config)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serialize_state(&state).map_err(value_err)
}

/// Final potential stored in a state JSON document.
#[pyfunction]
fn state_potential(state_json: &str) -> PyResult<Potential> {
    Ok(Potential { inner: parse_state(state_json).map_err(value_err)?.potential })
}

/// Runs audits on a state JSON document; returns `(all_passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (state_json, which = "all"))]
fn audit(py: Python<'_>, state_json: &str, which: &str) -> PyResult<(bool, String)> {
    let state = parse_state(state_json).map_err(value_err)?;
    let which: AuditSelection = which.parse().map_err(value_err)?;
    let reports = py.detach(|| run_audits(&state, which, &AuditOptions::default(), &Evaluator::default()));
    let pass = reports.iter().all(|r| r.pass);
    Ok((pass, to_canonical_json(&reports).map_err(value_err)?))
}

#[pymodule]
pub fn sparse_spectra_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Potential>()?;
    m.add_class::<SpectralMeasure>()?;
    m.add_function(wrap_pyfunction!(eigendecompose, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(min_prefix, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_certified, m)?)?;
    m.add_function(wrap_pyfunction!(dyson_amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(run_construction, m)?)?;
    m.add_function(wrap_pyfunction!(state_potential, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
