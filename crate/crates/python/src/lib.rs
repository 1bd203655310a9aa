//! Python bindings.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fkcrit::analysis;
use fkcrit::continuation::{self, ExtrapolationOptions, NewtonOptions, NormKind, StepPolicy};
use fkcrit::geometry::{self, Fraction, WallType};

fn err(e: fkcrit::Error) -> PyErr {
    match e {
        fkcrit::Error::InvalidSpec(_)
        | fkcrit::Error::InvalidInput(_)
        | fkcrit::Error::GridTooCoarse(_)
        | fkcrit::Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn fraction(alpha: &str) -> PyResult<Fraction> {
    alpha.parse().map_err(err)
}

#[pyclass(name = "BoundarySpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyBoundarySpec(geometry::BoundarySpec);

#[pymethods]
impl PyBoundarySpec {
    #[staticmethod]
    fn full_dirichlet() -> Self {
        PyBoundarySpec(geometry::BoundarySpec::full_dirichlet())
    }

    #[staticmethod]
    fn single_arc(alpha: &str) -> PyResult<Self> {
        geometry::BoundarySpec::single_arc(fraction(alpha)?).map(PyBoundarySpec).map_err(err)
    }

    #[staticmethod]
    fn periodic(segments: u32, alpha: &str) -> PyResult<Self> {
        geometry::BoundarySpec::periodic(segments, fraction(alpha)?)
            .map(PyBoundarySpec)
            .map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.0.kind() {
            geometry::BoundaryKind::FullDirichlet => "full-dirichlet",
            geometry::BoundaryKind::SingleArc => "single-arc",
            geometry::BoundaryKind::Periodic => "periodic",
        }
    }

    #[getter]
    fn alpha(&self) -> String {
        self.0.alpha().to_string()
    }

    #[getter]
    fn segments(&self) -> u32 {
        self.0.segments()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    /// "conducting" or "insulated" at angle `theta`.
    fn classify(&self, theta: f64) -> &'static str {
        match geometry::classify_boundary(&self.0, theta) {
            WallType::Conducting => "conducting",
            WallType::Insulated => "insulated",
        }
    }

    fn __repr__(&self) -> String {
        format!("BoundarySpec({})", self.0.label())
    }
}

#[pyclass(name = "PolarGrid", frozen, from_py_object)]
#[derive(Clone)]
struct PyPolarGrid(Arc<geometry::PolarGrid>);

#[pymethods]
impl PyPolarGrid {
    #[new]
    fn new(n: usize, spec: &PyBoundarySpec) -> PyResult<Self> {
        Ok(PyPolarGrid(Arc::new(geometry::build_grid(n, &spec.0).map_err(err)?)))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn n_r(&self) -> usize {
        self.0.n_r()
    }

    #[getter]
    fn n_theta(&self) -> usize {
        self.0.n_theta()
    }

    #[getter]
    fn n_unknowns(&self) -> usize {
        self.0.n_unknowns()
    }

    #[getter]
    fn effective_alpha(&self) -> f64 {
        self.0.effective_alpha()
    }

    #[getter]
    fn rho(&self) -> Vec<f64> {
        self.0.rho().to_vec()
    }

    #[getter]
    fn dtheta(&self) -> f64 {
        self.0.dtheta()
    }

    fn __repr__(&self) -> String {
        format!(
            "PolarGrid(n={}, n_r={}, n_theta={}, unknowns={})",
            self.0.n(),
            self.0.n_r(),
            self.0.n_theta(),
            self.0.n_unknowns()
        )
    }
}

#[pyclass(name = "SolutionField", frozen, from_py_object)]
#[derive(Clone)]
struct PySolutionField(fkcrit::SolutionField);

#[pymethods]
impl PySolutionField {
    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn grid(&self) -> PyPolarGrid {
        PyPolarGrid(self.0.grid().clone())
    }

    fn max_norm(&self) -> f64 {
        self.0.max_norm()
    }

    /// Value at ring `i` and full-disk angular cell `j`.
    fn at(&self, i: usize, j: usize) -> PyResult<f64> {
        let g = self.0.grid();
        if i >= g.n_r() || j >= g.n_theta() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.at(i, j))
    }

    fn residual_norm(&self) -> f64 {
        fkcrit::residual(&self.0).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    fn analyze_core(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &analysis::analyze_core(&self.0).map_err(err)?)
    }
}

#[pyclass(name = "ContinuationTrace", frozen)]
struct PyTrace(continuation::ContinuationTrace);

#[pymethods]
impl PyTrace {
    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.points.iter().map(|p| p.lambda).collect()
    }

    #[getter]
    fn lambda_sq(&self) -> Vec<f64> {
        self.0.points.iter().map(|p| p.lambda_sq).collect()
    }

    #[getter]
    fn norms(&self) -> Vec<f64> {
        self.0.points.iter().map(|p| p.norm).collect()
    }

    #[getter]
    fn termination(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.termination)
    }

    #[getter]
    fn final_field(&self) -> Option<PySolutionField> {
        self.0.final_field.clone().map(PySolutionField)
    }

    fn fit_fold(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &continuation::fit_fold(&self.0).map_err(err)?)
    }

    fn __len__(&self) -> usize {
        self.0.points.len()
    }
}

#[pyfunction]
#[pyo3(signature = (grid, lam, initial=None, tol=1e-10, max_iter=25))]
fn newton_solve(
    grid: &PyPolarGrid,
    lam: f64,
    initial: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> PyResult<PySolutionField> {
    let start = match initial {
        Some(v) => fkcrit::SolutionField::new(grid.0.clone(), v, lam).map_err(err)?,
        None => fkcrit::SolutionField::zeros(grid.0.clone(), lam),
    };
    continuation::newton_solve(&start, lam, &NewtonOptions { tol, max_iter })
        .map(PySolutionField)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (grid, initial_step=0.05, step_floor=1e-6, norm="max"))]
fn trace_branch(grid: &PyPolarGrid, initial_step: f64, step_floor: f64, norm: &str) -> PyResult<PyTrace> {
    let norm = match norm {
        "max" => NormKind::Max,
        "l2" => NormKind::L2,
        _ => return Err(PyValueError::new_err("norm must be 'max' or 'l2'")),
    };
    let policy = StepPolicy {
        initial_step,
        step_floor,
        norm,
        ..StepPolicy::default()
    };
    continuation::trace_branch(grid.0.clone(), &policy).map(PyTrace).map_err(err)
}

/// Parabolic fold fit of `lambda_sq` against `norms` over the last ten points.
#[pyfunction]
fn fit_fold(py: Python<'_>, norms: Vec<f64>, lambda_sq: Vec<f64>) -> PyResult<Py<PyAny>> {
    if norms.len() != lambda_sq.len() {
        return Err(PyValueError::new_err("norms and lambda_sq differ in length"));
    }
    let pairs: Vec<(f64, f64)> = norms.into_iter().zip(lambda_sq).collect();
    let fit = continuation::fit_fold_pairs(&pairs, continuation::FOLD_FIT_POINTS, continuation::FOLD_FIT_THRESHOLD)
        .map_err(err)?;
    to_py(py, &fit)
}

#[pyfunction]
#[pyo3(signature = (spec, n_list=vec![64, 128, 256]))]
fn extrapolate_in_n(py: Python<'_>, spec: &PyBoundarySpec, n_list: Vec<usize>) -> PyResult<Py<PyAny>> {
    let opts = ExtrapolationOptions {
        n_list,
        ..ExtrapolationOptions::default()
    };
    let spec = spec.0;
    let est = py.detach(move || continuation::extrapolate_in_n(&spec, &opts)).map_err(err)?;
    to_py(py, &est)
}

#[pyfunction]
fn fit_scaling_law(py: Python<'_>, alphas: Vec<f64>, lambda_cr_sq: Vec<f64>, segments: u32) -> PyResult<Py<PyAny>> {
    if alphas.len() != lambda_cr_sq.len() {
        return Err(PyValueError::new_err("alphas and lambda_cr_sq differ in length"));
    }
    let pts: Vec<(f64, f64)> = alphas.into_iter().zip(lambda_cr_sq).collect();
    to_py(py, &analysis::fit_scaling_law(&pts, segments).map_err(err)?)
}

/// `(lambda_sq, u(rho) at each rho)` of the closed-form solution.
#[pyfunction]
#[pyo3(signature = (b, rho=Vec::new()))]
fn classical_solution(b: f64, rho: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    if !(b > 0.0) {
        return Err(PyValueError::new_err("B must be positive"));
    }
    let s = analysis::classical_solution(b);
    Ok((s.lambda_sq, rho.iter().map(|&r| s.profile(r)).collect()))
}

/// `(R, v)` on the cell centres of the radial grid.
#[pyfunction]
#[pyo3(signature = (lambda_sq, boundary_value=0.0))]
fn solve_radial(lambda_sq: f64, boundary_value: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = analysis::solve_radial(lambda_sq, boundary_value).map_err(err)?;
    Ok((p.r, p.v))
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn lambda_from_physical(
    t0: f64,
    e: f64,
    r_gas: f64,
    kappa: f64,
    c: f64,
    q: f64,
    sigma_t0: f64,
    r0: f64,
) -> PyResult<f64> {
    let s = analysis::PhysicalScaling {
        t0,
        e,
        r_gas,
        kappa,
        c,
        q,
        sigma_t0,
    };
    analysis::lambda_from_physical(&s, r0).map_err(err)
}

#[pymodule]
#[pyo3(name = "fkcrit")]
pub fn fkcrit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBoundarySpec>()?;
    m.add_class::<PyPolarGrid>()?;
    m.add_class::<PySolutionField>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(newton_solve, m)?)?;
    m.add_function(wrap_pyfunction!(trace_branch, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fold, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate_in_n, m)?)?;
    m.add_function(wrap_pyfunction!(fit_scaling_law, m)?)?;
    m.add_function(wrap_pyfunction!(classical_solution, m)?)?;
    m.add_function(wrap_pyfunction!(solve_radial, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_from_physical, m)?)?;
    Ok(())
}
