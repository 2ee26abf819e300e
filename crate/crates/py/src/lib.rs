//! Python bindings for `grpglm`.
//!
//! Matrices are taken as sequences of rows (lists or 2-D numpy arrays);
//! results come back as plain dicts and lists.

use grpglm::bounds::{self, BoundInputs};
use grpglm::simulate::{
    metrics_json, run_protocol, DesignId, Estimator, ProtocolConfig, SimDesign,
};
use grpglm::{
    Dataset, Error, ExponentialFamily, FitConfig, FitResult, GroupStructure, PenaltyKind,
    PenaltySpec, SparsityProfile,
};
use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Range(_) => PyOverflowError::new_err(e.to_string()),
        Error::Domain(_) | Error::Shape(_) | Error::Argument(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<ExponentialFamily> {
    name.parse().map_err(to_py)
}

fn penalty_kind(name: &str, t_n: Option<f64>) -> PyResult<PenaltyKind> {
    let kind: PenaltyKind = name.parse().map_err(to_py)?;
    match (kind, t_n) {
        (PenaltyKind::ElasticNet { .. }, Some(t_n)) => Ok(PenaltyKind::ElasticNet { t_n }),
        (PenaltyKind::ElasticNet { .. }, None) => {
            Err(PyValueError::new_err("the elastic net needs t_n"))
        }
        (_, Some(_)) => Err(PyValueError::new_err("t_n applies only to the elastic net")),
        (kind, None) => Ok(kind),
    }
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|row| row.len() != p) {
        return Err(PyValueError::new_err("rows of x have different lengths"));
    }
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let x =
        Array2::from_shape_vec((n, p), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Dataset::new(x, Array1::from(y)).map_err(to_py)
}

fn groups(sizes: Option<Vec<usize>>, p: usize) -> PyResult<GroupStructure> {
    match sizes {
        Some(s) => GroupStructure::new(s),
        None => GroupStructure::singletons(p),
    }
    .map_err(to_py)
}

fn config(tol: Option<f64>, max_iter: Option<usize>) -> FitConfig {
    let d = FitConfig::default();
    FitConfig {
        tol: tol.unwrap_or(d.tol),
        max_iter: max_iter.unwrap_or(d.max_iter),
        ..d
    }
}

fn fit_dict<'py>(py: Python<'py>, r: &FitResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("beta_hat", r.beta_hat.to_vec())?;
    d.set_item("active_groups", r.active_groups.clone())?;
    d.set_item("objective", r.objective())?;
    d.set_item("objective_trace", r.objective_trace.clone())?;
    d.set_item("kkt_residual", r.kkt_residual)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

fn json_value<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Cumulant function of `family` at `theta`.
#[pyfunction]
fn psi(family_name: &str, theta: f64) -> PyResult<f64> {
    family(family_name)?.psi(theta).map_err(to_py)
}

/// Mean negative log-likelihood of `beta`.
#[pyfunction]
fn empirical_risk(
    family_name: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    beta: Vec<f64>,
) -> PyResult<f64> {
    let data = dataset(x, y)?;
    grpglm::empirical_risk(family(family_name)?, Array1::from(beta).view(), &data).map_err(to_py)
}

#[pyfunction]
fn risk_gradient(
    family_name: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    beta: Vec<f64>,
) -> PyResult<Vec<f64>> {
    let data = dataset(x, y)?;
    grpglm::risk_gradient(family(family_name)?, Array1::from(beta).view(), &data)
        .map(|g| g.to_vec())
        .map_err(to_py)
}

/// Smallest penalty level whose solution is identically zero.
#[pyfunction]
#[pyo3(signature = (family_name, x, y, penalty = "grouplasso", groups_sizes = None))]
fn lambda_max(
    family_name: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    penalty: &str,
    groups_sizes: Option<Vec<usize>>,
) -> PyResult<f64> {
    let data = dataset(x, y)?;
    let gs = groups(groups_sizes, data.p())?;
    let kind: PenaltyKind = penalty.parse().map_err(to_py)?;
    grpglm::lambda_max(family(family_name)?, &data, &gs, kind).map_err(to_py)
}

/// Penalized fit at a single `r_n`. Group sizes default to singletons.
#[pyfunction]
#[pyo3(signature = (family_name, x, y, r_n, penalty = "grouplasso", groups_sizes = None, t_n = None, tol = None, max_iter = None))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    family_name: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    r_n: f64,
    penalty: &str,
    groups_sizes: Option<Vec<usize>>,
    t_n: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let data = dataset(x, y)?;
    let gs = groups(groups_sizes, data.p())?;
    let spec = PenaltySpec::new(penalty_kind(penalty, t_n)?, r_n).map_err(to_py)?;
    let cfg = config(tol, max_iter);
    let fam = family(family_name)?;
    let res = py
        .detach(|| grpglm::fit(fam, &data, &gs, &spec, &cfg, None))
        .map_err(to_py)?;
    fit_dict(py, &res)
}

/// Warm-started fits on a log-spaced grid from `lambda_max` down.
#[pyfunction]
#[pyo3(signature = (family_name, x, y, penalty = "grouplasso", groups_sizes = None, t_n = None, n_lambda = 100, lambda_min_ratio = 0.01, tol = None, max_iter = None))]
#[allow(clippy::too_many_arguments)]
fn path<'py>(
    py: Python<'py>,
    family_name: &str,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    penalty: &str,
    groups_sizes: Option<Vec<usize>>,
    t_n: Option<f64>,
    n_lambda: usize,
    lambda_min_ratio: f64,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let data = dataset(x, y)?;
    let gs = groups(groups_sizes, data.p())?;
    let kind = penalty_kind(penalty, t_n)?;
    let cfg = config(tol, max_iter);
    let fam = family(family_name)?;
    let res = py
        .detach(|| grpglm::path(fam, &data, &gs, kind, n_lambda, lambda_min_ratio, &cfg))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lambda_grid", res.lambda_grid.clone())?;
    d.set_item("lambda_max", res.lambda_max)?;
    let fits = res
        .fits
        .iter()
        .map(|f| fit_dict(py, f))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("fits", fits)?;
    Ok(d)
}

/// Constants and oracle bounds for the given sparsity pattern.
#[pyfunction]
#[pyo3(signature = (family_name, groups_sizes, active, l, b, n, r_n, t_n = None, a = 2.0, k = 1.0, k_stabil = 0.5))]
#[allow(clippy::too_many_arguments)]
fn bound_report<'py>(
    py: Python<'py>,
    family_name: &str,
    groups_sizes: Vec<usize>,
    active: Vec<usize>,
    l: f64,
    b: f64,
    n: usize,
    r_n: f64,
    t_n: Option<f64>,
    a: f64,
    k: f64,
    k_stabil: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = family(family_name)?;
    let build = || -> grpglm::Result<String> {
        let gs = GroupStructure::new(groups_sizes)?;
        let profile = SparsityProfile::from_groups(&gs, active)?;
        let inputs = BoundInputs::new(fam, l, b, n, gs, profile)?
            .with_a(a)?
            .with_k_const(k)?
            .with_k_stabil(k_stabil)?;
        let report = bounds::bound_report(&inputs, r_n, t_n)?;
        Ok(serde_json::to_string(&report)?)
    };
    json_value(py, &build().map_err(to_py)?)
}

#[pyfunction]
fn bell_number(k: u32) -> PyResult<u128> {
    bounds::bell_number(k).map_err(to_py)
}

/// Monte Carlo summary of one simulation design and estimator.
#[pyfunction]
#[pyo3(signature = (design, estimator = "grouplasso", reps = 100, seed = 42, n_lambda = None, lambda_min_ratio = None))]
fn simulate<'py>(
    py: Python<'py>,
    design: &str,
    estimator: &str,
    reps: usize,
    seed: u64,
    n_lambda: Option<usize>,
    lambda_min_ratio: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let id: DesignId = design.parse().map_err(to_py)?;
    let est: Estimator = estimator.parse().map_err(to_py)?;
    let d = ProtocolConfig::default();
    let cfg = ProtocolConfig {
        n_lambda: n_lambda.unwrap_or(d.n_lambda),
        lambda_min_ratio: lambda_min_ratio.unwrap_or(d.lambda_min_ratio),
        ..d
    };
    let text = py
        .detach(|| {
            let m = run_protocol(&SimDesign::new(id, seed), est, reps, &cfg)?;
            metrics_json(&[m])
        })
        .map_err(to_py)?;
    json_value(py, &text)?.get_item(0)
}

#[pymodule]
fn grpglm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_risk, m)?)?;
    m.add_function(wrap_pyfunction!(risk_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(path, m)?)?;
    m.add_function(wrap_pyfunction!(bound_report, m)?)?;
    m.add_function(wrap_pyfunction!(bell_number, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
