use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::mixknap::fpa::{good_edge_check, PolicyTree};
use ::mixknap::harness::{
    baseline_lines, read_auction_csv, read_trace_csv, run_experiment, ExperimentConfig, OUTPUT_DIR_ENV,
};
use ::mixknap::{best_response_value, semi_infinite_gap_demo, solve_opt_lp, DualVector, Error, Request};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InvalidArgument(_) | Error::Config { .. } | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn request(rewards: Vec<f64>, costs: Vec<Vec<f64>>, void_index: usize) -> PyResult<Request> {
    Request::new(rewards, costs, void_index).map_err(to_py)
}

fn lines_dict<'py>(py: Python<'py>, lines: &[(String, String)]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in lines {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Value and optimal mixture of the per-round LP.
#[pyfunction]
#[pyo3(signature = (rewards, costs, rho, void_index = 0))]
fn opt_lp(rewards: Vec<f64>, costs: Vec<Vec<f64>>, rho: f64, void_index: usize) -> PyResult<(f64, Vec<f64>)> {
    let sol = solve_opt_lp(&request(rewards, costs, void_index)?, rho).map_err(to_py)?;
    Ok((sol.value, sol.mixture.weights().to_vec()))
}

/// Best-response Lagrangian value and the maximizing action.
#[pyfunction]
#[pyo3(signature = (rewards, costs, lam, rho, void_index = 0))]
fn best_response(
    rewards: Vec<f64>,
    costs: Vec<Vec<f64>>,
    lam: Vec<f64>,
    rho: f64,
    void_index: usize,
) -> PyResult<(f64, usize)> {
    let req = request(rewards, costs, void_index)?;
    let lam = DualVector::new(lam, rho).map_err(to_py)?;
    best_response_value(&lam, &req).map_err(to_py)
}

#[pyfunction]
fn gap_demo(py: Python<'_>, step: f64) -> PyResult<Bound<'_, PyDict>> {
    let r = semi_infinite_gap_demo(step).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("primal", r.primal)?;
    d.set_item("dual", r.dual)?;
    d.set_item("gap", r.gap)?;
    Ok(d)
}

/// Baselines of a config file, as printed by the CLI.
#[pyfunction]
fn baselines(py: Python<'_>, config: PathBuf) -> PyResult<Bound<'_, PyDict>> {
    let cfg = ExperimentConfig::from_file(&config).map_err(to_py)?;
    lines_dict(py, &baseline_lines(&cfg).map_err(to_py)?)
}

/// Runs a config file and returns the paths written.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None))]
fn run(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Vec<PathBuf>> {
    let cfg = ExperimentConfig::from_file(&config).map_err(to_py)?;
    let base = output_dir
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone());
    let dir = base.join(&cfg.name);
    let outcome = py.detach(|| run_experiment(&cfg, &dir)).map_err(to_py)?;
    Ok(outcome.files)
}

/// Trace CSV as a dict of columns plus `tau`, `total_reward` and `commitment`.
#[pyfunction]
fn read_trace(py: Python<'_>, path: PathBuf) -> PyResult<Bound<'_, PyDict>> {
    let trace = read_trace_csv(&path).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("tau", trace.tau)?;
    d.set_item("total_reward", trace.total_reward)?;
    d.set_item("commitment", trace.commitment)?;
    d.set_item("t", trace.rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
    d.set_item("action", trace.rows.iter().map(|r| r.action).collect::<Vec<_>>())?;
    d.set_item("reward", trace.rows.iter().map(|r| r.reward).collect::<Vec<_>>())?;
    d.set_item("costs", trace.rows.iter().map(|r| r.costs.clone()).collect::<Vec<_>>())?;
    d.set_item("lambda", trace.rows.iter().map(|r| r.lambda.clone()).collect::<Vec<_>>())?;
    d.set_item("remaining", trace.rows.iter().map(|r| r.remaining.clone()).collect::<Vec<_>>())?;
    d.set_item("void_forced", trace.rows.iter().map(|r| r.void_forced).collect::<Vec<_>>())?;
    Ok(d)
}

/// Good-edge replay of an auction stream: `(checks, violations, node_regret_violations)`.
#[pyfunction]
fn good_edges(py: Python<'_>, path: PathBuf) -> PyResult<(usize, usize, usize)> {
    py.detach(|| {
        let stream = read_auction_csv(&path)?;
        let tree = PolicyTree::build(&stream.tree)?;
        let r = good_edge_check(&tree, &stream.rounds)?;
        Ok((r.checks, r.violations.len(), r.regret_violations().count()))
    })
    .map_err(to_py)
}

#[pymodule(name = "mixknap")]
fn mixknap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(opt_lp, m)?)?;
    m.add_function(wrap_pyfunction!(best_response, m)?)?;
    m.add_function(wrap_pyfunction!(gap_demo, m)?)?;
    m.add_function(wrap_pyfunction!(baselines, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(read_trace, m)?)?;
    m.add_function(wrap_pyfunction!(good_edges, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
