//! Python bindings: configs go in as TOML text plus `key=value` overrides,
//! results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use pythonize::pythonize;

use stochflock::config::RunConfig;
use stochflock::constitutive::KernelPair;
use stochflock::harness::sinks::Command;
use stochflock::particles::{run_particles, ParticleState};
use stochflock::runner::{prepare, run_ensemble, run_single, summarize};
use stochflock::torus::{self, Field, TorusGrid};
use stochflock::Error;

fn py_err(e: Error) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn load(config: &str, overrides: Option<Vec<String>>) -> PyResult<RunConfig> {
    RunConfig::from_toml_with_overrides(config, &overrides.unwrap_or_default()).map_err(py_err)
}

fn scalar_field(dim: usize, n: usize, values: Vec<f64>) -> PyResult<Field> {
    let g = TorusGrid::new(dim, n).map_err(py_err)?;
    Field::new(&g, 1, values).map_err(py_err)
}

/// The full default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    RunConfig::default().to_toml_string()
}

/// Hash identifying the semantic content of a configuration.
#[pyfunction]
#[pyo3(signature = (config = "", overrides = None))]
fn config_hash(config: &str, overrides: Option<Vec<String>>) -> PyResult<String> {
    Ok(load(config, overrides)?.hash())
}

/// One path; returns the per-step time series and the final state.
#[pyfunction]
#[pyo3(signature = (config = "", overrides = None))]
fn run<'py>(py: Python<'py>, config: &str, overrides: Option<Vec<String>>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config, overrides)?;
    let (params, traj) = py.detach(|| run_single(&cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    let series = |f: &dyn Fn(&stochflock::stepper::StepRecord) -> f64| traj.records.iter().map(f).collect::<Vec<_>>();
    out.set_item("time", series(&|r| r.time))?;
    out.set_item("mass", series(&|r| r.mass))?;
    out.set_item("energy", series(&|r| r.energy.total_energy()))?;
    out.set_item("energy_residual", series(&|r| r.energy.residual))?;
    out.set_item("pressure_defect", series(&|r| r.pressure.defect))?;
    out.set_item("entropy", series(&|r| r.entropy))?;
    let last = traj.final_snapshot();
    out.set_item("rho", last.rho.values().to_vec())?;
    out.set_item("u", params.space.velocity(&last.u).values().to_vec())?;
    out.set_item("u_coefficients", last.u.clone())?;
    out.set_item("config_hash", cfg.hash())?;
    Ok(out)
}

/// Ensemble statistics over `paths` independent paths.
#[pyfunction]
#[pyo3(signature = (config = "", overrides = None, paths = 16, threads = None))]
fn ensemble<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Option<Vec<String>>,
    paths: usize,
    threads: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = load(config, overrides)?;
    let summary = py
        .detach(|| {
            let (params, s0) = prepare(&cfg)?;
            let trajs = run_ensemble(&params, &s0, cfg.seed, paths, threads)?;
            Ok(summarize(&trajs, &cfg.ensemble.moments))
        })
        .map_err(py_err)?;
    Ok(pythonize(py, &summary)?)
}

/// Runs a CLI command and writes its four output files into `out`;
/// returns whether every check in the report passed.
#[pyfunction]
#[pyo3(signature = (command, out, config = "", overrides = None, threads = None))]
fn execute(
    py: Python<'_>,
    command: &str,
    out: std::path::PathBuf,
    config: &str,
    overrides: Option<Vec<String>>,
    threads: Option<usize>,
) -> PyResult<bool> {
    let command = match command {
        "run" => Command::Run,
        "ensemble" => Command::Ensemble,
        "sweep" => Command::Sweep,
        "verify" => Command::Verify,
        "particles" => Command::Particles,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let mut cfg = load(config, overrides)?;
    cfg.output.dir = out;
    let outcome = py
        .detach(|| stochflock::harness::execute(command, &cfg, threads))
        .map_err(py_err)?;
    Ok(outcome.all_passed())
}

/// The invariant battery as a list of dicts.
#[pyfunction]
fn verify(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    let checks = py.detach(stochflock::harness::verify::run_battery);
    Ok(pythonize(py, &checks)?)
}

/// Grid node coordinates, one list per node.
#[pyfunction]
fn grid_points(dim: usize, n: usize) -> PyResult<Vec<Vec<f64>>> {
    let g = TorusGrid::new(dim, n).map_err(py_err)?;
    Ok((0..g.len()).map(|i| g.point(i)[..dim].to_vec()).collect())
}

/// Zero-mean solution of `Δφ = f - ⨍f` on grid values.
#[pyfunction]
fn inv_laplacian(dim: usize, n: usize, values: Vec<f64>) -> PyResult<Vec<f64>> {
    let f = scalar_field(dim, n, values)?;
    Ok(torus::inv_laplacian(&f).map_err(py_err)?.values().to_vec())
}

/// Periodic convolution `∫ k(x - y) f(y) dy` on grid values.
#[pyfunction]
fn convolve(dim: usize, n: usize, f: Vec<f64>, kernel: Vec<f64>) -> PyResult<Vec<f64>> {
    let (f, k) = (scalar_field(dim, n, f)?, scalar_field(dim, n, kernel)?);
    Ok(torus::convolve(&f, &k).map_err(py_err)?.values().to_vec())
}

/// Velocity variance after every step of a noiseless particle run.
#[pyfunction]
#[pyo3(signature = (dim = 1, count = 256, steps = 100, h = 0.01, speed = 0.5, seed = 0, n = 32))]
fn particles(dim: usize, count: usize, steps: usize, h: f64, speed: f64, seed: u64, n: usize) -> PyResult<Vec<f64>> {
    let g = TorusGrid::new(dim, n).map_err(py_err)?;
    let kernels = KernelPair::default_presets(&g);
    let ps = ParticleState::random(dim, count, speed, seed).map_err(py_err)?;
    Ok(run_particles(&ps, h, steps, &kernels, None).1)
}

#[pymodule]
fn stochflock_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(execute, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(grid_points, m)?)?;
    m.add_function(wrap_pyfunction!(inv_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(convolve, m)?)?;
    m.add_function(wrap_pyfunction!(particles, m)?)?;
    Ok(())
}
