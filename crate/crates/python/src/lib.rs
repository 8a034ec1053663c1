//! Python bindings: grids, parameters, states, the coupled step, energy
//! bookkeeping, distances and whole configured runs.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nsch_core::cahn_hilliard::CHStepConfig;
use nsch_core::diagnostics;
use nsch_core::error::NschError;
use nsch_core::grid;
use nsch_core::io;
use nsch_core::io::init::{spinodal_phase, swirl};
use nsch_core::physics::{self, PhysParams};
use nsch_core::stepper;

create_exception!(nsch, NschException, PyException);
create_exception!(nsch, HypothesisError, NschException);

fn err(e: NschError) -> PyErr {
    match e {
        NschError::Hypothesis { .. } | NschError::Config { .. } => {
            HypothesisError::new_err(e.to_string())
        }
        _ => NschException::new_err(e.to_string()),
    }
}

#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid {
    inner: grid::Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny, lx = 1.0, ly = 1.0))]
    fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> PyResult<Self> {
        Ok(Self {
            inner: grid::Grid::new(nx, ny, lx, ly).map_err(err)?,
        })
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny
    }

    #[getter]
    fn hx(&self) -> f64 {
        self.inner.hx
    }

    #[getter]
    fn hy(&self) -> f64 {
        self.inner.hy
    }

    fn __repr__(&self) -> String {
        format!("Grid({})", self.inner.describe())
    }
}

#[pyclass(name = "Params", skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyParams {
    inner: PhysParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = PhysParams::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let value: f64 = v.extract()?;
                let slot = match key.as_str() {
                    "a" => &mut p.a,
                    "b" => &mut p.b,
                    "chi" => &mut p.chi,
                    "alpha" => &mut p.alpha,
                    "c0" => &mut p.c0,
                    "theta" => &mut p.theta,
                    "theta0" => &mut p.theta0,
                    "eta1" => &mut p.eta1,
                    "eta2" => &mut p.eta2,
                    "m1" => &mut p.m1,
                    "m2" => &mut p.m2,
                    _ => {
                        return Err(pyo3::exceptions::PyTypeError::new_err(format!(
                            "unknown parameter {key}"
                        )))
                    }
                };
                *slot = value;
            }
        }
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let d = PyDict::new(py);
        for (k, v) in [
            ("a", p.a),
            ("b", p.b),
            ("chi", p.chi),
            ("alpha", p.alpha),
            ("c0", p.c0),
            ("theta", p.theta),
            ("theta0", p.theta0),
            ("eta1", p.eta1),
            ("eta2", p.eta2),
            ("m1", p.m1),
            ("m2", p.m2),
        ] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Potential value and derivatives at `r`.
    fn psi(&self, r: f64) -> PyResult<(f64, f64, f64)> {
        let e = physics::psi(r, &self.inner).map_err(err)?;
        Ok((e.value, e.first, e.second))
    }

    fn psi_min(&self) -> f64 {
        physics::psi_min(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Params({:?})", self.inner)
    }
}

#[pyclass(name = "State", skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: stepper::State,
}

#[pymethods]
impl PyState {
    /// Builds a state from flat arrays in the library layout; `u` and `w`
    /// hold all faces including the (zero) wall faces.
    #[new]
    #[pyo3(signature = (grid, params, phi, sigma, u = None, w = None, t = 0.0))]
    fn new(
        grid: &PyGrid,
        params: &PyParams,
        phi: Vec<f64>,
        sigma: Vec<f64>,
        u: Option<Vec<f64>>,
        w: Option<Vec<f64>>,
        t: f64,
    ) -> PyResult<Self> {
        let g = grid.inner;
        let v = grid::VectorField::from_values(
            g,
            u.unwrap_or_else(|| vec![0.0; g.u_len()]),
            w.unwrap_or_else(|| vec![0.0; g.w_len()]),
        )
        .map_err(err)?;
        let phi = grid::ScalarField::from_values(g, phi).map_err(err)?;
        let sigma = grid::ScalarField::from_values(g, sigma).map_err(err)?;
        let s = stepper::State::new(t, v, phi, sigma, &params.inner).map_err(err)?;
        s.check(&params.inner).map_err(err)?;
        Ok(Self { inner: s })
    }

    /// Seeded noise about `c0`, constant nutrient `m2 / 2` and an optional
    /// swirl.
    #[staticmethod]
    #[pyo3(signature = (grid, params, seed = 0, amplitude = 0.05, stream_amplitude = 0.0))]
    fn spinodal(
        grid: &PyGrid,
        params: &PyParams,
        seed: u64,
        amplitude: f64,
        stream_amplitude: f64,
    ) -> PyResult<Self> {
        let g = grid.inner;
        let p = &params.inner;
        let phi = spinodal_phase(g, p.c0, amplitude, seed);
        let sigma = grid::ScalarField::constant(g, 0.5 * p.m2);
        let s = stepper::State::new(0.0, swirl(g, stream_amplitude), phi, sigma, p).map_err(err)?;
        s.check(p).map_err(err)?;
        Ok(Self { inner: s })
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid {
            inner: self.inner.grid(),
        }
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi.values.clone()
    }

    #[getter]
    fn sigma(&self) -> Vec<f64> {
        self.inner.sigma.values.clone()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu.values.clone()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.values.clone()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.v.u.clone()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.v.w.clone()
    }

    fn mean_phi(&self) -> f64 {
        self.inner.phi.mean()
    }

    fn mean_sigma(&self) -> f64 {
        self.inner.sigma.mean()
    }

    fn max_abs_phi(&self) -> f64 {
        self.inner.phi.max_abs()
    }

    fn div_residual(&self) -> f64 {
        stepper::div_residual(&self.inner)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::write_snapshot(&self.inner, path).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf, params: &PyParams) -> PyResult<Self> {
        Ok(Self {
            inner: io::read_snapshot(path, &params.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "State(t={}, grid={}, mean_phi={:.6}, max|phi|={:.6})",
            self.inner.t,
            self.inner.grid().describe(),
            self.inner.phi.mean(),
            self.inner.phi.max_abs()
        )
    }
}

fn step_config(tau: f64, newton_tol: Option<f64>, newton_max: Option<usize>) -> CHStepConfig {
    let mut cfg = CHStepConfig::new(tau);
    if let Some(t) = newton_tol {
        cfg.newton_tol = t;
    }
    if let Some(m) = newton_max {
        cfg.newton_max = m;
    }
    cfg
}

/// One coupled step; returns the new state and a dict of solver statistics.
#[pyfunction]
#[pyo3(signature = (state, params, tau, newton_tol = None, newton_max = None))]
fn step<'py>(
    py: Python<'py>,
    state: &PyState,
    params: &PyParams,
    tau: f64,
    newton_tol: Option<f64>,
    newton_max: Option<usize>,
) -> PyResult<(PyState, Bound<'py, PyDict>)> {
    let cfg = step_config(tau, newton_tol, newton_max);
    let (next, info) = stepper::step(&state.inner, &params.inner, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("newton_iters", info.newton_iters)?;
    d.set_item("mass_residual", info.mass_residual)?;
    d.set_item("sigma_drift", info.sigma_drift)?;
    d.set_item("div_residual", info.div_residual)?;
    d.set_item("momentum_iters", info.momentum_iters)?;
    Ok((PyState { inner: next }, d))
}

/// Advances `steps` times and returns the final state.
#[pyfunction]
#[pyo3(signature = (state, params, tau, steps, newton_tol = None, newton_max = None))]
fn integrate(
    py: Python<'_>,
    state: &PyState,
    params: &PyParams,
    tau: f64,
    steps: usize,
    newton_tol: Option<f64>,
    newton_max: Option<usize>,
) -> PyResult<PyState> {
    let cfg = step_config(tau, newton_tol, newton_max);
    let s = state.inner.clone();
    let p = params.inner;
    let out = py
        .detach(move || stepper::integrate(&s, &p, &cfg, steps, |_, _| Ok(())))
        .map_err(err)?;
    Ok(PyState { inner: out })
}

/// Energy, dissipation, source, modified energy and the first-order
/// functional of a state.
#[pyfunction]
fn energy<'py>(
    py: Python<'py>,
    state: &PyState,
    params: &PyParams,
) -> PyResult<Bound<'py, PyDict>> {
    let e = stepper::energy(&state.inner, &params.inner);
    let d = PyDict::new(py);
    d.set_item("t", e.t)?;
    d.set_item("E", e.e)?;
    d.set_item("D", e.d)?;
    d.set_item("source", e.source)?;
    d.set_item("E_tilde", e.e_tilde)?;
    d.set_item("lambda1", e.lambda1)?;
    Ok(d)
}

/// Energy-law residual between consecutive states.
#[pyfunction]
fn bel_residual(prev: &PyState, next: &PyState, params: &PyParams, tau: f64) -> f64 {
    stepper::bel_audit(
        &stepper::energy(&prev.inner, &params.inner),
        &stepper::energy(&next.inner, &params.inner),
        tau,
    )
}

#[pyfunction]
fn bel_tolerance(tau: f64, grid: &PyGrid) -> f64 {
    stepper::bel_tolerance(tau, &grid.inner)
}

#[pyfunction]
fn phase_distance(a: &PyState, b: &PyState) -> PyResult<f64> {
    Ok(diagnostics::phase_distance(&a.inner, &b.inner)
        .map_err(err)?
        .d)
}

/// Returns `(w, [velocity, phase, nutrient, mean])`.
#[pyfunction]
fn weak_distance(a: &PyState, b: &PyState) -> PyResult<(f64, [f64; 4])> {
    let w = diagnostics::weak_distance(&a.inner, &b.inner).map_err(err)?;
    Ok((w.w, w.components))
}

#[pyfunction]
#[pyo3(signature = (states, t_min = 0.0))]
fn separation_gap(states: Vec<PyRef<'_, PyState>>, t_min: f64) -> PyResult<f64> {
    let states: Vec<stepper::State> = states.iter().map(|s| s.inner.clone()).collect();
    diagnostics::separation_gap(&states, t_min).map_err(err)
}

/// Returns `(J, omega, rms_log_residual, points)`.
#[pyfunction]
fn fit_exponential(times: Vec<f64>, dists: Vec<f64>) -> PyResult<(f64, f64, f64, usize)> {
    let f = diagnostics::fit_exponential_attraction(&times, &dists).map_err(err)?;
    Ok((f.j, f.omega, f.rms_log_residual, f.points))
}

#[pyfunction]
fn smoothing_ratio(
    py: Python<'_>,
    state: &PyState,
    params: &PyParams,
    size: f64,
    t: f64,
    tau: f64,
) -> PyResult<f64> {
    let s = state.inner.clone();
    let p = params.inner;
    py.detach(move || diagnostics::smoothing_ratio(&s, size, t, &p, &CHStepConfig::new(tau)))
        .map_err(err)
}

/// Runs a TOML configuration and returns a summary dict.
#[pyfunction]
#[pyo3(signature = (config, output = None))]
fn run<'py>(
    py: Python<'py>,
    config: PathBuf,
    output: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = io::load_config(&config).map_err(err)?;
    let report = py
        .detach(move || match output {
            Some(dir) => io::run_in(&cfg, &dir),
            None => io::run(&cfg),
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("output_dir", report.output_dir.clone())?;
    d.set_item("steps", report.steps)?;
    d.set_item("passed", report.passed())?;
    let audits = PyDict::new(py);
    for a in &report.audits {
        audits.set_item(&a.name, (a.passed, a.worst, a.tolerance))?;
    }
    d.set_item("audits", audits)?;
    d.set_item(
        "final_state",
        PyState {
            inner: report.final_state,
        },
    )?;
    Ok(d)
}

/// Parses and validates a configuration, returning its initial state.
#[pyfunction]
fn initial_state(config: PathBuf) -> PyResult<(PyState, PyParams)> {
    let cfg = io::load_config(&config).map_err(err)?;
    let s = io::init::initial_state(&cfg).map_err(err)?;
    Ok((PyState { inner: s }, PyParams { inner: cfg.params }))
}

#[pymodule]
fn nsch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NschError", m.py().get_type::<NschException>())?;
    m.add("HypothesisError", m.py().get_type::<HypothesisError>())?;
    m.add("C_AUDIT", stepper::C_AUDIT)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(step, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(bel_residual, m)?)?;
    m.add_function(wrap_pyfunction!(bel_tolerance, m)?)?;
    m.add_function(wrap_pyfunction!(phase_distance, m)?)?;
    m.add_function(wrap_pyfunction!(weak_distance, m)?)?;
    m.add_function(wrap_pyfunction!(separation_gap, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(smoothing_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(initial_state, m)?)?;
    Ok(())
}
