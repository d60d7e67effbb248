//! Python bindings: scenarios, design evaluation, the placement environment,
//! unit-cell tests, baselines, training and SVG rendering.

use std::sync::Arc;

use mechrl_core::agent::{self, TrainConfig};
use mechrl_core::baseline::{self, Policy};
use mechrl_core::env::{self, EpisodeState, EvalCache};
use mechrl_core::mechanisms::{self, builtin};
use mechrl_core::render::{render_svg, RenderOptions};
use mechrl_core::{CellKind, Error};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_numeric() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn kinds(actions: &[usize]) -> PyResult<Vec<CellKind>> {
    actions.iter().map(|&a| CellKind::from_action(a).map_err(py_err)).collect()
}

/// Action index of a two-letter cell code such as `"SD"` or `"FB"`.
#[pyfunction]
fn action_of(code: &str) -> PyResult<usize> {
    let kind: CellKind = code.parse().map_err(py_err)?;
    kind.action_index().ok_or_else(|| PyValueError::new_err(format!("{code} is not an action")))
}

#[pyfunction]
fn code_of(action: usize) -> PyResult<String> {
    Ok(CellKind::from_action(action).map_err(py_err)?.code())
}

#[pyfunction]
#[pyo3(signature = (ux, uy, c = mechanisms::LATCH_C))]
fn latch_reward(ux: f64, uy: f64, c: f64) -> f64 {
    mechanisms::latch_reward(ux, uy, c)
}

#[pyfunction]
#[pyo3(signature = (theta, disconnections, c1 = mechanisms::GRIPPER_C1, c2 = 1.0))]
fn gripper_reward(theta: f64, disconnections: usize, c1: f64, c2: f64) -> f64 {
    mechanisms::gripper_reward(theta, disconnections, c1, c2)
}

#[pyclass(name = "Evaluation", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyEvaluation {
    reward: f64,
    ux: f64,
    uy: f64,
    theta: f64,
    disconnections: usize,
    singular: bool,
}

impl From<mechanisms::Evaluation> for PyEvaluation {
    fn from(e: mechanisms::Evaluation) -> Self {
        Self { reward: e.reward, ux: e.ux, uy: e.uy, theta: e.theta, disconnections: e.disconnections, singular: e.singular }
    }
}

#[pymethods]
impl PyEvaluation {
    fn __repr__(&self) -> String {
        format!(
            "Evaluation(reward={}, ux={}, uy={}, theta={}, disconnections={}, singular={})",
            self.reward,
            self.ux,
            self.uy,
            self.theta,
            self.disconnections,
            if self.singular { "True" } else { "False" }
        )
    }
}

#[pyclass(name = "Scenario", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Arc<mechanisms::Scenario>,
}

#[pymethods]
impl PyScenario {
    /// One of `latch-unguided`, `latch-guided`, `gripper`,
    /// `gripper-unpenalized`, `toy-latch`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        builtin(name).map(|s| Self { inner: Arc::new(s) }).ok_or_else(|| PyValueError::new_err(format!("unknown scenario {name:?}")))
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        mechanisms::BUILTIN_SCENARIOS.to_vec()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(mechanisms::Scenario::from_json(text).map_err(py_err)?) })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// Number of design slots.
    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    /// Grid rows as cell codes with every design slot filled by `actions`
    /// (row-major slot order).
    fn design_codes(&self, actions: Vec<usize>) -> PyResult<Vec<String>> {
        Ok(self.inner.design(&kinds(&actions)?).map_err(py_err)?.code_rows())
    }

    /// Evaluates a design given as actions in row-major slot order.
    fn evaluate(&self, actions: Vec<usize>) -> PyResult<PyEvaluation> {
        Ok(self.inner.evaluate_kinds(&kinds(&actions)?).map_err(py_err)?.into())
    }

    /// SVG of the design and its deformed shape.
    #[pyo3(signature = (actions, scale = None))]
    fn render(&self, actions: Vec<usize>, scale: Option<f64>) -> PyResult<String> {
        let grid = self.inner.design(&kinds(&actions)?).map_err(py_err)?;
        let a = self.inner.analyse(&grid).map_err(py_err)?;
        Ok(render_svg(&a.model, Some(&a.field), &RenderOptions { scale, ..RenderOptions::default() }))
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, horizon={})", self.inner.name, self.inner.horizon())
    }
}

/// Sequential placement environment holding its own episode state.
#[pyclass(name = "Env")]
struct PyEnv {
    env: env::Env,
    state: EpisodeState,
}

#[pymethods]
impl PyEnv {
    #[new]
    fn new(scenario: &PyScenario) -> PyResult<Self> {
        let s = scenario.inner.clone();
        let tiling = s.tiling;
        let env = env::Env::new(s, tiling).map_err(py_err)?.with_cache(Arc::new(EvalCache::in_memory()));
        let state = env.reset();
        Ok(Self { env, state })
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.env.horizon()
    }

    #[getter]
    fn observation_size(&self) -> usize {
        self.env.state_len()
    }

    /// Design-slot index filled at each step.
    #[getter]
    fn order(&self) -> Vec<usize> {
        self.env.order().order.clone()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = self.env.reset();
        self.env.encode(&self.state)
    }

    /// Returns `(observation, reward, done)`.
    fn step(&mut self, action: usize) -> PyResult<(Vec<f64>, f64, bool)> {
        let (next, reward, done) = self.env.step(&self.state, action).map_err(py_err)?;
        self.state = next;
        Ok((self.env.encode(&self.state), reward, done))
    }

    /// Actions placed so far, in tiling order.
    fn placements(&self) -> Vec<u8> {
        self.state.prefix()
    }

    /// Terminal design as actions in row-major slot order.
    fn slot_actions(&self) -> PyResult<Vec<u8>> {
        self.env.slot_actions(&self.state).map_err(py_err)
    }

    fn evaluation(&self) -> PyResult<PyEvaluation> {
        Ok(self.env.evaluate_terminal(&self.state).map_err(py_err)?.into())
    }
}

/// Responses of a standalone cell: one dict per load case with `load`,
/// `ux`, `uy`, `magnitude` and `peak`.
#[pyfunction]
#[pyo3(signature = (code, params_json = None))]
fn cell_load_tests<'py>(py: Python<'py>, code: &str, params_json: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kind: CellKind = code.parse().map_err(py_err)?;
    let params = match params_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => mechrl_core::CellParams::default(),
    };
    mechanisms::cell_load_tests(kind, &params)
        .map_err(py_err)?
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("load", r.load.name())?;
            d.set_item("ux", r.ux)?;
            d.set_item("uy", r.uy)?;
            d.set_item("magnitude", r.magnitude)?;
            d.set_item("peak", r.peak)?;
            Ok(d)
        })
        .collect()
}

/// `n` rollouts of the `random` or `greedy` policy; returns a dict with
/// `rewards`, `mean`, `max` and `best_actions`.
#[pyfunction]
#[pyo3(signature = (scenario, policy = "random", n = 1000, seed = 0))]
fn run_baseline<'py>(py: Python<'py>, scenario: &PyScenario, policy: &str, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let policy: Policy = policy.parse().map_err(py_err)?;
    let s = scenario.inner.clone();
    let tiling = s.tiling;
    let env = env::Env::new(s, tiling).map_err(py_err)?.with_cache(Arc::new(EvalCache::in_memory()));
    let report = py.detach(|| baseline::run_baseline(&env, policy, n, seed)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("rewards", report.rollouts.iter().map(|r| r.evaluation.reward).collect::<Vec<_>>())?;
    d.set_item("mean", report.mean)?;
    d.set_item("max", report.max)?;
    d.set_item("best_actions", report.rollouts[report.best].slot_actions.clone())?;
    Ok(d)
}

/// Trains the agent. `config` is a JSON object of training options
/// (defaults for anything omitted). Returns a dict with the learning curve
/// (`rewards`, `moving_avg`, `epsilon`, `disconnections`), `best_reward` and
/// `best_actions`.
#[pyfunction]
#[pyo3(signature = (scenario, config = "{}"))]
fn train<'py>(py: Python<'py>, scenario: &PyScenario, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let config: TrainConfig = serde_json::from_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let s = scenario.inner.clone();
    let tiling = s.tiling;
    let env = env::Env::new(s, tiling).map_err(py_err)?.with_cache(Arc::new(EvalCache::in_memory()));
    let outcome = py.detach(|| agent::train(env, config)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("rewards", outcome.curve.iter().map(|p| p.reward).collect::<Vec<_>>())?;
    d.set_item("moving_avg", outcome.curve.iter().map(|p| p.moving_avg).collect::<Vec<_>>())?;
    d.set_item("epsilon", outcome.curve.iter().map(|p| p.epsilon).collect::<Vec<_>>())?;
    d.set_item("disconnections", outcome.curve.iter().map(|p| p.disconnections).collect::<Vec<_>>())?;
    d.set_item("best_reward", outcome.best.as_ref().map(|b| b.evaluation.reward))?;
    d.set_item("best_actions", outcome.best.map(|b| b.slot_actions))?;
    Ok(d)
}

#[pymodule]
pub fn mechrl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyEvaluation>()?;
    m.add_class::<PyEnv>()?;
    m.add_function(wrap_pyfunction!(action_of, m)?)?;
    m.add_function(wrap_pyfunction!(code_of, m)?)?;
    m.add_function(wrap_pyfunction!(latch_reward, m)?)?;
    m.add_function(wrap_pyfunction!(gripper_reward, m)?)?;
    m.add_function(wrap_pyfunction!(cell_load_tests, m)?)?;
    m.add_function(wrap_pyfunction!(run_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add("ACTION_COUNT", mechrl_core::cells::ACTION_COUNT)?;
    Ok(())
}
