//! Python bindings. Vectors cross the boundary as lists of floats; campaign
//! summaries and metrics as plain dicts decoded from their JSON form.

use std::path::PathBuf;

use nalgebra::{DVector, Vector3, Vector4};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use orbital_arm::attitude::UnitQuaternion;
use orbital_arm::config::RunConfig;
use orbital_arm::dynamics::{self, GeneralizedForce, ModelPair, SystemState};
use orbital_arm::experiments::campaign::{mc_attitude, mc_uncertainty};
use orbital_arm::experiments::{run_episode, Controller};
use orbital_arm::kinematics::SpacecraftModel;
use orbital_arm::ntsmc::{self, AdaptiveState};
use orbital_arm::reference::Reference;
use orbital_arm::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Dimension { .. } | Error::Planning(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vec3(v: Vec<f64>, what: &str) -> PyResult<Vector3<f64>> {
    <[f64; 3]>::try_from(v)
        .map(Vector3::from)
        .map_err(|v| PyValueError::new_err(format!("{what} needs 3 components, got {}", v.len())))
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Full plant state: base CoM position, scalar-first attitude quaternion,
/// joint angles, and their inertial-frame rates.
#[pyclass(module = "orbital_arm", name = "State", from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: SystemState,
}

#[pymethods]
impl PyState {
    #[new]
    #[pyo3(signature = (p_b, q_b, q, v_b=None, omega_b=None, qdot=None))]
    fn new(
        p_b: Vec<f64>,
        q_b: Vec<f64>,
        q: Vec<f64>,
        v_b: Option<Vec<f64>>,
        omega_b: Option<Vec<f64>>,
        qdot: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let n = q.len();
        let quat = <[f64; 4]>::try_from(q_b)
            .map_err(|_| PyValueError::new_err("q_b needs 4 components (eta, x, y, z)"))?;
        let qdot = qdot.unwrap_or_else(|| vec![0.0; n]);
        if qdot.len() != n {
            return Err(PyValueError::new_err(format!("qdot has {} entries for {n} joints", qdot.len())));
        }
        Ok(Self {
            inner: SystemState {
                p_b: vec3(p_b, "p_b")?,
                q_b: UnitQuaternion::from_vector4(&Vector4::from(quat)).normalized(),
                q: DVector::from_vec(q),
                v_b: vec3(v_b.unwrap_or(vec![0.0; 3]), "v_b")?,
                omega_b: vec3(omega_b.unwrap_or(vec![0.0; 3]), "omega_b")?,
                qdot: DVector::from_vec(qdot),
            },
        })
    }

    /// Base at the origin, identity attitude, arm at zero, at rest.
    #[staticmethod]
    fn rest(n: usize) -> Self {
        Self { inner: SystemState::rest(n) }
    }

    #[getter]
    fn p_b(&self) -> Vec<f64> {
        self.inner.p_b.as_slice().to_vec()
    }

    #[getter]
    fn q_b(&self) -> Vec<f64> {
        self.inner.q_b.as_vector4().as_slice().to_vec()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.as_slice().to_vec()
    }

    #[getter]
    fn v_b(&self) -> Vec<f64> {
        self.inner.v_b.as_slice().to_vec()
    }

    #[getter]
    fn omega_b(&self) -> Vec<f64> {
        self.inner.omega_b.as_slice().to_vec()
    }

    #[getter]
    fn qdot(&self) -> Vec<f64> {
        self.inner.qdot.as_slice().to_vec()
    }

    /// `[v_b, ω_b, q̇]`.
    fn velocity(&self) -> Vec<f64> {
        self.inner.velocity().as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("State(p_b={:?}, q_b={:?}, q={:?})", self.p_b(), self.q_b(), self.q())
    }
}

/// Satellite and manipulator inertial/kinematic parameters.
#[pyclass(module = "orbital_arm", name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: SpacecraftModel,
}

#[pymethods]
impl PyModel {
    /// The default seven-joint arm on the reference satellite.
    #[new]
    fn new() -> Self {
        Self { inner: SpacecraftModel::default() }
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn base_mass(&self) -> f64 {
        self.inner.base_mass
    }

    fn mass_matrix(&self, state: &PyState) -> PyResult<Vec<Vec<f64>>> {
        let m = dynamics::mass_matrix(&self.inner, &state.inner).map_err(to_py)?;
        Ok(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn kinetic_energy(&self, state: &PyState) -> PyResult<f64> {
        dynamics::kinetic_energy(&self.inner, &state.inner).map_err(to_py)
    }

    /// `ẍ` for the generalized force `[f_b, τ_b, τ]`.
    fn forward_dynamics(&self, state: &PyState, force: Vec<f64>) -> PyResult<Vec<f64>> {
        let f = GeneralizedForce::from_vector(&DVector::from_vec(force)).map_err(to_py)?;
        let a = dynamics::forward_dynamics(&self.inner, &state.inner, &f).map_err(to_py)?;
        Ok(a.as_slice().to_vec())
    }

    /// One RK4 step with the force held constant.
    fn step(&self, state: &PyState, force: Vec<f64>, dt: f64) -> PyResult<PyState> {
        let f = GeneralizedForce::from_vector(&DVector::from_vec(force)).map_err(to_py)?;
        let inner = dynamics::step(&self.inner, &state.inner, &f, dt).map_err(to_py)?;
        Ok(PyState { inner })
    }
}

/// A complete run configuration, as read from TOML.
#[pyclass(module = "orbital_arm", name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Loads `path`, or the defaults when omitted.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let inner = match path {
            Some(p) => RunConfig::load(&p).map_err(to_py)?,
            None => RunConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RunConfig::from_toml(text).map_err(to_py)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    /// Raises `ValueError` naming the offending field.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn model(&self) -> PyModel {
        PyModel { inner: self.inner.model.clone() }
    }

    /// Initial plant state of the configured scenario.
    fn initial_state(&self) -> PyResult<PyState> {
        let setup = self.inner.setup();
        let reference = Reference::build(&setup.scenario, &setup.model).map_err(to_py)?;
        Ok(PyState { inner: reference.initial_state(&setup.scenario) })
    }
}

fn controller(cfg: &RunConfig, name: &str) -> PyResult<Controller> {
    let setup = cfg.setup();
    match name {
        "ntsmc" => Ok(Controller::Ntsmc(setup.gains)),
        "pd" => Ok(Controller::Pd(setup.pd_gains)),
        "euler" => Ok(Controller::Euler(setup.euler_gains)),
        other => Err(PyValueError::new_err(format!("unknown controller '{other}' (ntsmc, pd, euler)"))),
    }
}

/// Runs one closed-loop episode. Returns a dict with `status`, `final_state`
/// and `telemetry` (one list per column, every `stride`-th step).
#[pyfunction]
#[pyo3(signature = (config, controller="ntsmc", stride=1))]
fn simulate<'py>(py: Python<'py>, config: &PyConfig, controller: &str, stride: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    cfg.validate().map_err(to_py)?;
    let law = self::controller(&cfg, controller)?;
    let outcome = py
        .detach(|| {
            let setup = cfg.setup();
            let reference = Reference::build(&setup.scenario, &setup.model)?;
            let initial = reference.initial_state(&setup.scenario);
            let disturbance = setup.disturbance.build(setup.model.dof(), 0);
            let pair = ModelPair::exact(setup.model);
            run_episode(&pair, &law, &reference, &initial, &disturbance, &cfg.episode_config())
        })
        .map_err(to_py)?;

    let columns = PyDict::new(py);
    let rows: Vec<_> = outcome.telemetry.iter().step_by(stride.max(1)).collect();
    if let Some(first) = rows.first() {
        let serde_json::Value::Object(keys) = serde_json::to_value(first).map_err(|e| PyRuntimeError::new_err(e.to_string()))?
        else {
            unreachable!("telemetry records serialize to objects")
        };
        let values: Vec<serde_json::Map<String, serde_json::Value>> = rows
            .iter()
            .map(|r| match serde_json::to_value(r) {
                Ok(serde_json::Value::Object(m)) => m,
                _ => unreachable!("telemetry records serialize to objects"),
            })
            .collect();
        for key in keys.keys() {
            let col: Vec<f64> = values.iter().map(|m| m[key].as_f64().unwrap_or(f64::NAN)).collect();
            columns.set_item(key, col)?;
        }
    }
    let out = PyDict::new(py);
    out.set_item("status", json_to_py(py, &outcome.status)?)?;
    out.set_item("energy", outcome.energy())?;
    out.set_item("torque_integral", outcome.torque_integral())?;
    out.set_item("final_state", PyState { inner: outcome.final_state })?;
    out.set_item("telemetry", columns)?;
    Ok(out)
}

/// The proposed control law at time `t` of the configured reference, with the
/// adaptive gain at its initial value. Returns `(force, s)`.
#[pyfunction]
fn control(config: &PyConfig, state: &PyState, t: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let setup = config.inner.setup();
    let reference = Reference::build(&setup.scenario, &setup.model).map_err(to_py)?;
    let adaptive = AdaptiveState::from_gains(&setup.gains);
    let (u, diag) =
        ntsmc::control(&setup.model, &state.inner, &reference.sample(t), &setup.gains, &adaptive).map_err(to_py)?;
    Ok((u.to_vector().as_slice().to_vec(), diag.s.as_slice().to_vec()))
}

/// Runs a Monte-Carlo campaign (`"attitude"` or `"uncertainty"`) and returns
/// its summary. Per-run telemetry is written under `out` when given.
#[pyfunction]
#[pyo3(signature = (config, campaign, runs=None, seed=None, jobs=1, out=None))]
fn mc<'py>(
    py: Python<'py>,
    config: &PyConfig,
    campaign: &str,
    runs: Option<usize>,
    seed: Option<u64>,
    jobs: usize,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = config.inner.clone();
    if let Some(r) = runs {
        cfg.mc.runs = r;
    }
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    cfg.mc.validate("mc").map_err(to_py)?;
    let setup = cfg.setup();
    let dir = out.as_deref();
    match campaign {
        "attitude" => {
            let s = py.detach(|| mc_attitude(&setup, &cfg.mc, jobs, dir)).map_err(to_py)?;
            json_to_py(py, &s)
        }
        "uncertainty" => {
            let s = py.detach(|| mc_uncertainty(&setup, &cfg.mc, jobs, dir)).map_err(to_py)?;
            json_to_py(py, &s)
        }
        other => Err(PyValueError::new_err(format!("unknown campaign '{other}' (attitude, uncertainty)"))),
    }
}

#[pymodule]
#[pyo3(name = "orbital_arm")]
fn orbital_arm_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(control, m)?)?;
    m.add_function(wrap_pyfunction!(mc, m)?)?;
    Ok(())
}
