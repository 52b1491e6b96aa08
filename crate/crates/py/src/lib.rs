//! Python bindings: the racing environment, frozen policies, and track
//! tooling, with numpy arrays at the boundary.

use std::path::PathBuf;
use std::sync::Arc;

use numpy::{IntoPyArray, PyArray1, PyReadonlyArray1};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use slipstream::checkpoint::Checkpoint;
use slipstream::control::Action;
use slipstream::env::{EnvConfig, RandomizationRanges, RewardBreakdown, RewardMode};
use slipstream::net::{NetSpec, Policy as CorePolicy};
use slipstream::physics::Vec4;
use slipstream::track::{builtin_track, BuiltinTrack, Track};

fn to_py_err(e: slipstream::Error) -> PyErr {
    match e {
        slipstream::Error::Io(_) | slipstream::Error::Checkpoint(_) => {
            PyIOError::new_err(e.to_string())
        }
        slipstream::Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn reward_dict<'py>(py: Python<'py>, r: &RewardBreakdown) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pass", r.pass)?;
    d.set_item("lap", r.lap)?;
    d.set_item("cmd", r.cmd)?;
    d.set_item("crash", r.crash)?;
    d.set_item("progress", r.progress)?;
    d.set_item("overtake", r.overtake)?;
    d.set_item("total", r.total)?;
    Ok(d)
}

fn action_from_numpy(a: PyReadonlyArray1<f64>) -> PyResult<Action> {
    let slice = a.as_slice()?;
    if slice.len() != 4 {
        return Err(PyValueError::new_err(format!("action needs 4 entries, got {}", slice.len())));
    }
    Ok(Action(Vec4::new(slice[0], slice[1], slice[2], slice[3])))
}

/// Two-drone racing environment.
///
/// One `step` is a 50 Hz control tick over ten 500 Hz physics substeps.
/// Observations are 42-dimensional (45 on obstacle tracks).
#[pyclass]
struct RacingEnv {
    inner: slipstream::env::RacingEnv,
}

#[pymethods]
impl RacingEnv {
    #[new]
    #[pyo3(signature = (
        track="lemniscate",
        obstacles=false,
        reward_mode="sparse-competitive",
        episode_horizon=1200,
        randomize=true,
        spawn_entry=None,
        track_file=None,
    ))]
    fn new(
        track: &str,
        obstacles: bool,
        reward_mode: &str,
        episode_horizon: usize,
        randomize: bool,
        spawn_entry: Option<usize>,
        track_file: Option<PathBuf>,
    ) -> PyResult<Self> {
        let track = match track_file {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
                Track::load(&text, 0.08).map_err(to_py_err)?
            }
            None => {
                let which = BuiltinTrack::parse(track).map_err(to_py_err)?;
                builtin_track(which, obstacles)
            }
        };
        let mode = RewardMode::parse(reward_mode).map_err(to_py_err)?;
        let mut cfg = EnvConfig::new(mode);
        cfg.episode_horizon = episode_horizon;
        cfg.spawn_entry = spawn_entry;
        if !randomize {
            cfg.randomization = RandomizationRanges::none();
        }
        let inner = slipstream::env::RacingEnv::new(Arc::new(track), cfg).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Observation length: 42, or 45 with obstacles.
    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn multi_agent(&self) -> bool {
        self.inner.is_multi_agent()
    }

    #[getter]
    fn episode_over(&self) -> bool {
        self.inner.episode_over()
    }

    /// Reset and return both observations as (obs_ego, obs_adversary).
    fn reset<'py>(
        &mut self,
        py: Python<'py>,
        seed: u64,
    ) -> PyResult<(Bound<'py, PyArray1<f64>>, Bound<'py, PyArray1<f64>>)> {
        let [a, b] = self.inner.reset(seed).map_err(to_py_err)?;
        Ok((a.0.into_pyarray(py), b.0.into_pyarray(py)))
    }

    /// Advance one control tick.
    ///
    /// Returns ((obs_e, obs_a), (reward_e, reward_a), (done_e, done_a), info)
    /// where rewards are term-by-term dicts and info carries race events.
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        action_ego: PyReadonlyArray1<f64>,
        action_adv: PyReadonlyArray1<f64>,
    ) -> PyResult<(
        (Bound<'py, PyArray1<f64>>, Bound<'py, PyArray1<f64>>),
        (Bound<'py, PyDict>, Bound<'py, PyDict>),
        (bool, bool),
        Bound<'py, PyDict>,
    )> {
        let ego = action_from_numpy(action_ego)?;
        let adv = action_from_numpy(action_adv)?;
        let step = self.inner.step(&ego, &adv).map_err(to_py_err)?;
        let [oe, oa] = step.observations;
        let info = PyDict::new(py);
        let events = PyList::new(py, step.info.events.iter().map(|e| format!("{e:?}")))?;
        info.set_item("events", events)?;
        info.set_item("truncated", step.info.truncated)?;
        Ok((
            (oe.0.into_pyarray(py), oa.0.into_pyarray(py)),
            (reward_dict(py, &step.rewards[0])?, reward_dict(py, &step.rewards[1])?),
            (step.done[0], step.done[1]),
            info,
        ))
    }

    /// Race bookkeeping for one agent.
    fn status<'py>(&self, py: Python<'py>, agent: usize) -> PyResult<Bound<'py, PyDict>> {
        if agent >= 2 {
            return Err(PyValueError::new_err("agent must be 0 or 1"));
        }
        let s = self.inner.status(agent);
        let d = PyDict::new(py);
        d.set_item("next_seq_index", s.next_seq_index)?;
        d.set_item("gates_passed_total", s.gates_passed_total)?;
        d.set_item("laps_done", s.laps_done)?;
        d.set_item("crashed", s.crashed)?;
        d.set_item("finished", s.finished)?;
        Ok(d)
    }

    /// World position of one agent.
    fn position<'py>(&self, py: Python<'py>, agent: usize) -> PyResult<Bound<'py, PyArray1<f64>>> {
        if agent >= 2 {
            return Err(PyValueError::new_err("agent must be 0 or 1"));
        }
        let p = self.inner.state(agent).position;
        Ok(vec![p.x, p.y, p.z].into_pyarray(py))
    }
}

/// A frozen policy; `act` returns the deterministic (mean) action.
#[pyclass]
struct Policy {
    inner: CorePolicy,
}

#[pymethods]
impl Policy {
    /// Load the actor from a training checkpoint.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ck = Checkpoint::load(&path).map_err(to_py_err)?;
        Ok(Self { inner: ck.actor })
    }

    /// A freshly initialized policy (useful for smoke tests).
    #[staticmethod]
    #[pyo3(signature = (obs_dim, hidden=vec![64, 64], seed=0))]
    fn fresh(obs_dim: usize, hidden: Vec<usize>, seed: u64) -> PyResult<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let policy =
            CorePolicy::init(NetSpec::new(obs_dim, &hidden, 4), &mut rng).map_err(to_py_err)?;
        Ok(Self { inner: policy })
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.mlp.spec.input_dim
    }

    fn act<'py>(
        &self,
        py: Python<'py>,
        obs: PyReadonlyArray1<f64>,
    ) -> PyResult<Bound<'py, PyArray1<f64>>> {
        let slice = obs.as_slice()?;
        if slice.len() != self.inner.mlp.spec.input_dim {
            return Err(PyValueError::new_err(format!(
                "observation length {} does not match policy input {}",
                slice.len(),
                self.inner.mlp.spec.input_dim
            )));
        }
        let action = self.inner.act_mean(&nalgebra::DVector::from_column_slice(slice));
        Ok(vec![action.0[0], action.0[1], action.0[2], action.0[3]].into_pyarray(py))
    }
}

/// Canonical TOML of a built-in track.
#[pyfunction]
#[pyo3(signature = (name, obstacles=false))]
fn track_toml(name: &str, obstacles: bool) -> PyResult<String> {
    let which = BuiltinTrack::parse(name).map_err(to_py_err)?;
    builtin_track(which, obstacles).save().map_err(to_py_err)
}

/// Parse and validate a track file; returns a summary dict.
#[pyfunction]
fn validate_track<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let track = Track::load(text, 0.08).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("name", &track.name)?;
    d.set_item("gates", track.gates.len())?;
    d.set_item("sequence_len", track.sequence.len())?;
    d.set_item("obstacles", track.obstacles.len())?;
    d.set_item("laps_per_race", track.laps_per_race)?;
    Ok(d)
}

#[pymodule]
fn slipstream_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RacingEnv>()?;
    m.add_class::<Policy>()?;
    m.add_function(wrap_pyfunction!(track_toml, m)?)?;
    m.add_function(wrap_pyfunction!(validate_track, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
