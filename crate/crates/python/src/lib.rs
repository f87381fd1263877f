//! Python bindings. Structured arguments (specs, schedules, bodies, configs)
//! are taken as dicts or JSON strings and results come back as dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyString;
use serde::de::DeserializeOwned;
use serde::Serialize;

use npogd::analysis::{compute_metrics, TripleBudget};
use npogd::geometry::{DEFAULT_MAX_SWEEPS, DEFAULT_PROJECTION_TOL};
use npogd::harness::{
    project_request, run_experiment as sweep, verify_suite, ExperimentConfig, Level,
    ProjectRequest, ScheduleConfig,
};
use npogd::oracle::{DEFAULT_ORACLE_MAX_ITERS, DEFAULT_ORACLE_TOL};
use npogd::{
    offline_optimum, Ball, BoxSet, Error, GeneratorSpec, Halfspace, Point, ProjectionOptions,
    RunTrace, StartPoint, StepSchedule,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidArgument(_)
        | Error::Generation(_)
        | Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Reads a dict, list or JSON string into `T` by way of the json module.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        let json = obj.py().import("json")?;
        json.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

fn point(v: Vec<f64>) -> PyResult<Point> {
    Point::new(v).map_err(py_err)
}

#[pyfunction]
fn project_halfspace(p: Vec<f64>, normal: Vec<f64>, offset: f64) -> PyResult<Vec<f64>> {
    let h = Halfspace::new(point(normal)?, offset).map_err(py_err)?;
    Ok(npogd::project_halfspace(&point(p)?, &h).into_vec())
}

#[pyfunction]
fn project_ball(p: Vec<f64>, center: Vec<f64>, radius: f64) -> PyResult<Vec<f64>> {
    let b = Ball::new(point(center)?, radius).map_err(py_err)?;
    Ok(npogd::project_ball(&point(p)?, &b).into_vec())
}

#[pyfunction]
fn project_box(p: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Vec<f64>> {
    let b = BoxSet::new(point(lo)?, point(hi)?).map_err(py_err)?;
    Ok(npogd::project_box(&point(p)?, &b).into_vec())
}

/// Projects `point` onto the intersection of `bodies`, each a dict such as
/// `{"kind": "ball", "center": [0, 0], "radius": 1}`.
#[pyfunction]
#[pyo3(signature = (point, bodies, tol = DEFAULT_PROJECTION_TOL, max_sweeps = DEFAULT_MAX_SWEEPS))]
fn project_region(
    py: Python<'_>,
    point: Vec<f64>,
    bodies: &Bound<'_, PyAny>,
    tol: f64,
    max_sweeps: usize,
) -> PyResult<PyObject> {
    let req = ProjectRequest {
        point: self::point(point)?,
        bodies: from_py(bodies)?,
        tol,
        max_sweeps,
    };
    to_py(py, &project_request(&req).map_err(py_err)?)
}

/// A generated or loaded problem instance.
#[pyclass(frozen)]
struct Instance {
    inner: npogd::Instance,
}

#[pymethods]
impl Instance {
    /// Generates an instance from a generator spec.
    #[staticmethod]
    fn generate(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: GeneratorSpec = from_py(spec)?;
        let inner = npogd::gen_instance(&spec).map_err(py_err)?;
        Ok(Instance { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = npogd::Instance::from_json(text).map_err(py_err)?;
        Ok(Instance { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    #[getter]
    fn anchor(&self) -> Vec<f64> {
        self.inner.anchor().coords().to_vec()
    }

    fn truncated(&self, horizon: usize) -> PyResult<Self> {
        let inner = self.inner.truncated(horizon).map_err(py_err)?;
        Ok(Instance { inner })
    }

    /// Runs the learner. `schedule` is a schedule dict whose missing
    /// constants come from the instance; `start` is "corner", "anchor" or
    /// a point.
    #[pyo3(signature = (schedule, start = None, tol = DEFAULT_PROJECTION_TOL, max_sweeps = DEFAULT_MAX_SWEEPS))]
    fn run(
        &self,
        schedule: &Bound<'_, PyAny>,
        start: Option<&Bound<'_, PyAny>>,
        tol: f64,
        max_sweeps: usize,
    ) -> PyResult<Trace> {
        let cfg: ScheduleConfig = from_py(schedule)?;
        let schedule = cfg.resolve(&self.inner).map_err(py_err)?;
        let start: StartPoint = match start {
            Some(s) if s.is_instance_of::<PyString>() => {
                let name: String = s.extract()?;
                serde_json::from_value(serde_json::Value::String(name))
                    .map_err(|e| PyValueError::new_err(e.to_string()))?
            }
            Some(s) => from_py(s)?,
            None => StartPoint::default(),
        };
        let opts = ProjectionOptions { tol, max_sweeps };
        let inner = npogd::run(&self.inner, &schedule, &start, &opts).map_err(py_err)?;
        Ok(Trace { inner, schedule })
    }

    /// Best fixed action in hindsight over the final feasible region.
    #[pyo3(signature = (tol = DEFAULT_ORACLE_TOL, max_iters = DEFAULT_ORACLE_MAX_ITERS))]
    fn offline_optimum(&self, py: Python<'_>, tol: f64, max_iters: usize) -> PyResult<PyObject> {
        to_py(
            py,
            &offline_optimum(&self.inner, tol, max_iters).map_err(py_err)?,
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(name={:?}, dimension={}, horizon={})",
            self.inner.name(),
            self.inner.dimension(),
            self.inner.horizon()
        )
    }
}

/// The per-round record of one run.
#[pyclass(frozen)]
struct Trace {
    inner: RunTrace,
    schedule: StepSchedule,
}

#[pymethods]
impl Trace {
    /// `x_1, ..., x_T, x_{T+1}`.
    fn iterates(&self) -> Vec<Vec<f64>> {
        self.inner
            .iterates()
            .into_iter()
            .map(Point::into_vec)
            .collect()
    }

    fn e_norms(&self) -> Vec<f64> {
        self.inner.e_norms()
    }

    fn losses(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.loss).collect()
    }

    fn violations(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.violation).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn regret(&self, comparator_value: f64) -> f64 {
        npogd::regret(&self.inner, comparator_value)
    }

    fn ccv(&self) -> f64 {
        npogd::ccv(&self.inner)
    }

    fn movement(&self) -> f64 {
        npogd::movement(&self.inner)
    }

    /// Full metrics against `comparator_value`, or against the offline
    /// optimum when it is not given.
    #[pyo3(signature = (instance, comparator_value = None))]
    fn metrics(
        &self,
        py: Python<'_>,
        instance: &Instance,
        comparator_value: Option<f64>,
    ) -> PyResult<PyObject> {
        let inst = &instance.inner;
        let comparator = match comparator_value {
            Some(v) => v,
            None => {
                offline_optimum(inst, DEFAULT_ORACLE_TOL, DEFAULT_ORACLE_MAX_ITERS)
                    .map_err(py_err)?
                    .value
            }
        };
        let report = compute_metrics(
            inst,
            &self.inner,
            &self.schedule,
            comparator,
            TripleBudget::default(),
        )
        .map_err(py_err)?;
        to_py(py, &report)
    }

    fn to_csv(&self) -> String {
        npogd::harness::trace_csv(&self.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.horizon()
    }
}

/// Runs a sweep config and returns `(csv, summary)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<(String, PyObject)> {
    let cfg: ExperimentConfig = from_py(config)?;
    cfg.validate().map_err(py_err)?;
    let result = py.allow_threads(|| sweep(&cfg)).map_err(py_err)?;
    Ok((result.to_csv(), to_py(py, &result)?))
}

/// Runs the property suite at level "fast" or "full".
#[pyfunction]
#[pyo3(signature = (level = "fast"))]
fn verify(py: Python<'_>, level: &str) -> PyResult<PyObject> {
    let level = match level {
        "fast" => Level::Fast,
        "full" => Level::Full,
        other => {
            return Err(PyValueError::new_err(format!(
                "level must be \"fast\" or \"full\", got {other:?}"
            )))
        }
    };
    let report = py.allow_threads(|| verify_suite(level));
    to_py(py, &report)
}

#[pymodule]
fn npogd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(project_halfspace, m)?)?;
    m.add_function(wrap_pyfunction!(project_ball, m)?)?;
    m.add_function(wrap_pyfunction!(project_box, m)?)?;
    m.add_function(wrap_pyfunction!(project_region, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_class::<Instance>()?;
    m.add_class::<Trace>()?;
    Ok(())
}
