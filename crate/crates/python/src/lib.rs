//! Python bindings for the bidding library.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vpp_bidding::cadmmb::{self, AlgorithmParams};
use vpp_bidding::centralized::{assemble_centralized, solve_centralized};
use vpp_bidding::hydro::{self, CascadeData};
use vpp_bidding::market::{extract_bid_curves, BidCurve, ScenarioSet};
use vpp_bidding::presets;
use vpp_bidding::solver::SolveOptions;
use vpp_bidding::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Invalid(_) | Error::Json(_) | Error::Csv(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Curves = Vec<Vec<(f64, f64)>>;

fn curves_to_py(curves: &[BidCurve]) -> Curves {
    curves.iter().map(|c| c.points.clone()).collect()
}

#[pyclass(name = "Cascade", module = "vpp_bidding_py")]
pub struct PyCascade {
    inner: CascadeData,
}

#[pymethods]
impl PyCascade {
    /// Three-plant desk preset.
    #[staticmethod]
    fn desk() -> Self {
        Self { inner: presets::desk_cascade() }
    }

    #[staticmethod]
    #[pyo3(signature = (segments=40, horizon=24))]
    fn reference(segments: usize, horizon: usize) -> Self {
        Self { inner: presets::reference_cascade(segments, horizon) }
    }

    #[staticmethod]
    #[pyo3(signature = (horizon=4, segments=3))]
    fn toy(horizon: usize, segments: usize) -> Self {
        Self { inner: presets::toy_cascade(horizon, segments) }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: CascadeData = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn num_plants(&self) -> usize {
        self.inner.num_plants()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn capacity_mw(&self) -> f64 {
        self.inner.total_hydro_capacity()
    }

    /// `(lower, upper)` power the McCormick rows allow at `(q, h)`.
    fn envelope(&self, plant: usize, q: f64, h: f64) -> PyResult<(f64, f64)> {
        let p = self
            .inner
            .plants
            .get(plant)
            .ok_or_else(|| PyValueError::new_err(format!("no plant {plant}")))?;
        Ok(hydro::envelope_bounds(p, q, h))
    }

    fn __repr__(&self) -> String {
        format!(
            "Cascade(name={:?}, plants={}, horizon={})",
            self.inner.name,
            self.inner.num_plants(),
            self.inner.horizon()
        )
    }
}

#[pyclass(name = "ScenarioSet", module = "vpp_bidding_py")]
pub struct PyScenarioSet {
    inner: ScenarioSet,
}

#[pymethods]
impl PyScenarioSet {
    /// Synthetic scenarios sized to the cascade.
    #[staticmethod]
    #[pyo3(signature = (cascade, count, seed=0, month="february"))]
    fn generate(cascade: &PyCascade, count: usize, seed: u64, month: &str) -> PyResult<Self> {
        let inner = presets::reference_scenarios(&cascade.inner, count, month, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn probabilities(&self) -> Vec<f64> {
        self.inner.scenarios.iter().map(|s| s.probability).collect()
    }

    #[getter]
    fn prices(&self) -> Vec<Vec<f64>> {
        self.inner.scenarios.iter().map(|s| s.price.clone()).collect()
    }
}

#[pyclass(name = "CadmmbResult", module = "vpp_bidding_py")]
pub struct PyCadmmbResult {
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    lower_bound: f64,
    #[pyo3(get)]
    upper_bound: f64,
    #[pyo3(get)]
    gap: f64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    wall_time: f64,
    #[pyo3(get)]
    bids: Curves,
    trace_csv: String,
    certificate: String,
}

#[pymethods]
impl PyCadmmbResult {
    fn trace_csv(&self) -> String {
        self.trace_csv.clone()
    }

    fn certificate_json(&self) -> String {
        self.certificate.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "CadmmbResult(status={}, lb={:.4}, ub={:.4}, gap={:.5}%, iterations={})",
            self.status, self.lower_bound, self.upper_bound, self.gap, self.iterations
        )
    }
}

/// Exact centralized solve; returns a dict with status, objective, bound and bids.
#[pyfunction]
#[pyo3(signature = (cascade, scenarios, time_limit=None))]
fn solve(
    py: Python<'_>,
    cascade: &PyCascade,
    scenarios: &PyScenarioSet,
    time_limit: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let (c, s) = (cascade.inner.clone(), scenarios.inner.clone());
    let (r, bids) = py
        .detach(move || -> vpp_bidding::Result<_> {
            let inst = assemble_centralized(&c, &s)?;
            let opts = SolveOptions { time_limit, ..SolveOptions::default() };
            let r = solve_centralized(&inst, &opts)?;
            let bids = if r.status.has_solution() {
                extract_bid_curves(&r.primal, &s, &inst.market)?
            } else {
                Vec::new()
            };
            Ok((r, bids))
        })
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("status", format!("{:?}", r.status))?;
    d.set_item("objective", r.objective)?;
    d.set_item("best_bound", r.best_bound)?;
    d.set_item("wall_time", r.wall_time)?;
    d.set_item("bids", curves_to_py(&bids))?;
    Ok(d.into_any().unbind())
}

/// Consensus ADMM with certified bounds (`bounds=False` gives plain ADMM).
#[pyfunction]
#[pyo3(signature = (cascade, scenarios, rho0=1.0, eps_gap=0.01, max_iter=5000, time_budget=14400.0, workers=1, seed=0, bounds=true))]
#[allow(clippy::too_many_arguments)]
fn run_cadmmb(
    py: Python<'_>,
    cascade: &PyCascade,
    scenarios: &PyScenarioSet,
    rho0: f64,
    eps_gap: f64,
    max_iter: usize,
    time_budget: f64,
    workers: usize,
    seed: u64,
    bounds: bool,
) -> PyResult<PyCadmmbResult> {
    let params = AlgorithmParams {
        rho0,
        eps_gap,
        max_iter,
        time_budget,
        workers,
        seed,
        bounds,
        ..AlgorithmParams::default()
    };
    let (c, s) = (cascade.inner.clone(), scenarios.inner.clone());
    let p = params;
    let o = py.detach(move || cadmmb::run(&c, &s, &p)).map_err(to_py)?;
    Ok(PyCadmmbResult {
        status: format!("{:?}", o.status),
        lower_bound: o.lower_bound,
        upper_bound: o.upper_bound,
        gap: o.gap,
        iterations: o.iterations,
        wall_time: o.wall_time,
        bids: curves_to_py(&o.bids),
        trace_csv: o.trace.to_csv().map_err(to_py)?,
        certificate: serde_json::to_string(&o.certificate(&params))
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    })
}

/// Relative gap in percent between an upper and a lower bound.
#[pyfunction]
fn gap(ub: f64, lb: f64) -> f64 {
    cadmmb::gap(ub, lb)
}

#[pymodule]
fn vpp_bidding_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCascade>()?;
    m.add_class::<PyScenarioSet>()?;
    m.add_class::<PyCadmmbResult>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_cadmmb, m)?)?;
    m.add_function(wrap_pyfunction!(gap, m)?)?;
    Ok(())
}
