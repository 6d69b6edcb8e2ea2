//! Python bindings for `polycomp`.
//!
//! Probability vectors cross the boundary as flat `list[float]` using the
//! library's flattening (`s*|A| + a` for pairs). Structured reports come back
//! as plain dicts built from the library's serde output.

use polycomp::compress::{CandidateSet, Metric};
use polycomp::harness::{generate_random_mdp as gen_mdp, GeneratorConfig};
use polycomp::mdp::{self, induced_chain};
use polycomp::planner::{self, UnknownScope};
use polycomp::sampling::{self, SamplingMode};
use polycomp::{geometry, Error, RngSeed};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Singular { .. } | Error::EigenNoConvergence { .. } | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for polycomp::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_bound_py_any(py),
            (_, Some(i)) => i.into_bound_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_bound_py_any(py)
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_bound_py_any(py)
        }
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn parse_metric(metric: &str) -> PyResult<Metric> {
    metric.parse().py()
}

// =============================================================================
// Model types
// =============================================================================

/// Controlled Markov process with flat transition tensor `P[(s*|A|+a)*|S|+s']`.
#[pyclass(name = "Cmp", module = "polycomp_py", frozen)]
struct PyCmp {
    inner: mdp::Cmp,
}

#[pymethods]
impl PyCmp {
    #[new]
    #[pyo3(signature = (num_states, num_actions, transition, mu, gamma, reward=None))]
    fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        mu: Vec<f64>,
        gamma: f64,
        reward: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let inner = mdp::Cmp::new(num_states, num_actions, transition, mu, gamma, reward).py()?;
        Ok(PyCmp { inner })
    }

    /// Parses the JSON model format used by the CLI.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let desc: mdp::MdpDescription =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyCmp {
            inner: mdp::Cmp::from_description(&desc).py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_description())
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().to_vec()
    }

    #[getter]
    fn transition(&self) -> Vec<f64> {
        self.inner.transition().to_vec()
    }

    #[getter]
    fn reward(&self) -> Option<Vec<f64>> {
        self.inner.reward().map(<[f64]>::to_vec)
    }

    fn __repr__(&self) -> String {
        format!(
            "Cmp(num_states={}, num_actions={}, gamma={})",
            self.inner.num_states(),
            self.inner.num_actions(),
            self.inner.gamma()
        )
    }
}

/// Stochastic policy table `pi[s][a]`.
#[pyclass(name = "Policy", module = "polycomp_py", frozen)]
struct PyPolicy {
    inner: mdp::TabularPolicy,
}

#[pymethods]
impl PyPolicy {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyPolicy {
            inner: mdp::TabularPolicy::from_rows(&rows).py()?,
        })
    }

    #[staticmethod]
    fn uniform(num_states: usize, num_actions: usize) -> Self {
        PyPolicy {
            inner: mdp::TabularPolicy::uniform(num_states, num_actions),
        }
    }

    #[staticmethod]
    fn deterministic(num_actions: usize, actions: Vec<usize>) -> PyResult<Self> {
        Ok(PyPolicy {
            inner: mdp::TabularPolicy::deterministic(num_actions, &actions).py()?,
        })
    }

    fn prob(&self, s: usize, a: usize) -> PyResult<f64> {
        if s >= self.inner.num_states() || a >= self.inner.num_actions() {
            return Err(PyValueError::new_err(format!("({s}, {a}) out of range")));
        }
        Ok(self.inner.prob(s, a))
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.num_states())
            .map(|s| self.inner.row(s).to_vec())
            .collect()
    }
}

// =============================================================================
// Functions
// =============================================================================

/// Exact discounted occupancy `d(s, a)` as a flat list.
#[pyfunction]
fn occupancy(cmp: &PyCmp, policy: &PyPolicy) -> PyResult<Vec<f64>> {
    Ok(mdp::occupancy(&cmp.inner, &policy.inner).py()?.values().to_vec())
}

/// Truncated power-series occupancy, accurate to `tol` in every entry.
#[pyfunction]
#[pyo3(signature = (cmp, policy, tol=1e-12))]
fn occupancy_series(cmp: &PyCmp, policy: &PyPolicy, tol: f64) -> PyResult<Vec<f64>> {
    Ok(mdp::occupancy_oracle(&cmp.inner, &policy.inner, tol)
        .py()?
        .values()
        .to_vec())
}

#[pyfunction]
fn spectral_gap<'py>(py: Python<'py>, cmp: &PyCmp, policy: &PyPolicy) -> PyResult<Bound<'py, PyAny>> {
    let chain = induced_chain(&cmp.inner, &policy.inner).py()?;
    to_dict(py, &mdp::spectral_gap(&chain).py()?)
}

#[pyfunction]
fn total_variation(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    polycomp::total_variation(&p, &q).py()
}

/// `Σ p²/q`; `inf` when `p` puts mass where `q` has none.
#[pyfunction]
fn renyi2(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    Ok(polycomp::renyi2(&p, &q).py()?.value())
}

/// Empirical occupancy from `n` samples; returns `(estimate, env_steps)`.
#[pyfunction]
#[pyo3(signature = (cmp, policy, n, seed, stream=0, mode="geometric"))]
fn sample_occupancy(
    cmp: &PyCmp,
    policy: &PyPolicy,
    n: usize,
    seed: u64,
    stream: u64,
    mode: &str,
) -> PyResult<(Vec<f64>, u64)> {
    let mode = match mode {
        "geometric" => SamplingMode::Geometric,
        "stationary" => SamplingMode::Stationary,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let s =
        sampling::sample_occupancy(&cmp.inner, &policy.inner, n, RngSeed::new(seed, stream), mode).py()?;
    Ok((s.empirical.values().to_vec(), s.env_steps))
}

/// Occupancy on a model estimated from `n_per_pair` generative draws per pair.
#[pyfunction]
#[pyo3(signature = (cmp, policy, n_per_pair, seed, stream=0))]
fn estimated_occupancy(
    cmp: &PyCmp,
    policy: &PyPolicy,
    n_per_pair: u64,
    seed: u64,
    stream: u64,
) -> PyResult<(Vec<f64>, f64)> {
    let e = sampling::estimate_transition_model(&cmp.inner, n_per_pair, RngSeed::new(seed, stream)).py()?;
    let d = sampling::occupancy_on_estimate(&e, &policy.inner).py()?;
    let bound = sampling::simulation_gap_bound(&cmp.inner, &e, &policy.inner).py()?;
    Ok((d.values().to_vec(), bound))
}

#[pyfunction]
#[pyo3(signature = (num_states, num_actions, branching, seed, reversible=false, gamma=0.9))]
fn generate_random_mdp(
    num_states: usize,
    num_actions: usize,
    branching: usize,
    seed: u64,
    reversible: bool,
    gamma: f64,
) -> PyResult<PyCmp> {
    let cfg = GeneratorConfig {
        num_states,
        num_actions,
        branching,
        seed,
        reversible,
        gamma,
    };
    Ok(PyCmp {
        inner: gen_mdp(&cfg).py()?,
    })
}

// -----------------------------------------------------------------------------
// Planner
// -----------------------------------------------------------------------------

#[pyfunction]
fn tv_known_single<'py>(
    py: Python<'py>,
    gamma0: f64,
    sigma_tv: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &planner::tv_known_single(gamma0, sigma_tv, delta).py()?)
}

#[pyfunction]
fn tv_known_k<'py>(
    py: Python<'py>,
    gamma0: f64,
    sigma_tv: f64,
    delta: f64,
    k: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &planner::tv_known_k(gamma0, sigma_tv, delta, k).py()?)
}

#[pyfunction]
#[pyo3(signature = (gamma, num_states, num_actions, sigma_tv, delta, total=false))]
fn tv_unknown<'py>(
    py: Python<'py>,
    gamma: f64,
    num_states: usize,
    num_actions: usize,
    sigma_tv: f64,
    delta: f64,
    total: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let scope = if total {
        UnknownScope::Total
    } else {
        UnknownScope::PerPair
    };
    to_dict(
        py,
        &planner::tv_unknown(gamma, num_states, num_actions, sigma_tv, delta, scope).py()?,
    )
}

#[pyfunction]
fn weissman_samples<'py>(py: Python<'py>, a: usize, delta: f64, epsilon: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &planner::weissman_samples(a, delta, epsilon).py()?)
}

#[pyfunction]
#[pyo3(signature = (gamma0, sigma2, n_pairs, delta, k=1))]
fn renyi_known_bounds<'py>(
    py: Python<'py>,
    gamma0: f64,
    sigma2: f64,
    n_pairs: usize,
    delta: f64,
    k: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &planner::renyi_known_bounds(gamma0, sigma2, n_pairs, k, delta).py()?,
    )
}

#[pyfunction]
fn renyi_unknown_bounds<'py>(
    py: Python<'py>,
    gamma: f64,
    num_states: usize,
    num_actions: usize,
    sigma2: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(
        py,
        &planner::renyi_unknown_bounds(gamma, num_states, num_actions, sigma2, delta).py()?,
    )
}

// -----------------------------------------------------------------------------
// Geometry and compression
// -----------------------------------------------------------------------------

#[pyfunction]
#[pyo3(signature = (n, sigma2, seed=0))]
fn geometry_certificate<'py>(
    py: Python<'py>,
    n: usize,
    sigma2: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cert = py.detach(|| geometry::certificate(n, sigma2, seed)).py()?;
    to_dict(py, &cert)
}

#[pyfunction]
fn closed_form_tv<'py>(py: Python<'py>, n: usize, sigma2: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &geometry::closed_form_tv(n, sigma2).py()?)
}

/// Greedy max-min cover of explicit occupancy vectors.
#[pyfunction]
#[pyo3(signature = (occupancies, sigma, metric="tv"))]
fn greedy_cover<'py>(
    py: Python<'py>,
    occupancies: Vec<Vec<f64>>,
    sigma: f64,
    metric: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let metric = parse_metric(metric)?;
    let cs = CandidateSet::from_occupancies(occupancies).py()?;
    let result = polycomp::greedy_cover(&cs, sigma, metric).py()?;
    let check = polycomp::verify_cover(&cs, &result).py()?;
    let out = serde_json::json!({ "result": result, "verification": check });
    json_to_py(py, &out)
}

#[pymodule]
fn polycomp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCmp>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(occupancy_series, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(total_variation, m)?)?;
    m.add_function(wrap_pyfunction!(renyi2, m)?)?;
    m.add_function(wrap_pyfunction!(sample_occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(estimated_occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(generate_random_mdp, m)?)?;
    m.add_function(wrap_pyfunction!(tv_known_single, m)?)?;
    m.add_function(wrap_pyfunction!(tv_known_k, m)?)?;
    m.add_function(wrap_pyfunction!(tv_unknown, m)?)?;
    m.add_function(wrap_pyfunction!(weissman_samples, m)?)?;
    m.add_function(wrap_pyfunction!(renyi_known_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(renyi_unknown_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(geometry_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_tv, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_cover, m)?)?;
    Ok(())
}
