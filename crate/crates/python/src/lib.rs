//! Python bindings for the sievestream core.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sievestream::algorithms::{self, Algorithm, SelectorConfig};
use sievestream::harness;
use sievestream::objective::{self, Informativeness, KernelKind, KernelSpec};
use sievestream::simulator;

fn err(e: sievestream::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A stream item. Carries no label.
#[pyclass(name = "Sample", module = "pysievestream", skip_from_py_object)]
#[derive(Clone)]
struct PySample {
    inner: sievestream::Sample,
}

#[pymethods]
impl PySample {
    #[new]
    #[pyo3(signature = (id, seq, group=None, softmax=None, features=None, score=None))]
    fn new(
        id: String,
        seq: u64,
        group: Option<String>,
        softmax: Option<Vec<f64>>,
        features: Option<Vec<f64>>,
        score: Option<f64>,
    ) -> PyResult<Self> {
        let mut s = sievestream::Sample::new(id, seq);
        if let Some(g) = group {
            s.group = g;
        }
        s.softmax = softmax;
        s.features = features;
        s.score = score;
        s.validate().map_err(err)?;
        Ok(PySample { inner: s })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn seq(&self) -> u64 {
        self.inner.seq
    }

    #[getter]
    fn group(&self) -> &str {
        &self.inner.group
    }

    #[getter]
    fn softmax(&self) -> Option<Vec<f64>> {
        self.inner.softmax.clone()
    }

    #[getter]
    fn features(&self) -> Option<Vec<f64>> {
        self.inner.features.clone()
    }

    #[getter]
    fn score(&self) -> Option<f64> {
        self.inner.score
    }

    fn __repr__(&self) -> String {
        format!("Sample(id={:?}, seq={})", self.inner.id, self.inner.seq)
    }
}

/// Weights and kernel of the selection objective.
#[pyclass(name = "ObjectiveSpec", module = "pysievestream", skip_from_py_object)]
#[derive(Clone)]
struct PyObjectiveSpec {
    inner: objective::ObjectiveSpec,
}

#[pymethods]
impl PyObjectiveSpec {
    #[new]
    #[pyo3(signature = (
        lambda_i=1.0,
        lambda_d=1.0,
        alpha=1.0,
        informativeness="softmax-entropy",
        kernel="polynomial-features",
        beta=1.0
    ))]
    fn new(
        lambda_i: f64,
        lambda_d: f64,
        alpha: f64,
        informativeness: &str,
        kernel: &str,
        beta: f64,
    ) -> PyResult<Self> {
        let inner = objective::ObjectiveSpec {
            lambda_i,
            lambda_d,
            alpha,
            informativeness: informativeness.parse::<Informativeness>().map_err(err)?,
            kernel: KernelSpec::new(kernel.parse::<KernelKind>().map_err(err)?, beta),
        };
        inner.validate().map_err(err)?;
        Ok(PyObjectiveSpec { inner })
    }

    #[getter]
    fn lambda_i(&self) -> f64 {
        self.inner.lambda_i
    }

    #[getter]
    fn lambda_d(&self) -> f64 {
        self.inner.lambda_d
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn informativeness(&self) -> &'static str {
        self.inner.informativeness.name()
    }

    #[getter]
    fn kernel(&self) -> &'static str {
        self.inner.kernel.kind.as_str()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.kernel.beta
    }
}

fn samples(items: &[PyRef<'_, PySample>]) -> Vec<sievestream::Sample> {
    items.iter().map(|s| s.inner.clone()).collect()
}

fn selector_config(
    algorithm: &str,
    k: usize,
    epsilon: f64,
    t: usize,
    seed: u64,
) -> PyResult<SelectorConfig> {
    let cfg = match algorithm.parse::<Algorithm>().map_err(err)? {
        Algorithm::SieveStreaming => SelectorConfig::sieve_streaming(k, epsilon),
        Algorithm::SieveStreamingPp => SelectorConfig::sieve_streaming_pp(k, epsilon),
        Algorithm::ThreeSieves => SelectorConfig::three_sieves(k, epsilon, t),
        Algorithm::Random => SelectorConfig::random(k, seed),
        Algorithm::EntropyTopk => SelectorConfig::entropy_topk(k),
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Runs one selector over `stream` in order and returns the chosen samples
/// with counters.
#[pyfunction]
#[pyo3(signature = (stream, spec, algorithm="sieve-streaming-pp", k=16, epsilon=0.1, t=500, seed=0))]
fn select<'py>(
    py: Python<'py>,
    stream: Vec<PyRef<'py, PySample>>,
    spec: &PyObjectiveSpec,
    algorithm: &str,
    k: usize,
    epsilon: f64,
    t: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = selector_config(algorithm, k, epsilon, t, seed)?;
    let items = samples(&stream);
    let result = py
        .detach(|| algorithms::select(items, &spec.inner, &cfg))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("algorithm", cfg.label())?;
    let chosen: Vec<PySample> = result.chosen.into_iter().map(|inner| PySample { inner }).collect();
    out.set_item("chosen", chosen)?;
    out.set_item("value", result.value)?;
    out.set_item("samples_seen", result.samples_seen)?;
    out.set_item("stored_peak", result.stored_peak)?;
    out.set_item("gain_evaluations", result.gain_evaluations)?;
    out.set_item("kernel_evaluations", result.kernel_evaluations)?;
    out.set_item("cache_hits", result.cache_hits)?;
    Ok(out)
}

/// Objective value of a set, computed densely.
#[pyfunction]
fn objective_value(set: Vec<PyRef<'_, PySample>>, spec: &PyObjectiveSpec) -> PyResult<f64> {
    objective::objective_value(&samples(&set), &spec.inner).map_err(err)
}

/// Informativeness score of one sample.
#[pyfunction]
fn informativeness(sample: &PySample, spec: &PyObjectiveSpec) -> PyResult<f64> {
    objective::informativeness(&sample.inner, &spec.inner).map_err(err)
}

/// Similarity of two samples under the spec's kernel.
#[pyfunction]
fn kernel(a: &PySample, b: &PySample, spec: &PyObjectiveSpec) -> PyResult<f64> {
    objective::kernel(&a.inner, &b.inner, &spec.inner.kernel).map_err(err)
}

/// One round of the preset simulated world as `(samples, labels)`.
#[pyfunction]
#[pyo3(signature = (round, seed=0))]
fn generate_round(round: usize, seed: u64) -> PyResult<(Vec<PySample>, Vec<Option<String>>)> {
    let (mut world, pec, _) = simulator::paper_scale_preset();
    world.seed = seed;
    let records = simulator::generate_round(&world, &pec, round).map_err(err)?;
    Ok(records
        .into_iter()
        .map(|r| {
            let (inner, label) = r.split();
            (PySample { inner }, label)
        })
        .unzip())
}

/// Preset dimensions and selector settings.
#[pyfunction]
fn preset(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let (world, pec, cfg) = simulator::paper_scale_preset();
    let out = PyDict::new(py);
    out.set_item("round_size", pec.round_size)?;
    out.set_item("nonobject_count", pec.nonobject_count)?;
    out.set_item("replication", pec.replication)?;
    out.set_item("imbalance_factor", pec.imbalance_factor)?;
    out.set_item("rounds", pec.rounds)?;
    out.set_item("feature_dim", world.feature_dim)?;
    out.set_item("classes", world.classes)?;
    out.set_item("algorithm", cfg.label())?;
    out.set_item("k", cfg.k)?;
    out.set_item("epsilon", cfg.epsilon)?;
    Ok(out)
}

/// Runs the randomized guarantee suite against exhaustive search.
#[pyfunction]
#[pyo3(signature = (instances=500, seed=0))]
fn verify(py: Python<'_>, instances: usize, seed: u64) -> PyResult<Bound<'_, PyDict>> {
    let report = py
        .detach(|| harness::verify_guarantees(seed, instances))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("passed", report.passed())?;
    out.set_item("instances", report.instances)?;
    out.set_item("violations", report.violations)?;
    out.set_item("min_ratio", report.min_ratio)?;
    out.set_item("max_logdet_error", report.max_logdet_error)?;
    out.set_item("max_inverse_error", report.max_inverse_error)?;
    Ok(out)
}

#[pymodule]
fn pysievestream(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_class::<PyObjectiveSpec>()?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(objective_value, m)?)?;
    m.add_function(wrap_pyfunction!(informativeness, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(generate_round, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
