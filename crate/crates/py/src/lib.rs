//! Python bindings for the NTS core: models, distortion measures, the
//! rate-distortion oracle, sub-stream analysis and the three NTS runners.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nts_core::distortion as dist;
use nts_core::experiment::{self, ExperimentConfig, ExperimentError};
use nts_core::markov::{self, Word};
use nts_core::nts::{self, CodebookDistribution, NtsTrace, RunParams, SampledSource, TransitionCounts};
use nts_core::rd::{self, WeightsMode};
use nts_core::{substream, NtsError};

fn value_err(e: NtsError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

type Matrix = Vec<Vec<f64>>;

fn run_err(e: ExperimentError) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

#[pyclass(name = "DistortionMeasure", frozen)]
struct PyMeasure(dist::DistortionMeasure);

#[pymethods]
impl PyMeasure {
    #[new]
    #[pyo3(signature = (table, name = "custom"))]
    fn new(table: Vec<Vec<f64>>, name: &str) -> PyResult<Self> {
        dist::DistortionMeasure::new(name, &table).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn hamming(size: usize) -> Self {
        Self(dist::DistortionMeasure::hamming(size))
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn table(&self) -> Vec<Vec<f64>> {
        self.0.rows()
    }

    fn word_distortion(&self, x: Vec<usize>, y: Vec<usize>) -> PyResult<f64> {
        dist::word_distortion(&Word(x), &Word(y), &self.0).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("DistortionMeasure({:?}, {:?})", self.0.name(), self.0.rows())
    }
}

#[pyclass(name = "MarkovModel", frozen)]
struct PyModel(markov::MarkovModel);

#[pymethods]
impl PyModel {
    #[new]
    fn new(order: usize, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        markov::MarkovModel::new(order, &rows).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn memoryless(p: Vec<f64>) -> PyResult<Self> {
        markov::MarkovModel::memoryless(&p).map(Self).map_err(value_err)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows()
    }

    #[getter]
    fn stationary(&self) -> Vec<f64> {
        self.0.stationary().to_vec()
    }

    fn d_max(&self, measure: &PyMeasure) -> PyResult<f64> {
        dist::d_max(&self.0, &measure.0).map_err(value_err)
    }

    fn sample_word(&self, length: usize, seed: u64) -> PyResult<Vec<usize>> {
        let mut rng = nts_core::seed::stream_rng(seed);
        self.0.sample_word(length, &mut rng).map(|w| w.0).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("MarkovModel(order={}, rows={:?})", self.0.order(), self.0.rows())
    }
}

/// Rates in nats unless the name says bits.
#[pyclass(name = "RdPoint", frozen, get_all)]
struct PyRdPoint {
    rate: f64,
    rate_bits: f64,
    distortion: f64,
    slope: f64,
    output_distribution: Vec<f64>,
    minimizer: Vec<Vec<f64>>,
}

impl From<rd::RdPoint> for PyRdPoint {
    fn from(p: rd::RdPoint) -> Self {
        Self {
            rate: p.rate,
            rate_bits: p.rate_bits(),
            distortion: p.distortion,
            slope: p.slope,
            minimizer: p.minimizer.rows(),
            output_distribution: p.output_distribution,
        }
    }
}

#[pymethods]
impl PyRdPoint {
    fn __repr__(&self) -> String {
        format!(
            "RdPoint(rate_bits={}, distortion={}, slope={})",
            self.rate_bits, self.distortion, self.slope
        )
    }
}

#[pyclass(name = "MarkovRd", frozen, get_all)]
struct PyMarkovRd {
    rows: Vec<Vec<f64>>,
    rate_bits: f64,
    history_bits: Vec<f64>,
    slope: f64,
    pair_distortions: Vec<f64>,
    iterations: usize,
}

/// One trace row. `distribution` is the flattened codebook distribution.
#[pyclass(name = "IterationRecord", frozen, get_all)]
struct PyRecord {
    iteration: usize,
    distribution: Vec<f64>,
    mean_match_index: f64,
    mean_accept_distortion: f64,
    oracle_rate_bits: Option<f64>,
}

#[pymethods]
impl PyRecord {
    fn __repr__(&self) -> String {
        format!("IterationRecord(iteration={}, distribution={:?})", self.iteration, self.distribution)
    }
}

fn records(trace: NtsTrace) -> Vec<PyRecord> {
    trace
        .records
        .into_iter()
        .map(|r| PyRecord {
            iteration: r.iteration,
            distribution: r.distribution.flat(),
            mean_match_index: r.mean_match_index,
            mean_accept_distortion: r.mean_accept_distortion,
            oracle_rate_bits: r.oracle_rate_bits,
        })
        .collect()
}

#[pyclass(name = "SubstreamDecomposition", frozen)]
struct PyDecomposition {
    inner: substream::SubstreamDecomposition,
    measure: dist::DistortionMeasure,
}

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn assigned(&self) -> usize {
        self.inner.assigned()
    }

    #[getter]
    fn skipped(&self) -> usize {
        self.inner.skipped()
    }

    /// `(source_state, code_state, length, weight, distortion)` per occupied pair.
    fn summary(&self) -> Vec<(usize, usize, usize, f64, f64)> {
        self.inner
            .summary()
            .into_iter()
            .map(|s| (s.source_state, s.code_state, s.length, s.weight, s.distortion))
            .collect()
    }

    /// Whether the weighted pair distortions add up exactly to the total.
    fn identity_holds(&self) -> bool {
        let (a, b) = self.inner.reconstruction_identity(&self.measure);
        a == b
    }

    /// `(joint, x_given_y, y_given_x)` over states.
    fn coupling(&self) -> PyResult<(Matrix, Matrix, Matrix)> {
        let c = substream::empirical_coupling(&self.inner).map_err(value_err)?;
        Ok((c.joint, c.x_given_y, c.y_given_x))
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

#[pyfunction]
fn rpqd(p: Vec<f64>, q: Vec<f64>, measure: &PyMeasure, d: f64) -> PyResult<PyRdPoint> {
    rd::rpqd(&p, &q, &measure.0, d).map(Into::into).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (p, measure, d, tol = 1e-12))]
fn blahut_arimoto_rd(p: Vec<f64>, measure: &PyMeasure, d: f64, tol: f64) -> PyResult<PyRdPoint> {
    rd::blahut_arimoto_rd(&p, &measure.0, d, tol).map(Into::into).map_err(value_err)
}

#[pyfunction]
fn nts_deterministic_step(p: Vec<f64>, q: Vec<f64>, measure: &PyMeasure, d: f64) -> PyResult<Vec<f64>> {
    rd::nts_deterministic_step(&p, &q, &measure.0, d).map_err(value_err)
}

/// Minimizes the Markov rate over code chains. `weights` fixes the
/// sub-stream weights; by default they follow the product rule.
#[pyfunction]
#[pyo3(signature = (source, measure, d, tol = 1e-10, weights = None))]
fn alternating_min_markov(
    source: &PyModel,
    measure: &PyMeasure,
    d: f64,
    tol: f64,
    weights: Option<Vec<Vec<f64>>>,
) -> PyResult<PyMarkovRd> {
    let mode = weights.map_or(WeightsMode::Product, WeightsMode::Fixed);
    let r = rd::alternating_min_markov(&source.0, &measure.0, d, &mode, tol).map_err(value_err)?;
    Ok(PyMarkovRd {
        rate_bits: r.rate_bits(),
        history_bits: r.history.iter().map(|&h| nts_core::info::nats_to_bits(h)).collect(),
        slope: r.allocation.slope,
        pair_distortions: r.allocation.distortions,
        iterations: r.iterations,
        rows: r.rows,
    })
}

/// Rate in bits of a fixed code chain under product weights.
#[pyfunction]
fn markov_rate_bits(source: &PyModel, rows: Vec<Vec<f64>>, measure: &PyMeasure, d: f64) -> PyResult<f64> {
    let w = rd::markov_rate(&source.0, &rows, &measure.0, d, &WeightsMode::Product).map_err(value_err)?;
    Ok(nts_core::info::nats_to_bits(w.average_rate()))
}

/// ML transition rows from per-state letter counts `counts[state][letter]`.
#[pyfunction]
#[pyo3(signature = (counts, order, smoothing = nts::DEFAULT_SMOOTHING))]
fn ml_transition_update(counts: Vec<Vec<u64>>, order: usize, smoothing: f64) -> PyResult<Vec<Vec<f64>>> {
    let c = TransitionCounts::from_rows(order, &counts).map_err(value_err)?;
    nts::ml_transition_update(&c, smoothing).map_err(value_err)
}

#[pyfunction]
fn transition_counts(word: Vec<usize>, order: usize, alphabet_size: usize) -> PyResult<Vec<Vec<u64>>> {
    nts::transition_counts(&Word(word), order, alphabet_size)
        .map(|c| c.rows())
        .map_err(value_err)
}

#[pyfunction]
fn decompose(
    source_words: Vec<Vec<usize>>,
    code_words: Vec<Vec<usize>>,
    order: usize,
    measure: &PyMeasure,
) -> PyResult<PyDecomposition> {
    let xs: Vec<Word> = source_words.into_iter().map(Word).collect();
    let ys: Vec<Word> = code_words.into_iter().map(Word).collect();
    let inner = substream::decompose(&xs, &ys, order, &measure.0).map_err(value_err)?;
    Ok(PyDecomposition {
        inner,
        measure: measure.0.clone(),
    })
}

fn params(iterations: usize, depth: usize, d: f64, seed: u64, smoothing: f64, cap: Option<u64>) -> RunParams {
    let p = RunParams::new(iterations, depth, d).with_seed(seed).with_smoothing(smoothing);
    match cap {
        Some(c) => p.with_cap(c),
        None => p,
    }
}

fn iid_oracle<'a>(
    source: &'a markov::MarkovModel,
    measure: &'a dist::DistortionMeasure,
    order: usize,
    d: f64,
) -> impl Fn(&CodebookDistribution) -> nts_core::Result<f64> + Sync + 'a {
    move |dist: &CodebookDistribution| rd::block_rate(source, &dist.flat(), order, measure, d).map(|r| r.rate_bits())
}

/// Original NTS: one d-match per iteration; the codebook adopts the matching
/// codeword's type.
#[pyfunction]
#[pyo3(signature = (source, q0, letters, measure, iterations, d, seed = 0, cap = None, oracle = false))]
#[allow(clippy::too_many_arguments)]
fn nts_original_run(
    py: Python<'_>,
    source: &PyModel,
    q0: Vec<f64>,
    letters: usize,
    measure: &PyMeasure,
    iterations: usize,
    d: f64,
    seed: u64,
    cap: Option<u64>,
    oracle: bool,
) -> PyResult<Vec<PyRecord>> {
    let words = SampledSource::Markov {
        model: source.0.clone(),
        letters,
        seed,
    };
    let p = params(iterations, 1, d, seed, 0.0, cap);
    let f = iid_oracle(&source.0, &measure.0, 1, d);
    let o: Option<nts::Oracle<'_>> = if oracle { Some(&f) } else { None };
    py.detach(|| nts::nts_original_run(&words, &q0, letters, &measure.0, p, o))
        .map(records)
        .map_err(value_err)
}

/// Modified NTS: `depth` matches per iteration over super-symbols of `order`
/// letters, averaged and floored by `smoothing`.
#[pyfunction]
#[pyo3(signature = (source, q0, order, blocks, measure, iterations, depth, d, seed = 0, smoothing = nts::DEFAULT_SMOOTHING, cap = None, oracle = false))]
#[allow(clippy::too_many_arguments)]
fn nts_modified_run(
    py: Python<'_>,
    source: &PyModel,
    q0: Vec<f64>,
    order: usize,
    blocks: usize,
    measure: &PyMeasure,
    iterations: usize,
    depth: usize,
    d: f64,
    seed: u64,
    smoothing: f64,
    cap: Option<u64>,
    oracle: bool,
) -> PyResult<Vec<PyRecord>> {
    let words = SampledSource::Markov {
        model: source.0.clone(),
        letters: order.max(1) * blocks,
        seed,
    };
    let p = params(iterations, depth, d, seed, smoothing, cap);
    let f = iid_oracle(&source.0, &measure.0, order.max(1), d);
    let o: Option<nts::Oracle<'_>> = if oracle { Some(&f) } else { None };
    py.detach(|| nts::nts_modified_run(&words, &q0, order, blocks, &measure.0, p, o))
        .map(records)
        .map_err(value_err)
}

/// Markov NTS: a Markov codebook chain re-estimated from the transition
/// counts of the `depth` matching codewords.
#[pyfunction]
#[pyo3(signature = (source, q0, letters, measure, iterations, depth, d, seed = 0, smoothing = nts::DEFAULT_SMOOTHING, cap = None, oracle = false))]
#[allow(clippy::too_many_arguments)]
fn nts_markov_run(
    py: Python<'_>,
    source: &PyModel,
    q0: &PyModel,
    letters: usize,
    measure: &PyMeasure,
    iterations: usize,
    depth: usize,
    d: f64,
    seed: u64,
    smoothing: f64,
    cap: Option<u64>,
    oracle: bool,
) -> PyResult<Vec<PyRecord>> {
    let words = SampledSource::Markov {
        model: source.0.clone(),
        letters,
        seed,
    };
    let p = params(iterations, depth, d, seed, smoothing, cap);
    let (src, m) = (&source.0, &measure.0);
    let f = move |dist: &CodebookDistribution| match dist {
        CodebookDistribution::Markov { rows, .. } => rd::markov_rate(src, rows, m, d, &WeightsMode::Product)
            .map(|w| nts_core::info::nats_to_bits(w.average_rate())),
        CodebookDistribution::Iid { .. } => unreachable!("markov runs record chains"),
    };
    let o: Option<nts::Oracle<'_>> = if oracle { Some(&f) } else { None };
    py.detach(|| nts::nts_markov_run(&words, &q0.0, letters, &measure.0, p, o))
        .map(records)
        .map_err(value_err)
}

/// Runs a config file and writes its outputs under `out`; returns the run
/// directories.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str, out: &str) -> PyResult<Vec<String>> {
    let cfg = ExperimentConfig::from_file(Path::new(config)).map_err(run_err)?;
    let runs = py
        .detach(|| experiment::run_experiment(&cfg, Path::new(out)))
        .map_err(run_err)?;
    Ok(runs.into_iter().map(|r| r.dir.display().to_string()).collect())
}

#[pyfunction]
fn report(dir: &str) -> PyResult<String> {
    experiment::report(Path::new(dir)).map_err(run_err)
}

#[pymodule]
fn nts_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyRdPoint>()?;
    m.add_class::<PyMarkovRd>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_function(wrap_pyfunction!(rpqd, m)?)?;
    m.add_function(wrap_pyfunction!(blahut_arimoto_rd, m)?)?;
    m.add_function(wrap_pyfunction!(nts_deterministic_step, m)?)?;
    m.add_function(wrap_pyfunction!(alternating_min_markov, m)?)?;
    m.add_function(wrap_pyfunction!(markov_rate_bits, m)?)?;
    m.add_function(wrap_pyfunction!(ml_transition_update, m)?)?;
    m.add_function(wrap_pyfunction!(transition_counts, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(nts_original_run, m)?)?;
    m.add_function(wrap_pyfunction!(nts_modified_run, m)?)?;
    m.add_function(wrap_pyfunction!(nts_markov_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    Ok(())
}
