//! Python bindings for tempclust.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tempclust::augment::AugmentConfig;
use tempclust::coarsen::{CoarsenMode, CoarseningSpec};
use tempclust::codec::{FeatureCodec, Schema};
use tempclust::model::{MreConfig, TrainConfig, DEFAULT_RESOLUTIONS};
use tempclust::records::{format_record, parse_record, SequenceRecord};
use tempclust::sequence::{validate, Event, Label, LabeledSequence};

fn err(e: tempclust::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label_from_py(obj: &Bound<'_, PyAny>) -> PyResult<Label> {
    if let Ok(v) = obj.extract::<Vec<u8>>() {
        if v.iter().any(|&b| b > 1) {
            return Err(PyValueError::new_err("binary label entries must be 0 or 1"));
        }
        return Ok(Label::Binary(v));
    }
    obj.extract::<f64>().map(Label::Real)
}

fn label_to_py(py: Python<'_>, label: &Label) -> PyResult<Py<PyAny>> {
    Ok(match label {
        Label::Binary(v) => v.clone().into_pyobject(py)?.into_any().unbind(),
        Label::Real(y) => y.into_pyobject(py)?.into_any().unbind(),
    })
}

/// An event sequence with an optional label.
#[pyclass(name = "EventSequence", module = "tempclust", skip_from_py_object)]
#[derive(Clone)]
struct PySequence {
    inner: SequenceRecord,
}

#[pymethods]
impl PySequence {
    /// `values[i][j]` is `None` where variable `j` of event `i` is missing.
    #[new]
    #[pyo3(signature = (id, times, values, counts=None, label=None))]
    fn new(
        id: String,
        times: Vec<f64>,
        values: Vec<Vec<Option<f64>>>,
        counts: Option<Vec<u32>>,
        label: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        if values.len() != times.len() {
            return Err(PyValueError::new_err("times and values differ in length"));
        }
        let counts = counts.unwrap_or_else(|| vec![1; times.len()]);
        if counts.len() != times.len() {
            return Err(PyValueError::new_err("times and counts differ in length"));
        }
        let events = times
            .iter()
            .zip(&values)
            .zip(&counts)
            .map(|((&t, x), &c)| Event::from_options(t, x, c))
            .collect();
        let sequence = tempclust::sequence::EventSequence::new(id, events);
        let violations = validate(&sequence);
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(PyValueError::new_err(list.join("; ")));
        }
        let label = label.map(label_from_py).transpose()?;
        Ok(Self { inner: SequenceRecord { sequence, label } })
    }

    /// Parses one line of the JSON record format.
    #[staticmethod]
    fn from_json(line: &str) -> PyResult<Self> {
        parse_record(line, 1).map(|inner| Self { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        format_record(&self.inner)
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.sequence.id
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.sequence.times().collect()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<Option<f64>>> {
        self.inner.sequence.events.iter().map(|e| (0..e.dim()).map(|j| e.value(j)).collect()).collect()
    }

    #[getter]
    fn counts(&self) -> Vec<u32> {
        self.inner.sequence.events.iter().map(|e| e.c).collect()
    }

    #[getter]
    fn label(&self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        self.inner.label.as_ref().map(|l| label_to_py(py, l)).transpose()
    }

    fn __len__(&self) -> usize {
        self.inner.sequence.len()
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("EventSequence(id={:?}, events={})", self.inner.sequence.id, self.inner.sequence.len())
    }
}

impl PySequence {
    fn wrap(&self, sequence: tempclust::sequence::EventSequence) -> Self {
        Self { inner: self.inner.with_sequence(sequence) }
    }
}

fn mode(name: &str) -> PyResult<CoarsenMode> {
    name.parse().map_err(err)
}

/// Coarsens to `ceil(p T)` events with grid&count or cluster&count.
#[pyfunction]
#[pyo3(signature = (seq, mode_name, p, interval=None))]
fn coarsen(seq: PyRef<'_, PySequence>, mode_name: &str, p: f64, interval: Option<(f64, f64)>) -> PyResult<PySequence> {
    let spec = CoarseningSpec { mode: mode(mode_name)?, p, interval, snap_to_grid: false };
    tempclust::coarsen::coarsen(&seq.inner.sequence, &spec).map(|s| seq.wrap(s)).map_err(err)
}

/// One draw of fast augmentation from stream `stream` of `seed`.
#[pyfunction]
#[pyo3(signature = (seq, p_high, seed, weighted=false, stream=0))]
fn fast_augment(seq: PyRef<'_, PySequence>, p_high: f64, seed: u64, weighted: bool, stream: u64) -> PyResult<PySequence> {
    let cfg = AugmentConfig { p_high, weighted, rng_seed: seed };
    cfg.validate().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    tempclust::augment::fast_augment(&seq.inner.sequence, &cfg, &mut rng).map(|s| seq.wrap(s)).map_err(err)
}

/// Optimal contiguous 1-D k-means of sorted points: (assignments, cost).
#[pyfunction]
fn kmeans1d(points: Vec<f64>, k: usize) -> PyResult<(Vec<usize>, f64)> {
    tempclust::kmeans::kmeans1d_exact(&points, k).map(|c| (c.assignments, c.cost)).map_err(err)
}

#[pyclass(name = "FeatureCodec", module = "tempclust")]
struct PyCodec {
    inner: FeatureCodec,
}

#[pymethods]
impl PyCodec {
    /// Fits on training sequences; `schema` is the JSON schema document,
    /// all-real when omitted.
    #[staticmethod]
    #[pyo3(signature = (sequences, schema=None))]
    fn fit(sequences: Vec<PyRef<'_, PySequence>>, schema: Option<&str>) -> PyResult<Self> {
        let first = sequences.first().ok_or_else(|| PyValueError::new_err("no sequences"))?;
        let schema = match schema {
            Some(text) => Schema::from_json(text).map_err(err)?,
            None => Schema::all_real(first.inner.sequence.dim()),
        };
        FeatureCodec::fit(&schema, sequences.iter().map(|s| &s.inner.sequence))
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        FeatureCodec::from_text(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    /// Feature matrix as a list of rows.
    fn featurize(&self, seq: PyRef<'_, PySequence>) -> PyResult<Vec<Vec<f64>>> {
        let x = self.inner.featurize(&seq.inner.sequence).map_err(err)?;
        Ok(x.rows().into_iter().map(|r| r.to_vec()).collect())
    }
}

#[pyclass(name = "Model", module = "tempclust")]
struct PyModel {
    inner: tempclust::model::Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        tempclust::model::Model::from_text(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn predict(&self, seq: PyRef<'_, PySequence>, codec: PyRef<'_, PyCodec>) -> PyResult<Vec<f64>> {
        self.inner.predict(&seq.inner.sequence, &codec.inner).map_err(err)
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.task().to_string()
    }
}

fn labeled(seqs: &[PyRef<'_, PySequence>]) -> PyResult<Vec<LabeledSequence>> {
    seqs.iter()
        .map(|s| match &s.inner.label {
            Some(label) => Ok(LabeledSequence { sequence: s.inner.sequence.clone(), label: label.clone() }),
            None => Err(PyValueError::new_err(format!("sequence {} has no label", s.inner.sequence.id))),
        })
        .collect()
}

/// Trains a predictor; returns the model and the per-epoch
/// `(train_loss, val_loss)` trace.
#[pyfunction]
#[pyo3(signature = (
    train_set, codec, seed, val_set=Vec::new(), epochs=50, learning_rate=0.05, momentum=0.9,
    batch_size=32, hidden=64, augment_p_high=None, weighted=false, mre=None, resolutions=None
))]
#[allow(clippy::too_many_arguments)]
fn train(
    train_set: Vec<PyRef<'_, PySequence>>,
    codec: PyRef<'_, PyCodec>,
    seed: u64,
    val_set: Vec<PyRef<'_, PySequence>>,
    epochs: usize,
    learning_rate: f64,
    momentum: f64,
    batch_size: usize,
    hidden: usize,
    augment_p_high: Option<f64>,
    weighted: bool,
    mre: Option<&str>,
    resolutions: Option<Vec<f64>>,
) -> PyResult<(PyModel, Vec<(f64, Option<f64>)>)> {
    let cfg = TrainConfig {
        epochs,
        learning_rate,
        momentum,
        batch_size,
        hidden,
        seed,
        augment: augment_p_high.map(|p_high| AugmentConfig { p_high, weighted, rng_seed: seed }),
        mre: mre
            .map(|m| -> PyResult<MreConfig> {
                Ok(MreConfig {
                    mode: mode(m)?,
                    resolutions: resolutions.unwrap_or_else(|| DEFAULT_RESOLUTIONS.to_vec()),
                    interval: None,
                })
            })
            .transpose()?,
    };
    let out = tempclust::model::train(&labeled(&train_set)?, &labeled(&val_set)?, &codec.inner, &cfg).map_err(err)?;
    let trace = out.trace.iter().map(|s| (s.train_loss, s.val_loss)).collect();
    Ok((PyModel { inner: out.model }, trace))
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    tempclust::eval::roc_auc(&scores, &labels).map_err(err)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    tempclust::eval::average_precision(&scores, &labels).map_err(err)
}

/// Bootstrap `(mean, std_error)` of `roc_auc` or `average_precision`.
#[pyfunction]
#[pyo3(signature = (metric, scores, labels, runs=1000, seed=0))]
fn bootstrap(metric: &str, scores: Vec<f64>, labels: Vec<f64>, runs: usize, seed: u64) -> PyResult<(f64, f64)> {
    let f = match metric {
        "roc_auc" => tempclust::eval::roc_auc,
        "average_precision" => tempclust::eval::average_precision,
        other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    };
    let b = tempclust::eval::bootstrap(f, &scores, &labels, runs, seed).map_err(err)?;
    Ok((b.mean, b.std_error))
}

/// Generates `(train, val, test)` lists from a JSON configuration.
#[pyfunction]
#[pyo3(signature = (config="{}", seed=0))]
fn synth(config: &str, seed: u64) -> PyResult<(Vec<PySequence>, Vec<PySequence>, Vec<PySequence>)> {
    let cfg = tempclust::synth::SynthConfig { seed, ..tempclust::synth::SynthConfig::from_json(config).map_err(err)? };
    let d = tempclust::synth::generate(&cfg).map_err(err)?;
    let wrap = |s: tempclust::synth::Split| -> Vec<PySequence> {
        s.items.into_iter().map(|l| PySequence { inner: l.into() }).collect()
    };
    Ok((wrap(d.train), wrap(d.val), wrap(d.test)))
}

#[pymodule(name = "tempclust")]
fn tempclust_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySequence>()?;
    m.add_class::<PyCodec>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(coarsen, m)?)?;
    m.add_function(wrap_pyfunction!(fast_augment, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans1d, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    Ok(())
}
