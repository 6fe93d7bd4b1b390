//! Python bindings for the conserva library.
//!
//! The module mirrors the Rust API at the granularity a notebook wants:
//! parse PDFs into object graphs, extract structural paths, probe documents
//! for conserved features against a rule oracle, unify the per-seed results,
//! map them onto other feature vocabularies, and train/attack/retrain linear
//! classifiers. Structured results cross the boundary as plain dicts and
//! lists with the same field names the CLI reports use, so configuration
//! dicts (attack and training parameters) are interchangeable between the
//! two front ends.

use std::collections::BTreeSet;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyBytes, PyDict, PyList, PyString, PyTuple};
use serde_json::Value as JsonValue;

use conserva_core::features::{
    build_path_space, default_count_defs, extract_paths, parse_count_defs, parse_rules,
    vectorize, FeatureKind, FeatureSpace, FeatureVector, StructuralPath,
};
use conserva_core::learn::{
    evaluate_model, evasion_robustness, retrain_iterative, roc_auc, run_attack, train,
    AttackConfig, ConfiguredAttack, Dataset, Label, LearnError, LinearModel, Regularizer,
    RetrainParams, TrainParams,
};
use conserva_core::mutation::{delete_path, probe_dependents, replace_path};
use conserva_core::oracle::{MaliceOracle, Outcome, RuleOracle, SignatureRule};
use conserva_core::pdf::{parse_pdf as parse_pdf_bytes, serialize_pdf, ObjectGraph, PdfObject};
use conserva_core::pipeline::{
    conserve_seed, forward_elimination as unify, map_to_counts as counts_mapping,
    map_to_hidost as hidost_mapping, Beta, ConservedSets, ProbeParams, SeedRecord,
};

fn val_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn learn_err(e: LearnError) -> PyErr {
    match e {
        LearnError::UnknownFeature(_) | LearnError::SpaceMismatch { .. } => val_err(e),
        _ => run_err(e),
    }
}

// ---- JSON <-> Python value plumbing -------------------------------------------

fn json_to_py<'py>(py: Python<'py>, value: &JsonValue) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        JsonValue::Null => py.None().into_bound(py),
        JsonValue::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        JsonValue::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        JsonValue::String(s) => PyString::new(py, s).into_any(),
        JsonValue::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        JsonValue::Object(map) => {
            let dict = PyDict::new(py);
            for (key, item) in map {
                dict.set_item(key, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn py_to_json(value: &Bound<'_, PyAny>) -> PyResult<JsonValue> {
    if value.is_none() {
        return Ok(JsonValue::Null);
    }
    if let Ok(b) = value.cast::<PyBool>() {
        return Ok(JsonValue::Bool(b.is_true()));
    }
    if let Ok(i) = value.extract::<i64>() {
        return Ok(JsonValue::from(i));
    }
    if let Ok(f) = value.extract::<f64>() {
        return Ok(serde_json::Number::from_f64(f)
            .map(JsonValue::Number)
            .unwrap_or(JsonValue::Null));
    }
    if let Ok(s) = value.extract::<String>() {
        return Ok(JsonValue::String(s));
    }
    if let Ok(dict) = value.cast::<PyDict>() {
        let mut map = serde_json::Map::new();
        for (key, item) in dict.iter() {
            map.insert(key.extract::<String>()?, py_to_json(&item)?);
        }
        return Ok(JsonValue::Object(map));
    }
    // Lists, tuples, sets and frozensets all become JSON arrays.
    if let Ok(iter) = value.try_iter() {
        if value.cast::<PyList>().is_ok()
            || value.cast::<PyTuple>().is_ok()
            || value.hasattr("__contains__")?
        {
            let mut items = Vec::new();
            for item in iter {
                items.push(py_to_json(&item?)?);
            }
            return Ok(JsonValue::Array(items));
        }
    }
    Err(PyTypeError::new_err(format!(
        "cannot convert {} to a JSON value",
        value.get_type().name()?
    )))
}

fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let json = serde_json::to_value(value).map_err(run_err)?;
    Ok(json_to_py(py, &json)?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_value(py_to_json(value)?).map_err(val_err)
}

fn beta_from(value: Option<&Bound<'_, PyAny>>) -> PyResult<Beta> {
    match value {
        None => Ok(Beta::default()),
        Some(v) => from_py(v),
    }
}

fn attack_from(value: Option<&Bound<'_, PyAny>>) -> PyResult<AttackConfig> {
    match value {
        None => Ok(AttackConfig::default()),
        Some(v) => from_py(v),
    }
}

/// Training parameters arrive as a dict with any subset of the fields;
/// omissions fall back to the defaults.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialTrainParams {
    reg: Option<Regularizer>,
    epochs: Option<usize>,
    eta0: Option<f64>,
    decay: Option<f64>,
    rng_seed: Option<u64>,
}

fn train_params_from(value: Option<&Bound<'_, PyAny>>) -> PyResult<TrainParams> {
    let partial = match value {
        None => PartialTrainParams::default(),
        Some(v) => from_py(v)?,
    };
    let defaults = TrainParams::default();
    Ok(TrainParams {
        reg: partial.reg.unwrap_or(defaults.reg),
        epochs: partial.epochs.unwrap_or(defaults.epochs),
        eta0: partial.eta0.unwrap_or(defaults.eta0),
        decay: partial.decay.unwrap_or(defaults.decay),
        rng_seed: partial.rng_seed.unwrap_or(defaults.rng_seed),
    })
}

fn parse_structural_path(text: &str) -> PyResult<StructuralPath> {
    StructuralPath::parse(text).map_err(val_err)
}

fn rendered(paths: impl IntoIterator<Item = StructuralPath>) -> Vec<String> {
    paths.into_iter().map(|p| p.render()).collect()
}

// ---- classes --------------------------------------------------------------------

/// A parsed PDF document: the object graph reachable from its catalog.
#[pyclass(name = "ObjectGraph", module = "conserva_py", from_py_object)]
#[derive(Clone)]
struct PyObjectGraph {
    inner: ObjectGraph,
}

#[pymethods]
impl PyObjectGraph {
    /// Serializes the graph back into PDF bytes.
    fn serialize<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = serialize_pdf(&self.inner).map_err(run_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// All structural paths present in the document, rendered and sorted.
    #[pyo3(signature = (depth_limit = 10))]
    fn paths(&self, depth_limit: usize) -> Vec<String> {
        rendered(extract_paths(&self.inner, depth_limit))
    }

    /// Removes every site of the path. Returns the mutated graph and the
    /// sorted list of paths that flipped from present to absent.
    #[pyo3(signature = (path, depth_limit = 10))]
    fn delete_path(&self, path: &str, depth_limit: usize) -> PyResult<(Self, Vec<String>)> {
        let target = parse_structural_path(path)?;
        let outcome = delete_path(&self.inner, &target, depth_limit).map_err(val_err)?;
        Ok((PyObjectGraph { inner: outcome.graph }, rendered(outcome.flipped)))
    }

    /// Replaces the value at every site of the path with a text literal.
    /// Returns the mutated graph and the paths that flipped off anyway.
    #[pyo3(signature = (path, text, depth_limit = 10))]
    fn replace_path(
        &self,
        path: &str,
        text: &str,
        depth_limit: usize,
    ) -> PyResult<(Self, Vec<String>)> {
        let target = parse_structural_path(path)?;
        let payload = PdfObject::Text(text.as_bytes().to_vec());
        let outcome =
            replace_path(&self.inner, &target, &payload, depth_limit).map_err(val_err)?;
        Ok((PyObjectGraph { inner: outcome.graph }, rendered(outcome.flipped)))
    }

    /// Paths (other than the target itself) that vanish when the target is
    /// deleted.
    #[pyo3(signature = (path, depth_limit = 10))]
    fn dependents(&self, path: &str, depth_limit: usize) -> PyResult<Vec<String>> {
        let target = parse_structural_path(path)?;
        let deps = probe_dependents(&self.inner, &target, depth_limit).map_err(val_err)?;
        Ok(rendered(deps))
    }

    fn __repr__(&self) -> String {
        format!("ObjectGraph({} paths)", extract_paths(&self.inner, 10).len())
    }
}

/// An ordered binary feature vocabulary.
#[pyclass(name = "FeatureSpace", module = "conserva_py")]
struct PyFeatureSpace {
    inner: Arc<FeatureSpace>,
}

#[pymethods]
impl PyFeatureSpace {
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            FeatureKind::Sl2013 => "sl2013",
            FeatureKind::Hidost => "hidost",
            FeatureKind::PdfRateB => "counts",
        }
    }

    fn sha256(&self) -> String {
        self.inner.sha256_hex()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Projects a document onto the space. Returns the bit row and the
    /// number of extracted paths that fell outside the vocabulary.
    #[pyo3(signature = (graph, depth_limit = 10))]
    fn vectorize(&self, graph: &PyObjectGraph, depth_limit: usize) -> (Vec<bool>, usize) {
        let (vector, ignored) = vectorize(&extract_paths(&graph.inner, depth_limit), &self.inner);
        (vector.bits().to_vec(), ignored)
    }

    fn __repr__(&self) -> String {
        format!("FeatureSpace({}, {} features)", self.kind(), self.inner.len())
    }
}

/// A linear classifier over a feature space; scores at or above zero are
/// classified malicious.
#[pyclass(name = "LinearModel", module = "conserva_py")]
struct PyLinearModel {
    inner: LinearModel,
    space: Arc<FeatureSpace>,
}

impl PyLinearModel {
    fn vector(&self, bits: Vec<bool>) -> PyResult<FeatureVector> {
        if bits.len() != self.space.len() {
            return Err(PyValueError::new_err(format!(
                "row has {} bits, space has {}",
                bits.len(),
                self.space.len()
            )));
        }
        Ok(FeatureVector::new(self.space.clone(), bits))
    }
}

#[pymethods]
impl PyLinearModel {
    fn score(&self, bits: Vec<bool>) -> PyResult<f64> {
        let x = self.vector(bits)?;
        self.inner.score(&x).map_err(learn_err)
    }

    fn is_malicious(&self, bits: Vec<bool>) -> PyResult<bool> {
        Ok(self.score(bits)? >= 0.0)
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn bias(&self) -> f64 {
        self.inner.bias()
    }

    /// Features whose trained weight is meaningfully non-zero.
    fn selected_features(&self) -> Vec<String> {
        self.inner.selected_features().into_iter().collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Loads a model serialized by `to_json`, validating it against the
    /// given space.
    #[staticmethod]
    fn from_json(text: &str, space: &PyFeatureSpace) -> PyResult<Self> {
        let inner = LinearModel::from_json(text, space.inner.clone()).map_err(learn_err)?;
        Ok(PyLinearModel { inner, space: space.inner.clone() })
    }

    fn __repr__(&self) -> String {
        format!("LinearModel({} features)", self.space.len())
    }
}

/// A deterministic malice oracle driven by signature rules (JSON list).
#[pyclass(name = "RuleOracle", module = "conserva_py")]
struct PyRuleOracle {
    inner: Arc<RuleOracle>,
}

#[pymethods]
impl PyRuleOracle {
    #[new]
    fn new(rules_json: &str) -> PyResult<Self> {
        let rules: Vec<SignatureRule> = serde_json::from_str(rules_json).map_err(val_err)?;
        Ok(PyRuleOracle { inner: Arc::new(RuleOracle::new(rules)) })
    }

    /// Evaluates a document. Returns {"outcome": ..., "signatures": [...]}.
    fn verdict(&self, py: Python<'_>, graph: &PyObjectGraph) -> PyResult<Py<PyAny>> {
        let bytes = serialize_pdf(&graph.inner).map_err(run_err)?;
        let verdict = self.inner.evaluate(&bytes).map_err(run_err)?;
        let dict = PyDict::new(py);
        let outcome = match verdict.outcome {
            Outcome::Malicious => "malicious",
            Outcome::Benign => "benign",
        };
        dict.set_item("outcome", outcome)?;
        dict.set_item("signatures", verdict.signatures)?;
        Ok(dict.into_any().unbind())
    }
}

// ---- functions --------------------------------------------------------------------

/// Parses PDF bytes into an object graph.
#[pyfunction]
fn parse_pdf(data: &[u8]) -> PyResult<PyObjectGraph> {
    Ok(PyObjectGraph { inner: parse_pdf_bytes(data).map_err(val_err)? })
}

/// Writes the built-in demonstration corpus under `path` and returns the
/// locations of its parts.
#[pyfunction]
fn write_demo_corpus(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let paths = conserva_core::corpus::write_demo_corpus(std::path::Path::new(path))
        .map_err(run_err)?;
    let dict = PyDict::new(py);
    dict.set_item("seeds_dir", paths.seeds_dir.to_string_lossy())?;
    dict.set_item("benign_dir", paths.benign_dir.to_string_lossy())?;
    dict.set_item("donor", paths.donor.to_string_lossy())?;
    dict.set_item("rules", paths.rules.to_string_lossy())?;
    Ok(dict.into_any().unbind())
}

/// Builds the structural-path vocabulary over a set of documents.
#[pyfunction]
#[pyo3(signature = (graphs, depth_limit = 10))]
fn build_space(graphs: Vec<PyObjectGraph>, depth_limit: usize) -> PyFeatureSpace {
    let inner: Vec<ObjectGraph> = graphs.into_iter().map(|g| g.inner).collect();
    PyFeatureSpace { inner: Arc::new(build_path_space(&inner, depth_limit)) }
}

/// Probes each seed document for conserved features (deletion pass, then
/// replacement against the donor) and unifies the per-seed results.
///
/// `seeds` is a list of `(id, ObjectGraph)` pairs. Seeds the oracle does not
/// flag malicious at baseline are skipped and reported. Returns
/// {"per_seed": [...], "uniform": {...}, "skipped": [ids]}.
#[pyfunction]
#[pyo3(signature = (seeds, donor, oracle, beta = None, depth_limit = 10, workers = 2))]
fn conserve(
    py: Python<'_>,
    seeds: Vec<(String, PyObjectGraph)>,
    donor: &PyObjectGraph,
    oracle: &PyRuleOracle,
    beta: Option<&Bound<'_, PyAny>>,
    depth_limit: usize,
    workers: usize,
) -> PyResult<Py<PyAny>> {
    let beta = beta_from(beta)?;
    let records: Vec<SeedRecord> = seeds
        .into_iter()
        .map(|(id, graph)| SeedRecord { id, graph: graph.inner })
        .collect();
    let graphs: Vec<ObjectGraph> = records.iter().map(|r| r.graph.clone()).collect();
    let space = Arc::new(build_path_space(&graphs, depth_limit));
    let params = ProbeParams { depth_limit, workers };

    let mut per_seed: Vec<ConservedSets> = Vec::new();
    let mut skipped: Vec<String> = Vec::new();
    for record in &records {
        match conserve_seed(record, &donor.inner, &*oracle.inner, &space, params) {
            Ok(sets) => per_seed.push(sets),
            Err(conserva_core::pipeline::PipelineError::SeedNotMalicious { seed_id }) => {
                skipped.push(seed_id);
            }
            Err(e) => return Err(run_err(e)),
        }
    }
    if per_seed.is_empty() {
        return Err(PyRuntimeError::new_err(
            "no seed was flagged malicious at baseline; nothing to probe",
        ));
    }
    let uniform = unify(&per_seed, beta);

    let dict = PyDict::new(py);
    dict.set_item("per_seed", json_to_py(py, &serde_json::to_value(&per_seed).map_err(run_err)?)?)?;
    dict.set_item("uniform", json_to_py(py, &serde_json::to_value(&uniform).map_err(run_err)?)?)?;
    dict.set_item("skipped", skipped)?;
    Ok(dict.into_any().unbind())
}

/// Unifies per-seed conserved sets (dicts with keys seed/S/O/inconclusive/D)
/// into one set by threshold elimination.
#[pyfunction]
#[pyo3(signature = (per_seed, beta = None))]
fn forward_elimination(
    py: Python<'_>,
    per_seed: &Bound<'_, PyAny>,
    beta: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let sets: Vec<ConservedSets> = from_py(per_seed)?;
    let result = unify(&sets, beta_from(beta)?);
    to_py(py, &result)
}

/// Maps structural paths onto the consolidated-path vocabulary. Returns
/// {"features": [...], "sources": {...}, "collisions": {...}}.
#[pyfunction]
#[pyo3(signature = (paths, rules_text = ""))]
fn map_to_hidost(py: Python<'_>, paths: Vec<String>, rules_text: &str) -> PyResult<Py<PyAny>> {
    let rules = parse_rules(rules_text).map_err(val_err)?;
    let set: BTreeSet<String> = paths.into_iter().collect();
    let mapping = hidost_mapping(&set, &rules).map_err(val_err)?;
    to_py(py, &mapping)
}

/// Projects per-seed conserved path sets onto binarized count features by
/// re-deleting each conserved path and watching which counters fall, then
/// unifies the projected sets.
#[pyfunction]
#[pyo3(signature = (seeds, per_seed, beta = None, depth_limit = 10, defs_json = None))]
fn map_to_counts(
    py: Python<'_>,
    seeds: Vec<(String, PyObjectGraph)>,
    per_seed: &Bound<'_, PyAny>,
    beta: Option<&Bound<'_, PyAny>>,
    depth_limit: usize,
    defs_json: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let records: Vec<SeedRecord> = seeds
        .into_iter()
        .map(|(id, graph)| SeedRecord { id, graph: graph.inner })
        .collect();
    let sets: Vec<ConservedSets> = from_py(per_seed)?;
    let defs = match defs_json {
        Some(text) => parse_count_defs(text).map_err(val_err)?,
        None => default_count_defs(),
    };
    let mapping =
        counts_mapping(&records, &sets, &defs, beta_from(beta)?, depth_limit).map_err(run_err)?;
    to_py(py, &mapping)
}

fn dataset_from(
    space: &PyFeatureSpace,
    rows: Vec<Vec<bool>>,
    labels: Vec<i64>,
) -> PyResult<Dataset> {
    if rows.len() != labels.len() {
        return Err(PyValueError::new_err(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let mut data = Dataset::new(space.inner.clone());
    for (row, label) in rows.into_iter().zip(labels) {
        let label = match label {
            1 => Label::Malicious,
            0 => Label::Benign,
            other => {
                return Err(PyValueError::new_err(format!(
                    "labels must be 1 (malicious) or 0 (benign), got {other}"
                )))
            }
        };
        data.push_bits(row, label).map_err(learn_err)?;
    }
    Ok(data)
}

/// Trains a linear classifier. `params` is an optional dict like
/// {"reg": {"kind": "l2", "c": 4.0}, "epochs": 60, "rng_seed": 7}.
#[pyfunction]
#[pyo3(signature = (space, rows, labels, params = None))]
fn train_model(
    space: &PyFeatureSpace,
    rows: Vec<Vec<bool>>,
    labels: Vec<i64>,
    params: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyLinearModel> {
    let data = dataset_from(space, rows, labels)?;
    let params = train_params_from(params)?;
    let inner = train(&data, &params).map_err(learn_err)?;
    Ok(PyLinearModel { inner, space: space.inner.clone() })
}

/// Runs one evasion attack against a malicious row. `config` is an optional
/// dict like {"kind": "coordinate_greedy", "lambda": 0.005, "restarts": 8,
/// "frozen": [...], "rng_seed": 0}; "kind" may also be "salt_pepper" with
/// "max_draws" and "epsilon". Returns the variant row and its scores.
#[pyfunction]
#[pyo3(signature = (model, bits, config = None))]
fn attack(
    py: Python<'_>,
    model: &PyLinearModel,
    bits: Vec<bool>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let config = attack_from(config)?;
    let x = model.vector(bits)?;
    let result = run_attack(&model.inner, &x, &config).map_err(learn_err)?;
    let dict = PyDict::new(py);
    dict.set_item("variant", result.variant.bits().to_vec())?;
    dict.set_item("score", result.score)?;
    dict.set_item("objective", result.objective)?;
    dict.set_item("flips", result.flips)?;
    dict.set_item("evaded", result.evaded)?;
    Ok(dict.into_any().unbind())
}

/// Attacks every row and reports {"total", "evaded", "evasion_rate",
/// "mean_flips"}. Row `i` uses RNG stream `rng_seed + i`.
#[pyfunction]
#[pyo3(signature = (model, rows, config = None))]
fn robustness(
    py: Python<'_>,
    model: &PyLinearModel,
    rows: Vec<Vec<bool>>,
    config: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let config = attack_from(config)?;
    let vectors: Vec<FeatureVector> =
        rows.into_iter().map(|bits| model.vector(bits)).collect::<PyResult<_>>()?;
    let generator = ConfiguredAttack { config };
    let report = evasion_robustness(&model.inner, &vectors, &generator).map_err(learn_err)?;
    to_py(py, &report)
}

/// Iteratively hardens a model: attack the malicious rows, add evading
/// variants to the training set as malicious, retrain, repeat. Returns
/// (model, {"iterations": [...], "final_dataset_size": n}).
#[pyfunction]
#[pyo3(signature = (
    space, rows, labels, malicious,
    attack = None, params = None, max_iterations = 10, stop_when_no_new = true,
))]
#[allow(clippy::too_many_arguments)]
fn retrain(
    py: Python<'_>,
    space: &PyFeatureSpace,
    rows: Vec<Vec<bool>>,
    labels: Vec<i64>,
    malicious: Vec<Vec<bool>>,
    attack: Option<&Bound<'_, PyAny>>,
    params: Option<&Bound<'_, PyAny>>,
    max_iterations: usize,
    stop_when_no_new: bool,
) -> PyResult<(PyLinearModel, Py<PyAny>)> {
    let data = dataset_from(space, rows, labels)?;
    let seeds: Vec<FeatureVector> = malicious
        .into_iter()
        .map(|bits| {
            if bits.len() != space.inner.len() {
                return Err(PyValueError::new_err(format!(
                    "row has {} bits, space has {}",
                    bits.len(),
                    space.inner.len()
                )));
            }
            Ok(FeatureVector::new(space.inner.clone(), bits))
        })
        .collect::<PyResult<_>>()?;
    let generator = ConfiguredAttack { config: attack_from(attack)? };
    let train_params = train_params_from(params)?;
    let retrain_params = RetrainParams { max_iterations, stop_when_no_new };

    let outcome = retrain_iterative(&data, &seeds, &generator, &train_params, &retrain_params)
        .map_err(learn_err)?;
    let info = PyDict::new(py);
    info.set_item(
        "iterations",
        json_to_py(py, &serde_json::to_value(&outcome.iterations).map_err(run_err)?)?,
    )?;
    info.set_item("final_dataset_size", outcome.final_dataset_size)?;
    let model = PyLinearModel { inner: outcome.model, space: space.inner.clone() };
    Ok((model, info.into_any().unbind()))
}

/// Accuracy, AUC and the confusion counts of a model on labeled rows.
#[pyfunction]
fn evaluate(
    py: Python<'_>,
    model: &PyLinearModel,
    rows: Vec<Vec<bool>>,
    labels: Vec<i64>,
) -> PyResult<Py<PyAny>> {
    let space = PyFeatureSpace { inner: model.space.clone() };
    let data = dataset_from(&space, rows, labels)?;
    let report = evaluate_model(&model.inner, &data).map_err(learn_err)?;
    to_py(py, &report)
}

/// Area under the ROC curve of (score, label) pairs; labels are 1 malicious,
/// 0 benign. Equals pairwise concordance with ties counted one half.
#[pyfunction]
fn auc(scored: Vec<(f64, i64)>) -> PyResult<f64> {
    let scored: Vec<(f64, Label)> = scored
        .into_iter()
        .map(|(score, label)| {
            let label = match label {
                1 => Ok(Label::Malicious),
                0 => Ok(Label::Benign),
                other => Err(PyValueError::new_err(format!(
                    "labels must be 1 (malicious) or 0 (benign), got {other}"
                ))),
            }?;
            Ok((score, label))
        })
        .collect::<PyResult<_>>()?;
    roc_auc(&scored).map_err(learn_err)
}

#[pymodule]
fn conserva_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObjectGraph>()?;
    m.add_class::<PyFeatureSpace>()?;
    m.add_class::<PyLinearModel>()?;
    m.add_class::<PyRuleOracle>()?;
    m.add_function(wrap_pyfunction!(parse_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(write_demo_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(build_space, m)?)?;
    m.add_function(wrap_pyfunction!(conserve, m)?)?;
    m.add_function(wrap_pyfunction!(forward_elimination, m)?)?;
    m.add_function(wrap_pyfunction!(map_to_hidost, m)?)?;
    m.add_function(wrap_pyfunction!(map_to_counts, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(robustness, m)?)?;
    m.add_function(wrap_pyfunction!(retrain, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    Ok(())
}
