//! Python bindings for the crossmoral toolkit.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use crossmoral_core::corpus::{self, Document, FoundationLabel, Prediction as CorePrediction};
use crossmoral_core::embed::{self, EmbeddingStore as CoreStore, MicroFrame};
use crossmoral_core::eval::{self, ClassPrior, Scope};
use crossmoral_core::experiments::{self, RunConfig};
use crossmoral_core::lexicon::{self, Lexicon as CoreLexicon, LexiconKind};
use crossmoral_core::llm;
use crossmoral_core::segment::{self, TokenSequence, Vocabulary};
use crossmoral_core::Error;

create_exception!(crossmoral, CrossmoralError, PyException);
create_exception!(crossmoral, ParseError, CrossmoralError);
create_exception!(crossmoral, LeakageError, CrossmoralError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e @ Error::Parse { .. } => ParseError::new_err(e.to_string()),
        e @ Error::ShotLeakage(_) => LeakageError::new_err(e.to_string()),
        e @ (Error::UnknownLabel { .. } | Error::InvalidArgument(_) | Error::Config(_)) => {
            PyValueError::new_err(e.to_string())
        }
        e => CrossmoralError::new_err(e.to_string()),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| value_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, value_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| CrossmoralError::new_err(e.to_string()))?;
    value_to_py(py, &value)
}

fn label(s: &str) -> PyResult<FoundationLabel> {
    s.parse().map_err(|e: corpus::ParseLabelError| PyValueError::new_err(e.to_string()))
}

fn scope(s: &str) -> PyResult<Scope> {
    match s {
        "covered_only" | "covered" => Ok(Scope::CoveredOnly),
        "all" => Ok(Scope::All),
        other => Err(PyValueError::new_err(format!("unknown scope {other:?}"))),
    }
}

/// One classifier output for one document.
#[pyclass(module = "crossmoral", name = "Prediction", from_py_object)]
#[derive(Clone)]
struct Prediction {
    inner: CorePrediction,
}

#[pymethods]
impl Prediction {
    #[new]
    #[pyo3(signature = (doc_id, labels, approach = "python", scores = None, rationale = None))]
    fn new(
        doc_id: String,
        labels: Vec<String>,
        approach: &str,
        scores: Option<BTreeMap<String, f64>>,
        rationale: Option<String>,
    ) -> PyResult<Self> {
        let labels = labels.iter().map(|l| label(l)).collect::<PyResult<Vec<_>>>()?;
        let mut p = CorePrediction::new(doc_id, labels, approach);
        if let Some(s) = scores {
            let s = s
                .into_iter()
                .map(|(k, v)| Ok((label(&k)?, v)))
                .collect::<PyResult<BTreeMap<_, _>>>()?;
            p = p.with_scores(s);
        }
        if let Some(r) = rationale {
            p = p.with_rationale(r);
        }
        p.validate().map_err(py_err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn labels(&self) -> Vec<&'static str> {
        self.inner.labels.iter().map(|l| l.as_str()).collect()
    }

    #[getter]
    fn approach(&self) -> &str {
        &self.inner.approach
    }

    #[getter]
    fn rationale(&self) -> Option<&str> {
        self.inner.rationale.as_deref()
    }

    #[getter]
    fn scores(&self) -> Option<BTreeMap<&'static str, f64>> {
        self.inner
            .scores
            .as_ref()
            .map(|s| s.iter().map(|(k, v)| (k.as_str(), *v)).collect())
    }

    fn is_covered(&self) -> bool {
        self.inner.is_covered()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Prediction({:?}, {:?})", self.inner.doc_id, self.labels())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

fn wrap(preds: Vec<CorePrediction>) -> Vec<Prediction> {
    preds.into_iter().map(|inner| Prediction { inner }).collect()
}

fn unwrap(preds: Vec<Prediction>) -> Vec<CorePrediction> {
    preds.into_iter().map(|p| p.inner).collect()
}

/// A labeled corpus loaded from CSV or JSONL.
#[pyclass(module = "crossmoral", name = "Dataset")]
struct Dataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (path, language = None))]
    fn load(path: PathBuf, language: Option<&str>) -> PyResult<Self> {
        let inner = experiments::load_data(&path, None, language).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// Builds a dataset from `(id, text, label)` triples.
    #[staticmethod]
    #[pyo3(signature = (name, records, language = "en"))]
    fn from_records(name: &str, records: Vec<(String, String, String)>, language: &str) -> PyResult<Self> {
        let docs = records
            .into_iter()
            .map(|(id, text, l)| Ok(Document::new(id, text, language, label(&l)?, name)))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: corpus::Dataset::new(name, docs).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.documents().iter().map(|d| d.id.clone()).collect()
    }

    fn class_counts(&self) -> BTreeMap<&'static str, usize> {
        self.inner.class_counts().iter().map(|(k, v)| (k.as_str(), *v)).collect()
    }

    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.documents())
    }

    #[pyo3(signature = (fraction, seed = 0))]
    fn split(&self, fraction: f64, seed: u64) -> PyResult<(Dataset, Dataset)> {
        let (train, bench) = corpus::stratified_split(&self.inner, fraction, seed).map_err(py_err)?;
        Ok((Self { inner: train }, Self { inner: bench }))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let fmt = corpus::DataFormat::from_path(&path).unwrap_or(corpus::DataFormat::Csv);
        corpus::write_dataset(&self.inner, &path, fmt).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({:?}, {} documents)", self.inner.name(), self.inner.len())
    }
}

/// Word-count or probability lexicon.
#[pyclass(module = "crossmoral", name = "Lexicon")]
struct Lexicon {
    inner: CoreLexicon,
    vocab: Vocabulary,
}

#[pymethods]
impl Lexicon {
    #[staticmethod]
    #[pyo3(signature = (path, kind = "count"))]
    fn load(path: PathBuf, kind: &str) -> PyResult<Self> {
        let kind: LexiconKind = kind.parse().map_err(py_err)?;
        let inner = lexicon::load_lexicon(&path, kind).map_err(py_err)?;
        let vocab = inner.terms().collect();
        Ok(Self { inner, vocab })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind() {
            LexiconKind::Count => "count",
            LexiconKind::Probability => "probability",
        }
    }

    /// Tokenizes `text` (dictionary segmentation for Chinese) and scores it.
    #[pyo3(signature = (doc_id, text, language = "en"))]
    fn score(&self, doc_id: &str, text: &str, language: &str) -> PyResult<Prediction> {
        let tokens = segment::tokenize(text, language, Some(&self.vocab));
        self.score_tokens(doc_id, tokens.tokens)
    }

    fn score_tokens(&self, doc_id: &str, tokens: Vec<String>) -> PyResult<Prediction> {
        let seq = TokenSequence::pretokenized(tokens);
        let inner = match self.inner.kind() {
            LexiconKind::Count => lexicon::score_count(doc_id, &seq, &self.inner),
            LexiconKind::Probability => lexicon::score_prob(doc_id, &seq, &self.inner),
        }
        .map_err(py_err)?;
        Ok(Prediction { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.lookup(token).is_some()
    }
}

/// Word vectors read from word2vec text format.
#[pyclass(module = "crossmoral", name = "EmbeddingStore")]
struct EmbeddingStore {
    inner: CoreStore,
}

#[pymethods]
impl EmbeddingStore {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: embed::load_vectors(&path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_dict(vectors: BTreeMap<String, Vec<f64>>) -> PyResult<Self> {
        let dim = vectors
            .values()
            .next()
            .map(Vec::len)
            .ok_or_else(|| PyValueError::new_err("no vectors"))?;
        Ok(Self {
            inner: CoreStore::from_vectors(dim, vectors).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dimension()
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.inner.get(word).map(<[f64]>::to_vec)
    }

    fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        embed::vector::cosine(self.inner.get(a)?, self.inner.get(b)?)
    }

    /// Micro-frame bias of `tokens` on the axis from `virtue` to `vice`
    /// seed words. `None` when no token is in vocabulary.
    fn frame_bias(&self, virtue: Vec<String>, vice: Vec<String>, tokens: Vec<String>) -> PyResult<Option<f64>> {
        let frame = MicroFrame::from_poles(FoundationLabel::Care, &virtue, &vice, &self.inner).map_err(py_err)?;
        Ok(frame.bias(&TokenSequence::pretokenized(tokens), &self.inner))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.inner.contains(word)
    }
}

#[pyfunction]
#[pyo3(signature = (text, language = "en", vocabulary = None))]
fn tokenize(text: &str, language: &str, vocabulary: Option<Vec<String>>) -> Vec<String> {
    let vocab: Option<Vocabulary> = vocabulary.map(|v| v.into_iter().collect());
    segment::tokenize(text, language, vocab.as_ref()).tokens
}

/// Lenient evaluation of predictions against a benchmark.
#[pyfunction]
#[pyo3(signature = (bench, predictions, scope = "covered_only"))]
fn evaluate<'py>(
    py: Python<'py>,
    bench: &Dataset,
    predictions: Vec<Prediction>,
    scope: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let r = eval::evaluate(&bench.inner, &unwrap(predictions), self::scope(scope)?).map_err(py_err)?;
    to_py(py, &r)
}

/// Closed-form scores of a classifier that guesses in proportion to the
/// class frequencies given as `{foundation: count}`.
#[pyfunction]
fn baseline<'py>(py: Python<'py>, counts: BTreeMap<String, usize>) -> PyResult<Bound<'py, PyAny>> {
    let counts = counts
        .into_iter()
        .map(|(k, v)| Ok((label(&k)?, v)))
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let prior = ClassPrior::from_counts(&counts).map_err(py_err)?;
    to_py(py, &eval::baseline_expected(&prior))
}

#[pyfunction]
fn report_table(rows: Vec<(String, Bound<'_, PyAny>)>) -> PyResult<String> {
    let reports = rows
        .iter()
        .map(|(name, r)| {
            let json: String = r.py().import("json")?.call_method1("dumps", (r,))?.extract()?;
            let report: eval::EvalReport =
                serde_json::from_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))?;
            Ok((name.as_str(), report))
        })
        .collect::<PyResult<Vec<_>>>()?;
    let refs: Vec<(&str, &eval::EvalReport)> = reports.iter().map(|(n, r)| (*n, r)).collect();
    Ok(eval::report::reports_markdown(&refs))
}

#[pyfunction]
fn read_predictions(path: PathBuf) -> PyResult<Vec<Prediction>> {
    Ok(wrap(corpus::read_predictions(&path).map_err(py_err)?))
}

#[pyfunction]
fn write_predictions(path: PathBuf, predictions: Vec<Prediction>) -> PyResult<()> {
    corpus::write_predictions(&path, &unwrap(predictions)).map_err(py_err)
}

/// Parses an LLM reply into foundation labels.
#[pyfunction]
#[pyo3(signature = (doc_id, text, approach = "llm"))]
fn parse_response<'py>(py: Python<'py>, doc_id: &str, text: &str, approach: &str) -> PyResult<Bound<'py, PyAny>> {
    let parsed = llm::parse_labels(text);
    let d = PyDict::new(py);
    let outcome = match parsed.outcome {
        llm::ParseOutcome::Parsed => "parsed",
        llm::ParseOutcome::Repaired => "repaired",
        llm::ParseOutcome::Unparsed => "unparsed",
    };
    d.set_item("outcome", outcome)?;
    d.set_item("truncated", parsed.truncated)?;
    d.set_item("prediction", Prediction {
        inner: parsed.into_prediction(doc_id, approach),
    })?;
    Ok(d.into_any())
}

/// Chat messages for classifying one document. `shots` are
/// `(id, text, label, rationale)` tuples; `exclude` lists benchmark ids
/// that must not appear among them.
#[pyfunction]
#[pyo3(signature = (doc_id, text, shots, exclude, prompt_language = "en", culture = None, language = "en"))]
#[allow(clippy::too_many_arguments)]
fn build_prompt<'py>(
    py: Python<'py>,
    doc_id: &str,
    text: &str,
    shots: Vec<(String, String, String, String)>,
    exclude: Vec<String>,
    prompt_language: &str,
    culture: Option<&str>,
    language: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let lang: llm::PromptLanguage = prompt_language.parse().map_err(py_err)?;
    let shots = shots
        .into_iter()
        .map(|(id, t, l, r)| Ok(llm::Shot::from_document(&Document::new(id, t, language, label(&l)?, "shots"), &r)))
        .collect::<PyResult<Vec<_>>>()?;
    let exclude: std::collections::HashSet<&str> = exclude.iter().map(String::as_str).collect();
    let builder = llm::PromptBuilder::new(lang, culture, shots, exclude).map_err(py_err)?;
    let doc = Document::new(doc_id, text, language, FoundationLabel::Unknown, "target");
    let bundle = builder.build(&doc).map_err(py_err)?;
    to_py(py, &bundle.messages())
}

/// Executes a TOML run config and returns the run's reports.
#[pyfunction]
#[pyo3(signature = (config, seed = None, out = None))]
fn run<'py>(py: Python<'py>, config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = RunConfig::load(&config).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    let res = py.detach(|| experiments::run(&cfg)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("out_dir", res.out_dir)?;
    d.set_item("covered_only", to_py(py, &res.reports[0])?)?;
    d.set_item("all", to_py(py, &res.reports[1])?)?;
    d.set_item("manifest", to_py(py, &res.manifest)?)?;
    d.set_item("predictions", wrap(res.predictions))?;
    Ok(d.into_any())
}

#[pymodule]
fn crossmoral(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("CrossmoralError", py.get_type::<CrossmoralError>())?;
    m.add("ParseError", py.get_type::<ParseError>())?;
    m.add("LeakageError", py.get_type::<LeakageError>())?;
    m.add("FOUNDATIONS", corpus::FOUNDATIONS.iter().map(|f| f.as_str()).collect::<Vec<_>>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Prediction>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Lexicon>()?;
    m.add_class::<EmbeddingStore>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(report_table, m)?)?;
    m.add_function(wrap_pyfunction!(read_predictions, m)?)?;
    m.add_function(wrap_pyfunction!(write_predictions, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
