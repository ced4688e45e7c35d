//! Python bindings for the evidence-table extraction pipeline: text
//! normalization, synthetic corpus generation, model training, and
//! constrained prediction.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::str::FromStr;

use pico_extract::corpus::{parse_annotated, render_annotated, Document};
use pico_extract::eval::synth::{generate, SynthConfig};
use pico_extract::inference::DecodeMode;
use pico_extract::maxent::{self, MaxEntModel, TrainConfig};
use pico_extract::pipeline::{self, evidence_row, train_model, TABLE_HEADER};
use pico_extract::preprocess::Preprocessor;

fn parse_doc(id: &str, title: &str, text: &str) -> PyResult<Document> {
    parse_annotated(id, title, text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_mode(mode: &str) -> PyResult<DecodeMode> {
    DecodeMode::from_str(mode).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Replace numeric expressions with their normalization tags.
#[pyfunction]
fn normalize_text(text: &str) -> String {
    pico_extract::preprocess::normalize_text(text)
}

/// Generate a deterministic synthetic corpus. Returns `(id, title,
/// annotated_text)` triples; gold spans are marked with `<P>`-style tags.
#[pyfunction]
#[pyo3(signature = (documents, seed, noise=1.5, unstructured=0.3))]
fn synth_corpus(
    documents: usize,
    seed: u64,
    noise: f64,
    unstructured: f64,
) -> Vec<(String, String, String)> {
    let config = SynthConfig {
        documents,
        distractor_level: noise,
        unstructured_fraction: unstructured,
    };
    generate(&config, seed)
        .into_iter()
        .map(|d| (d.id.clone(), d.title.clone(), render_annotated(&d)))
        .collect()
}

/// A trained token classifier plus everything needed to run it.
#[pyclass]
struct Model {
    inner: MaxEntModel,
}

#[pymethods]
impl Model {
    /// Train on `(id, title, annotated_text)` triples.
    #[staticmethod]
    #[pyo3(signature = (docs, l2=1.0, max_iterations=500, tolerance=1e-6))]
    fn train(
        docs: Vec<(String, String, String)>,
        l2: f64,
        max_iterations: usize,
        tolerance: f64,
    ) -> PyResult<Model> {
        let docs: Vec<Document> = docs
            .iter()
            .map(|(id, title, text)| parse_doc(id, title, text))
            .collect::<PyResult<_>>()?;
        let config = TrainConfig { l2, max_iterations, tolerance, ..Default::default() };
        let pre = Preprocessor::with_builtin();
        let inner = train_model(&docs, &pre, &config)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        let inner = maxent::load_model_file(path.as_ref())
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Model { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        maxent::save_model_file(path.as_ref(), &self.inner)
            .map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn num_features(&self) -> usize {
        self.inner.dictionary.len()
    }

    /// Extract the evidence-table fields from one abstract. `mode` is
    /// "vanilla" or "full"; returns a dict keyed like the CLI table.
    #[pyo3(signature = (title, text, mode="full", id="doc"))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        title: &str,
        text: &str,
        mode: &str,
        id: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mode = parse_mode(mode)?;
        let doc = parse_doc(id, title, text)?;
        let a = Preprocessor::with_builtin().run(&doc);
        let p = pipeline::predict(&a, &self.inner, mode)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let row = evidence_row(&a, &p).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let out = PyDict::new_bound(py);
        out.set_item(TABLE_HEADER[0], row.id)?;
        for (name, cell) in TABLE_HEADER[1..7].iter().zip(row.cells.iter()) {
            out.set_item(name, cell)?;
        }
        out.set_item(TABLE_HEADER[7], row.status.as_str())?;
        Ok(out)
    }
}

#[pymodule]
fn pico_extract_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_text, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
