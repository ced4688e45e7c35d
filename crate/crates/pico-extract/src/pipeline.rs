//! End-to-end wiring: preprocess documents, train the classifier on
//! candidate tokens, decode with any of the three modes, and emit evidence
//! tables whose cells are original-text surfaces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Abstract, Document, Label};
use crate::eval::{score_all, EvalError, EvalReport};
use crate::features::{extract_features, fit_dictionary, vectorize, FeatureVector};
use crate::inference::{build_problem, solve, DecodeMode, InferenceError, Solution};
use crate::maxent::{fit, MaxEntModel, MaxEntError, TrainConfig};
use crate::preprocess::{filter_candidates, Candidate, Preprocessor};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("zero mode does not produce one head per label")]
    ModeUnsupported,
    #[error(transparent)]
    Train(#[from] MaxEntError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// Train a classifier on annotated documents: one example per candidate
/// token, features interned into a dictionary in first-seen order.
pub fn train_model(
    docs: &[Document],
    pre: &Preprocessor,
    config: &TrainConfig,
) -> Result<MaxEntModel, PipelineError> {
    let abstracts: Vec<Abstract> = docs.iter().map(|d| pre.run(d)).collect();
    let mut feature_sets: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    for a in &abstracts {
        for cand in filter_candidates(a) {
            feature_sets.push(extract_features(&cand, a));
            labels.push(a.tokens[cand.token_index].gold);
        }
    }
    let dictionary = fit_dictionary(feature_sets.iter().map(|s| s.iter()));
    let examples: Vec<(FeatureVector, Label)> = feature_sets
        .iter()
        .zip(labels)
        .map(|(fs, l)| (vectorize(fs, &dictionary), l))
        .collect();
    Ok(fit(&examples, dictionary, config)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Ok,
    /// Full mode had no feasible assignment; the vanilla solution was used.
    FallbackVanilla,
    Infeasible,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "OK",
            RowStatus::FallbackVanilla => "FALLBACK_VANILLA",
            RowStatus::Infeasible => "INFEASIBLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub id: String,
    /// Original-text surface per target label, order P, A1, A2, OC, R1, R2.
    pub cells: [String; 6],
    pub status: RowStatus,
}

/// One decoded document: a label per candidate plus the solution behind it.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub labels: Vec<Label>,
    pub solution: Option<Solution>,
    pub status: RowStatus,
    pub candidates: Vec<Candidate>,
}

/// Decode one abstract. An infeasible full problem falls back to vanilla
/// with a logged warning; an infeasible vanilla problem (fewer than six
/// candidates) yields an all-background labeling marked infeasible.
pub fn predict(
    a: &Abstract,
    model: &MaxEntModel,
    mode: DecodeMode,
) -> Result<Prediction, PipelineError> {
    let (problem, candidates) = build_problem(a, model);
    let attempt = solve(&problem, mode);
    let (solution, status) = match attempt {
        Ok(s) => (Some(s), RowStatus::Ok),
        Err(InferenceError::Infeasible) | Err(InferenceError::EmptyProblem)
            if mode == DecodeMode::Full =>
        {
            log::warn!("abstract {}: no feasible full-mode assignment, using vanilla", a.id);
            match solve(&problem, DecodeMode::Vanilla) {
                Ok(s) => (Some(s), RowStatus::FallbackVanilla),
                Err(InferenceError::Infeasible) | Err(InferenceError::EmptyProblem) => {
                    (None, RowStatus::Infeasible)
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(InferenceError::Infeasible) | Err(InferenceError::EmptyProblem) => {
            (None, RowStatus::Infeasible)
        }
        Err(e) => return Err(e.into()),
    };
    let labels = match &solution {
        Some(s) => s.labels.clone(),
        None => vec![Label::O; candidates.len()],
    };
    Ok(Prediction { labels, solution, status, candidates })
}

/// Build the evidence row for a decoded abstract. Cells are the original
/// surfaces of the chosen tokens, straight from the stored char spans.
pub fn evidence_row(a: &Abstract, prediction: &Prediction) -> Result<EvidenceRow, PipelineError> {
    if let Some(s) = &prediction.solution {
        if s.mode == DecodeMode::Zero {
            return Err(PipelineError::ModeUnsupported);
        }
    }
    let mut cells: [String; 6] = Default::default();
    if prediction.status != RowStatus::Infeasible {
        if let Some(s) = &prediction.solution {
            for (l, cell) in cells.iter_mut().enumerate() {
                if let Some(z) = s.positions[l] {
                    let tok = &a.tokens[prediction.candidates[z - 1].token_index];
                    *cell = a.original(tok).to_string();
                }
            }
        }
    }
    Ok(EvidenceRow { id: a.id.clone(), cells, status: prediction.status })
}

pub const TABLE_HEADER: [&str; 8] =
    ["id", "patient_group", "arm_1", "arm_2", "outcome", "result_1", "result_2", "status"];

fn csv_escape(cell: &str, sep: char) -> String {
    if cell.contains(sep) || cell.contains('"') || cell.contains('\n') {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Render rows as a delimited table with a header line. Tab-separated cells
/// have tabs and newlines replaced; comma-separated cells are quoted.
pub fn render_table(rows: &[EvidenceRow], sep: char) -> String {
    let mut out = String::new();
    out.push_str(&TABLE_HEADER.join(&sep.to_string()));
    out.push('\n');
    for row in rows {
        let mut fields = vec![row.id.clone()];
        fields.extend(row.cells.iter().cloned());
        fields.push(row.status.as_str().to_string());
        let rendered: Vec<String> = fields
            .iter()
            .map(|f| {
                if sep == '\t' {
                    f.replace(['\t', '\n'], " ")
                } else {
                    csv_escape(f, sep)
                }
            })
            .collect();
        out.push_str(&rendered.join(&sep.to_string()));
        out.push('\n');
    }
    out
}

/// Predict a corpus in parallel, preserving input order.
pub fn predict_all(
    abstracts: &[Abstract],
    model: &MaxEntModel,
    mode: DecodeMode,
    workers: usize,
) -> Result<Vec<Prediction>, PipelineError> {
    let run = || {
        abstracts
            .par_iter()
            .map(|a| predict(a, model, mode))
            .collect::<Result<Vec<_>, _>>()
    };
    if workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(run)
    }
}

/// Gold label per candidate token of an abstract.
pub fn candidate_gold(a: &Abstract) -> Vec<Label> {
    filter_candidates(a)
        .into_iter()
        .map(|c| a.tokens[c.token_index].gold)
        .collect()
}

/// Train on one subset and score all three decoders on another; the bodies
/// of k-fold evaluation.
pub fn evaluate_split(
    docs: &[Document],
    train_idx: &[usize],
    test_idx: &[usize],
    pre: &Preprocessor,
    config: &TrainConfig,
) -> Result<EvalReport, PipelineError> {
    let train_docs: Vec<Document> = train_idx.iter().map(|&i| docs[i].clone()).collect();
    let model = train_model(&train_docs, pre, config)?;
    let test_abs: Vec<Abstract> = test_idx.iter().map(|&i| pre.run(&docs[i])).collect();
    let gold: Vec<Vec<Label>> = test_abs.iter().map(candidate_gold).collect();
    let mut report = EvalReport { documents: test_idx.len(), ..Default::default() };
    for mode in [DecodeMode::Zero, DecodeMode::Vanilla, DecodeMode::Full] {
        let preds = predict_all(&test_abs, &model, mode, 0)?;
        let labels: Vec<Vec<Label>> = preds.into_iter().map(|p| p.labels).collect();
        *report.mode_mut(mode) = score_all(&labels, &gold)?;
    }
    Ok(report)
}

/// Full k-fold cross-validated comparison of the three decoders.
pub fn evaluate_cv(
    docs: &[Document],
    pre: &Preprocessor,
    config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EvalReport>), PipelineError> {
    let mut failure: Option<PipelineError> = None;
    let result = crate::eval::cross_validate(docs.len(), k, seed, |train, test| {
        match evaluate_split(docs, train, test, pre, config) {
            Ok(r) => Ok(r),
            Err(PipelineError::Eval(e)) => Err(e),
            Err(other) => {
                failure = Some(other);
                Ok(EvalReport::default())
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(result?)
}
