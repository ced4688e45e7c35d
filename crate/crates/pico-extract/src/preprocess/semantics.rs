//! Chunk semantic classing: rule patterns first, then gazetteer lookup with
//! left-truncation search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::norm::NormTag;
use super::WTok;

/// The nine chunk semantic classes, plus `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SemanticClass {
    Arm,
    ClinicalTrial,
    DiagnosticTest,
    DiseaseOrMedicalCondition,
    Frequency,
    MedicalTreatment,
    OutcomeMeasure,
    Patients,
    PeriodOfTime,
    None,
}

impl SemanticClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SemanticClass::Arm => "ARM",
            SemanticClass::ClinicalTrial => "CLINICAL-TRIAL",
            SemanticClass::DiagnosticTest => "DIAGNOSTIC-TEST",
            SemanticClass::DiseaseOrMedicalCondition => "DISEASE-OR-MEDICAL-CONDITION",
            SemanticClass::Frequency => "FREQUENCY",
            SemanticClass::MedicalTreatment => "MEDICAL-TREATMENT",
            SemanticClass::OutcomeMeasure => "OUTCOME-MEASURE",
            SemanticClass::Patients => "PATIENTS",
            SemanticClass::PeriodOfTime => "PERIOD-OF-TIME",
            SemanticClass::None => "none",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<SemanticClass> {
        match s.trim().to_uppercase().as_str() {
            "ARM" => Some(SemanticClass::Arm),
            "CLINICAL-TRIAL" => Some(SemanticClass::ClinicalTrial),
            "DIAGNOSTIC-TEST" => Some(SemanticClass::DiagnosticTest),
            "DISEASE-OR-MEDICAL-CONDITION" => Some(SemanticClass::DiseaseOrMedicalCondition),
            "FREQUENCY" => Some(SemanticClass::Frequency),
            "MEDICAL-TREATMENT" => Some(SemanticClass::MedicalTreatment),
            "OUTCOME-MEASURE" => Some(SemanticClass::OutcomeMeasure),
            "PATIENTS" => Some(SemanticClass::Patients),
            "PERIOD-OF-TIME" => Some(SemanticClass::PeriodOfTime),
            "NONE" => Some(SemanticClass::None),
            _ => None,
        }
    }
}

impl std::fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Local phrase gazetteer standing in for an external knowledge-base lookup.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<String, SemanticClass>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Gazetteer::default()
    }

    /// Parse tab-separated `phrase\tCLASS` lines; `#` starts a comment.
    pub fn from_tsv(data: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (ln, line) in data.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, class) = line
                .split_once('\t')
                .ok_or_else(|| format!("gazetteer line {}: missing tab", ln + 1))?;
            let class = SemanticClass::from_str_loose(class)
                .ok_or_else(|| format!("gazetteer line {}: unknown class {class:?}", ln + 1))?;
            entries.insert(normalize_phrase(phrase), class);
        }
        Ok(Gazetteer { entries })
    }

    /// The built-in glaucoma-domain gazetteer shipped with the crate.
    pub fn builtin() -> Self {
        Gazetteer::from_tsv(include_str!("../../data/gazetteer.tsv"))
            .expect("builtin gazetteer must parse")
    }

    pub fn insert(&mut self, phrase: &str, class: SemanticClass) {
        self.entries.insert(normalize_phrase(phrase), class);
    }

    pub fn lookup(&self, phrase: &str) -> Option<SemanticClass> {
        self.entries.get(&normalize_phrase(phrase)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Search the word sequence in its entirety, then keep dropping the
    /// leftmost word until only the rightmost word remains.
    pub fn search(&self, words: &[String]) -> Option<SemanticClass> {
        for start in 0..words.len() {
            let phrase = words[start..].join(" ");
            if let Some(c) = self.lookup(&phrase) {
                return Some(c);
            }
        }
        None
    }
}

fn normalize_phrase(p: &str) -> String {
    p.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Stopwords demoted to `none` during semantic propagation: the usual
/// conjunction examples plus determiners and prepositions.
pub const SEMANTIC_STOPWORDS: &[&str] = &[
    "and", "or", "for", "not", "a", "an", "the", "this", "that", "these", "those", "of", "in",
    "on", "with", "to", "by", "at", "from", "after", "before", "between", "during", "versus",
    "vs", "per", "either", "both",
];

pub fn is_semantic_stopword(word: &str) -> bool {
    SEMANTIC_STOPWORDS.contains(&word.to_lowercase().as_str())
}

/// Assign a semantic class to one chunk of working tokens.
pub fn classify_chunk(toks: &[WTok], gazetteer: &Gazetteer) -> SemanticClass {
    if toks.is_empty() {
        return SemanticClass::None;
    }
    let lowers: Vec<String> = toks.iter().map(|t| t.rendered().to_lowercase()).collect();
    let last = lowers.last().unwrap().as_str();

    if toks.iter().any(|t| t.tag == Some(NormTag::Gone))
        || matches!(last, "group" | "arm" | "groups" | "arms")
    {
        return SemanticClass::Arm;
    }
    if matches!(last, "patients" | "subjects" | "women" | "men") {
        return SemanticClass::Patients;
    }
    if toks.iter().any(|t| t.tag == Some(NormTag::Poft))
        || lowers.windows(2).any(|w| {
            w[0] == "_num_"
                && matches!(w[1].as_str(), "hours" | "days" | "weeks" | "months" | "years")
        })
    {
        return SemanticClass::PeriodOfTime;
    }
    if lowers.iter().any(|w| matches!(w.as_str(), "daily" | "weekly" | "monthly" | "hourly"))
        || lowers.iter().any(|w| matches!(w.as_str(), "once" | "twice" | "thrice"))
    {
        return SemanticClass::Frequency;
    }

    // words only; normalization tags do not help the phrase lookup
    let words: Vec<String> = toks
        .iter()
        .filter(|t| t.tag.is_none())
        .map(|t| t.text.to_lowercase())
        .collect();
    if words.is_empty() {
        return SemanticClass::None;
    }
    gazetteer.search(&words).unwrap_or(SemanticClass::None)
}

/// Propagate a chunk class onto its tokens, demoting stopwords to `none`.
pub fn propagate_semantics(class: SemanticClass, toks: &[WTok]) -> Vec<SemanticClass> {
    toks.iter()
        .map(|t| {
            if t.tag.is_none() && is_semantic_stopword(&t.text) {
                SemanticClass::None
            } else {
                class
            }
        })
        .collect()
}
