//! Sparse feature extraction for candidate tokens, plus the fitted feature
//! dictionary used to vectorize them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Abstract;
use crate::preprocess::Candidate;

/// Namespaced feature strings for one candidate. Duplicates are allowed
/// here; vectorization collapses them.
pub fn extract_features(candidate: &Candidate, a: &Abstract) -> Vec<String> {
    let ti = candidate.token_index;
    let t = &a.tokens[ti];
    let mut f = Vec::with_capacity(24);

    // sentence-local neighbourhood; windows never cross sentence boundaries
    let same_sentence = |tj: usize| -> bool {
        a.tokens
            .get(tj)
            .map(|x| x.paragraph_index == t.paragraph_index && x.sentence_index == t.sentence_index)
            .unwrap_or(false)
    };
    let word_at = |off: i64| -> String {
        let tj = ti as i64 + off;
        if tj < 0 || !same_sentence(tj as usize) {
            "none".to_string()
        } else {
            a.tokens[tj as usize].normalized.clone()
        }
    };
    let pos_at = |off: i64| -> String {
        let tj = ti as i64 + off;
        if tj < 0 || !same_sentence(tj as usize) {
            "none".to_string()
        } else {
            a.tokens[tj as usize].pos.clone()
        }
    };

    f.push(format!("word={}", t.normalized));
    f.push(format!("bigram={}+{}", word_at(-1), t.normalized));
    for off in -2i64..=2 {
        f.push(format!("pos[{off}]={}", pos_at(off)));
    }
    f.push(format!("sem={}", t.semantic_class));
    f.push(format!("intitle={}", if t.in_title { "T" } else { "F" }));
    f.push(format!("inbrackets={}", if t.in_brackets { "T" } else { "F" }));
    f.push(format!("possent={}", position_bin(ti, a)));
    if let Some(ci) = t.chunk_id {
        let chunk = &a.chunks[ci];
        for tj in chunk.start..chunk.end {
            f.push(format!("chunkbow={}", a.tokens[tj].normalized));
        }
        f.push(format!("chunktype={}", chunk.chunk_type.as_str()));
    }
    f.push(format!("sentpos={}", t.sentence_index.min(9)));
    f.push(format!(
        "heading={}",
        t.paragraph_heading.as_deref().unwrap_or("none").to_uppercase()
    ));
    f.push(format!("parcat={}", t.section));
    // conjunctions
    f.push(format!("sem*parcat={}*{}", t.semantic_class, t.section));
    f.push(format!(
        "intitle*sem={}*{}",
        if t.in_title { "T" } else { "F" },
        t.semantic_class
    ));
    f
}

/// Relative token position in its sentence, quantized to bins 0-9.
fn position_bin(ti: usize, a: &Abstract) -> usize {
    let t = &a.tokens[ti];
    let mut first = ti;
    while first > 0
        && a.tokens[first - 1].paragraph_index == t.paragraph_index
        && a.tokens[first - 1].sentence_index == t.sentence_index
    {
        first -= 1;
    }
    let mut last = ti;
    while last + 1 < a.tokens.len()
        && a.tokens[last + 1].paragraph_index == t.paragraph_index
        && a.tokens[last + 1].sentence_index == t.sentence_index
    {
        last += 1;
    }
    let n = last - first + 1;
    if n <= 1 {
        return 0;
    }
    let rel = (ti - first) as f64 / (n - 1) as f64;
    ((rel * 10.0).floor() as usize).min(9)
}

/// Feature string to dense id mapping; append-only until frozen.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct FeatureDictionary {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    frozen: bool,
}

impl FeatureDictionary {
    pub fn new() -> Self {
        FeatureDictionary::default()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, feature: &str) -> Option<u32> {
        self.index.get(feature).copied()
    }

    fn intern(&mut self, feature: &str) -> u32 {
        debug_assert!(!self.frozen);
        if let Some(&id) = self.index.get(feature) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(feature.to_string());
        self.index.insert(feature.to_string(), id);
        id
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Rebuild the lookup index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
    }
}

/// Fit a dictionary over training feature multisets; ids in first-seen
/// order, frozen on return.
pub fn fit_dictionary<'a, I, J>(feature_sets: I) -> FeatureDictionary
where
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = &'a String>,
{
    let mut dict = FeatureDictionary::new();
    for set in feature_sets {
        for feat in set {
            dict.intern(feat);
        }
    }
    dict.freeze();
    dict
}

/// Sparse binary feature vector over dictionary ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Sorted, deduplicated feature ids with implicit value 1.
    pub ids: Vec<u32>,
}

impl FeatureVector {
    pub fn empty() -> Self {
        FeatureVector { ids: Vec::new() }
    }
}

/// Map features onto a frozen dictionary; unknown features are dropped and
/// duplicates collapsed.
pub fn vectorize(features: &[String], dict: &FeatureDictionary) -> FeatureVector {
    assert!(dict.is_frozen(), "dictionary must be frozen before vectorization");
    let mut ids: Vec<u32> = features.iter().filter_map(|f| dict.id(f)).collect();
    ids.sort_unstable();
    ids.dedup();
    FeatureVector { ids }
}
