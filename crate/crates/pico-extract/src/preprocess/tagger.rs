//! Minimal fallback part-of-speech tagger and shallow chunker.
//!
//! Candidate filtering and the chunk-type feature only need coarse tags, so
//! this is a closed-class lexicon plus suffix rules with a noun default.
//! Pre-tagged corpora bypass it entirely.

use crate::corpus::ChunkType;

use super::norm::NormTag;
use super::WTok;

fn in_set(word: &str, set: &[&str]) -> bool {
    set.contains(&word)
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "each", "every", "either", "neither",
    "both", "all", "some", "any", "no", "another",
];
const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "with", "from", "of", "for", "after", "before", "during", "between",
    "against", "among", "within", "without", "under", "over", "through", "into", "versus", "vs",
    "than", "as", "per", "since", "until",
];
const CONJUNCTIONS: &[&str] = &["and", "or", "but", "nor", "plus"];
const MODALS: &[&str] = &["may", "might", "can", "could", "will", "would", "shall", "should", "must"];
const PRONOUNS: &[&str] = &["he", "she", "it", "they", "we", "i", "you", "them", "us", "him"];
const POSS_PRONOUNS: &[&str] = &["his", "its", "their", "our", "my", "your", "her"];
const WH_DET: &[&str] = &["which", "what"];
const WH_PRON: &[&str] = &["who", "whom"];
const WH_ADV: &[&str] = &["when", "where", "how", "why"];
const PAST_VERBS: &[&str] = &[
    "was", "were", "had", "did", "gave", "took", "underwent", "found", "saw", "fell", "rose",
];
const PRESENT_3SG: &[&str] = &["is", "has", "does", "shows", "remains"];
const PRESENT_PL: &[&str] = &["are", "have", "do", "remain"];
const BASE_VERBS: &[&str] = &["be", "compare", "evaluate", "assess", "determine", "investigate"];
const COMPARATIVES: &[&str] = &[
    "greater", "higher", "lower", "lesser", "fewer", "better", "worse", "smaller", "larger",
];
const SUPERLATIVES: &[&str] = &["greatest", "highest", "lowest", "best", "worst", "largest"];
const ADVERBS: &[&str] = &["not", "also", "however", "respectively", "very", "too", "only"];

/// Tag a single token. `is_norm_tag` marks normalization-tag tokens, which
/// count as numbers.
pub fn pos_tag(word: &str, is_norm_tag: bool) -> &'static str {
    if is_norm_tag {
        return "CD";
    }
    match word {
        "(" | "[" | "{" => return "(",
        ")" | "]" | "}" => return ")",
        ":" | ";" => return ":",
        "," => return ",",
        "." | "!" | "?" => return ".",
        "to" => return "TO",
        "there" => return "EX",
        _ => {}
    }
    let lower = word.to_lowercase();
    let l = lower.as_str();
    if in_set(l, DETERMINERS) {
        return "DT";
    }
    if in_set(l, PREPOSITIONS) {
        return "IN";
    }
    if in_set(l, CONJUNCTIONS) {
        return "CC";
    }
    if in_set(l, MODALS) {
        return "MD";
    }
    if in_set(l, POSS_PRONOUNS) {
        return "PRP$";
    }
    if in_set(l, PRONOUNS) {
        return "PRP";
    }
    if in_set(l, WH_DET) {
        return "WDT";
    }
    if in_set(l, WH_PRON) {
        return "WP";
    }
    if in_set(l, WH_ADV) {
        return "WRB";
    }
    if in_set(l, PAST_VERBS) {
        return "VBD";
    }
    if in_set(l, PRESENT_3SG) {
        return "VBZ";
    }
    if in_set(l, PRESENT_PL) {
        return "VBP";
    }
    if in_set(l, BASE_VERBS) {
        return "VB";
    }
    if in_set(l, COMPARATIVES) {
        return "JJR";
    }
    if in_set(l, SUPERLATIVES) {
        return "JJS";
    }
    if in_set(l, ADVERBS) {
        return "RB";
    }
    if l.chars().next().map(|c| c.is_ascii_digit() || c == '-' || c == '+').unwrap_or(false)
        && l.chars().any(|c| c.is_ascii_digit())
    {
        return "CD";
    }
    if l.ends_with("ly") {
        return "RB";
    }
    if l.ends_with("ing") {
        return "VBG";
    }
    if l.ends_with("ed") {
        return "VBD";
    }
    if l.ends_with("ous") || l.ends_with("ful") || l.ends_with("ive") || l.ends_with("ic") {
        return "JJ";
    }
    if l.ends_with('s') && l.len() > 3 && !l.ends_with("ss") {
        return "NNS";
    }
    "NN"
}

fn is_np_pos(pos: &str) -> bool {
    matches!(pos, "DT" | "JJ" | "JJR" | "JJS" | "NN" | "NNS" | "NNP" | "CD" | "PRP$")
}

fn is_vp_pos(pos: &str) -> bool {
    matches!(pos, "VB" | "VBD" | "VBZ" | "VBP" | "VBG" | "VBN" | "MD" | "RB")
}

fn is_pp_pos(pos: &str) -> bool {
    matches!(pos, "IN" | "TO")
}

/// Chunk one sentence into maximal same-type runs. Returns `(start, end,
/// type)` triples over local token indices; the ranges partition the
/// sentence.
pub fn chunk_sentence(pos: &[&str]) -> Vec<(usize, usize, ChunkType)> {
    let kind = |p: &str| {
        if is_np_pos(p) {
            ChunkType::Np
        } else if is_vp_pos(p) {
            ChunkType::Vp
        } else if is_pp_pos(p) {
            ChunkType::Pp
        } else {
            ChunkType::Other
        }
    };
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < pos.len() {
        let ty = kind(pos[start]);
        let mut end = start + 1;
        // PP and punctuation stay single-token
        if matches!(ty, ChunkType::Np | ChunkType::Vp) {
            while end < pos.len() && kind(pos[end]) == ty {
                end += 1;
            }
        }
        chunks.push((start, end, ty));
        start = end;
    }
    chunks
}

/// Tag a sentence of working tokens.
pub fn tag_tokens(toks: &[WTok]) -> Vec<&'static str> {
    toks.iter()
        .map(|t| pos_tag(&t.text, t.tag.is_some() || NormTag::from_token(&t.text).is_some()))
        .collect()
}
