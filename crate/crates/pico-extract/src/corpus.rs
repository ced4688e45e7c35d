//! Data model for trial abstracts: labels, sections, tokens, annotated-text
//! parsing and the line-delimited corpus file format.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{NormTag, SemanticClass};

/// The seven annotation classes. `O` is the null class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    P,
    A1,
    A2,
    OC,
    R1,
    R2,
    O,
}

impl Label {
    /// Fixed label order used everywhere a dense per-class vector appears.
    pub const ALL: [Label; 7] = [
        Label::P,
        Label::A1,
        Label::A2,
        Label::OC,
        Label::R1,
        Label::R2,
        Label::O,
    ];

    /// The six non-null target labels, in assignment order.
    pub const TARGETS: [Label; 6] = [
        Label::P,
        Label::A1,
        Label::A2,
        Label::OC,
        Label::R1,
        Label::R2,
    ];

    pub fn index(self) -> usize {
        match self {
            Label::P => 0,
            Label::A1 => 1,
            Label::A2 => 2,
            Label::OC => 3,
            Label::R1 => 4,
            Label::R2 => 5,
            Label::O => 6,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::P => "P",
            Label::A1 => "A1",
            Label::A2 => "A2",
            Label::OC => "OC",
            Label::R1 => "R1",
            Label::R2 => "R2",
            Label::O => "O",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Label> {
        match tag {
            "P" => Some(Label::P),
            "A1" => Some(Label::A1),
            "A2" => Some(Label::A2),
            "OC" => Some(Label::OC),
            "R1" => Some(Label::R1),
            "R2" => Some(Label::R2),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Abstract section classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SectionClass {
    Background,
    Objective,
    Methods,
    Results,
    Conclusions,
    None,
}

impl SectionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionClass::Background => "BACKGROUND",
            SectionClass::Objective => "OBJECTIVE",
            SectionClass::Methods => "METHODS",
            SectionClass::Results => "RESULTS",
            SectionClass::Conclusions => "CONCLUSIONS",
            SectionClass::None => "NONE",
        }
    }
}

impl fmt::Display for SectionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const BACKGROUND_HEADINGS: &[&str] = &[
    "INTRODUCTION",
    "TRIAL REGISTRATION",
    "BACKGROUND",
    "FINANCIAL DISCLOSURE",
    "FINANCIAL DISCLOSURES",
    "FINANCIAL DISCLOSURE(S)",
    "CLINICAL TRIAL REGISTRATION",
];

const OBJECTIVE_HEADINGS: &[&str] = &[
    "AIMS",
    "BACKGROUND/AIMS",
    "AIM",
    "PURPOSE",
    "OBJECTIVE",
    "INTRODUCTION AND PURPOSE",
];

const METHODS_HEADINGS: &[&str] = &[
    "SETTING",
    "PATIENTS AND METHODS",
    "METHODS",
    "STUDY DESIGN AND METHODS",
    "RESEARCH DESIGN AND METHODS",
    "STATISTICS",
    "SUBJECTS AND METHODS",
    "METHOD",
    "PARTICIPANTS",
    "MAIN OUTCOME MEASURES",
    "DESIGN",
    "OUTCOME MEASUREMENT",
    "INTERVENTIONS",
    "MATERIALS AND METHODS",
    "INTERVENTION",
];

const RESULTS_HEADINGS: &[&str] = &["RESULTS", "FINDINGS", "MAIN RESULTS"];

const CONCLUSIONS_HEADINGS: &[&str] = &[
    "APPLICATION TO CLINICAL PRACTICE",
    "CONCLUSION",
    "CONCLUSIONS",
    "DISCUSSION",
];

/// Map a paragraph heading to its section class. Exact lookup against the
/// known heading lists first, then a substring fallback for unlisted
/// headings. Unknown headings map to `None`.
pub fn section_class(heading: &str) -> SectionClass {
    let h = heading.trim().to_uppercase();
    if BACKGROUND_HEADINGS.contains(&h.as_str()) {
        return SectionClass::Background;
    }
    if OBJECTIVE_HEADINGS.contains(&h.as_str()) {
        return SectionClass::Objective;
    }
    if METHODS_HEADINGS.contains(&h.as_str()) {
        return SectionClass::Methods;
    }
    if RESULTS_HEADINGS.contains(&h.as_str()) {
        return SectionClass::Results;
    }
    if CONCLUSIONS_HEADINGS.contains(&h.as_str()) {
        return SectionClass::Conclusions;
    }
    if h.contains("METHOD") {
        return SectionClass::Methods;
    }
    if h.contains("RESULT") || h.contains("FINDING") {
        return SectionClass::Results;
    }
    if h.contains("CONCLU") {
        return SectionClass::Conclusions;
    }
    SectionClass::None
}

/// Chunk phrase type from the shallow chunker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChunkType {
    Np,
    Vp,
    Pp,
    Other,
}

impl ChunkType {
    pub fn as_str(self) -> &'static str {
        match self {
            ChunkType::Np => "NP",
            ChunkType::Vp => "VP",
            ChunkType::Pp => "PP",
            ChunkType::Other => "O",
        }
    }
}

/// A contiguous run of tokens inside one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    /// Token index range into `Abstract::tokens`, end exclusive.
    pub start: usize,
    pub end: usize,
    pub chunk_type: ChunkType,
    pub semantic_class: SemanticClass,
}

/// A single token of a preprocessed abstract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    /// Working surface form (after abbreviation expansion; a normalization
    /// tag token keeps the original substring here).
    pub surface: String,
    /// Lowercased surface, or the normalization tag verbatim.
    pub normalized: String,
    pub norm_tag: Option<NormTag>,
    pub pos: String,
    pub chunk_id: Option<usize>,
    /// Character span into `Abstract::text`; always the original span, so
    /// normalized and expanded tokens stay recoverable.
    pub char_span: (usize, usize),
    /// Sentence ordinal within the containing paragraph.
    pub sentence_index: usize,
    pub paragraph_index: usize,
    pub paragraph_heading: Option<String>,
    pub section: SectionClass,
    pub semantic_class: SemanticClass,
    pub in_title: bool,
    pub in_brackets: bool,
    pub gold: Label,
}

/// A raw (pre-tokenization) abstract record: the unit of corpus storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
    /// Gold head spans, paragraph-local character offsets into the stripped
    /// paragraph text. Offsets survive re-tokenization.
    #[serde(default)]
    pub gold: Vec<GoldSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub heading: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldSpan {
    pub label: Label,
    pub paragraph: usize,
    pub start: usize,
    pub end: usize,
}

impl Document {
    /// A document counts as structured when at least two paragraphs carry
    /// headings.
    pub fn structured(&self) -> bool {
        self.paragraphs.iter().filter(|p| p.heading.is_some()).count() >= 2
    }
}

/// A fully preprocessed abstract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstract {
    pub id: String,
    pub title: String,
    /// The stripped original text (paragraphs joined by newlines); all token
    /// char spans index into this.
    pub text: String,
    pub tokens: Vec<Token>,
    pub chunks: Vec<Chunk>,
    pub structured: bool,
    pub abbrev_map: BTreeMap<String, String>,
}

impl Abstract {
    /// Original text behind a token, via its span.
    pub fn original(&self, token: &Token) -> &str {
        &self.text[token.char_span.0..token.char_span.1]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("unbalanced tag <{0}> (opened without matching close)")]
    UnbalancedTag(String),
    #[error("closing tag </{0}> without an open tag")]
    UnexpectedClose(String),
    #[error("overlapping or nested tags: <{0}> inside <{1}>")]
    OverlappingTags(String, String),
    #[error("unknown annotation tag <{0}>")]
    UnknownTag(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("decode error at record {record}: {message}")]
    Decode { record: usize, message: String },
}

/// Strip `<P>..</P>`-style annotation tags from one paragraph of text,
/// returning the clean text plus the gold spans (offsets into the clean
/// text). Tags may not nest or overlap.
pub fn strip_annotations(text: &str) -> Result<(String, Vec<(Label, usize, usize)>), AnnotationError> {
    let tag_re = regex::Regex::new(r"</?([A-Za-z][A-Za-z0-9]*)>").unwrap();
    let mut clean = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut open: Option<(Label, usize, String)> = None;
    let mut last = 0;

    for m in tag_re.find_iter(text) {
        let piece = &text[last..m.start()];
        clean.push_str(piece);
        last = m.end();

        let tag_text = m.as_str();
        let closing = tag_text.starts_with("</");
        let name = tag_text.trim_matches(|c| c == '<' || c == '>' || c == '/').to_string();
        let label = Label::from_tag(&name).ok_or_else(|| AnnotationError::UnknownTag(name.clone()))?;
        if label == Label::O {
            return Err(AnnotationError::UnknownTag(name));
        }

        if closing {
            match open.take() {
                Some((l, start, open_name)) => {
                    if l != label {
                        return Err(AnnotationError::OverlappingTags(name, open_name));
                    }
                    spans.push((l, start, clean.len()));
                }
                None => return Err(AnnotationError::UnexpectedClose(name)),
            }
        } else {
            if let Some((_, _, ref open_name)) = open {
                return Err(AnnotationError::OverlappingTags(name, open_name.clone()));
            }
            open = Some((label, clean.len(), name));
        }
    }
    if let Some((_, _, name)) = open {
        return Err(AnnotationError::UnbalancedTag(name));
    }
    clean.push_str(&text[last..]);
    Ok((trim_spans(clean, &mut spans), spans))
}

// Trim stray whitespace left by tag removal inside gold spans.
fn trim_spans(clean: String, spans: &mut [(Label, usize, usize)]) -> String {
    for (_, start, end) in spans.iter_mut() {
        while *start < *end && clean.as_bytes()[*start].is_ascii_whitespace() {
            *start += 1;
        }
        while *end > *start && clean.as_bytes()[*end - 1].is_ascii_whitespace() {
            *end -= 1;
        }
    }
    clean
}

/// Parse a whole annotated abstract into a raw `Document`.
///
/// Paragraphs are separated by newlines. A paragraph that starts with an
/// upper-case heading followed by a colon (`METHOD: ...`) is treated as a
/// headed paragraph.
pub fn parse_annotated(id: &str, title: &str, text: &str) -> Result<Document, AnnotationError> {
    let heading_re = regex::Regex::new(r"^([A-Z][A-Z0-9 ()/&-]*):\s*").unwrap();
    let mut paragraphs = Vec::new();
    let mut gold = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (heading, body) = match heading_re.captures(line) {
            Some(c) => {
                let m = c.get(0).unwrap();
                (Some(c[1].trim().to_string()), &line[m.end()..])
            }
            None => (None, line),
        };
        let (clean, spans) = strip_annotations(body)?;
        let para_index = paragraphs.len();
        for (label, start, end) in spans {
            gold.push(GoldSpan { label, paragraph: para_index, start, end });
        }
        paragraphs.push(Paragraph { heading, text: clean });
    }
    Ok(Document { id: id.to_string(), title: title.to_string(), paragraphs, gold })
}

/// Re-insert annotation tags at the gold spans of a document, paragraph by
/// paragraph. Inverse of `parse_annotated` modulo whitespace.
pub fn render_annotated(doc: &Document) -> String {
    let mut out = String::new();
    for (pi, para) in doc.paragraphs.iter().enumerate() {
        if pi > 0 {
            out.push('\n');
        }
        if let Some(h) = &para.heading {
            out.push_str(h);
            out.push_str(": ");
        }
        let mut spans: Vec<&GoldSpan> = doc.gold.iter().filter(|g| g.paragraph == pi).collect();
        spans.sort_by_key(|g| g.start);
        let mut pos = 0;
        for g in spans {
            out.push_str(&para.text[pos..g.start]);
            out.push('<');
            out.push_str(g.label.as_str());
            out.push('>');
            out.push_str(&para.text[g.start..g.end]);
            out.push_str("</");
            out.push_str(g.label.as_str());
            out.push('>');
            pos = g.end;
        }
        out.push_str(&para.text[pos..]);
    }
    out
}

const CORPUS_HEADER: &str = "#pico-corpus v1";

/// Write a corpus as line-delimited JSON records with a versioned header.
pub fn write_corpus<W: Write>(mut w: W, docs: &[Document]) -> Result<(), CorpusError> {
    writeln!(w, "{CORPUS_HEADER}")?;
    for doc in docs {
        let line = serde_json::to_string(doc)
            .map_err(|e| CorpusError::Decode { record: 0, message: e.to_string() })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Read a corpus written by `write_corpus`.
pub fn read_corpus<R: BufRead>(r: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut lines = r.lines();
    match lines.next() {
        Some(first) => {
            let first = first?;
            if first.trim() != CORPUS_HEADER {
                return Err(CorpusError::Decode {
                    record: 0,
                    message: format!("missing corpus header, got {first:?}"),
                });
            }
        }
        None => {
            return Err(CorpusError::Decode { record: 0, message: "empty file".into() })
        }
    }
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Decode { record: i + 1, message: e.to_string() })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus_file(path: &std::path::Path, docs: &[Document]) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path)?;
    write_corpus(std::io::BufWriter::new(file), docs)
}

pub fn read_corpus_file(path: &std::path::Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn section_class_known_headings() {
        assert_eq!(section_class("PATIENTS AND METHODS"), SectionClass::Methods);
        assert_eq!(section_class("FINDINGS"), SectionClass::Results);
        assert_eq!(section_class("ACKNOWLEDGEMENTS"), SectionClass::None);
        assert_eq!(section_class("purpose"), SectionClass::Objective);
        // fallback on unlisted headings
        assert_eq!(section_class("METHODS AND ANALYSIS"), SectionClass::Methods);
        assert_eq!(section_class("KEY FINDINGS OF THE STUDY"), SectionClass::Results);
        assert_eq!(section_class("CONCLUDING REMARKS"), SectionClass::Conclusions);
    }

    #[test]
    fn all_known_headings_map_to_their_class() {
        for h in BACKGROUND_HEADINGS {
            assert_eq!(section_class(h), SectionClass::Background, "{h}");
        }
        for h in OBJECTIVE_HEADINGS {
            assert_eq!(section_class(h), SectionClass::Objective, "{h}");
        }
        for h in METHODS_HEADINGS {
            assert_eq!(section_class(h), SectionClass::Methods, "{h}");
        }
        for h in RESULTS_HEADINGS {
            assert_eq!(section_class(h), SectionClass::Results, "{h}");
        }
        for h in CONCLUSIONS_HEADINGS {
            assert_eq!(section_class(h), SectionClass::Conclusions, "{h}");
        }
    }

    #[test]
    fn strip_annotations_basic() {
        let (clean, spans) = strip_annotations(
            "<P>Patients</P> with Normal Tension Glaucoma were randomly assigned to either \
             <A1>Tafluprost</A1> or <A2>Placebo</A2>",
        )
        .unwrap();
        assert!(!clean.contains('<'));
        assert_eq!(spans.len(), 3);
        let (l, s, e) = spans[0];
        assert_eq!(l, Label::P);
        assert_eq!(&clean[s..e], "Patients");
        let (l, s, e) = spans[1];
        assert_eq!(l, Label::A1);
        assert_eq!(&clean[s..e], "Tafluprost");
        let (l, s, e) = spans[2];
        assert_eq!(l, Label::A2);
        assert_eq!(&clean[s..e], "Placebo");
    }

    #[test]
    fn strip_annotations_untagged() {
        let (clean, spans) = strip_annotations("no tags at all").unwrap();
        assert_eq!(clean, "no tags at all");
        assert!(spans.is_empty());
    }

    #[test]
    fn strip_annotations_rejects_nesting() {
        let err = strip_annotations("<P>patients with <A1>drug</A1></P>").unwrap_err();
        assert!(matches!(err, AnnotationError::OverlappingTags(..)));
    }

    #[test]
    fn strip_annotations_rejects_unbalanced_and_unknown() {
        assert!(matches!(
            strip_annotations("<P>patients"),
            Err(AnnotationError::UnbalancedTag(_))
        ));
        assert!(matches!(
            strip_annotations("closing </A2> only"),
            Err(AnnotationError::UnexpectedClose(_))
        ));
        assert!(matches!(
            strip_annotations("<FOO>bad</FOO>"),
            Err(AnnotationError::UnknownTag(_))
        ));
        assert!(matches!(
            strip_annotations("<O>null</O>"),
            Err(AnnotationError::UnknownTag(_))
        ));
    }

    #[test]
    fn annotated_roundtrip() {
        let text = "METHOD: <P>Patients</P> were assigned to <A1>timolol</A1> or <A2>placebo</A2>.\n\
                    RESULTS: <OC>changes</OC> were <R1>-4.0 mmHg</R1> and <R2>-1.4 mmHg</R2>.";
        let doc = parse_annotated("a1", "t", text).unwrap();
        assert_eq!(doc.paragraphs.len(), 2);
        assert_eq!(doc.gold.len(), 6);
        assert!(doc.structured());
        let rendered = render_annotated(&doc);
        assert_eq!(rendered, text);
    }

    #[test]
    fn corpus_roundtrip() {
        let doc = parse_annotated("a1", "title", "METHOD: <P>Patients</P> got <A1>timolol</A1>.").unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, std::slice::from_ref(&doc)).unwrap();
        let back = read_corpus(&buf[..]).unwrap();
        assert_eq!(back, vec![doc]);
    }

    #[test]
    fn corpus_roundtrip_empty() {
        let mut buf = Vec::new();
        write_corpus(&mut buf, &[]).unwrap();
        let back = read_corpus(&buf[..]).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn corpus_decode_error_carries_record() {
        let data = format!("{CORPUS_HEADER}\n{}\nnot json\n", "{\"id\":\"x\",\"title\":\"t\",\"paragraphs\":[]}");
        let err = read_corpus(data.as_bytes()).unwrap_err();
        match err {
            CorpusError::Decode { record, .. } => assert_eq!(record, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
