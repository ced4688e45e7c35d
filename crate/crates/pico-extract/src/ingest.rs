//! Retrieval of trial abstracts from an entrez-style literature API:
//! query construction for the three search strategies, paginated
//! search+fetch over an injected transport, and conversion of the XML
//! records into raw documents ready for preprocessing.
//!
//! The transport is an interface so everything here tests offline against
//! recorded fixture responses.

use std::collections::BTreeMap;
use std::io::Read;

use quick_xml::events::Event;
use quick_xml::XmlVersion;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Paragraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Title/abstract mentions of the disease, randomized trials only.
    Glaucoma,
    /// Titles naming one of the usual prescription drugs.
    PrescriptionDrugs,
    /// Titles naming one of the usual surgical procedures.
    SurgicalInterventions,
}

impl SearchStrategy {
    pub const ALL: [SearchStrategy; 3] = [
        SearchStrategy::Glaucoma,
        SearchStrategy::PrescriptionDrugs,
        SearchStrategy::SurgicalInterventions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SearchStrategy::Glaucoma => "glaucoma",
            SearchStrategy::PrescriptionDrugs => "prescription-drugs",
            SearchStrategy::SurgicalInterventions => "surgical-interventions",
        }
    }
}

impl std::str::FromStr for SearchStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "glaucoma" => Ok(SearchStrategy::Glaucoma),
            "prescription-drugs" => Ok(SearchStrategy::PrescriptionDrugs),
            "surgical-interventions" => Ok(SearchStrategy::SurgicalInterventions),
            other => Err(format!("unknown search strategy {other:?}")),
        }
    }
}

/// The fixed query string for each strategy, byte-identical across calls.
pub fn build_query(strategy: SearchStrategy) -> &'static str {
    match strategy {
        SearchStrategy::Glaucoma => {
            "(clinical trial''[Publication Type]) AND (glaucoma[Title/Abstract]) \
             AND (randomized OR randomised OR double-masked[Title/Abstract]) \
             NOT (''protocol'' OR ''non-randomized''[Title/Abstract])"
        }
        SearchStrategy::PrescriptionDrugs => {
            "(mitomycin[Title] OR brimonidine[Title] OR brinzolamide[Title] \
             OR dorzolamide[Title] OR carteolol[Title] OR betaxolol[Title] \
             OR fluorouracil[Title] OR latanoprost[Title] OR bimatoprost[Title] \
             OR travoprost[Title] OR timolol[Title] \
             AND (randomized[Title] OR randomised[Title]) \
             AND (''glaucoma''[MeSH Terms] OR ''glaucoma''[All Fields])"
        }
        SearchStrategy::SurgicalInterventions => {
            "(randomized[Title] OR randomised[Title]) \
             AND (trabeculectomy[Title] OR phacoemulsification[Title] \
             OR trabeculoplasty[Title] OR phacotrabeculectomy[Title])"
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Parse(String),
    #[error("rate limited{}", retry_after_secs.map(|s| format!(", retry after {s}s")).unwrap_or_default())]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("record {0} has an empty body")]
    EmptyBody(String),
}

/// One fetched record before preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub title: String,
    /// Ordered (heading, body) pairs; an unstructured abstract is a single
    /// pair with no heading.
    pub labeled_sections: Vec<(Option<String>, String)>,
    pub publication_types: Vec<String>,
}

/// Minimal HTTP abstraction: GET a URL, return the body.
pub trait Transport {
    fn get(&self, url: &str) -> Result<String, IngestError>;
}

/// Live transport with a politeness delay between requests.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    delay: std::time::Duration,
    last: std::sync::Mutex<Option<std::time::Instant>>,
}

impl HttpTransport {
    pub fn new(delay_ms: u64) -> Self {
        HttpTransport {
            client: reqwest::blocking::Client::new(),
            delay: std::time::Duration::from_millis(delay_ms),
            last: std::sync::Mutex::new(None),
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String, IngestError> {
        {
            let mut last = self.last.lock().unwrap();
            if let Some(t) = *last {
                let since = t.elapsed();
                if since < self.delay {
                    std::thread::sleep(self.delay - since);
                }
            }
            *last = Some(std::time::Instant::now());
        }
        let resp = self.client.get(url).send().map_err(|e| IngestError::Transport(e.to_string()))?;
        if resp.status().as_u16() == 429 {
            let retry = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.parse().ok());
            return Err(IngestError::RateLimited { retry_after_secs: retry });
        }
        if !resp.status().is_success() {
            return Err(IngestError::Transport(format!("HTTP {} for {url}", resp.status())));
        }
        resp.text().map_err(|e| IngestError::Transport(e.to_string()))
    }
}

/// Canned responses keyed by URL, for offline tests.
#[derive(Default)]
pub struct FixtureTransport {
    pub responses: BTreeMap<String, String>,
}

impl FixtureTransport {
    pub fn with(mut self, url: &str, body: &str) -> Self {
        self.responses.insert(url.to_string(), body.to_string());
        self
    }

    /// Load `<urlencoded-url>.xml` files from a directory of recordings.
    pub fn from_dir(dir: &std::path::Path) -> Result<Self, IngestError> {
        let mut t = FixtureTransport::default();
        for entry in std::fs::read_dir(dir).map_err(|e| IngestError::Transport(e.to_string()))? {
            let entry = entry.map_err(|e| IngestError::Transport(e.to_string()))?;
            let path = entry.path();
            if path.extension().map(|e| e == "xml").unwrap_or(false) {
                let stem = path.file_stem().unwrap().to_string_lossy().to_string();
                let mut body = String::new();
                std::fs::File::open(&path)
                    .and_then(|mut f| f.read_to_string(&mut body))
                    .map_err(|e| IngestError::Transport(e.to_string()))?;
                t.responses.insert(percent_decode(&stem), body);
            }
        }
        Ok(t)
    }
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            if let Ok(v) = u8::from_str_radix(&s[i + 1..i + 3], 16) {
                out.push(v);
                i += 3;
                continue;
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<String, IngestError> {
        self.responses
            .get(url)
            .cloned()
            .ok_or_else(|| IngestError::Transport(format!("no fixture for {url}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FetchConfig {
    pub base_url: String,
    pub page_size: usize,
    pub api_key: Option<String>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            base_url: "https://eutils.ncbi.nlm.nih.gov/entrez/eutils".into(),
            page_size: 100,
            api_key: None,
        }
    }
}

fn urlencode(s: &str) -> String {
    let mut out = String::new();
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

pub fn search_url(config: &FetchConfig, query: &str, retstart: usize) -> String {
    let mut url = format!(
        "{}/esearch.fcgi?db=pubmed&term={}&retstart={}&retmax={}",
        config.base_url,
        urlencode(query),
        retstart,
        config.page_size
    );
    if let Some(k) = &config.api_key {
        url.push_str(&format!("&api_key={k}"));
    }
    url
}

pub fn fetch_url(config: &FetchConfig, ids: &[String]) -> String {
    let mut url = format!(
        "{}/efetch.fcgi?db=pubmed&retmode=xml&id={}",
        config.base_url,
        ids.join(",")
    );
    if let Some(k) = &config.api_key {
        url.push_str(&format!("&api_key={k}"));
    }
    url
}

/// Parse an esearch response: total hit count plus the ids on this page.
pub fn parse_search_response(xml: &str) -> Result<(usize, Vec<String>), IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut count: Option<usize> = None;
    let mut ids = Vec::new();
    let mut path: Vec<String> = Vec::new();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                path.push(e.name().as_ref().to_string())
            }
            Ok(Event::End(_)) => {
                path.pop();
            }
            Ok(Event::Text(t)) => {
                let text = t.xml_content(XmlVersion::Implicit1_0);
                match path.last().map(String::as_str) {
                    // the first Count is the total; later ones belong to
                    // translation details
                    Some("Count") if path.len() == 2 && count.is_none() => {
                        count = Some(
                            text.trim()
                                .parse()
                                .map_err(|_| IngestError::Parse(format!("bad count {text:?}")))?,
                        );
                    }
                    Some("Id") => ids.push(text.trim().to_string()),
                    _ => {}
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(IngestError::Parse(e.to_string())),
        }
    }
    let count = count.ok_or_else(|| IngestError::Parse("missing Count".into()))?;
    Ok((count, ids))
}

/// Parse an efetch response into records, order preserved.
pub fn parse_fetch_response(xml: &str) -> Result<Vec<RawRecord>, IngestError> {
    let mut reader = Reader::from_str(xml);
    let mut records = Vec::new();
    let mut path: Vec<String> = Vec::new();
    let mut current: Option<RawRecord> = None;
    let mut section_label: Option<String> = None;
    let mut text_buf = String::new();
    let mut capture = false;
    let mut depth_open = 0usize;

    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => {
                let name = e.name().as_ref().to_string();
                depth_open += 1;
                if name == "PubmedArticle" {
                    current = Some(RawRecord {
                        id: String::new(),
                        title: String::new(),
                        labeled_sections: Vec::new(),
                        publication_types: Vec::new(),
                    });
                }
                if matches!(name.as_str(), "PMID" | "ArticleTitle" | "AbstractText" | "PublicationType")
                    && current.is_some()
                {
                    // only the citation-level PMID, not reference PMIDs
                    if name == "PMID"
                        && path.last().map(String::as_str) != Some("MedlineCitation")
                    {
                        path.push(name);
                        continue;
                    }
                    capture = true;
                    text_buf.clear();
                    if name == "AbstractText" {
                        section_label = e
                            .attributes()
                            .flatten()
                            .find(|a| a.key.as_ref() == "Label")
                            .map(|a| a.normalized_value(XmlVersion::Implicit1_0).map(|v| v.into_owned()).unwrap_or_default());
                    }
                }
                path.push(name);
            }
            Ok(Event::End(e)) => {
                let name = e.name().as_ref().to_string();
                if depth_open == 0 {
                    return Err(IngestError::Parse(format!("unbalanced close of {name}")));
                }
                depth_open -= 1;
                path.pop();
                if capture {
                    let text = text_buf.trim().to_string();
                    if let Some(rec) = current.as_mut() {
                        match name.as_str() {
                            "PMID" => rec.id = text,
                            "ArticleTitle" => rec.title = text,
                            "AbstractText" => {
                                rec.labeled_sections.push((section_label.take(), text));
                            }
                            "PublicationType" => rec.publication_types.push(text),
                            _ => {}
                        }
                    }
                    if matches!(
                        name.as_str(),
                        "PMID" | "ArticleTitle" | "AbstractText" | "PublicationType"
                    ) {
                        capture = false;
                    }
                }
                if name == "PubmedArticle" {
                    if let Some(rec) = current.take() {
                        records.push(rec);
                    }
                }
            }
            Ok(Event::Text(t)) => {
                if capture {
                    text_buf.push_str(&t.xml_content(XmlVersion::Implicit1_0));
                }
            }
            Ok(Event::GeneralRef(r)) => {
                if capture {
                    match resolve_entity(&r) {
                        Some(c) => text_buf.push_str(&c),
                        None => {
                            return Err(IngestError::Parse(format!(
                                "unknown entity &{};",
                                r.as_ref()
                            )))
                        }
                    }
                }
            }
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => return Err(IngestError::Parse(e.to_string())),
        }
    }
    if depth_open != 0 {
        return Err(IngestError::Parse("truncated document".into()));
    }
    Ok(records)
}

/// Predefined XML entities plus numeric character references.
fn resolve_entity(r: &quick_xml::events::BytesRef<'_>) -> Option<String> {
    match r.as_ref() {
        "amp" => Some("&".into()),
        "lt" => Some("<".into()),
        "gt" => Some(">".into()),
        "quot" => Some("\"".into()),
        "apos" => Some("'".into()),
        _ => r.resolve_char_ref().ok().flatten().map(String::from),
    }
}

/// Search then fetch every matching record, paginating transparently.
/// Deterministic for a fixed transport.
pub fn fetch(
    query: &str,
    config: &FetchConfig,
    transport: &dyn Transport,
) -> Result<Vec<RawRecord>, IngestError> {
    let mut ids: Vec<String> = Vec::new();
    loop {
        let url = search_url(config, query, ids.len());
        let (count, page) = parse_search_response(&transport.get(&url)?)?;
        if page.is_empty() && ids.len() < count {
            return Err(IngestError::Parse(format!(
                "empty id page at offset {} of {count}",
                ids.len()
            )));
        }
        ids.extend(page);
        if ids.len() >= count {
            break;
        }
    }
    let mut records = Vec::new();
    for chunk in ids.chunks(config.page_size.max(1)) {
        let url = fetch_url(config, chunk);
        records.extend(parse_fetch_response(&transport.get(&url)?)?);
    }
    Ok(records)
}

/// Convert a fetched record to a raw document; labeled sections become
/// headed paragraphs.
pub fn to_document(record: &RawRecord) -> Result<Document, IngestError> {
    let paragraphs: Vec<Paragraph> = record
        .labeled_sections
        .iter()
        .filter(|(_, body)| !body.trim().is_empty())
        .map(|(heading, body)| Paragraph {
            heading: heading.as_ref().map(|h| h.trim().to_uppercase()),
            text: body.trim().to_string(),
        })
        .collect();
    if paragraphs.is_empty() {
        return Err(IngestError::EmptyBody(record.id.clone()));
    }
    Ok(Document {
        id: record.id.clone(),
        title: record.title.clone(),
        paragraphs,
        gold: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SectionClass;

    #[test]
    fn query_strings_are_stable() {
        let g = build_query(SearchStrategy::Glaucoma);
        assert!(g.contains("glaucoma[Title/Abstract]"));
        assert!(g.contains("NOT (''protocol''"));
        let d = build_query(SearchStrategy::PrescriptionDrugs);
        assert!(d.contains("latanoprost[Title]"));
        assert!(d.contains("timolol[Title]"));
        let s = build_query(SearchStrategy::SurgicalInterventions);
        assert!(s.contains("trabeculectomy[Title]"));
        assert!(s.contains("phacotrabeculectomy[Title]"));
        assert_eq!(g, build_query(SearchStrategy::Glaucoma));
    }

    fn search_xml(count: usize, ids: &[&str]) -> String {
        let ids: String = ids.iter().map(|i| format!("<Id>{i}</Id>")).collect();
        format!(
            "<eSearchResult><Count>{count}</Count><RetMax>{}</RetMax>\
             <IdList>{ids}</IdList></eSearchResult>",
            ids.len()
        )
    }

    fn article_xml(pmid: &str, title: &str, sections: &[(Option<&str>, &str)]) -> String {
        let body: String = sections
            .iter()
            .map(|(label, text)| match label {
                Some(l) => format!("<AbstractText Label=\"{l}\">{text}</AbstractText>"),
                None => format!("<AbstractText>{text}</AbstractText>"),
            })
            .collect();
        format!(
            "<PubmedArticle><MedlineCitation><PMID>{pmid}</PMID>\
             <Article><ArticleTitle>{title}</ArticleTitle>\
             <Abstract>{body}</Abstract>\
             <PublicationTypeList><PublicationType>Randomized Controlled Trial\
             </PublicationType></PublicationTypeList>\
             </Article></MedlineCitation></PubmedArticle>"
        )
    }

    #[test]
    fn fixture_round_trip_two_records() {
        let config = FetchConfig { page_size: 10, ..Default::default() };
        let fetch_xml = format!(
            "<PubmedArticleSet>{}{}</PubmedArticleSet>",
            article_xml("111", "First trial", &[(Some("METHODS"), "Body one.")]),
            article_xml("222", "Second trial", &[(None, "Body two.")]),
        );
        let transport = FixtureTransport::default()
            .with(&search_url(&config, "q", 0), &search_xml(2, &["111", "222"]))
            .with(&fetch_url(&config, &["111".into(), "222".into()]), &fetch_xml);
        let records = fetch("q", &config, &transport).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].title, "First trial");
        assert_eq!(records[1].id, "222");
        assert_eq!(records[0].publication_types, vec!["Randomized Controlled Trial"]);
    }

    #[test]
    fn pagination_concatenates_pages() {
        let config = FetchConfig { page_size: 2, ..Default::default() };
        let fetch1 = format!(
            "<PubmedArticleSet>{}{}</PubmedArticleSet>",
            article_xml("1", "a", &[(None, "x")]),
            article_xml("2", "b", &[(None, "x")]),
        );
        let fetch2 = format!(
            "<PubmedArticleSet>{}</PubmedArticleSet>",
            article_xml("3", "c", &[(None, "x")]),
        );
        let transport = FixtureTransport::default()
            .with(&search_url(&config, "q", 0), &search_xml(3, &["1", "2"]))
            .with(&search_url(&config, "q", 2), &search_xml(3, &["3"]))
            .with(&fetch_url(&config, &["1".into(), "2".into()]), &fetch1)
            .with(&fetch_url(&config, &["3".into()]), &fetch2);
        let records = fetch("q", &config, &transport).unwrap();
        assert_eq!(records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), vec!["1", "2", "3"]);
    }

    #[test]
    fn zero_hits_is_empty() {
        let config = FetchConfig::default();
        let transport = FixtureTransport::default()
            .with(&search_url(&config, "nothing", 0), &search_xml(0, &[]));
        assert!(fetch("nothing", &config, &transport).unwrap().is_empty());
    }

    #[test]
    fn truncated_xml_is_parse_error() {
        let broken = "<PubmedArticleSet><PubmedArticle><MedlineCitation>";
        assert!(matches!(parse_fetch_response(broken), Err(IngestError::Parse(_))));
        assert!(matches!(
            parse_search_response("<eSearchResult><IdList></IdList></eSearchResult>"),
            Err(IngestError::Parse(_))
        ));
    }

    #[test]
    fn to_document_maps_sections() {
        let rec = RawRecord {
            id: "9".into(),
            title: "T".into(),
            labeled_sections: vec![
                (Some("PURPOSE".into()), "Aim text.".into()),
                (Some("METHOD".into()), "Method text.".into()),
                (Some("RESULTS".into()), "Result text.".into()),
            ],
            publication_types: vec![],
        };
        let doc = to_document(&rec).unwrap();
        assert!(doc.structured());
        let classes: Vec<SectionClass> = doc
            .paragraphs
            .iter()
            .map(|p| crate::corpus::section_class(p.heading.as_deref().unwrap()))
            .collect();
        assert_eq!(
            classes,
            vec![SectionClass::Objective, SectionClass::Methods, SectionClass::Results]
        );
        // no characters lost
        assert_eq!(
            doc.paragraphs.iter().map(|p| p.text.as_str()).collect::<String>(),
            "Aim text.Method text.Result text."
        );
    }

    #[test]
    fn to_document_unlabeled_and_empty() {
        let rec = RawRecord {
            id: "1".into(),
            title: "T".into(),
            labeled_sections: vec![(None, "Just a body.".into())],
            publication_types: vec![],
        };
        let doc = to_document(&rec).unwrap();
        assert!(!doc.structured());
        assert_eq!(doc.paragraphs[0].heading, None);

        let empty = RawRecord {
            id: "2".into(),
            title: "T".into(),
            labeled_sections: vec![(Some("METHODS".into()), "  ".into())],
            publication_types: vec![],
        };
        assert!(matches!(to_document(&empty), Err(IngestError::EmptyBody(_))));
    }

    #[test]
    fn entities_are_decoded() {
        let xml = format!(
            "<PubmedArticleSet>{}</PubmedArticleSet>",
            article_xml("5", "Tubes &amp; shunts", &[(None, "a &lt; b")])
        );
        let recs = parse_fetch_response(&xml).unwrap();
        assert_eq!(recs[0].title, "Tubes & shunts");
        assert_eq!(recs[0].labeled_sections[0].1, "a < b");
    }
}
