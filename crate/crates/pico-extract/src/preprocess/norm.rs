//! Numeric normalization: replace numbers and numeric constructions with
//! canonical tag tokens while keeping the original character spans.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

/// The sixteen normalization tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormTag {
    Num,
    Perc,
    Meas,
    Confint,
    Confintm,
    Range,
    Ratio,
    Pval,
    Frac,
    Poft,
    Gone,
    Dose,
    Count,
    PercRange,
    MeasRange,
    Date,
}

impl NormTag {
    pub const ALL: [NormTag; 16] = [
        NormTag::Num,
        NormTag::Perc,
        NormTag::Meas,
        NormTag::Confint,
        NormTag::Confintm,
        NormTag::Range,
        NormTag::Ratio,
        NormTag::Pval,
        NormTag::Frac,
        NormTag::Poft,
        NormTag::Gone,
        NormTag::Dose,
        NormTag::Count,
        NormTag::PercRange,
        NormTag::MeasRange,
        NormTag::Date,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormTag::Num => "_NUM_",
            NormTag::Perc => "_PERC_",
            NormTag::Meas => "_MEAS_",
            NormTag::Confint => "_CONFINT_",
            NormTag::Confintm => "_CONFINTM_",
            NormTag::Range => "_RANGE_",
            NormTag::Ratio => "_RATIO_",
            NormTag::Pval => "_PVAL_",
            NormTag::Frac => "_FRAC_",
            NormTag::Poft => "_POFT_",
            NormTag::Gone => "_GONE_",
            NormTag::Dose => "_DOSE_",
            NormTag::Count => "_COUNT_",
            NormTag::PercRange => "_PERCRANGE_",
            NormTag::MeasRange => "_MEASRANGE_",
            NormTag::Date => "_DATE_",
        }
    }

    pub fn from_token(s: &str) -> Option<NormTag> {
        NormTag::ALL.iter().copied().find(|t| t.as_str() == s)
    }

    /// Type equivalence class, the `w` value of the labeling problem.
    /// Elided-unit constructions share a type with their unit-bearing form.
    pub fn type_id(self) -> u8 {
        match self {
            NormTag::Num | NormTag::Meas | NormTag::Count | NormTag::Dose => 0,
            NormTag::Confint | NormTag::Confintm => 1,
            NormTag::Perc | NormTag::PercRange => 2,
            NormTag::Range | NormTag::MeasRange => 3,
            NormTag::Ratio => 4,
            NormTag::Pval => 5,
            NormTag::Frac => 6,
            NormTag::Poft => 7,
            NormTag::Gone => 8,
            NormTag::Date => 9,
        }
    }
}

/// Non-numeric-type marker used for ordinary words in the labeling problem.
pub const WORD_TYPE: u8 = 101;

/// Working token used during preprocessing, before `corpus::Token` exists.
#[derive(Debug, Clone, PartialEq)]
pub struct WTok {
    /// Current text: original word, abbreviation-expansion word, or the
    /// original substring once a normalization tag is attached.
    pub text: String,
    /// Span into the full abstract text; merged tokens cover the whole span.
    pub span: (usize, usize),
    pub tag: Option<NormTag>,
}

impl WTok {
    pub fn new(text: impl Into<String>, span: (usize, usize)) -> Self {
        WTok { text: text.into(), span, tag: None }
    }

    /// The token as it reads after normalization.
    pub fn rendered(&self) -> &str {
        match self.tag {
            Some(t) => t.as_str(),
            None => &self.text,
        }
    }
}

static NUM_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[+-]?\d+(\.\d+)?$").unwrap());
static PM_NUM_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(\+/-|±|\+-)[+-]?\d+(\.\d+)?$").unwrap());
static PERC_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[+-]?\d+(\.\d+)?%$").unwrap());
static RATIO_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\d+(\.\d+)?/\d+(\.\d+)?$").unwrap());
static PVAL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^[pP][<>=≤≥]=?(0?\.\d+|\d+(\.\d+)?)$").unwrap());
static HYPHEN_RANGE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\d+(\.\d+)?-\d+(\.\d+)?$").unwrap());
static PERC_RANGE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\d+(\.\d+)?%-\d+(\.\d+)?%$").unwrap());
static YEAR_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^(19|20)\d{2}$").unwrap());
static COUNT_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"^[nN]=\d+$").unwrap());
static DOSE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(mg|mcg|ug|µg|ml|iu)/(day|kg|ml|l|h|hr|dose)$").unwrap());

const MEAS_UNITS: &[&str] = &[
    "mmhg", "mm", "cm", "nm", "um", "µm", "mg", "g", "kg", "ml", "l", "db", "ug", "µg", "mcg",
    "letters", "d", "dioptres", "diopters",
];

const TIME_UNITS: &[&str] = &[
    "hour", "hours", "minute", "minutes", "day", "days", "week", "weeks", "month", "months",
    "year", "years",
];

fn is_num(t: &WTok) -> bool {
    t.tag.is_none() && NUM_RE.is_match(&t.text)
}

fn is_pm_num(t: &WTok) -> bool {
    t.tag.is_none() && PM_NUM_RE.is_match(&t.text)
}

fn lower(t: &WTok) -> String {
    t.text.to_lowercase()
}

fn is_meas_unit(t: &WTok) -> bool {
    t.tag.is_none() && MEAS_UNITS.contains(&lower(t).as_str())
}

fn is_time_unit(t: &WTok) -> bool {
    t.tag.is_none() && TIME_UNITS.contains(&lower(t).as_str())
}

fn is_range_sep(t: &WTok) -> bool {
    t.tag.is_none() && matches!(lower(t).as_str(), "to" | "-" | "–" | "through")
}

fn is_list_sep(t: &WTok) -> bool {
    t.tag.is_none() && matches!(lower(t).as_str(), "," | "and" | "or")
}

fn is_perc(t: &WTok) -> bool {
    (t.tag.is_none() && PERC_RE.is_match(&t.text)) || t.tag == Some(NormTag::Perc)
}

fn is_group_word(t: &WTok) -> bool {
    t.tag.is_none() && matches!(lower(t).as_str(), "group" | "arm")
}

fn is_group_ordinal(t: &WTok) -> bool {
    t.tag.is_none()
        && matches!(lower(t).as_str(), "1" | "2" | "3" | "one" | "two" | "three" | "i" | "ii" | "a" | "b")
}

/// Merge `toks[i..i+len]` into a single tag token covering the original span.
fn merge(toks: &mut Vec<WTok>, text: &str, i: usize, len: usize, tag: NormTag) {
    debug_assert!(len >= 1);
    let start = toks[i].span.0;
    let end = toks[i + len - 1].span.1;
    let original = text.get(start..end).unwrap_or("").to_string();
    toks.splice(
        i..i + len,
        [WTok { text: original, span: (start, end), tag: Some(tag) }],
    );
}

/// Try the pattern table at position `i`, longest window first. Returns the
/// consumed window length when a rule fired.
fn apply_at(toks: &mut Vec<WTok>, text: &str, i: usize) -> Option<usize> {
    let t = |k: usize| toks.get(i + k);

    // confidence interval: "95% CI 1.2 to 3.4" / "95% confidence interval 1.2-3.4"
    if is_perc(&toks[i]) {
        let mut j = i + 1;
        let mut saw_ci = false;
        if let Some(n) = toks.get(j) {
            if n.tag.is_none() && lower(n) == "ci" {
                saw_ci = true;
                j += 1;
            } else if n.tag.is_none() && lower(n) == "confidence" {
                if let Some(n2) = toks.get(j + 1) {
                    if n2.tag.is_none() && lower(n2) == "interval" {
                        saw_ci = true;
                        j += 2;
                    }
                }
            }
        }
        if saw_ci {
            if let (Some(a), Some(sep), Some(b)) = (toks.get(j), toks.get(j + 1), toks.get(j + 2)) {
                if (is_num(a) || HYPHEN_RANGE_RE.is_match(&a.text) && a.tag.is_none())
                    && is_range_sep(sep)
                    && is_num(b)
                    || (is_num(a) && is_range_sep(sep) && is_num(b))
                {
                    let with_unit = toks.get(j + 3).map(is_meas_unit).unwrap_or(false);
                    let len = (j + 3 - i) + usize::from(with_unit);
                    let tag = if with_unit { NormTag::Confintm } else { NormTag::Confint };
                    merge(toks, text, i, len, tag);
                    return Some(1);
                }
                if a.tag.is_none() && HYPHEN_RANGE_RE.is_match(&a.text) {
                    merge(toks, text, i, j + 1 - i, NormTag::Confint);
                    return Some(1);
                }
            }
        }
    }

    // p-value: single token "p<0.001" or split "p" "<" "0.001"
    if toks[i].tag.is_none() && PVAL_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Pval);
        return Some(1);
    }
    if toks[i].tag.is_none() && matches!(toks[i].text.as_str(), "p" | "P") {
        if let (Some(op), Some(v)) = (t(1), t(2)) {
            if op.tag.is_none()
                && matches!(op.text.as_str(), "<" | ">" | "=" | "≤" | "≥")
                && (is_num(v) || (v.tag.is_none() && v.text.starts_with('.')))
            {
                merge(toks, text, i, 3, NormTag::Pval);
                return Some(1);
            }
        }
    }

    // measurement range: "10 to 20 mmHg"
    if is_num(&toks[i]) {
        if let (Some(sep), Some(b), Some(u)) = (t(1), t(2), t(3)) {
            if is_range_sep(sep) && is_num(b) && is_meas_unit(u) {
                merge(toks, text, i, 4, NormTag::MeasRange);
                return Some(1);
            }
        }
    }

    // percentage range: "10% to 20%" or "10%-20%"
    if is_perc(&toks[i]) && toks[i].tag.is_none() {
        if let (Some(sep), Some(b)) = (t(1), t(2)) {
            if is_range_sep(sep) && b.tag.is_none() && PERC_RE.is_match(&b.text) {
                merge(toks, text, i, 3, NormTag::PercRange);
                return Some(1);
            }
        }
    }
    if toks[i].tag.is_none() && PERC_RANGE_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::PercRange);
        return Some(1);
    }

    // measurement with tolerance: "-4.0 +/-1.7 mmHg", plain "33 mm"
    if is_num(&toks[i]) {
        if let (Some(pm), Some(u)) = (t(1), t(2)) {
            if is_pm_num(pm) && is_meas_unit(u) {
                merge(toks, text, i, 3, NormTag::Meas);
                return Some(1);
            }
        }
        if let Some(u) = t(1) {
            if is_meas_unit(u) {
                merge(toks, text, i, 2, NormTag::Meas);
                return Some(1);
            }
        }
    }

    // period of time: "4 weeks"
    if is_num(&toks[i]) {
        if let Some(u) = t(1) {
            if is_time_unit(u) {
                merge(toks, text, i, 2, NormTag::Poft);
                return Some(1);
            }
        }
    }

    // fraction: "53 of 56"
    if is_num(&toks[i]) {
        if let (Some(of), Some(b)) = (t(1), t(2)) {
            if of.tag.is_none() && lower(of) == "of" && is_num(b) {
                merge(toks, text, i, 3, NormTag::Frac);
                return Some(1);
            }
        }
    }

    // numeric range: "10 to 20", "10-20"
    if is_num(&toks[i]) {
        if let (Some(sep), Some(b)) = (t(1), t(2)) {
            if is_range_sep(sep) && is_num(b) {
                merge(toks, text, i, 3, NormTag::Range);
                return Some(1);
            }
        }
    }
    if toks[i].tag.is_none() && HYPHEN_RANGE_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Range);
        return Some(1);
    }

    // ratio token: "53/56"
    if toks[i].tag.is_none() && RATIO_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Ratio);
        return Some(1);
    }

    // enrollment count: "n=94" or "n = 94"
    if toks[i].tag.is_none() && COUNT_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Count);
        return Some(1);
    }
    if toks[i].tag.is_none() && matches!(toks[i].text.as_str(), "n" | "N") {
        if let (Some(eq), Some(v)) = (t(1), t(2)) {
            if eq.tag.is_none() && eq.text == "=" && is_num(v) {
                merge(toks, text, i, 3, NormTag::Count);
                return Some(1);
            }
        }
    }

    // dose: "2 mg/day"
    if is_num(&toks[i]) {
        if let Some(u) = t(1) {
            if u.tag.is_none() && DOSE_RE.is_match(&lower(u)) {
                merge(toks, text, i, 2, NormTag::Dose);
                return Some(1);
            }
        }
    }

    // group reference: "group 1", "arm B"
    if is_group_word(&toks[i]) {
        if let Some(o) = t(1) {
            if is_group_ordinal(o) {
                merge(toks, text, i, 2, NormTag::Gone);
                return Some(1);
            }
        }
    }

    // calendar year
    if toks[i].tag.is_none() && YEAR_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Date);
        return Some(1);
    }

    // percentage: "25%" or "25 %"
    if toks[i].tag.is_none() && PERC_RE.is_match(&toks[i].text) {
        merge(toks, text, i, 1, NormTag::Perc);
        return Some(1);
    }
    if is_num(&toks[i]) {
        if let Some(p) = t(1) {
            if p.tag.is_none() && p.text == "%" {
                merge(toks, text, i, 2, NormTag::Perc);
                return Some(1);
            }
        }
    }

    // bare number, lowest priority
    if is_num(&toks[i]) {
        merge(toks, text, i, 1, NormTag::Num);
        return Some(1);
    }

    // ellipsis resolution: a _NUM_ in a comma/and list whose neighbour
    // carries a unit-bearing tag inherits that tag ("10, 20 and 30 mmHg").
    if toks[i].tag == Some(NormTag::Num) {
        if let (Some(sep), Some(next)) = (t(1), t(2)) {
            if is_list_sep(sep) {
                if let Some(tag) = next.tag {
                    if matches!(tag, NormTag::Meas | NormTag::Perc | NormTag::Poft | NormTag::Dose)
                    {
                        toks[i].tag = Some(tag);
                        return Some(1);
                    }
                }
            }
        }
    }

    None
}

/// Apply the pattern table to one sentence of working tokens, multi-pass
/// until fixpoint.
pub fn normalize_tokens(toks: &mut Vec<WTok>, text: &str) {
    for _pass in 0..12 {
        let mut changed = false;
        let mut i = 0;
        while i < toks.len() {
            let before = (toks.len(), toks[i].clone());
            if apply_at(toks, text, i).is_some() {
                let after = (toks.len(), toks[i].clone());
                if before != after {
                    changed = true;
                }
            }
            i += 1;
        }
        if !changed {
            break;
        }
    }
}

/// Normalize a standalone sentence string; convenience for tests and the
/// CLI preview. Tokens are joined with single spaces.
pub fn normalize_text(sentence: &str) -> String {
    let mut toks = crate::preprocess::tokenize(sentence, 0);
    normalize_tokens(&mut toks, sentence);
    toks.iter().map(|t| t.rendered()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsis_resolution() {
        assert_eq!(normalize_text("10, 20 and 30 mmHg"), "_MEAS_ , _MEAS_ and _MEAS_");
    }

    #[test]
    fn percent() {
        assert_eq!(normalize_text("reduced by 25%"), "reduced by _PERC_");
    }

    #[test]
    fn untouched_text() {
        assert_eq!(normalize_text("no numbers here"), "no numbers here");
    }

    #[test]
    fn measurement_with_tolerance() {
        assert_eq!(normalize_text("were -4.0 +/-1.7 mmHg in"), "were _MEAS_ in");
    }

    #[test]
    fn p_value_and_count() {
        assert_eq!(normalize_text("significant (p<0.001) effect"), "significant ( _PVAL_ ) effect");
        assert_eq!(normalize_text("enrolled (n=94) patients"), "enrolled ( _COUNT_ ) patients");
    }

    #[test]
    fn confint_variants() {
        assert_eq!(normalize_text("95% CI 1.2 to 3.4"), "_CONFINT_");
        assert_eq!(normalize_text("95% CI 1.2 to 3.4 mmHg"), "_CONFINTM_");
        assert_eq!(
            NormTag::Confint.type_id(),
            NormTag::Confintm.type_id(),
        );
    }

    #[test]
    fn fraction_and_ratio() {
        assert_eq!(normalize_text("53 of 56 eyes"), "_FRAC_ eyes");
        assert_eq!(normalize_text("a 53/56 ratio"), "a _RATIO_ ratio");
    }

    #[test]
    fn period_and_group() {
        assert_eq!(normalize_text("for 4 weeks in group 1"), "for _POFT_ in _GONE_");
    }

    #[test]
    fn type_map_is_total_and_bounded() {
        for t in NormTag::ALL {
            assert!(t.type_id() <= 15);
            assert_eq!(NormTag::from_token(t.as_str()), Some(t));
        }
        assert_eq!(NormTag::Num.type_id(), NormTag::Meas.type_id());
        assert_eq!(NormTag::Num.type_id(), NormTag::Count.type_id());
        assert_eq!(NormTag::Perc.type_id(), NormTag::PercRange.type_id());
        assert_eq!(NormTag::Range.type_id(), NormTag::MeasRange.type_id());
        assert_ne!(NormTag::Num.type_id(), NormTag::Perc.type_id());
    }

    #[test]
    fn idempotent() {
        for s in [
            "10, 20 and 30 mmHg",
            "reduced by 25% (p<0.001) over 4 weeks",
            "95% CI 1.2 to 3.4 mmHg in group 2",
            "53 of 56 eyes, 54 of 57 eyes",
        ] {
            let once = normalize_text(s);
            assert_eq!(normalize_text(&once), once, "input {s:?}");
        }
    }

    #[test]
    fn spans_cover_original(){
        let s = "changes were -4.0 +/-1.7 mmHg at 4 weeks";
        let mut toks = crate::preprocess::tokenize(s, 0);
        normalize_tokens(&mut toks, s);
        let meas = toks.iter().find(|t| t.tag == Some(NormTag::Meas)).unwrap();
        assert_eq!(&s[meas.span.0..meas.span.1], "-4.0 +/-1.7 mmHg");
        let poft = toks.iter().find(|t| t.tag == Some(NormTag::Poft)).unwrap();
        assert_eq!(&s[poft.span.0..poft.span.1], "4 weeks");
    }
}
