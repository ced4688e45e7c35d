//! Synthetic trial-abstract generator. Produces annotated documents shaped
//! like real structured abstracts: an objective, a methods sentence naming
//! the patient group and both treatment arms, a results sentence carrying
//! the outcome measure and one numeric result per arm, and a conclusion.
//!
//! The generator seeds the abstracts with "distractor" numerics that look
//! locally like results: baseline measurements and doses in the methods,
//! and a secondary-findings sentence inside the results paragraph whose
//! values carry the opposite value type from the gold results and trail
//! the outcome sentence. An unconstrained per-token decoder is tempted by
//! them; the structural constraints (results live in the results section,
//! share a value type, and do not both trail the outcome's sentence) rule
//! them out, which is exactly the contrast the end-to-end comparisons
//! need.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, GoldSpan, Label, Paragraph};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub documents: usize,
    /// Expected number of distractor sentences per abstract.
    pub distractor_level: f64,
    /// Fraction of abstracts emitted without section headings.
    pub unstructured_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { documents: 60, distractor_level: 1.5, unstructured_fraction: 0.3 }
    }
}

const DRUGS: &[&str] = &[
    "latanoprost",
    "timolol",
    "tafluprost",
    "placebo",
    "brimonidine",
    "dorzolamide",
    "travoprost",
    "bimatoprost",
    "carteolol",
    "pilocarpine",
];

const CONDITIONS: &[&str] = &[
    "open-angle glaucoma",
    "ocular hypertension",
    "normal-tension glaucoma",
    "primary open-angle glaucoma",
];

const OUTCOMES: &[&str] = &[
    "intraocular pressure",
    "diurnal intraocular pressure",
    "mean intraocular pressure",
];

const GROUP_NOUNS: &[&str] = &["patients", "subjects", "participants"];

/// A paragraph under construction: text plus gold spans at known offsets.
#[derive(Default)]
struct Builder {
    text: String,
    gold: Vec<(Label, usize, usize)>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        if !self.text.is_empty() && !self.text.ends_with(' ') {
            self.text.push(' ');
        }
        self.text.push_str(s);
    }

    /// Append a phrase and mark it as the gold span for `label`.
    fn push_gold(&mut self, label: Label, s: &str) {
        if !self.text.is_empty() && !self.text.ends_with(' ') {
            self.text.push(' ');
        }
        let start = self.text.len();
        self.text.push_str(s);
        self.gold.push((label, start, self.text.len()));
    }
}

fn measurement(rng: &mut ChaCha8Rng) -> String {
    format!(
        "-{}.{} +/-{}.{} mmHg",
        rng.gen_range(1..9),
        rng.gen_range(0..10),
        rng.gen_range(0..3),
        rng.gen_range(1..10)
    )
}

/// An absolute (positive) pressure reading, for non-result measurements.
fn reading(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}.{} +/-{}.{} mmHg",
        rng.gen_range(14..24),
        rng.gen_range(0..10),
        rng.gen_range(0..3),
        rng.gen_range(1..10)
    )
}

fn percent(rng: &mut ChaCha8Rng) -> String {
    format!("{}.{}%", rng.gen_range(5..40), rng.gen_range(0..10))
}

fn distractor_sentence(
    rng: &mut ChaCha8Rng,
    outcome: &str,
    arm1: &str,
    arm2: &str,
) -> String {
    match rng.gen_range(0..5) {
        // a near-twin of the results sentence, but about baseline values:
        // the strongest bait for an unconstrained decoder
        0 | 1 => format!(
            "At baseline the mean {} was {} in the {} group and {} in the {} group.",
            outcome,
            measurement(rng),
            arm1,
            measurement(rng),
            arm2
        ),
        2 => format!(
            "Follow-up visits were scheduled every {} weeks for {} months.",
            rng.gen_range(2..9),
            rng.gen_range(3..13)
        ),
        3 => format!(
            "Eligibility required a pressure of at least {} mmHg at screening.",
            rng.gen_range(21..26)
        ),
        _ => format!(
            "The washout period lasted {} weeks before randomization.",
            rng.gen_range(2..7)
        ),
    }
}

/// Generate a deterministic corpus of annotated abstracts. Each document's
/// gold assignment satisfies the full-mode constraints: the arms precede
/// the outcome and results, the results sit in the results section, share
/// one sentence with the outcome, and carry the same value type.
pub fn generate(config: &SynthConfig, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(config.documents);
    for idx in 0..config.documents {
        docs.push(generate_one(config, &mut rng, idx));
    }
    docs
}

fn generate_one(config: &SynthConfig, rng: &mut ChaCha8Rng, idx: usize) -> Document {
    let mut drugs = DRUGS.to_vec();
    drugs.shuffle(rng);
    let (arm1, arm2) = (drugs[0], drugs[1]);
    let condition = CONDITIONS.choose(rng).unwrap();
    let outcome = OUTCOMES.choose(rng).unwrap();
    let noun = GROUP_NOUNS.choose(rng).unwrap();
    let enrolled = rng.gen_range(40..240);
    let weeks = rng.gen_range(4..53);

    let title = format!(
        "Comparison of {} and {} in {} with {}",
        arm1, arm2, noun, condition
    );

    // objective
    let mut objective = Builder::default();
    objective.push(&format!(
        "To compare the effect of {} and {} on {} in {} with {}.",
        arm1, arm2, outcome, noun, condition
    ));

    // methods: the patient group and both arms, plus distractor numerics
    let mut methods = Builder::default();
    methods.push(&format!("A total of {enrolled}"));
    methods.push_gold(Label::P, noun);
    methods.push(&format!("with {condition} were randomly assigned to receive"));
    methods.push_gold(Label::A1, arm1);
    methods.push(&format!("0.00{}% or", rng.gen_range(1..6)));
    methods.push_gold(Label::A2, arm2);
    methods.push(&format!("0.{}% once daily for {weeks} weeks.", rng.gen_range(1..6)));
    let mut extra = 0;
    while extra < 4 && rng.gen_bool((config.distractor_level / 4.0).clamp(0.0, 1.0)) {
        methods.push(&distractor_sentence(rng, outcome, arm1, arm2));
        extra += 1;
    }

    // Results-paragraph shape: optional tolerability lead, the gold outcome
    // sentence (results reported either as pressure changes or as percent
    // reductions), and optionally a secondary-findings sentence whose
    // values carry the opposite type and trail the outcome sentence - bait
    // that only the structural constraints rule out.
    let percent_gold = rng.gen_bool(0.5);
    let mut lead = rng.gen_range(0..=3usize);
    let mut trail = rng.gen_bool((config.distractor_level / 5.0).clamp(0.0, 0.8));
    let structured = !rng.gen_bool(config.unstructured_fraction);
    // Unheaded abstracts get their sections guessed by position in fifths;
    // pad the background (or shed the optional sentences) until the gold
    // results sentence - and the trailer, if kept - land in the fourth
    // fifth. With no optional sentences a small filler count always works,
    // so the ladder cannot come up empty. Several filler counts often
    // align; picking one at random keeps sentence positions varied.
    let mut fillers = 0usize;
    if !structured {
        let aligned = |bg: usize, lead: usize, trail: bool| {
            let res = lead + 1 + usize::from(trail);
            let s = bg + 1 + (1 + extra) + res + 1;
            let g = bg + 1 + (1 + extra) + lead;
            let (q, r) = (s / 5, s % 5);
            let size = |i: usize| q + usize::from(i < r);
            let start = size(0) + size(1) + size(2);
            let inside = |i: usize| i >= start && i < start + size(3);
            inside(g) && (!trail || inside(g + 1))
        };
        let ladder = [
            (lead, trail),
            (lead.min(1), trail),
            (0, trail),
            (lead, false),
            (lead.min(1), false),
            (0, false),
        ];
        let mut found = false;
        'search: for (l, t) in ladder {
            let ok: Vec<usize> = (0..=5).filter(|&f| aligned(1 + f, l, t)).collect();
            if let Some(&f) = ok.choose(rng) {
                (lead, trail, fillers) = (l, t, f);
                found = true;
                break 'search;
            }
        }
        assert!(found, "no aligned layout for {} methods sentences", 1 + extra);
    }

    const LEADS: &[&str] = &[
        "Both treatments were well tolerated with no serious adverse events.",
        "Compliance with the assigned regimen was high in both groups.",
        "No clinically relevant changes in visual acuity were observed.",
        "Conjunctival hyperaemia was the most frequent adverse event.",
    ];
    let mut results = Builder::default();
    for k in 0..lead {
        results.push(LEADS[(k + idx) % LEADS.len()]);
    }
    let p_value = ["0.001", "0.003", "0.01", "0.02", "0.04"].choose(rng).unwrap();
    if percent_gold {
        let (r1, r2) = (percent(rng), percent(rng));
        results.push("The mean");
        results.push_gold(Label::OC, outcome);
        results.push("decreased by");
        results.push_gold(Label::R1, &r1);
        results.push(&format!("in the {arm1} group and by"));
        results.push_gold(Label::R2, &r2);
        results.push(&format!("in the {arm2} group (p={p_value})."));
    } else {
        let (r1, r2) = (measurement(rng), measurement(rng));
        results.push("The mean change in");
        results.push_gold(Label::OC, outcome);
        results.push("was");
        results.push_gold(Label::R1, &r1);
        results.push(&format!("in the {arm1} group and"));
        results.push_gold(Label::R2, &r2);
        results.push(&format!("in the {arm2} group (p={p_value})."));
    }
    if trail {
        // mirror the gold templates word for word around the values so the
        // trailer is locally indistinguishable; only its value type and its
        // position after the outcome sentence give it away
        let p_trail = ["0.12", "0.21", "0.38", "0.54", "0.77"].choose(rng).unwrap();
        // a secondary endpoint phrase with the same token count as the
        // outcome, so relative positions line up too
        let dummy = if outcome.split_whitespace().count() == 2 {
            ["corneal thickness", "pupil diameter"].choose(rng).unwrap()
        } else {
            ["central corneal thickness", "average pupil diameter"].choose(rng).unwrap()
        };
        if percent_gold {
            results.push(&format!(
                "The mean change in {dummy} was {} in the {} group and {} in the {} group (p={p_trail}).",
                reading(rng),
                arm1,
                reading(rng),
                arm2
            ));
        } else {
            results.push(&format!(
                "The mean {dummy} decreased by {} in the {} group and by {} in the {} group (p={p_trail}).",
                percent(rng),
                arm1,
                percent(rng),
                arm2
            ));
        }
    }

    let mut conclusions = Builder::default();
    conclusions.push(&format!(
        "{} produced a greater reduction in {} than {} in {} with {}.",
        capitalize(arm1),
        outcome,
        arm2,
        noun,
        condition
    ));

    let mut blocks: Vec<(&str, Builder)> = Vec::new();
    if !structured {
        let mut background = Builder::default();
        background.push(&format!(
            "Lowering {} remains the mainstay of treatment for {}.",
            outcome, condition
        ));
        const FILLERS: &[&str] = &[
            "Several classes of topical therapy are available.",
            "Adherence to long-term therapy varies widely.",
            "Comparative evidence between individual agents remains limited.",
            "Tolerability often determines the choice of first-line agent.",
        ];
        for f in 0..fillers {
            background.push(FILLERS[f % FILLERS.len()]);
        }
        blocks.push(("BACKGROUND", background));
    }
    blocks.push(("OBJECTIVE", objective));
    blocks.push(("METHODS", methods));
    blocks.push(("RESULTS", results));
    blocks.push(("CONCLUSIONS", conclusions));

    let mut paragraphs = Vec::new();
    let mut gold = Vec::new();
    if structured {
        for (p, (heading, b)) in blocks.into_iter().enumerate() {
            for (label, start, end) in b.gold {
                gold.push(GoldSpan { label, paragraph: p, start, end });
            }
            paragraphs.push(Paragraph { heading: Some(heading.to_string()), text: b.text });
        }
    } else {
        // one unheaded paragraph
        let mut text = String::new();
        for (_, b) in blocks {
            let base = if text.is_empty() {
                0
            } else {
                text.push(' ');
                text.len()
            };
            text.push_str(&b.text);
            for (label, start, end) in b.gold {
                gold.push(GoldSpan { label, paragraph: 0, start: base + start, end: base + end });
            }
        }
        paragraphs.push(Paragraph { heading: None, text });
    }

    Document { id: format!("synth-{idx:04}"), title, paragraphs, gold }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SectionClass;
    use crate::inference::{check_constraints, DecodeMode, LabelingProblem, WORD_TYPE};
    use crate::preprocess::{filter_candidates, Preprocessor};

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig { documents: 5, ..Default::default() };
        let a = generate(&cfg, 1);
        let b = generate(&cfg, 1);
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.id, y.id);
            assert_eq!(x.title, y.title);
            assert_eq!(
                x.paragraphs.iter().map(|p| &p.text).collect::<Vec<_>>(),
                y.paragraphs.iter().map(|p| &p.text).collect::<Vec<_>>()
            );
        }
        let joined = |d: &Document| {
            d.paragraphs.iter().map(|p| p.text.clone()).collect::<Vec<_>>().join(" ")
        };
        let c = generate(&cfg, 2);
        assert_ne!(joined(&a[0]), joined(&c[0]));
    }

    #[test]
    fn gold_spans_are_well_formed() {
        let cfg = SynthConfig { documents: 20, ..Default::default() };
        for doc in generate(&cfg, 3) {
            let mut labels: Vec<Label> = doc.gold.iter().map(|g| g.label).collect();
            labels.sort_by_key(|l| l.index());
            assert_eq!(labels, Label::TARGETS.to_vec(), "doc {}", doc.id);
            for g in &doc.gold {
                let text = &doc.paragraphs[g.paragraph].text;
                assert!(g.end <= text.len());
                let span = &text[g.start..g.end];
                assert!(!span.trim().is_empty());
            }
        }
    }

    #[test]
    fn mixes_structured_and_unstructured() {
        let cfg = SynthConfig { documents: 40, unstructured_fraction: 0.4, ..Default::default() };
        let docs = generate(&cfg, 5);
        let structured = docs.iter().filter(|d| d.structured()).count();
        assert!(structured > 10 && structured < 40, "structured = {structured}");
    }

    /// The gold assignment of every generated document must be feasible
    /// under the full constraint set once run through preprocessing.
    #[test]
    fn gold_assignments_are_feasible() {
        let cfg = SynthConfig { documents: 25, ..Default::default() };
        let pre = Preprocessor::with_builtin();
        for doc in generate(&cfg, 11) {
            let a = pre.run(&doc);
            let candidates = filter_candidates(&a);
            let mut positions = [0usize; 6];
            for (ci, cand) in candidates.iter().enumerate() {
                let label = a.tokens[cand.token_index].gold;
                if label != Label::O && positions[label.index()] == 0 {
                    positions[label.index()] = ci + 1;
                }
            }
            assert!(
                positions.iter().all(|&z| z > 0),
                "doc {}: gold label missing from candidates: {positions:?}",
                doc.id
            );
            let n = candidates.len();
            let mut problem = LabelingProblem::new(vec![[0.0; 7]; n]);
            for (i, cand) in candidates.iter().enumerate() {
                let tok = &a.tokens[cand.token_index];
                problem.section[i] = tok.section;
                problem.sent_pos[i] = tok.sentence_index.min(9) as u8;
                problem.norm_type[i] =
                    tok.norm_tag.map(|t| t.type_id()).unwrap_or(WORD_TYPE);
            }
            assert!(
                check_constraints(&problem, &positions, DecodeMode::Full),
                "doc {}: gold assignment violates constraints at {positions:?} \
                 sections {:?} types {:?}",
                doc.id,
                positions.map(|z| problem.section[z - 1]),
                positions.map(|z| problem.norm_type[z - 1]),
            );
        }
    }

    #[test]
    fn distractors_add_methods_numerics() {
        let heavy = SynthConfig {
            documents: 30,
            distractor_level: 3.0,
            unstructured_fraction: 0.0,
        };
        let none = SynthConfig { distractor_level: 0.0, ..heavy.clone() };
        let count_methods_numbers = |docs: &[Document]| -> usize {
            let pre = Preprocessor::with_builtin();
            docs.iter()
                .map(|d| {
                    let a = pre.run(d);
                    a.tokens
                        .iter()
                        .filter(|t| {
                            t.section == SectionClass::Methods && t.norm_tag.is_some()
                        })
                        .count()
                })
                .sum()
        };
        let heavy_n = count_methods_numbers(&generate(&heavy, 2));
        let none_n = count_methods_numbers(&generate(&none, 2));
        assert!(heavy_n > none_n, "{heavy_n} vs {none_n}");
    }
}
