//! Constrained decoding over candidate tokens.
//!
//! A trained classifier gives each candidate a log-probability for the seven
//! labels; decoding picks one token per target label. Three modes:
//!
//! * `Zero` — per-token argmax, no structural constraints.
//! * `Vanilla` — exactly one token per target label, all six on distinct
//!   positions, nothing else.
//! * `Full` — vanilla plus the ordering, section, sentence, and value-type
//!   constraints, with a small penalty on the arm-to-arm and
//!   result-to-result distances.
//!
//! `solve` is exact (branch and bound); `brute_force` is a deliberately
//! simple nested enumeration kept as the reference the solver is tested
//! against. Both resolve objective ties in favor of the lexicographically
//! smallest position vector (P, A1, A2, OC, R1, R2).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, SectionClass};
use crate::features::{extract_features, vectorize};
use crate::maxent::{MaxEntModel, NUM_CLASSES};
use crate::preprocess::{filter_candidates, Candidate};

/// Distance penalty weights: small enough to only break ties between
/// otherwise equal-probability assignments.
pub const DELTA_A: f64 = 1e-5;
pub const DELTA_R: f64 = 1e-5;

/// Value-type id meaning "plain word" (not a recognized numeric form).
pub const WORD_TYPE: u8 = crate::preprocess::WORD_TYPE;

/// Slack used when comparing floating-point bounds during search.
const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Zero,
    Vanilla,
    Full,
}

impl DecodeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeMode::Zero => "zero",
            DecodeMode::Vanilla => "vanilla",
            DecodeMode::Full => "full",
        }
    }
}

impl std::str::FromStr for DecodeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(DecodeMode::Zero),
            "vanilla" => Ok(DecodeMode::Vanilla),
            "full" => Ok(DecodeMode::Full),
            other => Err(format!("unknown decode mode {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("empty problem: no candidate tokens")]
    EmptyProblem,
    #[error("no feasible assignment under the active constraints")]
    Infeasible,
    #[error("problem too large for brute force ({n} candidates, limit {limit})")]
    ProblemTooLarge { n: usize, limit: usize },
}

/// A decoding instance: per-candidate label log-probabilities plus the
/// token attributes the full-mode constraints consult. Candidate positions
/// are 1-based (`1..=n`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelingProblem {
    pub logp: Vec<[f64; NUM_CLASSES]>,
    pub section: Vec<SectionClass>,
    /// Sentence index within the abstract, capped at 9.
    pub sent_pos: Vec<u8>,
    /// Numeric value-type id, or `WORD_TYPE` for plain words.
    pub norm_type: Vec<u8>,
    pub delta_a: f64,
    pub delta_r: f64,
    /// When set, the outcome token must share a sentence with one of the
    /// result tokens instead of merely not trailing both.
    pub strict_outcome_sentence: bool,
}

impl LabelingProblem {
    pub fn n(&self) -> usize {
        self.logp.len()
    }

    pub fn new(logp: Vec<[f64; NUM_CLASSES]>) -> Self {
        let n = logp.len();
        LabelingProblem {
            logp,
            section: vec![SectionClass::None; n],
            sent_pos: vec![0; n],
            norm_type: vec![WORD_TYPE; n],
            delta_a: DELTA_A,
            delta_r: DELTA_R,
            strict_outcome_sentence: false,
        }
    }
}

/// Chosen candidate position (1-based) for each target label, in the order
/// P, A1, A2, OC, R1, R2.
pub type Positions = [usize; 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub mode: DecodeMode,
    /// One label per candidate position, index 0 is position 1.
    pub labels: Vec<Label>,
    /// Positions for the six target labels; `None` only in zero mode when a
    /// label won no token.
    pub positions: [Option<usize>; 6],
    pub objective: f64,
}

/// Sum of chosen log-probabilities (background label elsewhere), minus the
/// distance penalties in full mode. Identical arithmetic is used by the
/// solver and the brute-force reference so their objectives match bit for
/// bit.
pub fn objective(problem: &LabelingProblem, positions: &Positions, mode: DecodeMode) -> f64 {
    let o = Label::O.index();
    let mut total = 0.0;
    for i in 0..problem.n() {
        total += problem.logp[i][o];
    }
    for (l, &z) in positions.iter().enumerate() {
        total += problem.logp[z - 1][l] - problem.logp[z - 1][o];
    }
    if mode == DecodeMode::Full {
        let d_a = positions[2] as f64 - positions[1] as f64;
        let d_r = positions[5] as f64 - positions[4] as f64;
        total -= problem.delta_a * d_a + problem.delta_r * d_r;
    }
    total
}

fn section_at(problem: &LabelingProblem, z: usize) -> SectionClass {
    problem.section[z - 1]
}

/// Full-mode feasibility, written directly from the constraint list. This is
/// the validator the solvers and tests agree on.
pub fn check_constraints(
    problem: &LabelingProblem,
    positions: &Positions,
    mode: DecodeMode,
) -> bool {
    let [p, a1, a2, oc, r1, r2] = *positions;
    if positions.iter().any(|&z| z == 0 || z > problem.n()) {
        return false;
    }
    // one token per label, all distinct
    for i in 0..6 {
        for j in (i + 1)..6 {
            if positions[i] == positions[j] {
                return false;
            }
        }
    }
    if mode != DecodeMode::Full {
        return true;
    }
    // arm order, result order
    if a2 < a1 || r2 < r1 {
        return false;
    }
    // outcome and results come after the patient group and both arms
    for late in [oc, r1, r2] {
        for early in [p, a1, a2] {
            if late < early {
                return false;
            }
        }
    }
    // results live in the results section (or an unsectioned abstract)
    for z in [r1, r2] {
        let s = section_at(problem, z);
        if s != SectionClass::Results && s != SectionClass::None {
            return false;
        }
    }
    // the group and arms do not
    for z in [p, a1, a2] {
        if section_at(problem, z) == SectionClass::Results {
            return false;
        }
    }
    // the patient group is not strictly between the two arms
    if !(p <= a1 || p >= a2) {
        return false;
    }
    // results are numeric values of matching type
    if problem.norm_type[r1 - 1] > 100 || problem.norm_type[r2 - 1] > 100 {
        return false;
    }
    if problem.norm_type[r1 - 1] != problem.norm_type[r2 - 1] {
        return false;
    }
    // the outcome is announced no later than the results' sentences
    let (qo, q1, q2) =
        (problem.sent_pos[oc - 1], problem.sent_pos[r1 - 1], problem.sent_pos[r2 - 1]);
    if problem.strict_outcome_sentence {
        if qo != q1 && qo != q2 {
            return false;
        }
    } else if !(qo >= q1 || qo >= q2) {
        return false;
    }
    true
}

fn positions_to_labels(n: usize, positions: &Positions) -> Vec<Label> {
    let mut labels = vec![Label::O; n];
    for (l, &z) in positions.iter().enumerate() {
        labels[z - 1] = Label::from_index(l).unwrap();
    }
    labels
}

fn solution_from_positions(
    problem: &LabelingProblem,
    positions: Positions,
    mode: DecodeMode,
) -> Solution {
    Solution {
        mode,
        labels: positions_to_labels(problem.n(), &positions),
        positions: positions.map(Some),
        objective: objective(problem, &positions, mode),
    }
}

fn solve_zero(problem: &LabelingProblem) -> Solution {
    let mut labels = Vec::with_capacity(problem.n());
    let mut positions = [None; 6];
    let mut best_logp = [f64::NEG_INFINITY; 6];
    let mut total = 0.0;
    for (i, row) in problem.logp.iter().enumerate() {
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if row[c] > row[best] {
                best = c;
            }
        }
        total += row[best];
        labels.push(Label::from_index(best).unwrap());
        // report the highest-scoring token per target label
        if best < 6 && row[best] > best_logp[best] {
            best_logp[best] = row[best];
            positions[best] = Some(i + 1);
        }
    }
    Solution { mode: DecodeMode::Zero, labels, positions, objective: total }
}

/// Exact reference decoder: ascending nested enumeration over the six
/// positions with constraint checks at the earliest possible level.
/// Ascending order plus strictly-greater replacement makes the returned
/// optimum the lexicographically smallest among ties.
pub fn brute_force(
    problem: &LabelingProblem,
    mode: DecodeMode,
) -> Result<Solution, InferenceError> {
    const LIMIT: usize = 16;
    let n = problem.n();
    if n == 0 {
        return Err(InferenceError::EmptyProblem);
    }
    if n > LIMIT {
        return Err(InferenceError::ProblemTooLarge { n, limit: LIMIT });
    }
    if mode == DecodeMode::Zero {
        return Ok(solve_zero(problem));
    }
    if n < 6 {
        return Err(InferenceError::Infeasible);
    }

    let mut best: Option<(f64, Positions)> = None;
    let mut pos: Positions = [0; 6];
    enumerate(problem, mode, 0, &mut pos, &mut best);
    match best {
        Some((_, positions)) => Ok(solution_from_positions(problem, positions, mode)),
        None => Err(InferenceError::Infeasible),
    }
}

fn enumerate(
    problem: &LabelingProblem,
    mode: DecodeMode,
    depth: usize,
    pos: &mut Positions,
    best: &mut Option<(f64, Positions)>,
) {
    if depth == 6 {
        if !check_constraints(problem, pos, mode) {
            return;
        }
        let obj = objective(problem, pos, mode);
        if best.as_ref().map_or(true, |(b, _)| obj > *b) {
            *best = Some((obj, *pos));
        }
        return;
    }
    for z in 1..=problem.n() {
        if pos[..depth].contains(&z) {
            continue;
        }
        pos[depth] = z;
        enumerate(problem, mode, depth + 1, pos, best);
    }
    pos[depth] = 0;
}

/// Per-position gain of assigning a target label instead of the background
/// label.
fn gains(problem: &LabelingProblem) -> Vec<[f64; 6]> {
    let o = Label::O.index();
    problem
        .logp
        .iter()
        .map(|row| {
            let mut g = [0.0; 6];
            for (l, slot) in g.iter_mut().enumerate() {
                *slot = row[l] - row[o];
            }
            g
        })
        .collect()
}

/// Feasibility of a single position for a single label, ignoring the
/// relational constraints (those are handled during search).
fn unary_ok(problem: &LabelingProblem, label: usize, z: usize) -> bool {
    let s = section_at(problem, z);
    match label {
        0..=2 => s != SectionClass::Results,
        4 | 5 => {
            (s == SectionClass::Results || s == SectionClass::None)
                && problem.norm_type[z - 1] <= 100
        }
        _ => true,
    }
}

struct Search<'a> {
    problem: &'a LabelingProblem,
    mode: DecodeMode,
    gains: Vec<[f64; 6]>,
    /// `suffix_best[d]` bounds the total gain attainable from labels `d..6`.
    suffix_best: [f64; 7],
    best: Option<(f64, Positions)>,
}

/// Exact decoder: depth-first search over positions in label order
/// (P, A1, A2, OC, R1, R2) with an admissible upper bound. Positions are
/// tried in ascending order and the incumbent is replaced only on a strict
/// improvement, so ties resolve exactly as in `brute_force`; leaf objectives
/// are computed by the shared `objective` to keep the two bit-identical.
pub fn solve(problem: &LabelingProblem, mode: DecodeMode) -> Result<Solution, InferenceError> {
    let n = problem.n();
    if n == 0 {
        return Err(InferenceError::EmptyProblem);
    }
    if mode == DecodeMode::Zero {
        return Ok(solve_zero(problem));
    }
    if n < 6 {
        return Err(InferenceError::Infeasible);
    }

    let gains = gains(problem);
    // per-label best gain over feasible positions (full mode narrows by the
    // per-position constraints; the distance penalties are <= 0, so dropping
    // them keeps the bound admissible)
    let mut label_best = [f64::NEG_INFINITY; 6];
    for l in 0..6 {
        for z in 1..=n {
            if mode == DecodeMode::Full && !unary_ok(problem, l, z) {
                continue;
            }
            label_best[l] = label_best[l].max(gains[z - 1][l]);
        }
        if label_best[l] == f64::NEG_INFINITY {
            return Err(InferenceError::Infeasible);
        }
    }
    let mut suffix_best = [0.0; 7];
    for l in (0..6).rev() {
        suffix_best[l] = suffix_best[l + 1] + label_best[l];
    }

    let mut search =
        Search { problem, mode, gains, suffix_best, best: None };
    let mut pos: Positions = [0; 6];
    search.descend(0, 0.0, &mut pos);
    match search.best {
        Some((_, positions)) => Ok(solution_from_positions(problem, positions, mode)),
        None => Err(InferenceError::Infeasible),
    }
}

impl<'a> Search<'a> {
    /// Earliest admissible position for the label at `depth` given the
    /// prefix, exploiting the ordering constraints to shrink the range.
    fn feasible(&self, depth: usize, z: usize, pos: &Positions) -> bool {
        if pos[..depth].contains(&z) {
            return false;
        }
        if self.mode != DecodeMode::Full {
            return true;
        }
        if !unary_ok(self.problem, depth, z) {
            return false;
        }
        let p = self.problem;
        match depth {
            2 => z >= pos[1] && (pos[0] <= pos[1] || pos[0] >= z),
            3..=5 => {
                if pos[..3].iter().any(|&e| z < e) {
                    return false;
                }
                match depth {
                    5 => {
                        if z < pos[4] || p.norm_type[z - 1] != p.norm_type[pos[4] - 1] {
                            return false;
                        }
                        let (qo, q1, q2) =
                            (p.sent_pos[pos[3] - 1], p.sent_pos[pos[4] - 1], p.sent_pos[z - 1]);
                        if p.strict_outcome_sentence {
                            qo == q1 || qo == q2
                        } else {
                            qo >= q1 || qo >= q2
                        }
                    }
                    _ => true,
                }
            }
            _ => true,
        }
    }

    fn descend(&mut self, depth: usize, gain_so_far: f64, pos: &mut Positions) {
        if depth == 6 {
            let obj = objective(self.problem, pos, self.mode);
            if self.best.as_ref().map_or(true, |(b, _)| obj > *b) {
                self.best = Some((obj, *pos));
            }
            return;
        }
        for z in 1..=self.problem.n() {
            if !self.feasible(depth, z, pos) {
                continue;
            }
            let gain = gain_so_far + self.gains[z - 1][depth];
            if let Some((b, _)) = &self.best {
                // constant background term cancels; distance penalties only
                // lower the objective, so this bound is admissible
                let bound = gain + self.suffix_best[depth + 1];
                let incumbent_gain = b - background(self.problem);
                if bound <= incumbent_gain - EPS {
                    continue;
                }
            }
            pos[depth] = z;
            self.descend(depth + 1, gain, pos);
        }
        pos[depth] = 0;
    }
}

fn background(problem: &LabelingProblem) -> f64 {
    let o = Label::O.index();
    problem.logp.iter().map(|row| row[o]).sum()
}

/// Build a decoding instance from a preprocessed abstract and a trained
/// model. Returns the problem together with the candidate list so callers
/// can map positions back to tokens.
pub fn build_problem(
    a: &crate::corpus::Abstract,
    model: &MaxEntModel,
) -> (LabelingProblem, Vec<Candidate>) {
    let candidates = filter_candidates(a);
    let floor = f64::MIN_POSITIVE.ln();
    let mut logp = Vec::with_capacity(candidates.len());
    let mut section = Vec::with_capacity(candidates.len());
    let mut sent_pos = Vec::with_capacity(candidates.len());
    let mut norm_type = Vec::with_capacity(candidates.len());
    for cand in &candidates {
        let tok = &a.tokens[cand.token_index];
        let fv = vectorize(&extract_features(cand, a), &model.dictionary);
        let p = model.predict_proba(&fv);
        let mut row = [0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            row[c] = p[c].ln().max(floor);
        }
        logp.push(row);
        section.push(tok.section);
        sent_pos.push(tok.sentence_index.min(9) as u8);
        norm_type.push(tok.norm_tag.map(|t| t.type_id()).unwrap_or(WORD_TYPE));
    }
    let mut problem = LabelingProblem::new(logp);
    problem.section = section;
    problem.sent_pos = sent_pos;
    problem.norm_type = norm_type;
    (problem, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn uniform_problem(n: usize) -> LabelingProblem {
        LabelingProblem::new(vec![[0.0; NUM_CLASSES]; n])
    }

    /// Uniform scores, all tokens numeric so full mode is never blocked by
    /// the value-type constraints.
    fn numeric_problem(n: usize) -> LabelingProblem {
        let mut p = uniform_problem(n);
        p.norm_type = vec![0; n];
        p
    }

    pub(crate) fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> LabelingProblem {
        let mut logp = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = [0.0; NUM_CLASSES];
            for v in &mut row {
                *v = rng.gen_range(-8.0..0.0);
            }
            logp.push(row);
        }
        let mut p = LabelingProblem::new(logp);
        for i in 0..n {
            p.section[i] = *[
                SectionClass::Background,
                SectionClass::Methods,
                SectionClass::Results,
                SectionClass::None,
            ]
            .choose(rng)
            .unwrap();
            p.sent_pos[i] = rng.gen_range(0..6);
            p.norm_type[i] = *[0u8, 1, 2, 5, WORD_TYPE].choose(rng).unwrap();
        }
        p
    }

    #[test]
    fn zero_mode_is_per_token_argmax() {
        let mut p = uniform_problem(4);
        p.logp[0][Label::P.index()] = 1.0;
        p.logp[1][Label::O.index()] = 2.0;
        p.logp[2][Label::R1.index()] = 0.5;
        let sol = solve(&p, DecodeMode::Zero).unwrap();
        assert_eq!(sol.labels[0], Label::P);
        assert_eq!(sol.labels[1], Label::O);
        assert_eq!(sol.labels[2], Label::R1);
        assert_eq!(sol.positions[Label::P.index()], Some(1));
        assert_eq!(sol.positions[Label::A1.index()], None);
    }

    #[test]
    fn vanilla_forces_six_distinct_labels() {
        // every token prefers O, vanilla must still place all six targets
        let mut p = uniform_problem(8);
        for row in &mut p.logp {
            row[Label::O.index()] = 1.0;
        }
        let sol = solve(&p, DecodeMode::Vanilla).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for l in 0..6 {
            let z = sol.positions[l].unwrap();
            assert!(seen.insert(z));
        }
        assert_eq!(
            sol.labels.iter().filter(|&&l| l == Label::O).count(),
            2
        );
    }

    #[test]
    fn too_few_candidates_is_infeasible() {
        let p = uniform_problem(5);
        assert!(matches!(
            solve(&p, DecodeMode::Vanilla),
            Err(InferenceError::Infeasible)
        ));
        assert!(matches!(
            solve(&uniform_problem(0), DecodeMode::Full),
            Err(InferenceError::EmptyProblem)
        ));
    }

    #[test]
    fn full_mode_orders_labels() {
        // strong preferences placed out of order; full mode must reorder
        let mut p = numeric_problem(8);
        for i in 0..8 {
            for c in 0..NUM_CLASSES {
                p.logp[i][c] = -5.0;
            }
            p.logp[i][Label::O.index()] = -0.5;
        }
        // tempt R1 to the front
        p.logp[0][Label::R1.index()] = -0.1;
        let sol = solve(&p, DecodeMode::Full).unwrap();
        let z: Vec<usize> = (0..6).map(|l| sol.positions[l].unwrap()).collect();
        assert!(z[1] <= z[2]); // arms ordered
        assert!(z[4] <= z[5]); // results ordered
        for late in [z[3], z[4], z[5]] {
            for early in [z[0], z[1], z[2]] {
                assert!(late >= early);
            }
        }
        assert!(z[0] <= z[1] || z[0] >= z[2]);
        assert!(check_constraints(&p, &[z[0], z[1], z[2], z[3], z[4], z[5]], DecodeMode::Full));
    }

    #[test]
    fn section_constraints_bind() {
        let mut p = numeric_problem(8);
        // first half methods, second half results
        for i in 0..8 {
            p.section[i] = if i < 4 { SectionClass::Methods } else { SectionClass::Results };
        }
        // pull P toward a results-section token
        p.logp[6][Label::P.index()] = 3.0;
        let sol = solve(&p, DecodeMode::Full).unwrap();
        let zp = sol.positions[Label::P.index()].unwrap();
        assert!(zp <= 4, "P landed in results at {zp}");
        for l in [Label::R1, Label::R2] {
            let z = sol.positions[l.index()].unwrap();
            assert!(z > 4, "{} outside results at {z}", l.as_str());
        }
    }

    #[test]
    fn result_type_must_match() {
        let mut p = uniform_problem(8);
        p.norm_type = vec![WORD_TYPE, WORD_TYPE, WORD_TYPE, WORD_TYPE, 0, 2, 5, 2];
        // tempt R1 to the measurement (type 0) and R2 to the p-value (type 5)
        p.logp[4][Label::R1.index()] = 2.0;
        p.logp[6][Label::R2.index()] = 2.0;
        let sol = solve(&p, DecodeMode::Full).unwrap();
        let z1 = sol.positions[Label::R1.index()].unwrap();
        let z2 = sol.positions[Label::R2.index()].unwrap();
        assert_eq!(p.norm_type[z1 - 1], p.norm_type[z2 - 1]);
        assert!(p.norm_type[z1 - 1] <= 100);
    }

    #[test]
    fn distance_penalty_breaks_ties() {
        // two equally likely placements for A2; the nearer one must win
        let mut p = numeric_problem(9);
        p.logp[1][Label::A1.index()] = 1.0;
        p.logp[3][Label::A2.index()] = 1.0;
        p.logp[5][Label::A2.index()] = 1.0;
        let sol = solve(&p, DecodeMode::Full).unwrap();
        assert_eq!(sol.positions[Label::A2.index()], Some(4));
        // vanilla mode has no such preference: lexicographic tie rule
        let sol_v = solve(&p, DecodeMode::Vanilla).unwrap();
        assert_eq!(sol_v.positions[Label::A2.index()], Some(4));
    }

    #[test]
    fn outcome_sentence_constraint() {
        let mut p = numeric_problem(8);
        p.sent_pos = vec![0, 0, 0, 1, 2, 3, 3, 3];
        // tempt OC to sentence 1 while results sit in sentence 3
        p.logp[3][Label::OC.index()] = 2.0;
        p.logp[6][Label::R1.index()] = 2.0;
        p.logp[7][Label::R2.index()] = 2.0;
        let sol = solve(&p, DecodeMode::Full).unwrap();
        let qo = p.sent_pos[sol.positions[Label::OC.index()].unwrap() - 1];
        let q1 = p.sent_pos[sol.positions[Label::R1.index()].unwrap() - 1];
        let q2 = p.sent_pos[sol.positions[Label::R2.index()].unwrap() - 1];
        assert!(qo >= q1 || qo >= q2);

        let mut strict = p.clone();
        strict.strict_outcome_sentence = true;
        let sol = solve(&strict, DecodeMode::Full).unwrap();
        let qo = strict.sent_pos[sol.positions[Label::OC.index()].unwrap() - 1];
        let q1 = strict.sent_pos[sol.positions[Label::R1.index()].unwrap() - 1];
        let q2 = strict.sent_pos[sol.positions[Label::R2.index()].unwrap() - 1];
        assert!(qo == q1 || qo == q2);
    }

    #[test]
    fn solver_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let n = rng.gen_range(6..=11);
            let p = random_problem(&mut rng, n);
            for mode in [DecodeMode::Vanilla, DecodeMode::Full] {
                let fast = solve(&p, mode);
                let slow = brute_force(&p, mode);
                match (fast, slow) {
                    (Ok(a), Ok(b)) => {
                        assert_eq!(
                            a.positions, b.positions,
                            "trial {trial} mode {mode:?}: {:?} vs {:?} ({} vs {})",
                            a.positions, b.positions, a.objective, b.objective
                        );
                        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
                    }
                    (Err(InferenceError::Infeasible), Err(InferenceError::Infeasible)) => {}
                    (f, s) => panic!("trial {trial} mode {mode:?}: {f:?} vs {s:?}"),
                }
            }
        }
    }

    #[test]
    fn relaxation_monotonicity() {
        // dropping constraints can only improve the best objective
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = random_problem(&mut rng, 8);
            let vanilla = solve(&p, DecodeMode::Vanilla).unwrap();
            if let Ok(full) = solve(&p, DecodeMode::Full) {
                assert!(vanilla.objective >= full.objective - 1e-12);
                let zero = solve(&p, DecodeMode::Zero).unwrap();
                assert!(zero.objective >= vanilla.objective - 1e-12);
            }
        }
    }

    #[test]
    fn shift_invariance_of_argmax() {
        // adding a per-token constant to all classes shifts the objective
        // but not the chosen positions
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let p = random_problem(&mut rng, 8);
            let mut shifted = p.clone();
            for row in &mut shifted.logp {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for v in row.iter_mut() {
                    *v += c;
                }
            }
            for mode in [DecodeMode::Vanilla, DecodeMode::Full] {
                match (solve(&p, mode), solve(&shifted, mode)) {
                    (Ok(a), Ok(b)) => assert_eq!(a.positions, b.positions),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("{a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn infeasible_when_no_numeric_pair() {
        let mut p = uniform_problem(8);
        p.norm_type = vec![WORD_TYPE; 8];
        p.norm_type[3] = 2; // only one numeric token: no pair of equal type
        assert!(matches!(solve(&p, DecodeMode::Full), Err(InferenceError::Infeasible)));
        assert!(matches!(brute_force(&p, DecodeMode::Full), Err(InferenceError::Infeasible)));
        // vanilla ignores value types entirely
        assert!(solve(&p, DecodeMode::Vanilla).is_ok());
    }

    #[test]
    fn brute_force_size_guard() {
        let p = uniform_problem(17);
        assert!(matches!(
            brute_force(&p, DecodeMode::Vanilla),
            Err(InferenceError::ProblemTooLarge { n: 17, limit: 16 })
        ));
        // the real solver handles it fine
        assert!(solve(&p, DecodeMode::Vanilla).is_ok());
    }

    #[test]
    fn lexicographic_tie_rule() {
        // all-uniform problem: every distinct placement ties in vanilla mode,
        // so the winner must be (1,2,3,4,5,6)
        let p = uniform_problem(8);
        let sol = solve(&p, DecodeMode::Vanilla).unwrap();
        let z: Vec<usize> = (0..6).map(|l| sol.positions[l].unwrap()).collect();
        assert_eq!(z, vec![1, 2, 3, 4, 5, 6]);
        let bf = brute_force(&p, DecodeMode::Vanilla).unwrap();
        assert_eq!(sol.positions, bf.positions);
    }
}
