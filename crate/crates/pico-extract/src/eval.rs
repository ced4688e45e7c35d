//! Scoring and statistical comparison of decoders: per-label precision and
//! recall, k-fold cross-validation, a Wilcoxon signed-rank test for paired
//! comparisons, percentile bootstrap intervals, and a synthetic corpus
//! generator for end-to-end checks.

pub mod synth;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::inference::DecodeMode;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/gold length mismatch: {predicted} vs {gold}")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("corpus too small: {n} documents for {k} folds")]
    CorpusTooSmall { n: usize, k: usize },
    #[error("too few pairs with nonzero difference: {0} (need at least 5)")]
    TooFewPairs(usize),
}

/// Counting-style metrics for one label: true positives, classified
/// positives (everything we predicted), actual positives (everything gold).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub tp: usize,
    pub cp: usize,
    pub ap: usize,
}

impl LabelMetrics {
    pub fn precision(&self) -> Option<f64> {
        (self.cp > 0).then(|| self.tp as f64 / self.cp as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.ap > 0).then(|| self.tp as f64 / self.ap as f64)
    }

    pub fn add(&mut self, other: &LabelMetrics) {
        self.tp += other.tp;
        self.cp += other.cp;
        self.ap += other.ap;
    }
}

/// Per-label counts for one decoder over a set of documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    pub per_label: [LabelMetrics; 6],
}

impl ModeScores {
    /// Micro-averaged precision over the six target labels.
    pub fn overall_precision(&self) -> Option<f64> {
        let tp: usize = self.per_label.iter().map(|m| m.tp).sum();
        let cp: usize = self.per_label.iter().map(|m| m.cp).sum();
        (cp > 0).then(|| tp as f64 / cp as f64)
    }

    /// Micro-averaged precision over a subset of target labels.
    pub fn precision_over(&self, labels: &[Label]) -> Option<f64> {
        let tp: usize = labels.iter().map(|l| self.per_label[l.index()].tp).sum();
        let cp: usize = labels.iter().map(|l| self.per_label[l.index()].cp).sum();
        (cp > 0).then(|| tp as f64 / cp as f64)
    }

    pub fn add(&mut self, other: &ModeScores) {
        for (a, b) in self.per_label.iter_mut().zip(other.per_label.iter()) {
            a.add(b);
        }
    }
}

/// Token-level scoring of one document. Both slices carry one label per
/// candidate token, background included.
pub fn score(predicted: &[Label], gold: &[Label]) -> Result<ModeScores, EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    let mut out = ModeScores::default();
    for (&p, &g) in predicted.iter().zip(gold.iter()) {
        if p != Label::O {
            let m = &mut out.per_label[p.index()];
            m.cp += 1;
            if p == g {
                m.tp += 1;
            }
        }
        if g != Label::O {
            out.per_label[g.index()].ap += 1;
        }
    }
    Ok(out)
}

pub fn score_all(
    predicted: &[Vec<Label>],
    gold: &[Vec<Label>],
) -> Result<ModeScores, EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    let mut out = ModeScores::default();
    for (p, g) in predicted.iter().zip(gold.iter()) {
        out.add(&score(p, g)?);
    }
    Ok(out)
}

/// Side-by-side scores for the three decoders, renders as a per-label
/// precision/recall table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub zero: ModeScores,
    pub vanilla: ModeScores,
    pub full: ModeScores,
    pub documents: usize,
    pub folds: Option<usize>,
}

impl EvalReport {
    pub fn mode(&self, mode: DecodeMode) -> &ModeScores {
        match mode {
            DecodeMode::Zero => &self.zero,
            DecodeMode::Vanilla => &self.vanilla,
            DecodeMode::Full => &self.full,
        }
    }

    pub fn mode_mut(&mut self, mode: DecodeMode) -> &mut ModeScores {
        match mode {
            DecodeMode::Zero => &mut self.zero,
            DecodeMode::Vanilla => &mut self.vanilla,
            DecodeMode::Full => &mut self.full,
        }
    }

    pub fn render_text(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map(|x| format!("{:5.1}", 100.0 * x)).unwrap_or_else(|| "    -".into())
        }
        let mut s = String::new();
        s.push_str(&format!(
            "documents: {}{}\n",
            self.documents,
            self.folds.map(|k| format!(" ({k}-fold cross-validation)")).unwrap_or_default()
        ));
        s.push_str("label   zero P/R      vanilla P/R   full P/R\n");
        for label in Label::TARGETS {
            let i = label.index();
            s.push_str(&format!(
                "{:<6}  {} {}   {} {}   {} {}\n",
                label.as_str(),
                cell(self.zero.per_label[i].precision()),
                cell(self.zero.per_label[i].recall()),
                cell(self.vanilla.per_label[i].precision()),
                cell(self.vanilla.per_label[i].recall()),
                cell(self.full.per_label[i].precision()),
                cell(self.full.per_label[i].recall()),
            ));
        }
        s.push_str(&format!(
            "overall precision: zero {} vanilla {} full {}\n",
            cell(self.zero.overall_precision()),
            cell(self.vanilla.overall_precision()),
            cell(self.full.overall_precision()),
        ));
        s
    }
}

/// Deterministic k-fold split: shuffle `0..n` with a seeded generator, cut
/// into contiguous folds, sizes differing by at most one (larger folds
/// first).
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || n < k {
        return Err(EvalError::CorpusTooSmall { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

/// Run k-fold cross-validation. `run_fold(train_indices, test_indices)` must
/// return one `EvalReport` worth of counts for the held-out documents;
/// counts are pooled across folds. With `per_fold_average` the per-fold
/// precision values are also returned so paired tests can use them.
pub fn cross_validate<F>(
    n: usize,
    k: usize,
    seed: u64,
    mut run_fold: F,
) -> Result<(EvalReport, Vec<EvalReport>), EvalError>
where
    F: FnMut(&[usize], &[usize]) -> Result<EvalReport, EvalError>,
{
    let folds = kfold_indices(n, k, seed)?;
    let mut pooled = EvalReport { folds: Some(k), ..Default::default() };
    let mut per_fold = Vec::with_capacity(k);
    for test in &folds {
        let test_set: std::collections::BTreeSet<usize> = test.iter().copied().collect();
        let train: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        let report = run_fold(&train, test)?;
        pooled.zero.add(&report.zero);
        pooled.vanilla.add(&report.vanilla);
        pooled.full.add(&report.full);
        pooled.documents += report.documents;
        per_fold.push(report);
    }
    Ok((pooled, per_fold))
}

/// Result of a one-sided Wilcoxon signed-rank test that the first sample
/// tends to exceed the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    /// Pairs remaining after zero differences are dropped.
    pub n: usize,
    pub p_one_sided: f64,
    /// Whether the p-value came from exact enumeration or the normal
    /// approximation.
    pub exact: bool,
}

/// Paired Wilcoxon signed-rank test, one-sided (first > second). Zero
/// differences are dropped; tied magnitudes get averaged ranks. Exact sign
/// enumeration up to 12 pairs, normal approximation with continuity
/// correction above.
pub fn wilcoxon_signed_rank(first: &[f64], second: &[f64]) -> Result<WilcoxonResult, EvalError> {
    if first.len() != second.len() {
        return Err(EvalError::LengthMismatch { predicted: first.len(), gold: second.len() });
    }
    let diffs: Vec<f64> = first
        .iter()
        .zip(second.iter())
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 5 {
        return Err(EvalError::TooFewPairs(n));
    }

    // rank |d| ascending with average ranks on ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diffs[a].abs().partial_cmp(&diffs[b].abs()).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(ranks.iter())
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let p = if n <= 12 {
        // enumerate all sign assignments over the observed ranks
        let mut at_least = 0u64;
        let total = 1u64 << n;
        for mask in 0..total {
            let mut w = 0.0;
            for (bit, r) in ranks.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    w += r;
                }
            }
            if w >= w_plus - 1e-12 {
                at_least += 1;
            }
        }
        at_least as f64 / total as f64
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        // tie correction to the variance
        let mut var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0;
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            if t > 1.0 {
                var -= (t * t * t - t) / 48.0;
            }
            i = j + 1;
        }
        let z = (w_plus - mean - 0.5) / var.sqrt();
        1.0 - normal_cdf(z)
    };
    Ok(WilcoxonResult { w_plus, n, p_one_sided: p, exact: n <= 12 })
}

/// Standard normal CDF via the Abramowitz-Stegun rational approximation of
/// erf (absolute error below 1.5e-7, ample for test p-values).
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Percentile bootstrap confidence interval for a statistic of a sample.
pub fn bootstrap_ci<F>(
    values: &[f64],
    stat: F,
    resamples: usize,
    alpha: f64,
    seed: u64,
) -> Option<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if values.is_empty() || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<f64> =
                (0..values.len()).map(|_| values[rng.gen_range(0..values.len())]).collect();
            stat(&sample)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = ((alpha / 2.0) * (resamples - 1) as f64).round() as usize;
    let hi_idx = ((1.0 - alpha / 2.0) * (resamples - 1) as f64).round() as usize;
    Some((stats[lo_idx], stats[hi_idx.min(resamples - 1)]))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
