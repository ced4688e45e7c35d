//! Multinomial maximum-entropy (softmax logistic) classifier over the seven
//! labels: training by batch gradient descent with backtracking line search,
//! probability prediction, and model persistence.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FeatureDictionary, FeatureVector};

pub const NUM_CLASSES: usize = 7;

#[derive(Debug, Error)]
pub enum MaxEntError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite loss encountered (bad inputs or diverging step)")]
    NonFiniteLoss,
    #[error("model file error: {0}")]
    ModelFile(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L2 regularization strength on the weights (biases unregularized).
    pub l2: f64,
    pub max_iterations: usize,
    /// Stop when the gradient max-norm falls below this.
    pub tolerance: f64,
    pub seed: u64,
    /// Optional per-class example weights, label order [P,A1,A2,OC,R1,R2,O].
    pub class_weights: Option<[f64; NUM_CLASSES]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { l2: 1.0, max_iterations: 500, tolerance: 1e-6, seed: 0, class_weights: None }
    }
}

/// A fitted model: per-class weight rows over feature ids plus biases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxEntModel {
    /// Row-major, `NUM_CLASSES` rows of `dictionary.len()` entries.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub l2: f64,
    pub dictionary: FeatureDictionary,
}

impl MaxEntModel {
    /// Zero-weight model over a dictionary; predicts uniform 1/7.
    pub fn zeros(dictionary: FeatureDictionary) -> Self {
        let d = dictionary.len();
        MaxEntModel {
            weights: vec![vec![0.0; d]; NUM_CLASSES],
            bias: vec![0.0; NUM_CLASSES],
            l2: 0.0,
            dictionary,
        }
    }

    pub fn num_features(&self) -> usize {
        self.dictionary.len()
    }

    fn scores(&self, fv: &FeatureVector) -> [f64; NUM_CLASSES] {
        let mut s = [0.0; NUM_CLASSES];
        for (c, row) in self.weights.iter().enumerate() {
            let mut acc = self.bias[c];
            for &id in &fv.ids {
                acc += row[id as usize];
            }
            s[c] = acc;
        }
        s
    }

    /// Class probabilities by softmax over the linear scores. Entries are in
    /// (0,1) and sum to 1.
    pub fn predict_proba(&self, fv: &FeatureVector) -> [f64; NUM_CLASSES] {
        softmax(&self.scores(fv))
    }

    pub fn predict_label(&self, fv: &FeatureVector) -> Label {
        let p = self.predict_proba(fv);
        let mut best = 0;
        for c in 1..NUM_CLASSES {
            if p[c] > p[best] {
                best = c;
            }
        }
        Label::from_index(best).unwrap()
    }
}

fn softmax(scores: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_CLASSES];
    let mut z = 0.0;
    for c in 0..NUM_CLASSES {
        out[c] = (scores[c] - m).exp();
        z += out[c];
    }
    for v in &mut out {
        *v /= z;
    }
    out
}

/// Regularized negative log-likelihood and its exact analytic gradient,
/// shaped like (weights, bias).
pub fn loss_and_gradient(
    model: &MaxEntModel,
    batch: &[(FeatureVector, Label)],
    config: &TrainConfig,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let d = model.num_features();
    let mut grad_w = vec![vec![0.0; d]; NUM_CLASSES];
    let mut grad_b = vec![0.0; NUM_CLASSES];
    let mut loss = 0.0;

    for (fv, label) in batch {
        let y = label.index();
        let wc = config.class_weights.map(|w| w[y]).unwrap_or(1.0);
        let p = model.predict_proba(fv);
        loss -= wc * p[y].max(f64::MIN_POSITIVE).ln();
        for c in 0..NUM_CLASSES {
            let err = wc * (p[c] - f64::from(u8::from(c == y)));
            grad_b[c] += err;
            for &id in &fv.ids {
                grad_w[c][id as usize] += err;
            }
        }
    }

    // L2 on weights only
    if config.l2 > 0.0 {
        for c in 0..NUM_CLASSES {
            for j in 0..d {
                loss += 0.5 * config.l2 * model.weights[c][j] * model.weights[c][j];
                grad_w[c][j] += config.l2 * model.weights[c][j];
            }
        }
    }
    (loss, grad_w, grad_b)
}

/// Fit by full-batch gradient descent with backtracking line search.
/// Deterministic given the input order and config.
pub fn fit(
    examples: &[(FeatureVector, Label)],
    dictionary: FeatureDictionary,
    config: &TrainConfig,
) -> Result<MaxEntModel, MaxEntError> {
    if examples.is_empty() {
        return Err(MaxEntError::DimensionMismatch("empty example list".into()));
    }
    let d = dictionary.len();
    for (fv, _) in examples {
        if let Some(&id) = fv.ids.last() {
            if id as usize >= d {
                return Err(MaxEntError::DimensionMismatch(format!(
                    "feature id {id} outside dictionary of size {d}"
                )));
            }
        }
    }

    let mut model = MaxEntModel::zeros(dictionary);
    model.l2 = config.l2;
    let mut step = 1.0 / examples.len() as f64;
    let (mut loss, mut gw, mut gb) = loss_and_gradient(&model, examples, config);

    for _iter in 0..config.max_iterations {
        if !loss.is_finite() {
            return Err(MaxEntError::NonFiniteLoss);
        }
        let gnorm = grad_max_norm(&gw, &gb);
        if gnorm <= config.tolerance {
            break;
        }

        // backtracking line search on the step size
        let mut accepted = false;
        for _try in 0..40 {
            let trial = take_step(&model, &gw, &gb, step);
            let (tl, tgw, tgb) = loss_and_gradient(&trial, examples, config);
            if tl.is_finite() && tl < loss {
                model = trial;
                loss = tl;
                gw = tgw;
                gb = tgb;
                accepted = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(model)
}

fn take_step(model: &MaxEntModel, gw: &[Vec<f64>], gb: &[f64], step: f64) -> MaxEntModel {
    let mut next = model.clone();
    for c in 0..NUM_CLASSES {
        next.bias[c] -= step * gb[c];
        for j in 0..model.num_features() {
            next.weights[c][j] -= step * gw[c][j];
        }
    }
    next
}

fn grad_max_norm(gw: &[Vec<f64>], gb: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for c in 0..NUM_CLASSES {
        m = m.max(gb[c].abs());
        for &v in &gw[c] {
            m = m.max(v.abs());
        }
    }
    m
}

const MODEL_HEADER: &str = "#pico-maxent v1";

/// Persist a model as a self-describing document: versioned header line plus
/// a JSON body. Round-trip exact.
pub fn save_model<W: Write>(mut w: W, model: &MaxEntModel) -> Result<(), MaxEntError> {
    writeln!(w, "{MODEL_HEADER}")?;
    let body = serde_json::to_string(model).map_err(|e| MaxEntError::ModelFile(e.to_string()))?;
    writeln!(w, "{body}")?;
    Ok(())
}

pub fn load_model<R: BufRead>(mut r: R) -> Result<MaxEntModel, MaxEntError> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    if header.trim() != MODEL_HEADER {
        return Err(MaxEntError::ModelFile(format!("bad header {header:?}")));
    }
    let mut body = String::new();
    r.read_to_string(&mut body)?;
    let mut model: MaxEntModel =
        serde_json::from_str(&body).map_err(|e| MaxEntError::ModelFile(e.to_string()))?;
    if model.weights.len() != NUM_CLASSES || model.bias.len() != NUM_CLASSES {
        return Err(MaxEntError::ModelFile("wrong class count".into()));
    }
    let d = model.dictionary.len();
    if model.weights.iter().any(|row| row.len() != d) {
        return Err(MaxEntError::ModelFile("weight row length mismatch".into()));
    }
    model.dictionary.rebuild_index();
    Ok(model)
}

pub fn save_model_file(path: &std::path::Path, model: &MaxEntModel) -> Result<(), MaxEntError> {
    save_model(std::io::BufWriter::new(std::fs::File::create(path)?), model)
}

pub fn load_model_file(path: &std::path::Path) -> Result<MaxEntModel, MaxEntError> {
    load_model(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{fit_dictionary, FeatureVector};

    fn fv(ids: &[u32]) -> FeatureVector {
        FeatureVector { ids: ids.to_vec() }
    }

    fn toy_dictionary(n: usize) -> FeatureDictionary {
        let sets: Vec<Vec<String>> = (0..n).map(|i| vec![format!("f{i}")]).collect();
        fit_dictionary(sets.iter().map(|s| s.iter()))
    }

    /// 20-point linearly separable two-class set over two indicator features.
    fn separable() -> Vec<(FeatureVector, Label)> {
        let mut ex = Vec::new();
        for _ in 0..10 {
            ex.push((fv(&[0]), Label::P));
            ex.push((fv(&[1]), Label::O));
        }
        ex
    }

    #[test]
    fn uniform_at_zero_weights() {
        let model = MaxEntModel::zeros(toy_dictionary(3));
        let p = model.predict_proba(&fv(&[0, 2]));
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
        let p = model.predict_proba(&FeatureVector::empty());
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bias_dominates() {
        let mut model = MaxEntModel::zeros(toy_dictionary(1));
        model.bias[Label::O.index()] = 10.0;
        let p = model.predict_proba(&fv(&[0]));
        assert!(p[Label::O.index()] > 0.99);
        // direct softmax evaluation
        let expect = (10f64).exp() / ((10f64).exp() + 6.0);
        assert!((p[Label::O.index()] - expect).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut model = MaxEntModel::zeros(toy_dictionary(4));
        model.weights[2][1] = 3.5;
        model.weights[5][3] = -2.0;
        model.bias[0] = 0.7;
        for ids in [vec![], vec![0], vec![1, 3], vec![0, 1, 2, 3]] {
            let p = model.predict_proba(&fv(&ids));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let mut model = MaxEntModel::zeros(toy_dictionary(2));
        model.weights[3][0] = 1.25;
        let base = model.predict_proba(&fv(&[0]));
        // add a constant to every class score via biases
        for b in &mut model.bias {
            *b += 4.2;
        }
        let shifted = model.predict_proba(&fv(&[0]));
        for c in 0..NUM_CLASSES {
            assert!((base[c] - shifted[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_separable_to_full_accuracy() {
        let ex = separable();
        let cfg = TrainConfig { l2: 0.01, ..Default::default() };
        let model = fit(&ex, toy_dictionary(2), &cfg).unwrap();
        for (fv, label) in &ex {
            assert_eq!(model.predict_label(fv), *label);
        }
        // convexity sanity: trained loss below zero-model loss
        let (trained, _, _) = loss_and_gradient(&model, &ex, &cfg);
        let (zero, _, _) = loss_and_gradient(&MaxEntModel::zeros(toy_dictionary(2)), &ex, &cfg);
        assert!(trained < zero);
    }

    #[test]
    fn zero_iterations_gives_uniform() {
        let cfg = TrainConfig { max_iterations: 0, ..Default::default() };
        let model = fit(&separable(), toy_dictionary(2), &cfg).unwrap();
        let p = model.predict_proba(&fv(&[0]));
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_examples_error() {
        let err = fit(&[], toy_dictionary(1), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, MaxEntError::DimensionMismatch(_)));
    }

    #[test]
    fn uniform_loss_value() {
        // lambda=0, zero weights: loss = |batch| * ln 7
        let ex = separable();
        let cfg = TrainConfig { l2: 0.0, ..Default::default() };
        let (loss, _, _) = loss_and_gradient(&MaxEntModel::zeros(toy_dictionary(2)), &ex, &cfg);
        assert!((loss - ex.len() as f64 * 7f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn duplicated_batch_doubles_loss_and_gradient() {
        let ex = separable();
        let mut doubled = ex.clone();
        doubled.extend(ex.iter().cloned());
        let mut model = MaxEntModel::zeros(toy_dictionary(2));
        model.weights[0][0] = 0.3;
        model.bias[6] = -0.1;
        let cfg = TrainConfig { l2: 0.0, ..Default::default() };
        let (l1, gw1, gb1) = loss_and_gradient(&model, &ex, &cfg);
        let (l2, gw2, gb2) = loss_and_gradient(&model, &doubled, &cfg);
        assert!((l2 - 2.0 * l1).abs() < 1e-9);
        for c in 0..NUM_CLASSES {
            assert!((gb2[c] - 2.0 * gb1[c]).abs() < 1e-9);
            for j in 0..2 {
                assert!((gw2[c][j] - 2.0 * gw1[c][j]).abs() < 1e-9);
            }
        }
    }

    /// Central finite-difference gradient oracle.
    pub(crate) fn finite_difference_gradient(
        model: &MaxEntModel,
        batch: &[(FeatureVector, Label)],
        cfg: &TrainConfig,
        step: f64,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let d = model.num_features();
        let mut gw = vec![vec![0.0; d]; NUM_CLASSES];
        let mut gb = vec![0.0; NUM_CLASSES];
        let eval = |m: &MaxEntModel| loss_and_gradient(m, batch, cfg).0;
        for c in 0..NUM_CLASSES {
            for j in 0..d {
                let mut plus = model.clone();
                plus.weights[c][j] += step;
                let mut minus = model.clone();
                minus.weights[c][j] -= step;
                gw[c][j] = (eval(&plus) - eval(&minus)) / (2.0 * step);
            }
            let mut plus = model.clone();
            plus.bias[c] += step;
            let mut minus = model.clone();
            minus.bias[c] -= step;
            gb[c] = (eval(&plus) - eval(&minus)) / (2.0 * step);
        }
        (gw, gb)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = 10;
        let dict = toy_dictionary(d);
        let mut model = MaxEntModel::zeros(dict);
        for c in 0..NUM_CLASSES {
            model.bias[c] = rng.gen_range(-0.5..0.5);
            for j in 0..d {
                model.weights[c][j] = rng.gen_range(-1.0..1.0);
            }
        }
        let batch: Vec<(FeatureVector, Label)> = (0..5)
            .map(|_| {
                let mut ids: Vec<u32> =
                    (0..d as u32).filter(|_| rng.gen_bool(0.4)).collect();
                ids.sort_unstable();
                (FeatureVector { ids }, Label::from_index(rng.gen_range(0..7)).unwrap())
            })
            .collect();
        let cfg = TrainConfig { l2: 0.5, ..Default::default() };
        let (_, gw, gb) = loss_and_gradient(&model, &batch, &cfg);
        let (fgw, fgb) = finite_difference_gradient(&model, &batch, &cfg, 1e-5);
        let mut max_rel = 0.0f64;
        for c in 0..NUM_CLASSES {
            for j in 0..d {
                let denom = gw[c][j].abs().max(1.0);
                max_rel = max_rel.max((gw[c][j] - fgw[c][j]).abs() / denom);
            }
            max_rel = max_rel.max((gb[c] - fgb[c]).abs() / gb[c].abs().max(1.0));
        }
        assert!(max_rel < 1e-5, "max relative error {max_rel}");
    }

    #[test]
    fn model_file_roundtrip_exact() {
        let ex = separable();
        let model = fit(&ex, toy_dictionary(2), &TrainConfig::default()).unwrap();
        let mut buf = Vec::new();
        save_model(&mut buf, &model).unwrap();
        let back = load_model(&buf[..]).unwrap();
        assert_eq!(back.weights, model.weights);
        assert_eq!(back.bias, model.bias);
        assert_eq!(back.dictionary.names(), model.dictionary.names());
        // byte-identical on re-save
        let mut buf2 = Vec::new();
        save_model(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }
}
