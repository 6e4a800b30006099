//! Downstream emotion-classification harness: seeded train/test splitting,
//! a from-scratch multinomial logistic-regression reference classifier over
//! embeddings, per-class precision/recall/F1 with confusion matrices, and
//! the synthetic-for-real training-substitution experiment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::exec::map_ordered;
use crate::rng::{child_seed, seeded};

/// Samples per gradient-accumulation chunk. Chunk partials are reduced in
/// a fixed order, so parallel and sequential training agree bitwise.
const CHUNK: usize = 256;

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 0,
            stratified: true,
        }
    }
}

/// Gradient-descent hyperparameters. Training is full-batch from a zero
/// initialization, so it is deterministic regardless of `seed`; the seed is
/// carried for provenance alongside the other knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-4,
            epochs: 500,
            seed: 0,
        }
    }
}

/// A trained multinomial logistic-regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    /// One weight row per class (num_classes × dim).
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Ordered class labels; row/column indices throughout refer to this.
    pub class_labels: Vec<String>,
    pub hyperparams: Hyperparams,
}

impl ClassifierModel {
    pub fn num_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map(|w| w.len()).unwrap_or(0)
    }
}

/// Per-class evaluation figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// False when the model never predicted this class, making precision
    /// undefined (reported as 0).
    pub precision_defined: bool,
}

/// Unweighted or support-weighted averages over classes with support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full evaluation of a model on a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub macro_avg: Aggregates,
    pub weighted_avg: Aggregates,
    pub accuracy: f64,
    /// Counts indexed `confusion[true][predicted]` in `labels` order.
    pub confusion: Vec<Vec<usize>>,
}

/// Split a corpus into train/test along `spec`. Stratified mode shuffles
/// each class independently and preserves per-class proportions within ±1
/// sample; both modes keep samples in their original corpus order within
/// each side and are deterministic per seed.
pub fn split(
    corpus: &EmbeddedCorpus,
    spec: &SplitSpec,
) -> Result<(EmbeddedCorpus, EmbeddedCorpus)> {
    if corpus.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "train/test split".into(),
            needed: 2,
            found: 0,
        });
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::DegenerateInput(format!(
            "train_fraction must lie strictly inside (0,1), got {}",
            spec.train_fraction
        )));
    }

    let take = |n: usize| -> usize {
        let raw = (spec.train_fraction * n as f64).round() as usize;
        raw.clamp(1, n - 1)
    };

    let mut train_indices: Vec<usize> = Vec::new();
    if spec.stratified {
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, sample) in corpus.samples.iter().enumerate() {
            by_label.entry(sample.label.as_str()).or_default().push(i);
        }
        for (class_idx, (label, mut indices)) in by_label.into_iter().enumerate() {
            if indices.len() < 2 {
                return Err(Error::InsufficientSamples {
                    context: format!("stratified split of class `{label}`"),
                    needed: 2,
                    found: indices.len(),
                });
            }
            let mut rng = seeded(child_seed(spec.seed, "split", class_idx as u64));
            indices.shuffle(&mut rng);
            train_indices.extend(&indices[..take(indices.len())]);
        }
    } else {
        if corpus.len() < 2 {
            return Err(Error::InsufficientSamples {
                context: "train/test split".into(),
                needed: 2,
                found: corpus.len(),
            });
        }
        let mut indices: Vec<usize> = (0..corpus.len()).collect();
        let mut rng = seeded(child_seed(spec.seed, "split", 0));
        indices.shuffle(&mut rng);
        train_indices.extend(&indices[..take(indices.len())]);
    }
    train_indices.sort_unstable();

    let mut in_train = vec![false; corpus.len()];
    for &i in &train_indices {
        in_train[i] = true;
    }
    let side = |keep: bool| -> Result<EmbeddedCorpus> {
        EmbeddedCorpus::from_samples(
            corpus
                .samples
                .iter()
                .enumerate()
                .filter(|(i, _)| in_train[*i] == keep)
                .map(|(_, s)| s.clone())
                .collect(),
        )
    };
    Ok((side(true)?, side(false)?))
}

/// Multinomial cross-entropy loss and its gradient at the given flat
/// parameter point, with L2 applied to weights only. Per-sample terms are
/// accumulated in fixed-size chunks and reduced in chunk order, so the
/// parallel and sequential paths produce bitwise-identical results.
fn loss_and_grad(
    weights: &[f64],
    bias: &[f64],
    xs: &[Vec<f64>],
    ys: &[usize],
    k: usize,
    dim: usize,
    l2: f64,
    parallel: bool,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let bounds: Vec<(usize, usize)> = (0..n)
        .step_by(CHUNK)
        .map(|lo| (lo, (lo + CHUNK).min(n)))
        .collect();

    let partials = map_ordered(&bounds, parallel, |&(lo, hi)| {
        let mut loss = 0.0;
        let mut gw = vec![0.0; k * dim];
        let mut gb = vec![0.0; k];
        let mut logits = vec![0.0; k];
        for i in lo..hi {
            let x = &xs[i];
            for c in 0..k {
                let row = &weights[c * dim..(c + 1) * dim];
                logits[c] = bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            }
            let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut z = 0.0;
            for logit in &mut logits {
                *logit = (*logit - max).exp();
                z += *logit;
            }
            loss -= (logits[ys[i]] / z).ln();
            for c in 0..k {
                let delta = logits[c] / z - if c == ys[i] { 1.0 } else { 0.0 };
                gb[c] += delta;
                for (g, v) in gw[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                    *g += delta * v;
                }
            }
        }
        (loss, gw, gb)
    });

    let mut loss = 0.0;
    let mut grad_w = vec![0.0; k * dim];
    let mut grad_b = vec![0.0; k];
    for (l, gw, gb) in partials {
        loss += l;
        for (acc, g) in grad_w.iter_mut().zip(&gw) {
            *acc += g;
        }
        for (acc, g) in grad_b.iter_mut().zip(&gb) {
            *acc += g;
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g * inv_n + l2 * w;
    }
    for g in &mut grad_b {
        *g *= inv_n;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

fn train_impl(
    corpus: &EmbeddedCorpus,
    hyper: &Hyperparams,
    parallel: bool,
) -> Result<(ClassifierModel, Vec<f64>)> {
    let class_labels = corpus.label_set();
    if class_labels.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training requires at least 2 classes, found {}",
            class_labels.len()
        )));
    }
    let index: BTreeMap<&str, usize> = class_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let k = class_labels.len();
    let dim = corpus.dim;
    let xs: Vec<Vec<f64>> = corpus.samples.iter().map(|s| s.vector.clone()).collect();
    let ys: Vec<usize> = corpus
        .samples
        .iter()
        .map(|s| index[s.label.as_str()])
        .collect();

    let mut weights = vec![0.0; k * dim];
    let mut bias = vec![0.0; k];
    let mut lr = hyper.learning_rate;
    let (mut loss, mut grad_w, mut grad_b) =
        loss_and_grad(&weights, &bias, &xs, &ys, k, dim, hyper.l2, parallel);
    let mut trace = vec![loss];

    for _ in 0..hyper.epochs {
        let cand_w: Vec<f64> = weights
            .iter()
            .zip(&grad_w)
            .map(|(w, g)| w - lr * g)
            .collect();
        let cand_b: Vec<f64> = bias.iter().zip(&grad_b).map(|(b, g)| b - lr * g).collect();
        let (cand_loss, cand_gw, cand_gb) =
            loss_and_grad(&cand_w, &cand_b, &xs, &ys, k, dim, hyper.l2, parallel);
        if cand_loss > loss {
            // Overshot: keep the current point and retry with a smaller step.
            lr *= 0.5;
            continue;
        }
        weights = cand_w;
        bias = cand_b;
        loss = cand_loss;
        grad_w = cand_gw;
        grad_b = cand_gb;
        trace.push(loss);
    }

    let model = ClassifierModel {
        weights: (0..k)
            .map(|c| weights[c * dim..(c + 1) * dim].to_vec())
            .collect(),
        bias,
        class_labels,
        hyperparams: *hyper,
    };
    Ok((model, trace))
}

/// Train a classifier by full-batch gradient descent from zero parameters,
/// halving the step on any loss increase so the accepted-loss sequence is
/// monotone non-increasing.
pub fn train(corpus: &EmbeddedCorpus, hyper: &Hyperparams) -> Result<ClassifierModel> {
    Ok(train_impl(corpus, hyper, true)?.0)
}

/// [`train`] plus the accepted per-epoch loss trace.
pub fn train_traced(
    corpus: &EmbeddedCorpus,
    hyper: &Hyperparams,
) -> Result<(ClassifierModel, Vec<f64>)> {
    train_impl(corpus, hyper, true)
}

/// Strictly sequential training; bitwise-identical to [`train`].
pub fn train_seq(corpus: &EmbeddedCorpus, hyper: &Hyperparams) -> Result<ClassifierModel> {
    Ok(train_impl(corpus, hyper, false)?.0)
}

/// Class probabilities for one input.
pub fn predict_probabilities(model: &ClassifierModel, x: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = model
        .weights
        .iter()
        .zip(&model.bias)
        .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Predicted class index: argmax probability, lowest index on ties.
pub fn predict(model: &ClassifierModel, x: &[f64]) -> usize {
    let probs = predict_probabilities(model, x);
    let mut best = 0;
    for (c, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = c;
        }
    }
    best
}

/// Compare the analytic gradient at the model's parameter point against
/// central finite differences (h = 1e-5) over every coordinate, returning
/// the max error relative to the larger of the two gradients' largest
/// magnitudes.
pub fn gradient_check(model: &ClassifierModel, xs: &[Vec<f64>], ys: &[usize]) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::DegenerateInput(
            "gradient check needs a non-empty batch with one label per sample".into(),
        ));
    }
    let k = model.num_classes();
    let dim = model.dim();
    for x in xs {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                context: "gradient check batch".into(),
                expected: dim,
                found: x.len(),
            });
        }
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= k) {
        return Err(Error::UnknownLabel(format!(
            "class index {bad} out of range"
        )));
    }

    let mut flat: Vec<f64> = model.weights.iter().flatten().copied().collect();
    let mut bias = model.bias.clone();
    let l2 = model.hyperparams.l2;
    let (_, grad_w, grad_b) = loss_and_grad(&flat, &bias, xs, ys, k, dim, l2, false);

    const H: f64 = 1e-5;
    let loss_at = |flat: &[f64], bias: &[f64]| -> f64 {
        loss_and_grad(flat, bias, xs, ys, k, dim, l2, false).0
    };
    let mut numeric_w = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + H;
        let plus = loss_at(&flat, &bias);
        flat[i] = orig - H;
        let minus = loss_at(&flat, &bias);
        flat[i] = orig;
        numeric_w[i] = (plus - minus) / (2.0 * H);
    }
    let mut numeric_b = vec![0.0; bias.len()];
    for i in 0..bias.len() {
        let orig = bias[i];
        bias[i] = orig + H;
        let plus = loss_at(&flat, &bias);
        bias[i] = orig - H;
        let minus = loss_at(&flat, &bias);
        bias[i] = orig;
        numeric_b[i] = (plus - minus) / (2.0 * H);
    }

    let scale = grad_w
        .iter()
        .chain(&grad_b)
        .chain(numeric_w.iter())
        .chain(&numeric_b)
        .fold(1e-8f64, |a, &g| a.max(g.abs()));
    let max_err = grad_w
        .iter()
        .zip(&numeric_w)
        .chain(grad_b.iter().zip(&numeric_b))
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0f64, f64::max);
    Ok(max_err)
}

/// Derive the full evaluation report from a confusion matrix of counts
/// (rows = true class, columns = predicted class, both in `labels` order).
pub fn report_from_confusion(labels: &[String], confusion: Vec<Vec<usize>>) -> Result<EvalReport> {
    let k = labels.len();
    if confusion.len() != k || confusion.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch {
            context: "confusion matrix".into(),
            expected: k,
            found: confusion.len(),
        });
    }
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InsufficientSamples {
            context: "evaluation".into(),
            needed: 1,
            found: 0,
        });
    }
    let col_sum = |c: usize| -> usize { confusion.iter().map(|row| row[c]).sum() };

    let mut per_class = BTreeMap::new();
    for (c, label) in labels.iter().enumerate() {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted = col_sum(c);
        let precision_defined = predicted > 0;
        let precision = if precision_defined {
            tp as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if support > 0 {
            tp as f64 / support as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.insert(
            label.clone(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                precision_defined,
            },
        );
    }

    // Aggregates over classes that actually appear in the test set.
    let present: Vec<(&ClassMetrics, usize)> = per_class
        .values()
        .filter(|m| m.support > 0)
        .map(|m| (m, m.support))
        .collect();
    let count = present.len() as f64;
    let weight_total: usize = present.iter().map(|(_, s)| s).sum();
    let mut macro_avg = Aggregates {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    let mut weighted_avg = macro_avg.clone();
    for (m, support) in &present {
        macro_avg.precision += m.precision / count;
        macro_avg.recall += m.recall / count;
        macro_avg.f1 += m.f1 / count;
        let w = *support as f64 / weight_total as f64;
        weighted_avg.precision += m.precision * w;
        weighted_avg.recall += m.recall * w;
        weighted_avg.f1 += m.f1 * w;
    }

    let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        labels: labels.to_vec(),
        per_class,
        macro_avg,
        weighted_avg,
        accuracy: trace as f64 / total as f64,
        confusion,
    })
}

/// Evaluate a model on a labeled test corpus.
pub fn evaluate(model: &ClassifierModel, test: &EmbeddedCorpus) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InsufficientSamples {
            context: "evaluation".into(),
            needed: 1,
            found: 0,
        });
    }
    let index: BTreeMap<&str, usize> = model
        .class_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let k = model.num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    for sample in &test.samples {
        let truth = *index
            .get(sample.label.as_str())
            .ok_or_else(|| Error::UnknownLabel(sample.label.as_str().to_string()))?;
        let predicted = predict(model, &sample.vector);
        confusion[truth][predicted] += 1;
    }
    report_from_confusion(&model.class_labels, confusion)
}

/// Run the training-substitution experiment: split the golden corpus, train
/// one model on the golden train split and one on the synthetic corpus, and
/// evaluate both on the identical golden test split.
pub fn substitution_experiment(
    golden: &EmbeddedCorpus,
    synthetic: &EmbeddedCorpus,
    spec: &SplitSpec,
    hyper: &Hyperparams,
) -> Result<(EvalReport, EvalReport)> {
    let golden_labels = golden.label_set();
    let synthetic_labels = synthetic.label_set();
    if golden_labels != synthetic_labels {
        return Err(Error::LabelSetMismatch {
            left: golden_labels,
            right: synthetic_labels,
        });
    }
    if golden.provider_tag != synthetic.provider_tag {
        log::warn!(
            "substitution experiment across providers: `{}` vs `{}`",
            golden.provider_tag,
            synthetic.provider_tag
        );
    }
    let (train_split, test_split) = split(golden, spec)?;
    let golden_model = train(&train_split, hyper)?;
    let synthetic_model = train(synthetic, hyper)?;
    let golden_report = evaluate(&golden_model, &test_split)?;
    let synthetic_report = evaluate(&synthetic_model, &test_split)?;
    Ok((golden_report, synthetic_report))
}

/// Replace the label column with a seeded random derangement of itself
/// (no sample keeps its own position's label), destroying the
/// feature↔label association while preserving the label marginals — the
/// negative control of the substitution experiment.
pub fn derange_labels(corpus: &EmbeddedCorpus, seed: u64) -> EmbeddedCorpus {
    let n = corpus.len();
    if n < 2 {
        return corpus.clone();
    }
    let mut rng = seeded(child_seed(seed, "derange", 0));
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| p != i) {
            break;
        }
    }
    let labels: Vec<_> = corpus.samples.iter().map(|s| s.label.clone()).collect();
    let mut out = corpus.clone();
    for (i, sample) in out.samples.iter_mut().enumerate() {
        sample.label = labels[perm[i]].clone();
    }
    out
}
