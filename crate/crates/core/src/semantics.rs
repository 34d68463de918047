//! Frozen downstream classifier and the composite semantic quality score.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::ingest::ImageDataset;
use crate::rng::rng_from_seed;

/// Linear softmax classifier over flattened images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClassifier {
    /// Row-major `classes x inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub inputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            learning_rate: 0.05,
            batch_size: 128,
            seed: 0,
        }
    }
}

/// Numerically stable softmax (max subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl TaskClassifier {
    pub fn zeros(classes: usize, inputs: usize) -> Self {
        Self {
            weights: vec![0.0; classes * inputs],
            biases: vec![0.0; classes],
            inputs,
        }
    }

    pub fn classes(&self) -> usize {
        self.biases.len()
    }

    fn logits(&self, image: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| b + row.iter().zip(image).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    /// Class probabilities `softmax(Wx + b)`.
    pub fn classify(&self, image: &[f64]) -> Result<Vec<f64>> {
        if image.len() != self.inputs {
            bail!(
                Data,
                "image has {} pixels, classifier expects {}",
                image.len(),
                self.inputs
            );
        }
        Ok(softmax(&self.logits(image)))
    }

    pub fn predict(&self, image: &[f64]) -> Result<usize> {
        Ok(argmax(&self.classify(image)?))
    }

    /// Mean cross-entropy over a dataset.
    pub fn loss(&self, dataset: &ImageDataset) -> Result<f64> {
        let mut total = 0.0;
        for (img, &y) in dataset.images.iter().zip(&dataset.labels) {
            let p = self.classify(img)?;
            total -= libm::log(p[y as usize].max(1e-300));
        }
        Ok(total / dataset.len().max(1) as f64)
    }

    pub fn accuracy(&self, dataset: &ImageDataset) -> Result<f64> {
        let mut hits = 0usize;
        for (img, &y) in dataset.images.iter().zip(&dataset.labels) {
            hits += usize::from(self.predict(img)? == y as usize);
        }
        Ok(hits as f64 / dataset.len().max(1) as f64)
    }
}

/// Mini-batch gradient descent on cross-entropy from zero weights.
pub fn train_classifier(dataset: &ImageDataset, cfg: &ClassifierConfig) -> Result<TaskClassifier> {
    if dataset.is_empty() {
        bail!(Data, "cannot train on an empty dataset");
    }
    let classes = dataset.num_classes;
    let mut seen = vec![false; classes.max(1)];
    for &y in &dataset.labels {
        seen[y as usize] = true;
    }
    if classes < 2 || seen.iter().filter(|&&s| s).count() < 2 {
        bail!(Data, "training data must contain at least two classes");
    }
    if cfg.batch_size == 0 {
        bail!(Config, "batch size must be positive");
    }
    let inputs = dataset.pixels();
    let mut model = TaskClassifier::zeros(classes, inputs);
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut grad_w = vec![0.0; classes * inputs];
    let mut grad_b = vec![0.0; classes];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            grad_b.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &dataset.images[i];
                let mut p = softmax(&model.logits(x));
                p[dataset.labels[i] as usize] -= 1.0;
                for (c, &err) in p.iter().enumerate() {
                    grad_b[c] += err;
                    if err != 0.0 {
                        for (g, &xv) in grad_w[c * inputs..(c + 1) * inputs].iter_mut().zip(x) {
                            *g += err * xv;
                        }
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            for (b, g) in model.biases.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
        }
    }
    Ok(model)
}

/// Components of the composite semantic quality score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticQuality {
    pub q_sem: f64,
    pub q_task: f64,
    pub p_c: f64,
    pub s_dist: f64,
}

pub const Q_TASK_WEIGHT: f64 = 0.6;
pub const CONFIDENCE_WEIGHT: f64 = 0.25;
pub const DISTRIBUTION_WEIGHT: f64 = 0.15;
const KL_FLOOR: f64 = 1e-12;

fn floored(p: &[f64]) -> Vec<f64> {
    let f: Vec<f64> = p.iter().map(|&v| v.max(KL_FLOOR)).collect();
    let s: f64 = f.iter().sum();
    f.into_iter().map(|v| v / s).collect()
}

/// `D_KL(p || q)` after flooring both at 1e-12 and renormalizing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let p = floored(p);
    let q = floored(q);
    p.iter()
        .zip(&q)
        .map(|(&a, &b)| a * libm::log(a / b))
        .sum::<f64>()
        .max(0.0)
}

/// Accumulates per-sample contributions to [`SemanticQuality`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QualityAccumulator {
    pub samples: usize,
    pub hits: usize,
    pub confidence_gap: f64,
    pub similarity: f64,
}

impl QualityAccumulator {
    pub fn add(&mut self, original: &[f64], reconstructed: &[f64], label: u32) {
        self.samples += 1;
        self.hits += usize::from(argmax(reconstructed) == label as usize);
        let peak = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.confidence_gap += (peak(original) - peak(reconstructed)).abs();
        self.similarity += libm::exp(-kl_divergence(original, reconstructed));
    }

    pub fn merge(&mut self, other: &QualityAccumulator) {
        self.samples += other.samples;
        self.hits += other.hits;
        self.confidence_gap += other.confidence_gap;
        self.similarity += other.similarity;
    }

    pub fn finish(&self) -> SemanticQuality {
        let n = self.samples.max(1) as f64;
        let q_task = self.hits as f64 / n;
        let p_c = 1.0 - self.confidence_gap / n;
        let s_dist = self.similarity / n;
        SemanticQuality {
            q_sem: Q_TASK_WEIGHT * q_task + CONFIDENCE_WEIGHT * p_c + DISTRIBUTION_WEIGHT * s_dist,
            q_task,
            p_c,
            s_dist,
        }
    }
}

/// Scores reconstructions against originals through the frozen classifier.
pub fn semantic_quality(
    classifier: &TaskClassifier,
    originals: &[Vec<f64>],
    reconstructions: &[Vec<f64>],
    labels: &[u32],
) -> Result<SemanticQuality> {
    if originals.len() != reconstructions.len() || originals.len() != labels.len() {
        bail!(
            Consistency,
            "{} originals, {} reconstructions, {} labels",
            originals.len(),
            reconstructions.len(),
            labels.len()
        );
    }
    let mut acc = QualityAccumulator::default();
    for ((x, xr), &y) in originals.iter().zip(reconstructions).zip(labels) {
        acc.add(&classifier.classify(x)?, &classifier.classify(xr)?, y);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;
    use rand::Rng as _;

    fn clouds(n: usize, seed: u64) -> ImageDataset {
        let mut rng = rng_from_seed(seed);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 2) as u32;
            let base = if y == 0 { [0.8, 0.1] } else { [0.1, 0.8] };
            images.push(
                base.iter()
                    .map(|b| b + rng.random_range(-0.1..0.1))
                    .collect(),
            );
            labels.push(y);
        }
        ImageDataset::new(images, labels, 1, 2, 2).unwrap()
    }

    #[test]
    fn softmax_arithmetic() {
        let p = softmax(&[LN_2, 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let z = TaskClassifier::zeros(4, 3);
        assert_eq!(z.classify(&[0.3, 0.2, 0.1]).unwrap(), vec![0.25; 4]);
        assert!(matches!(z.classify(&[0.3]), Err(crate::Error::Data(_))));
    }

    #[test]
    fn classify_matches_direct_evaluation() {
        let mut rng = rng_from_seed(9);
        let mut clf = TaskClassifier::zeros(5, 7);
        clf.weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-2.0..2.0));
        clf.biases
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        let p = clf.classify(&x).unwrap();
        let logits: Vec<f64> = (0..5)
            .map(|c| clf.biases[c] + (0..7).map(|i| clf.weights[c * 7 + i] * x[i]).sum::<f64>())
            .collect();
        let denom: f64 = logits.iter().map(|z| libm::exp(*z)).sum();
        for c in 0..5 {
            assert!((p[c] - libm::exp(logits[c]) / denom).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn separable_clouds_are_learned() {
        let ds = clouds(200, 1);
        let cfg = ClassifierConfig {
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 16,
            seed: 4,
        };
        let clf = train_classifier(&ds, &cfg).unwrap();
        assert_eq!(clf.accuracy(&ds).unwrap(), 1.0);
    }

    #[test]
    fn zero_epochs_give_uniform_model() {
        let ds = clouds(10, 2);
        let cfg = ClassifierConfig {
            epochs: 0,
            ..Default::default()
        };
        let clf = train_classifier(&ds, &cfg).unwrap();
        assert_eq!(clf.classify(&ds.images[0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(clf.accuracy(&ds).unwrap(), 0.5);
    }

    #[test]
    fn training_loss_does_not_increase() {
        let ds = clouds(100, 3);
        let mut last = f64::INFINITY;
        for epochs in 0..8 {
            let cfg = ClassifierConfig {
                epochs,
                seed: 5,
                ..Default::default()
            };
            let loss = train_classifier(&ds, &cfg).unwrap().loss(&ds).unwrap();
            assert!(loss <= last + 1e-3, "epoch {epochs}: {loss} > {last}");
            last = loss;
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = ImageDataset::new(vec![vec![0.1]; 3], vec![1; 3], 1, 1, 2).unwrap();
        assert!(matches!(
            train_classifier(&ds, &ClassifierConfig::default()),
            Err(crate::Error::Data(_))
        ));
    }

    #[test]
    fn perfect_channel_scores_one() {
        let ds = clouds(40, 6);
        let cfg = ClassifierConfig {
            epochs: 30,
            learning_rate: 0.5,
            batch_size: 16,
            seed: 4,
        };
        let clf = train_classifier(&ds, &cfg).unwrap();
        let q = semantic_quality(&clf, &ds.images, &ds.images, &ds.labels).unwrap();
        assert_eq!(q.p_c, 1.0);
        assert_eq!(q.s_dist, 1.0);
        assert_eq!(q.q_task, 1.0);
        assert!((q.q_sem - 1.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_wrong_predictions_score_point_four() {
        let clf = TaskClassifier::zeros(3, 2);
        let imgs = vec![vec![0.1, 0.2]; 4];
        // uniform argmax is class 0, so labels 1 and 2 are all misses
        let q = semantic_quality(&clf, &imgs, &imgs, &[1, 2, 1, 2]).unwrap();
        assert_eq!(q.q_task, 0.0);
        assert!((q.q_sem - 0.4).abs() < 1e-15);
        assert_eq!(
            [Q_TASK_WEIGHT, CONFIDENCE_WEIGHT, DISTRIBUTION_WEIGHT],
            [0.6, 0.25, 0.15]
        );
    }

    #[test]
    fn length_mismatch() {
        let clf = TaskClassifier::zeros(2, 1);
        let r = semantic_quality(&clf, &[vec![0.0]], &[], &[0]);
        assert!(matches!(r, Err(crate::Error::Consistency(_))));
    }

    #[test]
    fn kl_of_identical_is_zero() {
        for p in [vec![1.0, 0.0, 0.0], vec![0.2, 0.3, 0.5]] {
            assert_eq!(kl_divergence(&p, &p), 0.0);
        }
    }
}
