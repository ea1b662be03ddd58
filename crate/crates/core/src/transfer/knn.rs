//! k-nearest-neighbour damage localiser.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    #[default]
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub k: usize,
    pub weighting: Weighting,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            k: 3,
            weighting: Weighting::Distance,
        }
    }
}

/// A trained localiser (the predictor of a task).
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    config: ClassifierConfig,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: Vec<usize>,
}

/// Predicted label and per-class scores (summing to one).
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub scores: BTreeMap<usize, f64>,
}

pub fn train_localiser(features: &[Vec<f64>], labels: &[usize], config: ClassifierConfig) -> Result<Task> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::Training(format!(
            "{} samples with {} labels",
            features.len(),
            labels.len()
        )));
    }
    if config.k == 0 {
        return Err(Error::Training("k must be at least 1".into()));
    }
    let dim = features[0].len();
    if features.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Training("features must be finite rows of equal width".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if let Some((l, n)) = counts.iter().find(|(_, &n)| n < config.k) {
        return Err(Error::Training(format!("label {l} has {n} samples, fewer than k = {}", config.k)));
    }
    Ok(Task {
        config,
        features: features.to_vec(),
        labels: labels.to_vec(),
        classes: counts.into_keys().collect(),
    })
}

impl Task {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d2: f64 = r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let neighbours = &dist[..self.config.k.min(dist.len())];

        let mut votes: BTreeMap<usize, f64> = self.classes.iter().map(|&c| (c, 0.0)).collect();
        let exact = neighbours.iter().any(|(d, _)| *d == 0.0);
        for &(d, i) in neighbours {
            let w = match (self.config.weighting, exact) {
                (Weighting::Uniform, _) => 1.0,
                (Weighting::Distance, true) => f64::from(u8::from(d == 0.0)),
                (Weighting::Distance, false) => 1.0 / d,
            };
            *votes.get_mut(&self.labels[i]).expect("known class") += w;
        }
        let total: f64 = votes.values().sum();
        // Ties go to the smallest label: iterate ascending, replace only on a strict win.
        let mut best = (self.classes[0], f64::NEG_INFINITY);
        for (&c, &v) in &votes {
            if v > best.1 {
                best = (c, v);
            }
        }
        let scores = votes.into_iter().map(|(c, v)| (c, v / total)).collect();
        Prediction {
            label: best.0,
            scores,
        }
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r).label).collect()
    }
}

/// Fraction of matching entries.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
