//! Support, softmax class probabilities, prediction and per-prediction
//! relevance explanations.

use crate::error::Result;
use crate::model::{LabeledDataset, LannModel, RelevanceProfile};
use crate::neighbors::Neighborhood;

/// Summed inverse distances of the neighbors of each class.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector(pub Vec<f64>);

/// Softmax of a [`SupportVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(pub Vec<f64>);

impl SupportVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Class with the largest support; ties go to the smallest class id.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl ProbabilityVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `S(y | x) = sum over neighbors i with label y of 1 / max(d_i, epsilon)`.
pub fn support(data: &LabeledDataset, neighborhood: &Neighborhood, epsilon: f64) -> SupportVector {
    let mut values = vec![0.0; data.n_classes()];
    for (i, d) in neighborhood.iter() {
        values[data.label(i)] += 1.0 / d.max(epsilon);
    }
    SupportVector(values)
}

/// `S / beta` shifted so that its maximum is zero.
fn shifted_scores(support: &SupportVector, beta: f64) -> Vec<f64> {
    let scaled: Vec<f64> = support.0.iter().map(|s| s / beta).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scaled.into_iter().map(|s| s - max).collect()
}

/// Softmax with temperature `beta`.
pub fn class_probabilities(support: &SupportVector, beta: f64) -> ProbabilityVector {
    let exps: Vec<f64> = shifted_scores(support, beta).into_iter().map(f64::exp).collect();
    let total: f64 = exps.iter().sum();
    ProbabilityVector(exps.into_iter().map(|e| e / total).collect())
}

/// `log P(y | x)` for every class, via log-sum-exp.
pub fn log_class_probabilities(support: &SupportVector, beta: f64) -> Vec<f64> {
    let shifted = shifted_scores(support, beta);
    // The maximal entry contributes exactly exp(0) = 1; summing the rest
    // separately keeps precision when the distribution is nearly one-hot.
    let top = argmax(&shifted);
    let rest: f64 = shifted
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != top)
        .map(|(_, s)| s.exp())
        .sum();
    let log_total = rest.ln_1p();
    shifted.into_iter().map(|s| s - log_total).collect()
}

/// Outcome of classifying one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub support: SupportVector,
    pub probabilities: ProbabilityVector,
    pub neighborhood: Neighborhood,
}

impl LannModel {
    /// Classifies a raw (unscaled) query.
    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let scaled = self.scale_query(query)?;
        self.predict_scaled(&scaled)
    }

    /// Classifies a query that is already in the scaled training space.
    pub fn predict_scaled(&self, scaled_query: &[f64]) -> Result<Prediction> {
        let hyper = self.hyper();
        let neighborhood = self.find_neighbors(scaled_query, hyper.k, None)?;
        let support = support(self.dataset(), &neighborhood, hyper.epsilon);
        let probabilities = class_probabilities(&support, hyper.beta);
        Ok(Prediction {
            label: support.argmax(),
            support,
            probabilities,
            neighborhood,
        })
    }

    /// Feature relevances behind the prediction for a raw query: the mean of
    /// the normalized metric diagonals of its `k` neighbors.
    pub fn explain(&self, query: &[f64]) -> Result<RelevanceProfile> {
        let scaled = self.scale_query(query)?;
        let neighborhood = self.find_neighbors(&scaled, self.hyper().k, None)?;
        let mut scores = vec![0.0; self.dim()];
        for &i in neighborhood.indices() {
            for (acc, r) in scores.iter_mut().zip(self.metrics()[i].relevances()) {
                *acc += r;
            }
        }
        for s in &mut scores {
            *s /= neighborhood.len() as f64;
        }
        RelevanceProfile::from_scores(scores)
    }
}
