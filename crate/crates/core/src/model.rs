//! Shared domain types: labeled data, per-point diagonal metrics,
//! hyperparameters and the fitted model.

use crate::data::Scaler;
use crate::error::{LannError, Result};

/// Relative tolerance for the trace constraint `sum(lambda^2) == n`.
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// `m` points in `R^n` with integer class labels in `0..n_classes`.
///
/// Points are stored row-major. Optional feature and class names are carried
/// along for reporting only; they never affect computation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    class_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Builds a dataset from rows, checking every invariant: at least one
    /// point and feature, at least two classes, every class present, labels
    /// in range and all values finite.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        for row in &rows {
            if row.len() != dim {
                return Err(LannError::InvalidDimension {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let points = rows.into_iter().flatten().collect();
        Self::from_flat(points, dim, labels, n_classes)
    }

    /// Same as [`LabeledDataset::new`] for a row-major buffer of `labels.len() * dim` values.
    pub fn from_flat(points: Vec<f64>, dim: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(LannError::InvalidDataset("no points".into()));
        }
        if dim == 0 {
            return Err(LannError::InvalidDimension { expected: 1, got: 0 });
        }
        if points.len() != labels.len() * dim {
            return Err(LannError::InvalidDataset(format!(
                "{} values do not form {} rows of {} features",
                points.len(),
                labels.len(),
                dim
            )));
        }
        if n_classes < 2 {
            return Err(LannError::InvalidDataset(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if let Some((i, v)) = points.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LannError::InvalidDataset(format!(
                "non-finite value {v} at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        let mut seen = vec![false; n_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= n_classes {
                return Err(LannError::InvalidDataset(format!(
                    "label {y} at row {i} is not below the class count {n_classes}"
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(LannError::InvalidDataset(format!("class {missing} has no members")));
        }
        Ok(Self {
            points,
            dim,
            labels,
            n_classes,
            feature_names: None,
            class_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim {
            return Err(LannError::InvalidDimension {
                expected: self.dim,
                got: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(LannError::InvalidDataset(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    /// Number of points `m`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dimensionality `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Display name of a class: its original name when known, else the id.
    pub fn class_name(&self, class: usize) -> String {
        match &self.class_names {
            Some(names) => names[class].clone(),
            None => class.to_string(),
        }
    }

    pub fn feature_name(&self, feature: usize) -> String {
        match &self.feature_names {
            Some(names) => names[feature].clone(),
            None => format!("f{feature}"),
        }
    }

    /// Rows selected by `indices`, in that order.
    ///
    /// The class count and names are kept even if some class ends up without
    /// members, so labels stay comparable across cross-validation splits.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Self {
            points,
            dim: self.dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Replaces the feature values, keeping labels and names.
    pub(crate) fn with_points(&self, points: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), self.points.len());
        Self { points, ..self.clone() }
    }

    /// Member indices of every class.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            members[y].push(i);
        }
        members
    }
}

/// Diagonal local metric `diag(lambda_1^2, ..., lambda_n^2)`, stored unsquared.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMetric {
    weights: Vec<f64>,
}

impl DiagonalMetric {
    /// The Euclidean metric: every weight is one.
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LannError::InvalidDimension { expected: 1, got: 0 });
        }
        Ok(Self {
            weights: vec![1.0; dim],
        })
    }

    /// Rescales `|weights|` so that the squared weights sum to the dimension.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(LannError::InvalidDimension { expected: 1, got: 0 });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(LannError::InvalidArgument("metric weights must be finite".into()));
        }
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        if sum_sq == 0.0 {
            return Err(LannError::DegenerateMetric);
        }
        let scale = (weights.len() as f64 / sum_sq).sqrt();
        Ok(Self {
            weights: weights.iter().map(|w| w.abs() * scale).collect(),
        })
    }

    /// Wraps weights that already satisfy the trace constraint, e.g. when
    /// reading a saved model.
    pub fn from_normalized(weights: Vec<f64>) -> Result<Self> {
        let metric = Self { weights };
        if metric.weights.is_empty() || !metric.is_normalized() {
            return Err(LannError::InvalidArgument(format!(
                "weights violate the trace constraint (sum of squares {} for dimension {})",
                metric.trace(),
                metric.weights.len()
            )));
        }
        Ok(metric)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// The unsquared weights `lambda`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal of the metric matrix, `lambda^2`.
    pub fn squared(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * w).collect()
    }

    /// Trace of the metric matrix.
    pub fn trace(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn is_normalized(&self) -> bool {
        let n = self.weights.len() as f64;
        self.weights.iter().all(|w| w.is_finite()) && ((self.trace() - n) / n).abs() <= TRACE_TOLERANCE
    }

    /// `lambda^2 / sum(lambda^2)`, the metric read as a relevance distribution.
    pub fn relevances(&self) -> Vec<f64> {
        let trace = self.trace();
        self.weights.iter().map(|w| w * w / trace).collect()
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

/// Canonical initial metric (all weights one).
pub fn identity_metric(dim: usize) -> Result<DiagonalMetric> {
    DiagonalMetric::identity(dim)
}

/// Projects arbitrary weights onto the constraint set `sum(lambda^2) == n`.
pub fn normalize_metric(weights: &[f64]) -> Result<DiagonalMetric> {
    DiagonalMetric::normalized(weights)
}

/// Training and inference settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Neighborhood size.
    pub k: usize,
    /// Softmax temperature.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Floor applied to every distance before taking reciprocals.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            k: 5,
            beta: 1.0,
            learning_rate: 0.01,
            epochs: 50,
            epsilon: 1e-8,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(LannError::InvalidHyperparams("k must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(LannError::InvalidHyperparams(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(LannError::InvalidHyperparams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LannError::InvalidHyperparams(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// A fitted classifier: z-scored training points, one metric per point,
/// the hyperparameters used and the scaler that maps raw queries into the
/// training space.
#[derive(Debug, Clone, PartialEq)]
pub struct LannModel {
    dataset: LabeledDataset,
    metrics: Vec<DiagonalMetric>,
    hyper: Hyperparams,
    scaler: Scaler,
}

impl LannModel {
    pub fn new(
        dataset: LabeledDataset,
        metrics: Vec<DiagonalMetric>,
        hyper: Hyperparams,
        scaler: Scaler,
    ) -> Result<Self> {
        hyper.validate()?;
        if metrics.len() != dataset.len() {
            return Err(LannError::InvalidArgument(format!(
                "{} metrics for {} points",
                metrics.len(),
                dataset.len()
            )));
        }
        for metric in &metrics {
            if metric.dim() != dataset.dim() {
                return Err(LannError::InvalidDimension {
                    expected: dataset.dim(),
                    got: metric.dim(),
                });
            }
            if !metric.is_normalized() {
                return Err(LannError::InvalidArgument(
                    "metric violates the trace constraint".into(),
                ));
            }
        }
        if scaler.dim() != dataset.dim() {
            return Err(LannError::InvalidDimension {
                expected: dataset.dim(),
                got: scaler.dim(),
            });
        }
        Ok(Self {
            dataset,
            metrics,
            hyper,
            scaler,
        })
    }

    /// A model whose metrics are all the identity, i.e. plain weighted kNN
    /// on the scaled data.
    pub fn untrained(dataset: LabeledDataset, hyper: Hyperparams, scaler: Scaler) -> Result<Self> {
        let metrics = vec![DiagonalMetric::identity(dataset.dim())?; dataset.len()];
        Self::new(dataset, metrics, hyper, scaler)
    }

    /// The scaled training set.
    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn metrics(&self) -> &[DiagonalMetric] {
        &self.metrics
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn dim(&self) -> usize {
        self.dataset.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.dataset.n_classes()
    }

    /// Maps a raw query into the scaled training space.
    pub fn scale_query(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(LannError::InvalidDimension {
                expected: self.dim(),
                got: query.len(),
            });
        }
        Ok(self.scaler.transform_point(query))
    }
}

/// Normalized feature relevances: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceProfile {
    relevances: Vec<f64>,
}

impl RelevanceProfile {
    /// Normalizes non-negative scores into a profile.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(LannError::InvalidArgument(
                "relevance scores must be finite and non-negative".into(),
            ));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(LannError::DegenerateMetric);
        }
        Ok(Self {
            relevances: scores.into_iter().map(|s| s / total).collect(),
        })
    }

    pub fn relevances(&self) -> &[f64] {
        &self.relevances
    }

    pub fn dim(&self) -> usize {
        self.relevances.len()
    }

    /// Largest absolute entrywise difference to another profile.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.relevances
            .iter()
            .zip(&other.relevances)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_is_all_ones() {
        assert_eq!(identity_metric(3).unwrap().weights(), &[1.0, 1.0, 1.0]);
        assert_eq!(identity_metric(1).unwrap().weights(), &[1.0]);
        assert_eq!(identity_metric(7).unwrap().trace(), 7.0);
        assert!(matches!(identity_metric(0), Err(LannError::InvalidDimension { .. })));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_metric(&[1.0, 1.0, 1.0, 1.0]).unwrap().weights(),
            &[1.0, 1.0, 1.0, 1.0]
        );
        // c^2 * 4 = 2
        let m = normalize_metric(&[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(m.weights()[0], 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(m.weights()[1], 0.0);
        assert!(matches!(
            normalize_metric(&[0.0, 0.0]),
            Err(LannError::DegenerateMetric)
        ));
        assert!(normalize_metric(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn normalize_takes_absolute_values() {
        let m = normalize_metric(&[-3.0, 4.0]).unwrap();
        assert!(m.weights().iter().all(|w| *w >= 0.0));
        assert!(m.is_normalized());
    }

    #[test]
    fn dataset_invariants() {
        assert!(LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![0, 1], 2).is_ok());
        // missing class
        assert!(LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![0, 0], 2).is_err());
        // single class
        assert!(LabeledDataset::new(vec![vec![1.0]], vec![0], 1).is_err());
        // label out of range
        assert!(LabeledDataset::new(vec![vec![1.0], vec![2.0]], vec![0, 2], 2).is_err());
        // non-finite
        assert!(LabeledDataset::new(vec![vec![f64::NAN], vec![2.0]], vec![0, 1], 2).is_err());
        // ragged
        assert!(LabeledDataset::new(vec![vec![1.0, 2.0], vec![2.0]], vec![0, 1], 2).is_err());
        // zero features
        assert!(LabeledDataset::new(vec![vec![], vec![]], vec![0, 1], 2).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        for bad in [
            Hyperparams {
                k: 0,
                ..Default::default()
            },
            Hyperparams {
                beta: 0.0,
                ..Default::default()
            },
            Hyperparams {
                epsilon: -1.0,
                ..Default::default()
            },
            Hyperparams {
                learning_rate: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn relevance_profile_normalizes() {
        let p = RelevanceProfile::from_scores(vec![1.0, 3.0]).unwrap();
        assert_eq!(p.relevances(), &[0.25, 0.75]);
        assert!(RelevanceProfile::from_scores(vec![0.0, 0.0]).is_err());
        assert!(RelevanceProfile::from_scores(vec![-1.0, 2.0]).is_err());
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 1..12).prop_filter("nonzero", |w| w.iter().any(|x| x.abs() > 1e-6))
    }

    proptest! {
        #[test]
        fn normalize_satisfies_trace(w in weights()) {
            let m = normalize_metric(&w).unwrap();
            prop_assert!(m.is_normalized());
            prop_assert!(m.weights().iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn normalize_is_idempotent(w in weights()) {
            let once = normalize_metric(&w).unwrap();
            let twice = normalize_metric(once.weights()).unwrap();
            for (a, b) in once.weights().iter().zip(twice.weights()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalize_is_scale_invariant(w in weights(), c in prop::sample::select(vec![-1e3, -2.5, -1.0, 1e-3, 0.5, 7.0, 1e4])) {
            let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
            let a = normalize_metric(&w).unwrap();
            let b = normalize_metric(&scaled).unwrap();
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
    }
}
