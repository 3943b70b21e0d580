//! Cross-validation, the plain kNN baseline, class-wise relevance
//! fingerprints and pairwise distance matrices.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{make_stratified_folds, Fold, Scaler};
use crate::error::{LannError, Result};
use crate::inference::argmax;
use crate::model::{Hyperparams, LabeledDataset, LannModel, RelevanceProfile};
use crate::neighbors::weighted_sq_distance;
use crate::training::fit;

/// Classifier evaluated by [`cross_validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Locally adaptive metrics trained with SGD.
    Lann,
    /// Inverse-distance weighted kNN with squared Euclidean distance.
    Knn,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Lann => "lann",
            Algorithm::Knn => "knn",
        })
    }
}

impl FromStr for Algorithm {
    type Err = LannError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lann" => Ok(Algorithm::Lann),
            "knn" => Ok(Algorithm::Knn),
            other => Err(LannError::InvalidArgument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Plain weighted kNN over scaled training data. Kept separate from the
/// local-metric code path so the two can be compared.
pub fn weighted_knn_predict(train: &LabeledDataset, query: &[f64], k: usize, epsilon: f64) -> usize {
    let mut scored: Vec<(f64, usize)> = train
        .points()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut support = vec![0.0; train.n_classes()];
    for &(d, i) in scored.iter().take(k) {
        support[train.label(i)] += 1.0 / d.max(epsilon);
    }
    argmax(&support)
}

/// Accuracy over the folds of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub std: f64,
}

impl CvResult {
    pub fn new(dataset: impl Into<String>, algorithm: Algorithm, seed: u64, fold_accuracies: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&fold_accuracies);
        Self {
            dataset: dataset.into(),
            algorithm,
            seed,
            fold_accuracies,
            mean,
            std,
        }
    }

    pub fn csv_header(&self) -> String {
        let folds: Vec<String> = (0..self.fold_accuracies.len()).map(|f| format!("fold{f}")).collect();
        format!("dataset,algorithm,seed,mean,std,{}", folds.join(","))
    }

    pub fn csv_row(&self) -> String {
        let folds: Vec<String> = self.fold_accuracies.iter().map(f64::to_string).collect();
        format!(
            "{},{},{},{},{},{}",
            self.dataset,
            self.algorithm,
            self.seed,
            self.mean,
            self.std,
            folds.join(",")
        )
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        writeln!(w, "{}", self.csv_row())
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn score_fold(data: &LabeledDataset, fold: &Fold, algorithm: Algorithm, hyper: &Hyperparams) -> Result<f64> {
    let train = data.subset(&fold.train);
    let correct = match algorithm {
        Algorithm::Lann => {
            let (model, _) = fit(&train, hyper)?;
            let mut correct = 0;
            for &i in &fold.test {
                if model.predict(data.point(i))?.label == data.label(i) {
                    correct += 1;
                }
            }
            correct
        }
        Algorithm::Knn => {
            hyper.validate()?;
            if hyper.k > train.len() {
                return Err(LannError::InsufficientPoints {
                    k: hyper.k,
                    available: train.len(),
                });
            }
            let scaler = Scaler::fit(&train);
            let scaled = scaler.transform(&train)?;
            fold.test
                .iter()
                .filter(|&&i| {
                    let q = scaler.transform_point(data.point(i));
                    weighted_knn_predict(&scaled, &q, hyper.k, hyper.epsilon) == data.label(i)
                })
                .count()
        }
    };
    Ok(correct as f64 / fold.test.len() as f64)
}

/// Stratified, shuffled k-fold cross-validation. Each fold z-scores on its
/// training part only, trains and scores test accuracy. Folds run in
/// parallel; results are ordered by fold index. `hyper.seed` drives the
/// training order, `seed` the fold assignment.
pub fn cross_validate(
    data: &LabeledDataset,
    name: &str,
    algorithm: Algorithm,
    hyper: &Hyperparams,
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    let plan = make_stratified_folds(data, folds, seed)?;
    let accuracies = plan
        .folds
        .par_iter()
        .map(|fold| score_fold(data, fold, algorithm, hyper))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvResult::new(name, algorithm, seed, accuracies))
}

/// Mean normalized metric diagonal of the members of each class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFingerprint {
    pub profiles: Vec<RelevanceProfile>,
}

impl ClassFingerprint {
    /// Rows `class,feature,relevance` under that header.
    pub fn write_csv(&self, data: &LabeledDataset, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "class,feature,relevance")?;
        for (c, profile) in self.profiles.iter().enumerate() {
            for (l, r) in profile.relevances().iter().enumerate() {
                writeln!(w, "{},{},{}", data.class_name(c), data.feature_name(l), r)?;
            }
        }
        Ok(())
    }
}

pub fn fingerprints(model: &LannModel) -> Result<ClassFingerprint> {
    let data = model.dataset();
    let profiles = data
        .class_members()
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            if members.is_empty() {
                return Err(LannError::InvalidArgument(format!("class {c} has no training points")));
            }
            let mut scores = vec![0.0; data.dim()];
            for &i in &members {
                for (acc, r) in scores.iter_mut().zip(model.metrics()[i].relevances()) {
                    *acc += r;
                }
            }
            for s in &mut scores {
                *s /= members.len() as f64;
            }
            RelevanceProfile::from_scores(scores)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassFingerprint { profiles })
}

/// How to turn the asymmetric local-metric distances into one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetrize {
    #[default]
    Mean,
    Min,
    None,
}

impl FromStr for Symmetrize {
    type Err = LannError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Symmetrize::Mean),
            "min" => Ok(Symmetrize::Min),
            "none" => Ok(Symmetrize::None),
            other => Err(LannError::InvalidArgument(format!("unknown symmetrization {other:?}"))),
        }
    }
}

/// Dense row-major square matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(LannError::InvalidArgument("distance matrix must be square".into()));
        }
        Ok(Self {
            size,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.size).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `m` lines of `m` comma-separated values, no header.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        for i in 0..self.size {
            let line: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// One integer label per line, matching the rows of an exported matrix.
pub fn write_labels(labels: &[usize], mut w: impl Write) -> std::io::Result<()> {
    for y in labels {
        writeln!(w, "{y}")?;
    }
    Ok(())
}

fn symmetrized(size: usize, raw: Vec<f64>, mode: Symmetrize) -> DistanceMatrix {
    let mut values = raw;
    if mode != Symmetrize::None {
        for i in 0..size {
            for j in 0..i {
                let (a, b) = (values[i * size + j], values[j * size + i]);
                let v = match mode {
                    Symmetrize::Mean => (a + b) / 2.0,
                    Symmetrize::Min => a.min(b),
                    Symmetrize::None => unreachable!(),
                };
                values[i * size + j] = v;
                values[j * size + i] = v;
            }
        }
    }
    for i in 0..size {
        values[i * size + i] = 0.0;
    }
    DistanceMatrix { size, values }
}

/// Pairwise distances between training points where entry `(i, j)` is
/// measured with the metric of point `i`, then symmetrized as requested.
/// The diagonal is exactly zero.
pub fn export_distance_matrix(model: &LannModel, mode: Symmetrize) -> DistanceMatrix {
    let data = model.dataset();
    let m = data.len();
    let raw: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let w = model.metrics()[i].weights();
            let xi = data.point(i);
            (0..m).map(move |j| weighted_sq_distance(w, xi, data.point(j)))
        })
        .collect();
    symmetrized(m, raw, mode)
}

/// Pairwise squared Euclidean distances.
pub fn squared_euclidean_matrix(data: &LabeledDataset) -> DistanceMatrix {
    let m = data.len();
    let raw: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = data.point(i);
            (0..m).map(move |j| xi.iter().zip(data.point(j)).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect();
    symmetrized(m, raw, Symmetrize::None)
}

/// Leave-one-out majority-vote kNN over a precomputed matrix: each point is
/// classified by the labels of the `k` smallest off-diagonal entries of its
/// row (distance ties by index, vote ties to the smallest label).
pub fn reclassify_by_matrix(matrix: &DistanceMatrix, labels: &[usize], k: usize) -> Result<f64> {
    let m = matrix.size();
    if labels.len() != m {
        return Err(LannError::InvalidDimension {
            expected: m,
            got: labels.len(),
        });
    }
    if k == 0 || k >= m {
        return Err(LannError::InsufficientPoints {
            k,
            available: m.saturating_sub(1),
        });
    }
    let classes = labels.iter().max().map_or(0, |c| c + 1);
    let correct = (0..m)
        .into_par_iter()
        .filter(|&i| {
            let mut row: Vec<(f64, usize)> = matrix
                .row(i)
                .iter()
                .copied()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, d)| (d, j))
                .collect();
            row.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0usize; classes];
            for &(_, j) in &row[..k] {
                votes[labels[j]] += 1;
            }
            let mut best = 0;
            for (c, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = c;
                }
            }
            best == labels[i]
        })
        .count();
    Ok(correct as f64 / m as f64)
}
