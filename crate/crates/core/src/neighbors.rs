//! Local-metric distances and k-nearest neighborhoods.
//!
//! Every candidate training point is scored with its *own* metric, so no
//! spatial index built for a single global metric applies. The production
//! path is a linear scan that keeps the `k` best candidates in a small sorted
//! buffer; [`brute_force_neighbors`] is the reference it must match exactly.

use std::cmp::Ordering;

use crate::error::{LannError, Result};
use crate::model::{DiagonalMetric, LabeledDataset, LannModel};

/// The `k` nearest training points of a query, sorted by `(distance, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl Neighborhood {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// `(index, distance)` pairs in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.distances.iter().copied())
    }
}

/// `sum_l w_l^2 (a_l - b_l)^2` without dimension checks.
#[inline]
pub(crate) fn weighted_sq_distance(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| {
            let diff = x - y;
            (w * w) * (diff * diff)
        })
        .sum()
}

/// Quadratic-form distance of `query` from `anchor` under the anchor's metric.
pub fn local_distance(metric: &DiagonalMetric, anchor: &[f64], query: &[f64]) -> Result<f64> {
    let n = metric.dim();
    for len in [anchor.len(), query.len()] {
        if len != n {
            return Err(LannError::InvalidDimension { expected: n, got: len });
        }
    }
    Ok(weighted_sq_distance(metric.weights(), anchor, query))
}

fn by_distance_then_index(a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn check_inputs(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<()> {
    if query.len() != data.dim() {
        return Err(LannError::InvalidDimension {
            expected: data.dim(),
            got: query.len(),
        });
    }
    if metrics.len() != data.len() {
        return Err(LannError::InvalidArgument(format!(
            "{} metrics for {} points",
            metrics.len(),
            data.len()
        )));
    }
    let available = data.len() - usize::from(exclude.is_some_and(|e| e < data.len()));
    if k == 0 || k > available {
        return Err(LannError::InsufficientPoints { k, available });
    }
    Ok(())
}

/// The `k` training points with the smallest `d_i(x_i, query)`, where `d_i`
/// is the metric attached to point `i`. Ties go to the smaller index and
/// `exclude`, when given, never appears in the result.
pub fn find_neighbors(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<Neighborhood> {
    check_inputs(data, metrics, query, k, exclude)?;
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, (point, metric)) in data.points().zip(metrics).enumerate() {
        if Some(i) == exclude {
            continue;
        }
        let candidate = (weighted_sq_distance(metric.weights(), point, query), i);
        if best.len() == k && by_distance_then_index(candidate, best[k - 1]) != Ordering::Less {
            continue;
        }
        let pos = best
            .binary_search_by(|probe| by_distance_then_index(*probe, candidate))
            .unwrap_or_else(|p| p);
        best.insert(pos, candidate);
        best.truncate(k);
    }
    Ok(Neighborhood {
        distances: best.iter().map(|c| c.0).collect(),
        indices: best.iter().map(|c| c.1).collect(),
    })
}

/// Reference implementation of [`find_neighbors`]: scores every candidate,
/// sorts them all and keeps the first `k`.
pub fn brute_force_neighbors(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<Neighborhood> {
    check_inputs(data, metrics, query, k, exclude)?;
    let mut all: Vec<(f64, usize)> = (0..data.len())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (local_distance(&metrics[i], data.point(i), query).unwrap(), i))
        .collect();
    all.sort_by(|a, b| by_distance_then_index(*a, *b));
    all.truncate(k);
    Ok(Neighborhood {
        distances: all.iter().map(|c| c.0).collect(),
        indices: all.iter().map(|c| c.1).collect(),
    })
}

impl LannModel {
    /// Neighborhood of an already scaled query under the model's metrics.
    pub fn find_neighbors(&self, scaled_query: &[f64], k: usize, exclude: Option<usize>) -> Result<Neighborhood> {
        find_neighbors(self.dataset(), self.metrics(), scaled_query, k, exclude)
    }
}
