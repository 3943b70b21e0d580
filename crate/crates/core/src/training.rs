//! Softmax/KL training of the per-point metrics.
//!
//! Each training point `i` contributes `E_i = -log P(y_i | x_i)`, evaluated on
//! its leave-one-out neighborhood. For a neighbor `j` at distance
//! `d = max(d_j(x_j, x_i), eps)` the derivative w.r.t. its weight `lambda_l` is
//!
//! ```text
//!  same class:       (1 - P(y_i | x_i)) / (beta d^2) * 2 lambda_l (x_jl - x_il)^2
//!  different class:      -P(y_j | x_i)  / (beta d^2) * 2 lambda_l (x_jl - x_il)^2
//! ```
//!
//! and zero for every point outside the neighborhood. Membership of the
//! neighborhood is piecewise constant in the weights, so it is held fixed for
//! each gradient evaluation and recomputed before every visit.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Scaler;
use crate::error::{LannError, Result};
use crate::inference::{class_probabilities, log_class_probabilities, support};
use crate::model::{DiagonalMetric, Hyperparams, LabeledDataset, LannModel};
use crate::neighbors::{find_neighbors, weighted_sq_distance, Neighborhood};

/// Loss history of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean sample loss of every epoch, measured at each visit before the update.
    pub epoch_losses: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    /// Metrics that collapsed to all-zero weights and were reset to identity.
    pub degenerate_resets: usize,
}

impl TrainReport {
    pub fn first_loss(&self) -> Option<f64> {
        self.epoch_losses.first().copied()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Gradient of one sample's loss w.r.t. the weights of neighbor `neighbor`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord {
    pub neighbor: usize,
    pub gradient: Vec<f64>,
}

fn leave_one_out(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    hyper: &Hyperparams,
    i: usize,
) -> Result<Neighborhood> {
    if i >= data.len() {
        return Err(LannError::InvalidArgument(format!(
            "sample index {i} out of range for {} points",
            data.len()
        )));
    }
    find_neighbors(data, metrics, data.point(i), hyper.k, Some(i))
}

/// Loss of sample `i` with the neighbor set fixed to `members`; distances are
/// recomputed under the current metrics.
pub fn frozen_sample_loss(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    hyper: &Hyperparams,
    i: usize,
    members: &[usize],
) -> f64 {
    let query = data.point(i);
    let mut scores = vec![0.0; data.n_classes()];
    for &j in members {
        let d = weighted_sq_distance(metrics[j].weights(), data.point(j), query);
        scores[data.label(j)] += 1.0 / d.max(hyper.epsilon);
    }
    -log_class_probabilities(&crate::inference::SupportVector(scores), hyper.beta)[data.label(i)]
}

/// `-log P(y_i | x_i)` on the leave-one-out neighborhood of sample `i`.
pub fn sample_loss(data: &LabeledDataset, metrics: &[DiagonalMetric], hyper: &Hyperparams, i: usize) -> Result<f64> {
    let neighborhood = leave_one_out(data, metrics, hyper, i)?;
    let s = support(data, &neighborhood, hyper.epsilon);
    Ok(-log_class_probabilities(&s, hyper.beta)[data.label(i)])
}

/// Loss and per-neighbor gradients of sample `i` for a given neighborhood.
pub fn gradients_for_neighborhood(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    hyper: &Hyperparams,
    i: usize,
    neighborhood: &Neighborhood,
) -> (f64, Vec<GradientRecord>) {
    let s = support(data, neighborhood, hyper.epsilon);
    let target = data.label(i);
    let loss = -log_class_probabilities(&s, hyper.beta)[target];
    let p = class_probabilities(&s, hyper.beta);
    let xi = data.point(i);
    let records = neighborhood
        .iter()
        .map(|(j, dist)| {
            let d = dist.max(hyper.epsilon);
            let label = data.label(j);
            let scale = if label == target {
                1.0 - p.values()[target]
            } else {
                -p.values()[label]
            } / (hyper.beta * d * d);
            let gradient = metrics[j]
                .weights()
                .iter()
                .zip(data.point(j).iter().zip(xi))
                .map(|(w, (a, b))| {
                    let diff = a - b;
                    scale * 2.0 * w * diff * diff
                })
                .collect();
            GradientRecord { neighbor: j, gradient }
        })
        .collect();
    (loss, records)
}

/// Gradients of sample `i`'s loss w.r.t. the weights of each of its
/// leave-one-out neighbors. Points outside the neighborhood have zero
/// gradient and are omitted.
pub fn sample_gradients(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    hyper: &Hyperparams,
    i: usize,
) -> Result<Vec<GradientRecord>> {
    let neighborhood = leave_one_out(data, metrics, hyper, i)?;
    Ok(gradients_for_neighborhood(data, metrics, hyper, i, &neighborhood).1)
}

fn check_fit_inputs(data: &LabeledDataset, hyper: &Hyperparams) -> Result<()> {
    hyper.validate()?;
    if hyper.k >= data.len() {
        return Err(LannError::InsufficientPoints {
            k: hyper.k,
            available: data.len().saturating_sub(1),
        });
    }
    Ok(())
}

/// Runs stochastic gradient descent on already scaled data, starting from
/// identity metrics.
pub fn train_metrics(data: &LabeledDataset, hyper: &Hyperparams) -> Result<(Vec<DiagonalMetric>, TrainReport)> {
    check_fit_inputs(data, hyper)?;
    let mut metrics = vec![DiagonalMetric::identity(data.dim())?; data.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(hyper.epochs),
        epochs: hyper.epochs,
        seed: hyper.seed,
        degenerate_resets: 0,
    };

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let neighborhood = find_neighbors(data, &metrics, data.point(i), hyper.k, Some(i))?;
            let (loss, records) = gradients_for_neighborhood(data, &metrics, hyper, i, &neighborhood);
            total += loss;
            for record in records {
                let metric = &mut metrics[record.neighbor];
                for (w, g) in metric.weights_mut().iter_mut().zip(&record.gradient) {
                    *w -= hyper.learning_rate * g;
                }
                *metric = match DiagonalMetric::normalized(metric.weights()) {
                    Ok(m) => m,
                    Err(LannError::DegenerateMetric) => {
                        warn!("metric of point {} collapsed, reset to identity", record.neighbor);
                        report.degenerate_resets += 1;
                        DiagonalMetric::identity(data.dim())?
                    }
                    Err(e) => return Err(e),
                };
            }
        }
        report.epoch_losses.push(total / data.len() as f64);
    }
    Ok((metrics, report))
}

/// Fits a model: z-scores `dataset`, then learns one metric per point.
pub fn fit(dataset: &LabeledDataset, hyper: &Hyperparams) -> Result<(LannModel, TrainReport)> {
    check_fit_inputs(dataset, hyper)?;
    let (scaled, scaler) = crate::data::zscore_fit_transform(dataset);
    fit_scaled(scaled, scaler, hyper)
}

/// Fits a model on data that `scaler` has already transformed.
pub fn fit_scaled(scaled: LabeledDataset, scaler: Scaler, hyper: &Hyperparams) -> Result<(LannModel, TrainReport)> {
    let (metrics, report) = train_metrics(&scaled, hyper)?;
    Ok((LannModel::new(scaled, metrics, hyper.clone(), scaler)?, report))
}

/// Finite-difference step used by the gradient checker.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub trials: usize,
    /// Gradient components compared.
    pub compared: usize,
    /// Components skipped because a perturbation changed neighborhood membership.
    pub skipped_membership: usize,
    /// Trials skipped because a neighbor distance hit the epsilon floor.
    pub skipped_floor: usize,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` per neighbor
    /// gradient vector (Euclidean norms), over all trials.
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Default, Clone, Copy)]
struct InstanceCheck {
    compared: usize,
    skipped_membership: usize,
    skipped_floor: bool,
    max_relative_error: f64,
}

/// Norms below this count as a zero gradient on both sides.
const ZERO_GRADIENT: f64 = 1e-10;

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale < ZERO_GRADIENT {
        0.0
    } else {
        diff / scale
    }
}

fn check_instance(
    data: &LabeledDataset,
    metrics: &[DiagonalMetric],
    hyper: &Hyperparams,
    i: usize,
) -> Result<InstanceCheck> {
    let neighborhood = leave_one_out(data, metrics, hyper, i)?;
    let mut out = InstanceCheck::default();
    if neighborhood.distances().iter().any(|d| *d <= hyper.epsilon) {
        out.skipped_floor = true;
        return Ok(out);
    }
    let members = neighborhood.indices();
    let (_, records) = gradients_for_neighborhood(data, metrics, hyper, i, &neighborhood);
    let mut perturbed = metrics.to_vec();
    for record in &records {
        let j = record.neighbor;
        let mut analytic = Vec::with_capacity(data.dim());
        let mut numeric = Vec::with_capacity(data.dim());
        for (l, &g) in record.gradient.iter().enumerate() {
            let original = metrics[j].weights()[l];
            let mut losses = [0.0; 2];
            let mut membership_changed = false;
            for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                perturbed[j].weights_mut()[l] = original + sign * GRADCHECK_STEP;
                let moved = find_neighbors(data, &perturbed, data.point(i), hyper.k, Some(i))?;
                membership_changed |= moved.indices() != members;
                losses[slot] = frozen_sample_loss(data, &perturbed, hyper, i, members);
            }
            perturbed[j].weights_mut()[l] = original;
            if membership_changed {
                out.skipped_membership += 1;
                continue;
            }
            analytic.push(g);
            numeric.push((losses[0] - losses[1]) / (2.0 * GRADCHECK_STEP));
        }
        out.compared += analytic.len();
        out.max_relative_error = out.max_relative_error.max(relative_error(&analytic, &numeric));
    }
    Ok(out)
}

fn random_metric(rng: &mut ChaCha8Rng, dim: usize) -> DiagonalMetric {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..2.0)).collect();
    DiagonalMetric::normalized(&raw).expect("positive weights")
}

fn merge(checks: Vec<InstanceCheck>, tolerance: f64) -> GradCheckReport {
    let max_relative_error = checks.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    GradCheckReport {
        trials: checks.len(),
        compared: checks.iter().map(|c| c.compared).sum(),
        skipped_membership: checks.iter().map(|c| c.skipped_membership).sum(),
        skipped_floor: checks.iter().filter(|c| c.skipped_floor).count(),
        max_relative_error,
        tolerance,
        passed: max_relative_error <= tolerance,
    }
}

/// Compares [`sample_gradients`] with central differences of the frozen
/// sample loss for `trials` random (metrics, sample) pairs on `data`.
/// Components whose perturbation would change neighborhood membership are
/// excluded from the comparison and counted in the report.
pub fn check_gradients(data: &LabeledDataset, hyper: &Hyperparams, trials: usize, tol: f64) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(LannError::InvalidArgument("trials must be at least 1".into()));
    }
    check_fit_inputs(data, hyper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    let checks = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let metrics: Vec<DiagonalMetric> = (0..data.len()).map(|_| random_metric(&mut rng, data.dim())).collect();
            let i = rng.random_range(0..data.len());
            check_instance(data, &metrics, hyper, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(checks, tol))
}

/// Gradient check over freshly generated problems: every trial draws a
/// Gaussian dataset with 20..=100 points, 2..=10 features and 2..=4
/// classes, random metrics, `k` in 1..=7 and `beta` log-uniform in
/// [0.1, 10].
pub fn check_gradients_random(trials: usize, tol: f64, seed: u64) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(LannError::InvalidArgument("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    let checks = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = random_problem(&mut rng);
            let hyper = Hyperparams {
                k: rng.random_range(1..=7),
                beta: 10f64.powf(rng.random_range(-1.0..1.0)),
                seed,
                ..Default::default()
            };
            let metrics: Vec<DiagonalMetric> = (0..data.len()).map(|_| random_metric(&mut rng, data.dim())).collect();
            let i = rng.random_range(0..data.len());
            check_instance(&data, &metrics, &hyper, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(checks, tol))
}

fn random_problem(rng: &mut ChaCha8Rng) -> LabeledDataset {
    let m = rng.random_range(20..=100);
    let n = rng.random_range(2..=10);
    let classes = rng.random_range(2..=4);
    let normal = rand_distr::StandardNormal;
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(normal)).collect())
        .collect();
    let labels: Vec<usize> = (0..m)
        .map(|i| if i < classes { i } else { rng.random_range(0..classes) })
        .collect();
    let rows = labels
        .iter()
        .map(|&y| centers[y].iter().map(|c| c + rng.sample::<f64, _>(normal)).collect())
        .collect();
    LabeledDataset::new(rows, labels, classes).expect("every class is present")
}
