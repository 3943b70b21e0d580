//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use lann::evaluation::squared_euclidean_matrix;
use lann::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CV_SEED: u64 = 42;

fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn load(name: &str) -> LabeledDataset {
    load_csv(data_path(name), &LabelColumn::Last).expect("dataset")
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn cv(data: &LabeledDataset, name: &str, algorithm: Algorithm, hyper: &Hyperparams) -> (CvResult, Duration) {
    let start = Instant::now();
    let result = cross_validate(data, name, algorithm, hyper, 10, CV_SEED).expect("cross-validation");
    (result, start.elapsed())
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let report = check_gradients_random(100, 1e-4, 42).expect("gradcheck");
    let elapsed = start.elapsed();
    outcome(
        report.passed && elapsed < Duration::from_secs(30),
        format!(
            "max relative error {:.2e} over {} components ({} membership skips, {} floor skips), {:.1}s",
            report.max_relative_error,
            report.compared,
            report.skipped_membership,
            report.skipped_floor,
            elapsed.as_secs_f64()
        ),
    )
}

fn baseline_reduction() -> Outcome {
    let hyper = Hyperparams {
        epochs: 0,
        ..Default::default()
    };
    let mut parts = Vec::new();
    let mut passed = true;
    for name in ["iris", "wine", "breast_cancer"] {
        let data = load(&format!("{name}.csv"));
        let (lann, _) = cv(&data, name, Algorithm::Lann, &hyper);
        let (knn, _) = cv(&data, name, Algorithm::Knn, &hyper);
        let same = lann.fold_accuracies == knn.fold_accuracies;
        passed &= same;
        parts.push(format!("{name} {}", if same { "identical" } else { "DIFFERENT" }));
    }
    outcome(passed, parts.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    let mut queries = 0;
    for _ in 0..200 {
        let m = rng.random_range(2..150);
        let n = rng.random_range(1..10);
        let rows = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0f64..2.0).round()).collect())
            .collect();
        let data = LabeledDataset::new(rows, (0..m).map(|i| i % 2).collect(), 2).unwrap();
        let metrics: Vec<DiagonalMetric> = (0..m)
            .map(|_| {
                let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
                normalize_metric(&w).unwrap()
            })
            .collect();
        for _ in 0..10 {
            let exclude = rng.random_bool(0.5).then(|| rng.random_range(0..m));
            let available = m - usize::from(exclude.is_some());
            if available == 0 {
                continue;
            }
            let k = rng.random_range(1..=available);
            let query: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).round()).collect();
            let fast = find_neighbors(&data, &metrics, &query, k, exclude).unwrap();
            let slow = brute_force_neighbors(&data, &metrics, &query, k, exclude).unwrap();
            queries += 1;
            if fast.indices() != slow.indices() {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches over {queries} queries on 200 datasets"),
    )
}

fn benchmark_accuracy() -> Outcome {
    let hyper = Hyperparams::default();
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, floor) in [("iris", 0.93), ("wine", 0.93), ("breast_cancer", 0.91)] {
        let data = load(&format!("{name}.csv"));
        let (r, elapsed) = cv(&data, name, Algorithm::Lann, &hyper);
        let ok = r.mean >= floor && elapsed < Duration::from_secs(120);
        passed &= ok;
        parts.push(format!(
            "{name} {:.4} ± {:.4} (>= {floor}, {:.1}s)",
            r.mean,
            r.std,
            elapsed.as_secs_f64()
        ));
    }
    outcome(passed, parts.join("; "))
}

fn ionosphere_relative() -> Outcome {
    let data = load("ionosphere.csv");
    let hyper = Hyperparams {
        beta: 0.1,
        learning_rate: 1.0,
        ..Default::default()
    };
    let start = Instant::now();
    let (lann, _) = cv(&data, "ionosphere", Algorithm::Lann, &hyper);
    let (knn, _) = cv(&data, "ionosphere", Algorithm::Knn, &hyper);
    let elapsed = start.elapsed();
    let gap = lann.mean - knn.mean;
    outcome(
        gap >= 0.05 && elapsed < Duration::from_secs(300),
        format!(
            "lann {:.4} knn {:.4} gap {gap:.4} (>= 0.05, beta 0.1, lr 1), {:.1}s",
            lann.mean,
            knn.mean,
            elapsed.as_secs_f64()
        ),
    )
}

fn descent() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for name in ["iris", "ionosphere"] {
        let (_, report) = fit(&load(&format!("{name}.csv")), &Hyperparams::default()).expect("fit");
        let (first, last) = (report.first_loss().unwrap(), report.final_loss().unwrap());
        passed &= last < first;
        parts.push(format!("{name} {first:.4} -> {last:.4}"));
    }
    outcome(passed, parts.join(", "))
}

fn fingerprint_property() -> Outcome {
    let hyper = Hyperparams {
        beta: 10.0,
        learning_rate: 1.0,
        epsilon: 0.05,
        ..Default::default()
    };
    let (model, _) = fit(&load("breast_cancer.csv"), &hyper).expect("fit");
    let fp = fingerprints(&model).expect("fingerprints");
    let distance = fp.profiles[0].linf_distance(&fp.profiles[1]);
    let worst_sum = fp
        .profiles
        .iter()
        .map(|p| (p.relevances().iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        distance > 0.01 && worst_sum <= 1e-9,
        format!("L-inf distance {distance:.4} (> 0.01), max |sum - 1| {worst_sum:.1e}"),
    )
}

fn licorice_distances() -> Outcome {
    let data = generate_licorice(&LicoriceSpec::default()).expect("licorice");
    let hyper = Hyperparams {
        beta: 30.0,
        learning_rate: 1.0,
        epsilon: 0.05,
        epochs: 300,
        ..Default::default()
    };
    let (model, _) = fit(&data, &hyper).expect("fit");
    let lann = reclassify_by_matrix(&export_distance_matrix(&model, Symmetrize::Mean), data.labels(), 5).unwrap();
    let euclid = reclassify_by_matrix(&squared_euclidean_matrix(model.dataset()), data.labels(), 5).unwrap();
    let raw = reclassify_by_matrix(&squared_euclidean_matrix(&data), data.labels(), 5).unwrap();
    outcome(
        lann - euclid >= 0.03,
        format!(
            "lann {lann:.4} euclidean {euclid:.4} gap {:.4} (>= 0.03); unscaled euclidean {raw:.4}",
            lann - euclid
        ),
    )
}

fn artificial_relative() -> Outcome {
    let data = generate_classification(&ClassificationSpec::default()).expect("generator");
    let hyper = Hyperparams::default();
    let (lann, _) = cv(&data, "classification", Algorithm::Lann, &hyper);
    let (knn, _) = cv(&data, "classification", Algorithm::Knn, &hyper);
    outcome(
        lann.mean >= knn.mean,
        format!("lann {:.4} knn {:.4}", lann.mean, knn.mean),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lann"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn cli_determinism() -> Outcome {
    let iris = data_path("iris.csv");
    let iris = iris.to_str().unwrap();
    let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let p = |f: &str| dir.path().join(f).to_str().unwrap().to_string();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "generate",
                "licorice",
                "--inside",
                "30",
                "--outside",
                "30",
                "--seed",
                "5",
                "-o",
                &p("lic.csv"),
            ],
            vec![
                "generate",
                "classification",
                "--samples",
                "200",
                "--seed",
                "5",
                "-o",
                &p("cls.csv"),
            ],
            vec![
                "train",
                "--data",
                &p("lic.csv"),
                "--epochs",
                "5",
                "--lr",
                "0.5",
                "--seed",
                "3",
                "-o",
                &p("lic.model"),
            ],
            vec![
                "train",
                "--data",
                iris,
                "--epochs",
                "5",
                "--seed",
                "3",
                "-o",
                &p("iris.model"),
            ],
            vec![
                "crossval",
                "--data",
                iris,
                "--epochs",
                "3",
                "--seed",
                "3",
                "-o",
                &p("cv.csv"),
            ],
            vec!["export-dist", "--model", &p("lic.model"), "-o", &p("lic.dist.csv")],
            vec!["fingerprints", "--model", &p("iris.model"), "-o", &p("fp.csv")],
            vec![
                "explain",
                "--model",
                &p("iris.model"),
                "--query",
                "5.1,3.5,1.4,0.2",
                "-o",
                &p("explain.csv"),
            ],
            vec![
                "predict",
                "--model",
                &p("iris.model"),
                "--data",
                iris,
                "-o",
                &p("pred.csv"),
            ],
        ]
        .into_iter()
        .map(|s| s.into_iter().map(String::from).collect())
        .collect();
        for step in &steps {
            let args: Vec<&str> = step.iter().map(String::as_str).collect();
            if !run_cli(&args) {
                return outcome(false, format!("command failed: lann {}", args.join(" ")));
            }
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        runs.push(files);
    }
    let differing: Vec<&str> = runs[0]
        .iter()
        .zip(&runs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    outcome(
        differing.is_empty() && runs[0].len() == runs[1].len(),
        format!("{} output files compared, differing: {differing:?}", runs[0].len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradient_correctness),
        ("baseline reduction", baseline_reduction),
        ("oracle equivalence", oracle_equivalence),
        ("benchmark accuracy", benchmark_accuracy),
        ("ionosphere gain over knn", ionosphere_relative),
        ("descent property", descent),
        ("fingerprint property", fingerprint_property),
        ("licorice distances", licorice_distances),
        ("artificial classification (relative)", artificial_relative),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = check();
        println!(
            "{} {name}: {} [{:.1}s]",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
