use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lann"))
        .args(args)
        .output()
        .expect("spawn lann")
}

fn iris() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/iris.csv")
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn train_iris(dir: &tempfile::TempDir) -> String {
    let model = path(dir, "iris.model");
    let o = lann(&[
        "train",
        "--data",
        &iris(),
        "--epochs",
        "5",
        "-o",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    model.to_string_lossy().into_owned()
}

#[test]
fn help_lists_flags() {
    let o = lann(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in [
        "crossval",
        "train",
        "predict",
        "explain",
        "fingerprints",
        "export-dist",
        "generate",
        "gradcheck",
    ] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
    let o = lann(&["crossval", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    for flag in [
        "--data",
        "--label",
        "--algo",
        "--k",
        "--beta",
        "--lr",
        "--epochs",
        "--epsilon",
        "--seed",
        "--folds",
        "--out",
    ] {
        assert!(stdout(&o).contains(flag), "{flag}");
    }
    let o = lann(&["export-dist", "--help"]);
    assert!(stdout(&o).contains("--symmetrize"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lann(&[]).status.code(), Some(2));
    assert_eq!(lann(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        lann(&["crossval", "--data", &iris(), "--algo", "svm"]).status.code(),
        Some(2)
    );
    assert_eq!(
        lann(&["crossval", "--data", &iris(), "--k", "zero"]).status.code(),
        Some(2)
    );
    let o = lann(&["crossval", "--data", &iris(), "--beta", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"));
    assert_eq!(
        lann(&["crossval", "--data", &iris(), "--k", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn missing_file_exits_1_and_names_it() {
    let o = lann(&["crossval", "--data", "/no/such/file.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/file.csv"), "{}", stderr(&o));
    let o = lann(&["predict", "--model", "/no/such/model", "--query", "1,2,3,4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/model"));
}

#[test]
fn malformed_data_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(&dir, "bad.csv");
    std::fs::write(&bad, "a,b,class\n1,2,x\n1,oops,y\n").unwrap();
    let o = lann(&[
        "train",
        "--data",
        bad.to_str().unwrap(),
        "-o",
        path(&dir, "m").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("oops"), "{}", stderr(&o));
}

#[test]
fn untrained_crossval_equals_knn() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(&dir, "lann.csv");
    let b = path(&dir, "knn.csv");
    let o = lann(&[
        "crossval",
        "--data",
        &iris(),
        "--epochs",
        "0",
        "-o",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("iris lann: "));
    assert!(lann(&[
        "crossval",
        "--data",
        &iris(),
        "--algo",
        "knn",
        "-o",
        b.to_str().unwrap()
    ])
    .status
    .success());
    let folds = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        let row = text.lines().nth(1).unwrap().to_string();
        row.split(',').skip(3).map(String::from).collect::<Vec<_>>()
    };
    assert_eq!(folds(&a), folds(&b));
    assert_eq!(std::fs::read_to_string(&a).unwrap().lines().count(), 2);
}

#[test]
fn explain_sums_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_iris(&dir);
    let o = lann(&["explain", "--model", &model, "--query", "6.0,2.9,4.5,1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("feature,relevance"));
    let total: f64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() <= 1e-9);
    let o = lann(&["explain", "--model", &model, "--query", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = lann(&["explain", "--model", &model, "--query", "1,2,x,4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn predict_reports_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_iris(&dir);
    let o = lann(&["predict", "--model", &model, "--query", "5.1,3.5,1.4,0.2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("index,label,p_"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1], "setosa");
    let total: f64 = row[2..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let o = lann(&["predict", "--model", &model, "--data", &iris()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 151);
    assert!(stderr(&o).contains("accuracy"));
}

#[test]
fn fingerprints_and_distance_export() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_iris(&dir);
    let o = lann(&["fingerprints", "--model", &model]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("class,feature,relevance"));
    assert_eq!(stdout(&o).lines().count(), 1 + 3 * 4);

    let matrix = path(&dir, "dist.csv");
    let o = lann(&["export-dist", "--model", &model, "-o", matrix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&matrix).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 150);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 150);
        assert_eq!(row[i], 0.0);
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, rows[j][i]);
        }
    }
    let labels = std::fs::read_to_string(path(&dir, "dist.labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 150);
    assert!(labels.lines().all(|l| ["0", "1", "2"].contains(&l)));

    let o = lann(&[
        "export-dist",
        "--model",
        &model,
        "--symmetrize",
        "max",
        "-o",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gradcheck_passes() {
    let o = lann(&["gradcheck", "--trials", "100", "--tol", "1e-4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let o = lann(&["gradcheck", "--data", &iris(), "--trials", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn generators_are_seeded() {
    let a = lann(&[
        "generate",
        "licorice",
        "--inside",
        "10",
        "--outside",
        "10",
        "--seed",
        "3",
        "-o",
        "-",
    ]);
    let b = lann(&[
        "generate",
        "licorice",
        "--inside",
        "10",
        "--outside",
        "10",
        "--seed",
        "3",
        "-o",
        "-",
    ]);
    let c = lann(&[
        "generate",
        "licorice",
        "--inside",
        "10",
        "--outside",
        "10",
        "--seed",
        "4",
        "-o",
        "-",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(stdout(&a).lines().count(), 1 + 5 * 20);
    let o = lann(&[
        "generate",
        "classification",
        "--samples",
        "50",
        "--features",
        "3",
        "-o",
        "-",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn label_column_by_name_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(&dir, "front.csv");
    let text = std::fs::read_to_string(iris()).unwrap();
    let moved: String = text
        .lines()
        .map(|l| {
            let (rest, label) = l.rsplit_once(',').unwrap();
            format!("{label},{rest}\n")
        })
        .collect();
    std::fs::write(&csv, moved).unwrap();
    let run = |label: &str| {
        let o = lann(&[
            "crossval",
            "--data",
            csv.to_str().unwrap(),
            "--algo",
            "knn",
            "--label",
            label,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o).split(':').nth(1).unwrap().to_string()
    };
    let reference = lann(&["crossval", "--data", &iris(), "--algo", "knn"]);
    let expected = stdout(&reference).split(':').nth(1).unwrap().to_string();
    assert_eq!(run("class"), expected);
    assert_eq!(run("0"), expected);
}
