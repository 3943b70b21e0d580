//! Command-line front end. [`run`] parses arguments and returns the process
//! exit code: 0 on success, 1 on runtime or data errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    generate_classification, generate_licorice, load_csv, write_csv, write_csv_to, ClassificationSpec, LabelColumn,
    LicoriceSpec,
};
use crate::error::LannError;
use crate::evaluation::{cross_validate, export_distance_matrix, fingerprints, write_labels, Algorithm, Symmetrize};
use crate::model::{Hyperparams, LabeledDataset};
use crate::persist::{load_model, save_model};
use crate::training::{check_gradients, check_gradients_random, fit};

#[derive(Debug, Parser)]
#[command(name = "lann", version, about = "Locally adaptive nearest neighbors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stratified k-fold cross-validation of lann or plain kNN.
    Crossval(CrossvalArgs),
    /// Fit a model on a CSV file and save it.
    Train(TrainArgs),
    /// Classify a query or every row of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Feature relevances behind the prediction for one query.
    Explain(ExplainArgs),
    /// Class-wise mean relevance profiles of a saved model.
    Fingerprints(FingerprintArgs),
    /// Pairwise local-metric distances between the training points of a model.
    ExportDist(ExportDistArgs),
    /// Write a synthetic dataset as CSV.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column: header name or zero-based index (default: last column).
    #[arg(long, default_value = "last")]
    pub label: LabelColumn,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    /// Neighborhood size.
    #[arg(long, default_value_t = Hyperparams::default().k)]
    pub k: usize,
    /// Softmax temperature.
    #[arg(long, default_value_t = Hyperparams::default().beta)]
    pub beta: f64,
    /// SGD learning rate.
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    pub lr: f64,
    /// Training epochs.
    #[arg(long, default_value_t = Hyperparams::default().epochs)]
    pub epochs: usize,
    /// Distance floor applied before reciprocals.
    #[arg(long, default_value_t = Hyperparams::default().epsilon)]
    pub epsilon: f64,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

impl HyperArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            k: self.k,
            beta: self.beta,
            learning_rate: self.lr,
            epochs: self.epochs,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "lann", value_parser = ["lann", "knn"])]
    pub algo: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Where to write the result row as CSV.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Model file to write.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated raw feature values.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub query: Option<String>,
    /// CSV file whose rows are classified; accuracy is reported against its labels.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "last")]
    pub label: LabelColumn,
    /// Where to write `index,label,probabilities...` rows.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated raw feature values.
    #[arg(long)]
    pub query: String,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FingerprintArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with header `class,feature,relevance` (default: standard output).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportDistArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "mean", value_parser = ["mean", "min", "none"])]
    pub symmetrize: String,
    /// Matrix CSV (no header).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Labels file, one integer per line (default: `<out>.labels.csv`).
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Gaussian clusters with strong, weak, redundant and noise features.
    Classification {
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 20)]
        features: usize,
        #[arg(long, default_value_t = 2)]
        informative: usize,
        #[arg(long, default_value_t = 2)]
        weak: usize,
        #[arg(long, default_value_t = 2)]
        redundant: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Randomly oriented cylinders with inside/outside labels.
    Licorice {
        #[arg(long, default_value_t = 5)]
        cylinders: usize,
        #[arg(long, default_value_t = 200)]
        inside: usize,
        #[arg(long, default_value_t = 200)]
        outside: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 4.0)]
        length: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Check on this dataset instead of freshly generated random problems.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "last")]
    pub label: LabelColumn,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(LannError),
}

impl From<LannError> for Failure {
    fn from(e: LannError) -> Self {
        match e {
            LannError::InvalidHyperparams(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Crossval(a) => cmd_crossval(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Fingerprints(a) => cmd_fingerprints(a),
        Command::ExportDist(a) => cmd_export_dist(a),
        Command::Generate(g) => cmd_generate(g),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(LannError::io(path, e)))
}

fn io_failure(path: &Path) -> impl Fn(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(LannError::io(path, e))
}

/// Writes to `path`, or standard output when absent.
fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w).and_then(|_| w.flush()).map_err(io_failure(p))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(io_failure(Path::new("<stdout>")))
        }
    }
}

fn parse_query(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Failure::Usage(format!("cannot parse query value {v:?}")))
        })
        .collect()
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
}

fn load(args: &DataArgs) -> Result<LabeledDataset, Failure> {
    Ok(load_csv(&args.data, &args.label)?)
}

fn cmd_crossval(a: CrossvalArgs) -> CliResult {
    let algorithm: Algorithm = a.algo.parse().map_err(|e: LannError| Failure::Usage(e.to_string()))?;
    let hyper = a.hyper.hyper();
    hyper.validate()?;
    let data = load(&a.data)?;
    let result = cross_validate(
        &data,
        &dataset_name(&a.data.data),
        algorithm,
        &hyper,
        a.folds,
        a.hyper.seed,
    )?;
    if let Some(out) = &a.out {
        with_output(Some(out), |w| result.write_csv(w))?;
    }
    println!(
        "{} {}: {:.4} ± {:.4}",
        result.dataset, result.algorithm, result.mean, result.std
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> CliResult {
    let hyper = a.hyper.hyper();
    hyper.validate()?;
    let data = load(&a.data)?;
    let (model, report) = fit(&data, &hyper)?;
    save_model(&model, &a.out)?;
    match (report.first_loss(), report.final_loss()) {
        (Some(first), Some(last)) => println!(
            "trained {} points, {} epochs: mean loss {first:.6} -> {last:.6}",
            data.len(),
            report.epochs
        ),
        _ => println!("trained {} points, 0 epochs (identity metrics)", data.len()),
    }
    if report.degenerate_resets > 0 {
        println!("{} metrics were reset to identity", report.degenerate_resets);
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let (queries, truth) = match (&a.query, &a.data) {
        (Some(q), _) => (vec![parse_query(q)?], None),
        (None, Some(path)) => {
            let data = load_csv(path, &a.label)?;
            // Map the file's class names onto the model's ids.
            let truth: Option<Vec<Option<usize>>> = data.class_names().map(|names| {
                data.labels()
                    .iter()
                    .map(|&y| (0..model.n_classes()).find(|&c| model.dataset().class_name(c) == names[y]))
                    .collect()
            });
            (data.points().map(<[f64]>::to_vec).collect(), truth)
        }
        (None, None) => return Err(Failure::Usage("either --query or --data is required".into())),
    };
    let predictions = queries
        .iter()
        .map(|q| model.predict(q))
        .collect::<Result<Vec<_>, _>>()?;
    let names: Vec<String> = (0..model.n_classes()).map(|c| model.dataset().class_name(c)).collect();
    let write_rows = |w: &mut dyn Write| -> io::Result<()> {
        let header: Vec<String> = names.iter().map(|n| format!("p_{n}")).collect();
        writeln!(w, "index,label,{}", header.join(","))?;
        for (i, p) in predictions.iter().enumerate() {
            let probs: Vec<String> = p.probabilities.values().iter().map(f64::to_string).collect();
            writeln!(w, "{i},{},{}", names[p.label], probs.join(","))?;
        }
        Ok(())
    };
    with_output(a.out.as_deref(), write_rows)?;
    if let Some(truth) = truth {
        let correct = predictions
            .iter()
            .zip(&truth)
            .filter(|(p, t)| **t == Some(p.label))
            .count();
        eprintln!(
            "accuracy {:.4} ({correct}/{})",
            correct as f64 / truth.len() as f64,
            truth.len()
        );
    }
    Ok(())
}

fn cmd_explain(a: ExplainArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let query = parse_query(&a.query)?;
    let profile = model.explain(&query)?;
    with_output(a.out.as_deref(), |w| {
        writeln!(w, "feature,relevance")?;
        for (l, r) in profile.relevances().iter().enumerate() {
            writeln!(w, "{},{}", model.dataset().feature_name(l), r)?;
        }
        Ok(())
    })
}

fn cmd_fingerprints(a: FingerprintArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let fp = fingerprints(&model)?;
    with_output(a.out.as_deref(), |w| fp.write_csv(model.dataset(), w))
}

fn cmd_export_dist(a: ExportDistArgs) -> CliResult {
    let mode: Symmetrize = a
        .symmetrize
        .parse()
        .map_err(|e: LannError| Failure::Usage(e.to_string()))?;
    let model = load_model(&a.model)?;
    let matrix = export_distance_matrix(&model, mode);
    with_output(Some(&a.out), |w| matrix.write_csv(w))?;
    let labels_out = a.labels_out.unwrap_or_else(|| {
        let stem = a
            .out
            .file_stem()
            .map_or_else(|| "matrix".into(), |s| s.to_string_lossy().into_owned());
        a.out.with_file_name(format!("{stem}.labels.csv"))
    });
    with_output(Some(&labels_out), |w| write_labels(model.dataset().labels(), w))
}

fn cmd_generate(g: GenerateCommand) -> CliResult {
    let (data, out) = match g {
        GenerateCommand::Classification {
            samples,
            features,
            informative,
            weak,
            redundant,
            classes,
            seed,
            out,
        } => {
            let spec = ClassificationSpec {
                samples,
                features,
                informative,
                weak,
                redundant,
                classes,
                seed,
            };
            (generate_classification(&spec).map_err(usage)?, out)
        }
        GenerateCommand::Licorice {
            cylinders,
            inside,
            outside,
            radius,
            length,
            seed,
            out,
        } => {
            let spec = LicoriceSpec {
                cylinders,
                inside_per_cylinder: inside,
                outside_per_cylinder: outside,
                radius,
                length,
                seed,
            };
            (generate_licorice(&spec).map_err(usage)?, out)
        }
    };
    if out.as_os_str() == "-" {
        let stdout = io::stdout();
        write_csv_to(&data, stdout.lock())?;
    } else {
        write_csv(&data, &out)?;
    }
    Ok(())
}

fn usage(e: LannError) -> Failure {
    Failure::Usage(e.to_string())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CliResult {
    let report = match &a.data {
        Some(path) => {
            let hyper = a.hyper.hyper();
            hyper.validate()?;
            let (data, _) = crate::data::zscore_fit_transform(&load_csv(path, &a.label)?);
            check_gradients(&data, &hyper, a.trials, a.tol)?
        }
        None => check_gradients_random(a.trials, a.tol, a.hyper.seed).map_err(usage)?,
    };
    println!(
        "trials {} compared {} skipped(membership) {} skipped(floor) {} max relative error {:.3e} tolerance {:.1e}: {}",
        report.trials,
        report.compared,
        report.skipped_membership,
        report.skipped_floor,
        report.max_relative_error,
        report.tolerance,
        if report.passed { "PASS" } else { "FAIL" }
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Runtime(LannError::InvalidArgument(format!(
            "gradient check failed: {:.3e} > {:.1e}",
            report.max_relative_error, report.tolerance
        ))))
    }
}
