//! Line-oriented model files.
//!
//! ```text
//! LANN1
//! hyper,<k>,<beta>,<learning_rate>,<epochs>,<epsilon>,<seed>
//! shape,<m>,<n>,<classes>
//! features,<name_1>,...,<name_n>        (optional)
//! classes,<name_0>,...,<name_L-1>       (optional)
//! mean,<mu_1>,...,<mu_n>
//! std,<sigma_1>,...,<sigma_n>
//! <label>,<x_1>,...,<x_n>,<lambda_1>,...,<lambda_n>      (m lines, scaled features)
//! ```
//!
//! Reals are written in their shortest round-trip form, so loading a saved
//! model reproduces it bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::Scaler;
use crate::error::{LannError, Result};
use crate::model::{DiagonalMetric, Hyperparams, LabeledDataset, LannModel};

pub const MAGIC: &str = "LANN1";

fn fmt_row<T: ToString>(key: &str, values: impl IntoIterator<Item = T>) -> Vec<String> {
    std::iter::once(key.to_string())
        .chain(values.into_iter().map(|v| v.to_string()))
        .collect()
}

pub fn write_model(model: &LannModel, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let io = |e: csv::Error| LannError::io("<model>", std::io::Error::other(e));
    let data = model.dataset();
    let h = model.hyper();
    w.write_record([MAGIC]).map_err(io)?;
    w.write_record(fmt_row(
        "hyper",
        [
            h.k.to_string(),
            h.beta.to_string(),
            h.learning_rate.to_string(),
            h.epochs.to_string(),
            h.epsilon.to_string(),
            h.seed.to_string(),
        ],
    ))
    .map_err(io)?;
    w.write_record(fmt_row("shape", [data.len(), data.dim(), data.n_classes()]))
        .map_err(io)?;
    if let Some(names) = data.feature_names() {
        w.write_record(fmt_row("features", names)).map_err(io)?;
    }
    if let Some(names) = data.class_names() {
        w.write_record(fmt_row("classes", names)).map_err(io)?;
    }
    w.write_record(fmt_row("mean", model.scaler().means())).map_err(io)?;
    w.write_record(fmt_row("std", model.scaler().stds())).map_err(io)?;
    for (i, (p, metric)) in data.points().zip(model.metrics()).enumerate() {
        let row: Vec<String> = std::iter::once(data.label(i).to_string())
            .chain(p.iter().map(f64::to_string))
            .chain(metric.weights().iter().map(f64::to_string))
            .collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| LannError::io("<model>", e))
}

pub fn save_model(model: &LannModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| LannError::io(path, e))?;
    write_model(model, BufWriter::new(file)).map_err(|e| match e {
        LannError::Io { source, .. } => LannError::io(path, source),
        other => other,
    })
}

fn bad(msg: impl Into<String>) -> LannError {
    LannError::ModelFormat(msg.into())
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(format!("cannot parse {what} from {s:?}")))
}

pub fn read_model(reader: impl Read) -> Result<LannModel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut next = |what: &str| -> Result<Vec<String>> {
        match records.next() {
            Some(Ok(r)) => Ok(r.iter().map(str::to_string).collect()),
            Some(Err(e)) => Err(bad(e.to_string())),
            None => Err(bad(format!("unexpected end of file, expected {what}"))),
        }
    };

    if next("header")? != [MAGIC] {
        return Err(bad(format!("missing {MAGIC} header")));
    }
    let hyper_row = next("hyper")?;
    if hyper_row.len() != 7 || hyper_row[0] != "hyper" {
        return Err(bad("malformed hyper line"));
    }
    let hyper = Hyperparams {
        k: parse_field(&hyper_row[1], "k")?,
        beta: parse_field(&hyper_row[2], "beta")?,
        learning_rate: parse_field(&hyper_row[3], "learning rate")?,
        epochs: parse_field(&hyper_row[4], "epochs")?,
        epsilon: parse_field(&hyper_row[5], "epsilon")?,
        seed: parse_field(&hyper_row[6], "seed")?,
    };
    let shape = next("shape")?;
    if shape.len() != 4 || shape[0] != "shape" {
        return Err(bad("malformed shape line"));
    }
    let m: usize = parse_field(&shape[1], "point count")?;
    let n: usize = parse_field(&shape[2], "dimension")?;
    let classes: usize = parse_field(&shape[3], "class count")?;

    let mut row = next("scaler")?;
    let mut feature_names = None;
    let mut class_names = None;
    loop {
        match row.first().map(String::as_str) {
            Some("features") => feature_names = Some(row[1..].to_vec()),
            Some("classes") => class_names = Some(row[1..].to_vec()),
            _ => break,
        }
        row = next("scaler")?;
    }
    let reals = |row: &[String], key: &str| -> Result<Vec<f64>> {
        if row.first().map(String::as_str) != Some(key) || row.len() != n + 1 {
            return Err(bad(format!("malformed {key} line")));
        }
        row[1..].iter().map(|v| parse_field(v, key)).collect()
    };
    let means = reals(&row, "mean")?;
    let stds = reals(&next("std")?, "std")?;
    let scaler = Scaler::from_parts(means, stds)?;

    let mut labels = Vec::with_capacity(m);
    let mut points = Vec::with_capacity(m * n);
    let mut metrics = Vec::with_capacity(m);
    for i in 0..m {
        let row = next("training point")?;
        if row.len() != 1 + 2 * n {
            return Err(bad(format!(
                "point line {i} has {} fields, expected {}",
                row.len(),
                1 + 2 * n
            )));
        }
        labels.push(parse_field::<usize>(&row[0], "label")?);
        for v in &row[1..=n] {
            points.push(parse_field::<f64>(v, "feature")?);
        }
        let weights = row[n + 1..]
            .iter()
            .map(|v| parse_field::<f64>(v, "metric weight"))
            .collect::<Result<Vec<_>>>()?;
        metrics.push(DiagonalMetric::from_normalized(weights)?);
    }
    if next("end of file").is_ok() {
        return Err(bad("trailing lines after the last training point"));
    }
    let mut data = LabeledDataset::from_flat(points, n, labels, classes)?;
    if let Some(names) = feature_names {
        data = data.with_feature_names(names)?;
    }
    if let Some(names) = class_names {
        data = data.with_class_names(names)?;
    }
    LannModel::new(data, metrics, hyper, scaler)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LannModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LannError::io(path, e))?;
    read_model(BufReader::new(file))
}
