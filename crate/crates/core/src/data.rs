//! Dataset ingestion and export, z-score preprocessing, stratified folds and
//! synthetic generators.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{LannError, Result};
use crate::model::LabeledDataset;

/// Per-feature mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Scaler {
    /// Fits on `data`. Constant features get a standard deviation of one, so
    /// they map to all zeros.
    pub fn fit(data: &LabeledDataset) -> Self {
        let n = data.dim();
        let m = data.len() as f64;
        let mut means = vec![0.0; n];
        for p in data.points() {
            for (acc, v) in means.iter_mut().zip(p) {
                *acc += v;
            }
        }
        for v in &mut means {
            *v /= m;
        }
        let mut vars = vec![0.0; n];
        for p in data.points() {
            for ((acc, v), mu) in vars.iter_mut().zip(p).zip(&means) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / m).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    /// Leaves every value unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(LannError::InvalidDimension {
                expected: means.len(),
                got: stds.len(),
            });
        }
        if stds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
            return Err(LannError::InvalidArgument(
                "scaler needs finite means and positive standard deviations".into(),
            ));
        }
        Ok(Self { means, stds })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn transform_point(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (mu, s))| (v - mu) / s)
            .collect()
    }

    pub fn transform(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        if data.dim() != self.dim() {
            return Err(LannError::InvalidDimension {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        let points = data.points().flat_map(|p| self.transform_point(p)).collect();
        Ok(data.with_points(points))
    }
}

/// Fits a scaler on `train` and returns the standardized copy alongside it.
pub fn zscore_fit_transform(train: &LabeledDataset) -> (LabeledDataset, Scaler) {
    let scaler = Scaler::fit(train);
    let scaled = scaler.transform(train).expect("scaler fitted on the same data");
    (scaled, scaler)
}

/// Applies a scaler fitted elsewhere (typically on a training split).
pub fn zscore_apply(scaler: &Scaler, data: &LabeledDataset) -> Result<LabeledDataset> {
    scaler.transform(data)
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// A plain non-negative integer selects by position, anything else by header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) if s == "last" => LabelColumn::Last,
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Reads a comma-separated file with a header row.
///
/// Every non-label column must parse as a real number. Labels are mapped to
/// `0..L` by first appearance; when every label is an integer they are
/// ordered numerically instead, so files that already use `0..L` keep their
/// ids. The original label strings become the dataset's class names.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| LannError::io(path, e))?;
    read_csv(file, label).map_err(|e| match e {
        LannError::Parse {
            row, column, message, ..
        } => LannError::Parse {
            path: path.to_path_buf(),
            row,
            column,
            message,
        },
        LannError::InvalidDataset(msg) => LannError::InvalidDataset(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// [`load_csv`] over any reader. Parse errors carry an empty path.
pub fn read_csv(reader: impl Read, label: &LabelColumn) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |row: usize, column: String, message: String| LannError::Parse {
        path: Default::default(),
        row,
        column,
        message,
    };
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(0, String::new(), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(LannError::InvalidDataset("empty file".into()));
    }
    let label_idx = match label {
        LabelColumn::Last => headers.len() - 1,
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => {
            return Err(LannError::InvalidArgument(format!(
                "label column {i} out of range for {} columns",
                headers.len()
            )))
        }
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LannError::InvalidArgument(format!("no column named {name:?}")))?,
    };
    if headers.len() < 2 {
        return Err(LannError::InvalidDataset(
            "need at least one feature column besides the label".into(),
        ));
    }

    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| parse_err(row, String::new(), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                row,
                String::new(),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                raw_labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(row, headers[c].clone(), format!("cannot parse {cell:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, headers[c].clone(), format!("non-finite value {cell:?}")));
            }
            values.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(LannError::InvalidDataset("empty file: no data rows".into()));
    }

    let (labels, class_names) = map_labels(&raw_labels);
    if class_names.len() < 2 {
        return Err(LannError::InvalidDataset(format!(
            "only one class ({:?}) present",
            class_names[0]
        )));
    }
    let feature_names = headers
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    LabeledDataset::from_flat(values, headers.len() - 1, labels, class_names.len())?
        .with_feature_names(feature_names)?
        .with_class_names(class_names)
}

fn map_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    for s in raw {
        if !names.contains(s) {
            names.push(s.clone());
        }
    }
    let numeric: Option<Vec<i64>> = names.iter().map(|s| s.parse().ok()).collect();
    if let Some(nums) = numeric {
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by_key(|&i| nums[i]);
        names = order.into_iter().map(|i| names[i].clone()).collect();
    }
    let ids: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let labels = raw.iter().map(|s| ids[s.as_str()]).collect();
    (labels, names)
}

/// Writes `data` with a header row, features first and the label last.
/// Values use the shortest representation that parses back exactly.
pub fn write_csv_to(data: &LabeledDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| LannError::io("<csv>", std::io::Error::other(e));
    let mut header: Vec<String> = (0..data.dim()).map(|l| data.feature_name(l)).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for (i, p) in data.points().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        row.push(data.class_name(data.label(i)));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| LannError::io("<csv>", e))
}

pub fn write_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| LannError::io(path, e))?;
    write_csv_to(data, BufWriter::new(file)).map_err(|e| match e {
        LannError::Io { source, .. } => LannError::io(path, source),
        other => other,
    })
}

/// One train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold plan; the test sets partition `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Shuffles each class with a seeded generator and deals its members to
/// the folds round-robin, continuing the dealer position across classes.
pub fn make_stratified_folds(data: &LabeledDataset, folds: usize, seed: u64) -> Result<FoldPlan> {
    if folds < 2 {
        return Err(LannError::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let members = data.class_members();
    for (class, m) in members.iter().enumerate() {
        if m.len() < folds {
            return Err(LannError::ClassTooSmall {
                class,
                count: m.len(),
                folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; data.len()];
    let mut dealer = 0;
    for mut class in members {
        class.shuffle(&mut rng);
        for i in class {
            assignment[i] = dealer % folds;
            dealer += 1;
        }
    }
    let folds = (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan { folds, seed })
}

/// Parameters of the artificial classification problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSpec {
    pub samples: usize,
    pub features: usize,
    /// Features whose class means sit on hypercube vertices at +-1 with unit noise.
    pub informative: usize,
    /// Same structure as the informative ones but with four times the noise.
    pub weak: usize,
    /// Random linear combinations of the informative and weak features.
    pub redundant: usize,
    pub classes: usize,
    pub seed: u64,
}

impl Default for ClassificationSpec {
    fn default() -> Self {
        Self {
            samples: 2000,
            features: 20,
            informative: 2,
            weak: 2,
            redundant: 2,
            classes: 2,
            seed: 42,
        }
    }
}

/// Weak features carry this many times the noise of informative ones.
const WEAK_NOISE: f64 = 4.0;

/// Random hypercube vertices with coordinates +-1, one per class; distinct
/// whenever the cube has enough vertices.
fn vertex_signs(rng: &mut ChaCha8Rng, dims: usize, classes: usize) -> Vec<Vec<f64>> {
    let distinct = dims >= 64 || classes as u64 <= 1u64 << dims;
    let mut chosen: Vec<u64> = Vec::with_capacity(classes);
    while chosen.len() < classes {
        let v = if dims >= 64 {
            rng.random()
        } else {
            rng.random_range(0..1u64 << dims)
        };
        if !distinct || !chosen.contains(&v) {
            chosen.push(v);
        }
    }
    chosen
        .into_iter()
        .map(|v| {
            (0..dims)
                .map(|b| if b < 64 && (v >> b) & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

/// Gaussian class clusters in an informative subspace, a noisier weakly
/// relevant subspace, redundant linear combinations and pure noise features,
/// in that column order.
pub fn generate_classification(spec: &ClassificationSpec) -> Result<LabeledDataset> {
    let ClassificationSpec {
        samples,
        features,
        informative,
        weak,
        redundant,
        classes,
        seed,
    } = *spec;
    if informative == 0 || classes < 2 || samples < classes {
        return Err(LannError::InvalidArgument(
            "need at least one informative feature, two classes and one sample per class".into(),
        ));
    }
    if informative + weak + redundant > features {
        return Err(LannError::InvalidArgument(format!(
            "{informative} informative + {weak} weak + {redundant} redundant features exceed {features}"
        )));
    }
    if informative < 64 && classes as u64 > 1u64 << informative {
        return Err(LannError::InvalidArgument(format!(
            "{classes} classes do not fit on the vertices of a {informative}-dimensional hypercube"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strong_centers = vertex_signs(&mut rng, informative, classes);
    let weak_centers = if weak > 0 {
        vertex_signs(&mut rng, weak, classes)
    } else {
        vec![vec![]; classes]
    };
    let relevant = informative + weak;
    let mixing: Vec<Vec<f64>> = (0..redundant)
        .map(|_| (0..relevant).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut rows = Vec::with_capacity(samples);
    for &y in &labels {
        let mut row = Vec::with_capacity(features);
        for c in &strong_centers[y] {
            row.push(c + rng.sample::<f64, _>(StandardNormal));
        }
        for c in &weak_centers[y] {
            row.push(c + WEAK_NOISE * rng.sample::<f64, _>(StandardNormal));
        }
        let combos: Vec<f64> = mixing
            .iter()
            .map(|coef| coef.iter().zip(&row[..relevant]).map(|(a, b)| a * b).sum())
            .collect();
        row.extend(combos);
        while row.len() < features {
            row.push(rng.sample(StandardNormal));
        }
        rows.push(row);
    }
    let names = (0..features)
        .map(|l| match l {
            l if l < informative => format!("strong{l}"),
            l if l < relevant => format!("weak{}", l - informative),
            l if l < relevant + redundant => format!("redundant{}", l - relevant),
            l => format!("noise{}", l - relevant - redundant),
        })
        .collect();
    LabeledDataset::new(rows, labels, classes)?.with_feature_names(names)
}

/// Parameters of the cylinder ("licorice") set.
#[derive(Debug, Clone, PartialEq)]
pub struct LicoriceSpec {
    pub cylinders: usize,
    pub inside_per_cylinder: usize,
    pub outside_per_cylinder: usize,
    pub radius: f64,
    pub length: f64,
    pub seed: u64,
}

impl Default for LicoriceSpec {
    fn default() -> Self {
        Self {
            cylinders: 5,
            inside_per_cylinder: 200,
            outside_per_cylinder: 200,
            radius: 1.0,
            length: 4.0,
            seed: 42,
        }
    }
}

/// Placement of one generated cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    pub center: [f64; 3],
    /// Unit vector along the cylinder.
    pub axis: [f64; 3],
}

impl Cylinder {
    /// Distance of `p` from the cylinder's axis line.
    pub fn radial_distance(&self, p: &[f64]) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let t = dot(&d, &self.axis);
        let r = [
            d[0] - t * self.axis[0],
            d[1] - t * self.axis[1],
            d[2] - t * self.axis[2],
        ];
        dot(&r, &r).sqrt()
    }

    /// Signed position of `p` along the axis, relative to the center.
    pub fn axial_position(&self, p: &[f64]) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        dot(&d, &self.axis)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = dot(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Cylinders with random orientation. Points strictly inside radius `r`
/// are labeled 1, points in the shell `r..2r` around the same axial extent
/// are labeled 0. Centers are at least `length + 8 r` apart, which keeps the
/// outer shells of any two cylinders at least `4 r` from each other.
pub fn generate_licorice(spec: &LicoriceSpec) -> Result<LabeledDataset> {
    generate_licorice_with_geometry(spec).map(|(data, _)| data)
}

/// [`generate_licorice`] that also returns where each cylinder was placed.
pub fn generate_licorice_with_geometry(spec: &LicoriceSpec) -> Result<(LabeledDataset, Vec<Cylinder>)> {
    let LicoriceSpec {
        cylinders,
        inside_per_cylinder,
        outside_per_cylinder,
        radius,
        length,
        seed,
    } = *spec;
    if cylinders == 0 || inside_per_cylinder == 0 || outside_per_cylinder == 0 {
        return Err(LannError::InvalidArgument("licorice counts must be at least 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite() && length > 0.0 && length.is_finite()) {
        return Err(LannError::InvalidArgument(
            "licorice radius and length must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_gap = length + 8.0 * radius;
    let half_box = min_gap * (cylinders as f64).cbrt() * 1.5;
    let mut placed: Vec<Cylinder> = Vec::with_capacity(cylinders);
    while placed.len() < cylinders {
        let center = [
            rng.random_range(-half_box..half_box),
            rng.random_range(-half_box..half_box),
            rng.random_range(-half_box..half_box),
        ];
        let far_enough = placed.iter().all(|c| {
            let d = [
                c.center[0] - center[0],
                c.center[1] - center[1],
                c.center[2] - center[2],
            ];
            dot(&d, &d).sqrt() >= min_gap
        });
        if !far_enough {
            continue;
        }
        let axis = loop {
            let v: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            if dot(&v, &v) > 1e-12 {
                break unit(v);
            }
        };
        placed.push(Cylinder { center, axis });
    }

    let mut rows = Vec::with_capacity(cylinders * (inside_per_cylinder + outside_per_cylinder));
    let mut labels = Vec::with_capacity(rows.capacity());
    for cyl in &placed {
        let helper = if cyl.axis[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let e1 = unit(cross(&cyl.axis, &helper));
        let e2 = cross(&cyl.axis, &e1);
        let mut emit = |rng: &mut ChaCha8Rng, radial: f64, label: usize| {
            let t = rng.random_range(-0.5 * length..0.5 * length);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = angle.sin_cos();
            let row: Vec<f64> = (0..3)
                .map(|d| cyl.center[d] + t * cyl.axis[d] + radial * (c * e1[d] + s * e2[d]))
                .collect();
            rows.push(row);
            labels.push(label);
        };
        for _ in 0..inside_per_cylinder {
            // Uniform over the disk; the factor keeps rounding from reaching the boundary.
            let radial = radius * rng.random::<f64>().sqrt() * (1.0 - 1e-9);
            emit(&mut rng, radial, 1);
        }
        for _ in 0..outside_per_cylinder {
            let u: f64 = rng.random();
            let radial = (radius * radius * (1.0 + 3.0 * u)).sqrt();
            emit(&mut rng, radial, 0);
        }
    }
    let data = LabeledDataset::new(rows, labels, 2)?
        .with_feature_names(vec!["x".into(), "y".into(), "z".into()])?
        .with_class_names(vec!["outside".into(), "inside".into()])?;
    Ok((data, placed))
}
