//! C interface to `lann`.
//!
//! Datasets and models are opaque handles created by `lann_*` constructors
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`LannStatus`]; on failure, [`lann_last_error_message`] describes
//! the most recent error on the calling thread. Output arrays are allocated by
//! the caller with the documented length.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use lann::{Algorithm, Hyperparams, LabelColumn, LabeledDataset, LannError, Symmetrize};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LannStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDimension = 3,
    InsufficientPoints = 4,
    DegenerateMetric = 5,
    InvalidDataset = 6,
    Io = 7,
    Parse = 8,
    ModelFormat = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LannAlgorithm {
    Lann = 0,
    Knn = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LannSymmetrize {
    Mean = 0,
    Min = 1,
    None = 2,
}

/// Training and inference settings, mirrored from the Rust side.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LannHyperparams {
    pub k: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl From<LannHyperparams> for Hyperparams {
    fn from(h: LannHyperparams) -> Self {
        Hyperparams {
            k: h.k,
            beta: h.beta,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            epsilon: h.epsilon,
            seed: h.seed,
        }
    }
}

impl From<Hyperparams> for LannHyperparams {
    fn from(h: Hyperparams) -> Self {
        LannHyperparams {
            k: h.k,
            beta: h.beta,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            epsilon: h.epsilon,
            seed: h.seed,
        }
    }
}

/// Opaque labeled dataset.
pub struct LannDataset(LabeledDataset);

/// Opaque trained model.
pub struct LannModel(lann::LannModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lann_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

struct Failure(LannStatus, String);

impl From<LannError> for Failure {
    fn from(e: LannError) -> Self {
        let status = match &e {
            LannError::InvalidDimension { .. } => LannStatus::InvalidDimension,
            LannError::DegenerateMetric => LannStatus::DegenerateMetric,
            LannError::InsufficientPoints { .. } => LannStatus::InsufficientPoints,
            LannError::InvalidDataset(_) | LannError::ClassTooSmall { .. } => LannStatus::InvalidDataset,
            LannError::InvalidHyperparams(_) | LannError::InvalidArgument(_) => LannStatus::InvalidArgument,
            LannError::Io { .. } => LannStatus::Io,
            LannError::Parse { .. } => LannStatus::Parse,
            LannError::ModelFormat(_) => LannStatus::ModelFormat,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LannStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LannStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LannStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LannStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(LannStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

#[no_mangle]
pub extern "C" fn lann_hyperparams_default() -> LannHyperparams {
    Hyperparams::default().into()
}

/// Builds a dataset from `m * n` row-major points and `m` labels in
/// `0..n_classes`.
#[no_mangle]
pub unsafe extern "C" fn lann_dataset_from_arrays(
    points: *const f64,
    m: usize,
    n: usize,
    labels: *const usize,
    n_classes: usize,
    out: *mut *mut LannDataset,
) -> LannStatus {
    guard(|| {
        let points = unsafe { input(points, m * n, "points") }?.to_vec();
        if labels.is_null() {
            return Err(null("labels"));
        }
        let labels = unsafe { slice::from_raw_parts(labels, m) }.to_vec();
        let data = LabeledDataset::from_flat(points, n, labels, n_classes)?;
        unsafe { write_out(out, LannDataset(data)) }
    })
}

/// Reads a CSV file with a header row; the last column holds the labels.
#[no_mangle]
pub unsafe extern "C" fn lann_dataset_load_csv(path: *const c_char, out: *mut *mut LannDataset) -> LannStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        let data = lann::load_csv(path, &LabelColumn::Last)?;
        unsafe { write_out(out, LannDataset(data)) }
    })
}

#[no_mangle]
pub unsafe extern "C" fn lann_dataset_free(dataset: *mut LannDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Number of points, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn lann_dataset_len(dataset: *const LannDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn lann_dataset_dim(dataset: *const LannDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn lann_dataset_n_classes(dataset: *const LannDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.0.n_classes())
}

/// Z-scores the dataset, trains the local metrics and returns the model.
/// `final_loss` may be NULL; it receives the last epoch's mean loss, or NaN
/// when `epochs` is 0.
#[no_mangle]
pub unsafe extern "C" fn lann_fit(
    dataset: *const LannDataset,
    hyper: *const LannHyperparams,
    out: *mut *mut LannModel,
    final_loss: *mut f64,
) -> LannStatus {
    guard(|| {
        let data = unsafe { as_ref(dataset, "dataset") }?;
        let hyper: Hyperparams = (*unsafe { as_ref(hyper, "hyperparameters") }?).into();
        let (model, report) = lann::fit(&data.0, &hyper)?;
        if !final_loss.is_null() {
            unsafe { *final_loss = report.final_loss().unwrap_or(f64::NAN) };
        }
        unsafe { write_out(out, LannModel(model)) }
    })
}

#[no_mangle]
pub unsafe extern "C" fn lann_model_free(model: *mut LannModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn lann_model_save(model: *const LannModel, path: *const c_char) -> LannStatus {
    guard(|| {
        let model = unsafe { as_ref(model, "model") }?;
        let path = unsafe { path_arg(path) }?;
        Ok(lann::save_model(&model.0, path)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn lann_model_load(path: *const c_char, out: *mut *mut LannModel) -> LannStatus {
    guard(|| {
        let path = unsafe { path_arg(path) }?;
        let model = lann::load_model(path)?;
        unsafe { write_out(out, LannModel(model)) }
    })
}

/// Number of training points, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn lann_model_len(model: *const LannModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.dataset().len())
}

#[no_mangle]
pub unsafe extern "C" fn lann_model_dim(model: *const LannModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn lann_model_n_classes(model: *const LannModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.n_classes())
}

/// Classifies a raw query of length `dim`. `probabilities` may be NULL or
/// point to `n_classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn lann_predict(
    model: *const LannModel,
    query: *const f64,
    dim: usize,
    label: *mut usize,
    probabilities: *mut f64,
) -> LannStatus {
    guard(|| {
        let model = unsafe { as_ref(model, "model") }?;
        let query = unsafe { input(query, dim, "query") }?;
        let prediction = model.0.predict(query)?;
        if label.is_null() {
            return Err(null("label"));
        }
        unsafe { *label = prediction.label };
        if !probabilities.is_null() {
            let out = unsafe { output(probabilities, model.0.n_classes(), "probabilities") }?;
            out.copy_from_slice(prediction.probabilities.values());
        }
        Ok(())
    })
}

/// Writes the `dim` feature relevances behind the prediction for `query`.
#[no_mangle]
pub unsafe extern "C" fn lann_explain(
    model: *const LannModel,
    query: *const f64,
    dim: usize,
    relevances: *mut f64,
) -> LannStatus {
    guard(|| {
        let model = unsafe { as_ref(model, "model") }?;
        let query = unsafe { input(query, dim, "query") }?;
        let profile = model.0.explain(query)?;
        let out = unsafe { output(relevances, model.0.dim(), "relevances") }?;
        out.copy_from_slice(profile.relevances());
        Ok(())
    })
}

/// Writes the `len * len` row-major distance matrix between the training
/// points, where `len` is `lann_model_len(model)`.
#[no_mangle]
pub unsafe extern "C" fn lann_distance_matrix(
    model: *const LannModel,
    mode: LannSymmetrize,
    matrix: *mut f64,
) -> LannStatus {
    guard(|| {
        let model = unsafe { as_ref(model, "model") }?;
        let mode = match mode {
            LannSymmetrize::Mean => Symmetrize::Mean,
            LannSymmetrize::Min => Symmetrize::Min,
            LannSymmetrize::None => Symmetrize::None,
        };
        let m = model.0.dataset().len();
        let out = unsafe { output(matrix, m * m, "matrix") }?;
        out.copy_from_slice(lann::export_distance_matrix(&model.0, mode).values());
        Ok(())
    })
}

/// Stratified `folds`-fold cross-validation. `accuracies` receives one value
/// per fold; `mean` and `std` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lann_cross_validate(
    dataset: *const LannDataset,
    hyper: *const LannHyperparams,
    algorithm: LannAlgorithm,
    folds: usize,
    seed: u64,
    accuracies: *mut f64,
    mean: *mut f64,
    std: *mut f64,
) -> LannStatus {
    guard(|| {
        let data = unsafe { as_ref(dataset, "dataset") }?;
        let hyper: Hyperparams = (*unsafe { as_ref(hyper, "hyperparameters") }?).into();
        let algorithm = match algorithm {
            LannAlgorithm::Lann => Algorithm::Lann,
            LannAlgorithm::Knn => Algorithm::Knn,
        };
        let out = unsafe { output(accuracies, folds, "accuracies") }?;
        let result = lann::cross_validate(&data.0, "ffi", algorithm, &hyper, folds, seed)?;
        out.copy_from_slice(&result.fold_accuracies);
        if !mean.is_null() {
            unsafe { *mean = result.mean };
        }
        if !std.is_null() {
            unsafe { *std = result.std };
        }
        Ok(())
    })
}
