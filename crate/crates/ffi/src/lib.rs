//! C ABI for the assortify library.
//!
//! Objects are opaque handles created by `*_fit` / `*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AssortifyStatus`]; on failure a description is available from
//! [`assortify_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use assortify::compatibility::{self, CompatibilityMetric, MetricMode};
use assortify::eval::{ClickSession, SessionIndex};
use assortify::topicmodel::{self, PolyTopicModel};
use assortify::{io, pipeline, Error};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssortifyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Schema = 4,
    DimensionMismatch = 5,
    Numeric = 6,
    Panic = 7,
    Other = 8,
}

/// Metric mode selector for [`assortify_metric_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssortifyMetricMode {
    InverseCovariance = 0,
    Covariance = 1,
    Identity = 2,
}

impl From<AssortifyMetricMode> for MetricMode {
    fn from(m: AssortifyMetricMode) -> Self {
        match m {
            AssortifyMetricMode::InverseCovariance => MetricMode::InverseCovariance,
            AssortifyMetricMode::Covariance => MetricMode::Covariance,
            AssortifyMetricMode::Identity => MetricMode::Identity,
        }
    }
}

/// Fitted compatibility metric.
pub struct AssortifyMetric(CompatibilityMetric);

/// Trained topic model loaded from a model directory.
pub struct AssortifyModel(PolyTopicModel);

/// Click sessions indexed for Jaccard queries.
pub struct AssortifySessions(SessionIndex);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AssortifyStatus {
    match err {
        Error::Io { .. } | Error::Locked(_) => AssortifyStatus::Io,
        Error::Schema { .. } => AssortifyStatus::Schema,
        Error::DimensionMismatch { .. } => AssortifyStatus::DimensionMismatch,
        Error::SingularCovariance | Error::NotPositiveSemidefinite(_) | Error::ZeroVector => AssortifyStatus::Numeric,
        Error::InvalidParameter { .. } | Error::Config(_) | Error::EmptyInput(_) | Error::UnknownProduct(_) => {
            AssortifyStatus::InvalidArgument
        }
        _ => AssortifyStatus::Other,
    }
}

struct Failure(AssortifyStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AssortifyStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AssortifyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AssortifyStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            AssortifyStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AssortifyStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Last error message on this thread, or null if none. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn assortify_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn assortify_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fits a metric from `n` row-major vectors of length `dim`.
///
/// # Safety
/// `vectors` must point to `n * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_metric_fit(
    vectors: *const f64,
    n: usize,
    dim: usize,
    mode: AssortifyMetricMode,
    lambda: f64,
    out: *mut *mut AssortifyMetric,
) -> AssortifyStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Failure(AssortifyStatus::InvalidArgument, "n * dim overflows".into()))?;
        let data = slice_arg(vectors, len, "vectors")?;
        let rows: Vec<Vec<f64>> = if dim == 0 { Vec::new() } else { data.chunks(dim).map(<[f64]>::to_vec).collect() };
        let metric = compatibility::fit_metric(&rows, dim, mode.into(), lambda)?;
        *out = Box::into_raw(Box::new(AssortifyMetric(metric)));
        Ok(())
    })
}

/// Loads `metric.json`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_metric_load(path: *const c_char, out: *mut *mut AssortifyMetric) -> AssortifyStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let metric: CompatibilityMetric = io::read_json(Path::new(path))?;
        *out = Box::into_raw(Box::new(AssortifyMetric(metric)));
        Ok(())
    })
}

/// # Safety
/// `metric` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_metric_dim(metric: *const AssortifyMetric, out: *mut usize) -> AssortifyStatus {
    guard(|| {
        let m = metric.as_ref().ok_or_else(|| null("metric"))?;
        *out_arg(out, "out")? = m.0.dim();
        Ok(())
    })
}

/// `(x − y) M (x − y)ᵀ` for two vectors of length `len`.
///
/// # Safety
/// `x` and `y` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_metric_distance(
    metric: *const AssortifyMetric,
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> AssortifyStatus {
    guard(|| {
        let m = metric.as_ref().ok_or_else(|| null("metric"))?;
        let x = slice_arg(x, len, "x")?;
        let y = slice_arg(y, len, "y")?;
        *out_arg(out, "out")? = m.0.distance(x, y)?;
        Ok(())
    })
}

/// # Safety
/// `metric` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn assortify_metric_free(metric: *mut AssortifyMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Loads a model directory written by `assortify train`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_model_load(dir: *const c_char, out: *mut *mut AssortifyModel) -> AssortifyStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let dir = str_arg(dir, "dir")?;
        let (model, _) = pipeline::read_model(Path::new(dir))?;
        *out = Box::into_raw(Box::new(AssortifyModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_model_num_topics(model: *const AssortifyModel, out: *mut usize) -> AssortifyStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out_arg(out, "out")? = m.0.num_topics;
        Ok(())
    })
}

/// Fold-in θ for a product given its visual word ids and text word ids.
/// Either list may be empty; a modality the model was not trained on must
/// be empty. Writes `num_topics` values to `theta_out`.
///
/// # Safety
/// Arrays must hold the stated number of elements; `theta_out` must hold
/// `theta_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn assortify_model_infer_theta(
    model: *const AssortifyModel,
    visual: *const u32,
    n_visual: usize,
    text: *const u32,
    n_text: usize,
    sweeps: usize,
    seed: u64,
    theta_out: *mut f64,
    theta_len: usize,
) -> AssortifyStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let visual = slice_arg(visual, n_visual, "visual")?;
        let text = slice_arg(text, n_text, "text")?;
        if theta_len != m.num_topics {
            return Err(Error::DimensionMismatch {
                expected: m.num_topics,
                actual: theta_len,
            }
            .into());
        }
        if theta_out.is_null() {
            return Err(null("theta_out"));
        }
        let mut languages = vec![Vec::new(); m.num_languages()];
        for (name, words) in [("visual", visual), ("text", text)] {
            match m.language_index(name) {
                Some(l) => languages[l] = words.to_vec(),
                None if words.is_empty() => {}
                None => {
                    return Err(Failure(
                        AssortifyStatus::InvalidArgument,
                        format!("model has no `{name}` language"),
                    ))
                }
            }
        }
        let theta = topicmodel::infer_theta(m, &languages, sweeps, seed);
        std::slice::from_raw_parts_mut(theta_out, theta_len).copy_from_slice(&theta);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn assortify_model_free(model: *mut AssortifyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads click sessions from a `sessions.jsonl` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_sessions_load(path: *const c_char, out: *mut *mut AssortifySessions) -> AssortifyStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let sessions: Vec<ClickSession> = io::read_jsonl(Path::new(path))?;
        *out = Box::into_raw(Box::new(AssortifySessions(SessionIndex::new(&sessions))));
        Ok(())
    })
}

/// Co-click Jaccard of two product ids; 0 when neither was ever clicked.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn assortify_sessions_jaccard(
    sessions: *const AssortifySessions,
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> AssortifyStatus {
    guard(|| {
        let s = sessions.as_ref().ok_or_else(|| null("sessions"))?;
        let a = str_arg(a, "a")?;
        let b = str_arg(b, "b")?;
        *out_arg(out, "out")? = s.0.jaccard(a, b);
        Ok(())
    })
}

/// # Safety
/// `sessions` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn assortify_sessions_free(sessions: *mut AssortifySessions) {
    if !sessions.is_null() {
        drop(Box::from_raw(sessions));
    }
}
