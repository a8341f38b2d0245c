//! C ABI over the dialsum library.
//!
//! Datasets are exposed as an opaque [`DialsumDataset`] handle. Every
//! function returns a [`DialsumStatus`]; on failure a message describing the
//! error can be fetched with [`dialsum_last_error`] from the same thread.
//! Strings handed out by the library must be released with
//! [`dialsum_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dialsum::corpus::{load_dataset, DatasetFormat, Dialog, Utterance};
use dialsum::heuristics::Heuristic;
use dialsum::metrics::{evaluate, score_pair, RougeConfig};
use dialsum::segment::render_numbered;
use dialsum::DatasetSplit;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialsumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Panic = 5,
}

/// A loaded train/validation/test dataset.
pub struct DialsumDataset {
    inner: DatasetSplit,
}

/// Corpus-level ROUGE F1 values in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DialsumRouge {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    /// Number of scored instances.
    pub n: usize,
}

/// Dataset splits, for [`dialsum_baseline`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialsumSplit {
    Train = 0,
    Validation = 1,
    Test = 2,
}

/// Extractive baselines, for [`dialsum_baseline`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialsumMethod {
    Lead1 = 0,
    Lead2 = 1,
    Long1 = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
    Ok(v) => v,
    Err(_) => panic!("version string is not nul-terminated"),
};

struct Failure(DialsumStatus, String);

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure(DialsumStatus::InvalidArgument, message.into())
    }
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn guard<F>(f: F) -> DialsumStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DialsumStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {message}"));
            DialsumStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure(DialsumStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| Failure(DialsumStatus::InvalidUtf8, format!("{what} is not valid UTF-8: {e}")))
}

fn null_check<T>(ptr: *const T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        Err(Failure(DialsumStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static nul-terminated string. Never free it.
#[no_mangle]
pub extern "C" fn dialsum_version() -> *const c_char {
    VERSION.as_ptr()
}

/// Message for the last failed call on this thread, or NULL if the last
/// call succeeded. The pointer stays valid until the next library call on
/// the same thread.
#[no_mangle]
pub extern "C" fn dialsum_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a dialsum function that documents an owned string
/// result, and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn dialsum_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a dataset. `format` is `"canonical-jsonl"` or `"tweetsumm-import"`.
/// On success `*out` receives a handle to release with
/// [`dialsum_dataset_free`].
///
/// # Safety
/// `path` and `format` must be nul-terminated strings and `out` a writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn dialsum_dataset_load(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut DialsumDataset,
) -> DialsumStatus {
    guard(|| {
        null_check(out, "out")?;
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let format: DatasetFormat =
            read_str(format, "format")?.parse().map_err(|e| Failure::invalid(format!("{e}")))?;
        let inner = load_dataset(Path::new(path), format).map_err(|e| Failure(DialsumStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(DialsumDataset { inner }));
        Ok(())
    })
}

/// Releases a dataset handle. NULL is ignored.
///
/// # Safety
/// `dataset` must come from [`dialsum_dataset_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dialsum_dataset_free(dataset: *mut DialsumDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Writes the number of examples in each split.
///
/// # Safety
/// `dataset` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dialsum_dataset_split_sizes(
    dataset: *const DialsumDataset,
    train: *mut usize,
    validation: *mut usize,
    test: *mut usize,
) -> DialsumStatus {
    guard(|| {
        null_check(dataset, "dataset")?;
        null_check(train, "train")?;
        null_check(validation, "validation")?;
        null_check(test, "test")?;
        let (a, b, c) = (*dataset).inner.sizes();
        *train = a;
        *validation = b;
        *test = c;
        Ok(())
    })
}

/// Scores a baseline on one split against all references.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dialsum_baseline(
    dataset: *const DialsumDataset,
    method: DialsumMethod,
    split: DialsumSplit,
    token_limit: usize,
    stem: bool,
    out: *mut DialsumRouge,
) -> DialsumStatus {
    guard(|| {
        null_check(dataset, "dataset")?;
        null_check(out, "out")?;
        let data = &(*dataset).inner;
        let examples = match split {
            DialsumSplit::Train => &data.train,
            DialsumSplit::Validation => &data.validation,
            DialsumSplit::Test => &data.test,
        };
        let heuristic = match method {
            DialsumMethod::Lead1 => Heuristic::Lead1,
            DialsumMethod::Lead2 => Heuristic::Lead2,
            DialsumMethod::Long1 => Heuristic::Long1,
        };
        let predictions: Vec<_> = examples.iter().map(|e| heuristic.apply(&e.dialog)).collect();
        let references: Vec<_> = examples.iter().map(|e| e.references.clone()).collect();
        let report = evaluate(&predictions, &references, token_limit, RougeConfig { stem })
            .map_err(|e| Failure::invalid(e.to_string()))?;
        *out = DialsumRouge { rouge1: report.rouge1, rouge2: report.rouge2, rouge_l: report.rouge_l, n: report.n };
        Ok(())
    })
}

/// ROUGE F1 of one candidate against one reference. The candidate is
/// truncated to `token_limit` tokens.
///
/// # Safety
/// `candidate` and `reference` must be nul-terminated strings and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dialsum_rouge(
    candidate: *const c_char,
    reference: *const c_char,
    token_limit: usize,
    stem: bool,
    out: *mut DialsumRouge,
) -> DialsumStatus {
    guard(|| {
        null_check(out, "out")?;
        let candidate = read_str(candidate, "candidate")?;
        let reference = read_str(reference, "reference")?;
        if token_limit == 0 {
            return Err(Failure::invalid("token limit must be positive"));
        }
        let s = score_pair(candidate, reference, token_limit, RougeConfig { stem });
        *out = DialsumRouge { rouge1: s.rouge1.f1, rouge2: s.rouge2.f1, rouge_l: s.rouge_l.f1, n: 1 };
        Ok(())
    })
}

/// Segments a dialog and renders its numbered sentence listing.
///
/// `turns_json` is a JSON array of `{"speaker": "customer"|"agent", "text": ...}`.
/// On success `*out` receives an owned string to release with
/// [`dialsum_string_free`].
///
/// # Safety
/// `turns_json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dialsum_render_numbered(turns_json: *const c_char, out: *mut *mut c_char) -> DialsumStatus {
    guard(|| {
        null_check(out, "out")?;
        *out = ptr::null_mut();
        let json = read_str(turns_json, "turns_json")?;
        let turns: Vec<Utterance> =
            serde_json::from_str(json).map_err(|e| Failure::invalid(format!("bad turns: {e}")))?;
        let dialog = Dialog::new("ffi", turns).map_err(|e| Failure::invalid(e.to_string()))?;
        let text = CString::new(render_numbered(&dialog.sentences))
            .map_err(|_| Failure::invalid("dialog text contains a nul byte"))?;
        *out = text.into_raw();
        Ok(())
    })
}
