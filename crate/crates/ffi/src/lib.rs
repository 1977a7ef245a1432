//! C ABI over `serp-intent`.
//!
//! Every fallible call returns an [`SiStatus`]; on failure the message is
//! available from [`si_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Strings returned to
//! the caller are released with [`si_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serp_intent::clustering::{kmeans_fit, KMeansConfig, KMeansModel};
use serp_intent::evaluate::{precision_recall, ConfusionMatrix};
use serp_intent::features::{default_spec, extract_features};
use serp_intent::parser::{detect_captcha, parse_html, ParseError, SelectorConfig};
use serp_intent::schema::{deserialize_document, serialize_document, ClusterIntent};
use serp_intent::tagger::{tag_query, CountMode, IntentLexicon};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    CaptchaDetected = 4,
    ParseFailed = 5,
    BufferTooSmall = 6,
    Panic = 99,
}

/// Intent labels in report order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiIntent {
    Informational = 0,
    LocalPlace = 1,
    SexualRacism = 2,
}

impl From<ClusterIntent> for SiIntent {
    fn from(i: ClusterIntent) -> Self {
        match i {
            ClusterIntent::Informational => SiIntent::Informational,
            ClusterIntent::LocalPlace => SiIntent::LocalPlace,
            ClusterIntent::SexualRacism => SiIntent::SexualRacism,
        }
    }
}

pub struct SiSelectorConfig(SelectorConfig);

pub struct SiLexicon(IntentLexicon);

pub struct SiModel(KMeansModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: SiStatus, msg: impl Into<String>) -> SiStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`SiStatus::Panic`].
fn guard(f: impl FnOnce() -> SiStatus) -> SiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(SiStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, SiStatus> {
    if p.is_null() {
        return Err(fail(SiStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SiStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SiStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn si_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn si_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn si_selector_config_default(out: *mut *mut SiSelectorConfig) -> SiStatus {
    non_null!(out);
    guard(|| {
        *out = Box::into_raw(Box::new(SiSelectorConfig(SelectorConfig::default())));
        SiStatus::Ok
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn si_selector_config_from_json(
    json: *const c_char,
    out: *mut *mut SiSelectorConfig,
) -> SiStatus {
    non_null!(out);
    guard(|| {
        let json = try_ffi!(str_arg(json, "json"));
        match SelectorConfig::from_json(json) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(SiSelectorConfig(c)));
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must come from a `si_selector_config_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn si_selector_config_free(config: *mut SiSelectorConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Parses a results page into canonical JSON written to `*out_json`.
///
/// # Safety
/// `config` must be a live handle; string arguments NUL-terminated;
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn si_parse_html(
    config: *const SiSelectorConfig,
    html: *const c_char,
    query: *const c_char,
    fetched_at: *const c_char,
    out_json: *mut *mut c_char,
) -> SiStatus {
    non_null!(config, out_json);
    guard(|| {
        let html = try_ffi!(str_arg(html, "html"));
        let query = try_ffi!(str_arg(query, "query"));
        let fetched_at = try_ffi!(str_arg(fetched_at, "fetched_at"));
        match parse_html(html, query, &(*config).0, fetched_at) {
            Ok((doc, _)) => {
                *out_json = into_c_string(serialize_document(&doc));
                SiStatus::Ok
            }
            Err(ParseError::CaptchaDetected) => fail(SiStatus::CaptchaDetected, "captcha page"),
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must be a live handle; `html` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn si_detect_captcha(
    config: *const SiSelectorConfig,
    html: *const c_char,
    out: *mut bool,
) -> SiStatus {
    non_null!(config, out);
    guard(|| {
        let html = try_ffi!(str_arg(html, "html"));
        *out = detect_captcha(html, &(*config).0);
        SiStatus::Ok
    })
}

/// Length of the default feature vector.
#[no_mangle]
pub extern "C" fn si_feature_count() -> usize {
    default_spec().len()
}

/// Default feature vector of a canonical document into `out[0..cap]`.
///
/// # Safety
/// `doc_json` must be NUL-terminated; `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn si_extract_features(doc_json: *const c_char, out: *mut f64, cap: usize) -> SiStatus {
    non_null!(out);
    guard(|| {
        let json = try_ffi!(str_arg(doc_json, "doc_json"));
        let spec = default_spec();
        if cap < spec.len() {
            return fail(SiStatus::BufferTooSmall, format!("need {} values, got room for {cap}", spec.len()));
        }
        let doc = match deserialize_document(json) {
            Ok(d) => d,
            Err(e) => return fail(SiStatus::ParseFailed, e.to_string()),
        };
        match extract_features(&doc, &spec) {
            Ok(v) => {
                ptr::copy_nonoverlapping(v.values.as_ptr(), out, v.values.len());
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn si_lexicon_from_json(json: *const c_char, out: *mut *mut SiLexicon) -> SiStatus {
    non_null!(out);
    guard(|| {
        let json = try_ffi!(str_arg(json, "json"));
        match IntentLexicon::from_json(json) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(SiLexicon(l)));
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::ParseFailed, e.to_string()),
        }
    })
}

/// # Safety
/// `lexicon` must come from [`si_lexicon_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn si_lexicon_free(lexicon: *mut SiLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Tags one query with the default stopwords. `out_counts` may be null;
/// otherwise it receives three hit counts in [`SiIntent`] order.
///
/// # Safety
/// `lexicon` must be live; `query` NUL-terminated; `out_intent` valid;
/// `out_counts` null or room for 3 values.
#[no_mangle]
pub unsafe extern "C" fn si_tag_query(
    lexicon: *const SiLexicon,
    query: *const c_char,
    count_distinct: bool,
    out_intent: *mut SiIntent,
    out_counts: *mut usize,
) -> SiStatus {
    non_null!(lexicon, out_intent);
    guard(|| {
        let query = try_ffi!(str_arg(query, "query"));
        let mode = if count_distinct { CountMode::Set } else { CountMode::Multiplicity };
        let stop = serp_intent::characterize::WordList::default_stopwords();
        match tag_query(query, &(*lexicon).0, &stop, mode) {
            Ok(t) => {
                *out_intent = t.intent.into();
                if !out_counts.is_null() {
                    ptr::copy_nonoverlapping(t.counts.as_ptr(), out_counts, 3);
                }
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Fits KMeans on a row-major `rows x cols` matrix.
///
/// # Safety
/// `data` must hold `rows * cols` doubles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn si_kmeans_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    k: usize,
    seed: u64,
    n_init: usize,
    out: *mut *mut SiModel,
) -> SiStatus {
    non_null!(data, out);
    guard(|| {
        if cols == 0 {
            return fail(SiStatus::InvalidArgument, "cols must be > 0");
        }
        let flat = std::slice::from_raw_parts(data, rows * cols);
        let matrix: Vec<Vec<f64>> = flat.chunks(cols).map(<[f64]>::to_vec).collect();
        let config = KMeansConfig { k, seed, n_init, ..KMeansConfig::default() };
        match kmeans_fit(&matrix, &config) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(SiModel(m)));
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must come from [`si_kmeans_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn si_model_free(model: *mut SiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn si_model_wcss(model: *const SiModel, out: *mut f64) -> SiStatus {
    non_null!(model, out);
    *out = (*model).0.wcss;
    SiStatus::Ok
}

/// Training-row cluster ids into `out[0..cap]`.
///
/// # Safety
/// `model` must be live; `out` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn si_model_assignments(model: *const SiModel, out: *mut usize, cap: usize) -> SiStatus {
    non_null!(model, out);
    let a = &(*model).0.assignments;
    if cap < a.len() {
        return fail(SiStatus::BufferTooSmall, format!("need {} slots, got {cap}", a.len()));
    }
    ptr::copy_nonoverlapping(a.as_ptr(), out, a.len());
    SiStatus::Ok
}

/// Nearest centroid for one row of `cols` values.
///
/// # Safety
/// `model` must be live; `row` must hold `cols` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn si_model_predict(
    model: *const SiModel,
    row: *const f64,
    cols: usize,
    out: *mut usize,
) -> SiStatus {
    non_null!(model, row, out);
    guard(|| {
        let m = &(*model).0;
        let d = m.centroids.first().map_or(0, Vec::len);
        if cols != d {
            return fail(SiStatus::InvalidArgument, format!("row has {cols} values, model expects {d}"));
        }
        *out = m.predict(std::slice::from_raw_parts(row, cols));
        SiStatus::Ok
    })
}

/// Per-class precision and recall of a row-major 3x3 confusion matrix
/// (rows actual, columns predicted, [`SiIntent`] order).
///
/// # Safety
/// `cells` must hold 9 values; `out_precision` and `out_recall` 3 each.
#[no_mangle]
pub unsafe extern "C" fn si_precision_recall(
    cells: *const u64,
    out_precision: *mut f64,
    out_recall: *mut f64,
) -> SiStatus {
    non_null!(cells, out_precision, out_recall);
    guard(|| {
        let c = std::slice::from_raw_parts(cells, 9);
        let cm = ConfusionMatrix::from_cells([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]);
        match precision_recall(&cm) {
            Ok(m) => {
                for (i, intent) in ClusterIntent::ALL.into_iter().enumerate() {
                    *out_precision.add(i) = m.get(intent).precision;
                    *out_recall.add(i) = m.get(intent).recall;
                }
                SiStatus::Ok
            }
            Err(e) => fail(SiStatus::InvalidArgument, e.to_string()),
        }
    })
}
