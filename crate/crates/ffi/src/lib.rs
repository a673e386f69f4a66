//! C ABI over the datanexus core.
//!
//! Every function returns a [`DnStatus`]; on failure a message is available from
//! [`dn_last_error`] on the same thread. Strings handed out through `out`
//! parameters are owned by the caller and must be released with
//! [`dn_string_free`]. A [`DnLibrary`] is an opaque handle to a loaded artifact
//! directory and may be shared between threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use datanexus::analytics::{self, Vocabulary};
use datanexus::api::{record_detail, search_query_from_params, CitationFormat};
use datanexus::artifacts::{ArtifactDir, ServedCorpus};
use datanexus::linkstore::{classify_link_label, LinkLabel};
use datanexus::model::{normalize_identifier, CategoryFilter, IdScheme};
use datanexus::search::execute_query;
use datanexus::Error;

/// Result code of every `dn_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    MissingArtifact = 5,
    CorruptArtifact = 6,
    Io = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnLinkLabel {
    Used = 0,
    Mentioned = 1,
}

/// A loaded artifact directory.
pub struct DnLibrary {
    corpus: ServedCorpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MissingArtifact(_) => DnStatus::MissingArtifact,
            Error::CorruptArtifact { .. } => DnStatus::CorruptArtifact,
            Error::Io(_) | Error::SourceUnreadable { .. } => DnStatus::Io,
            _ => DnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            DnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(Some(message));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            DnStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(DnStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            DnStatus::InvalidUtf8,
            format!("`{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn library<'a>(lib: *const DnLibrary) -> Result<&'a DnLibrary, Failure> {
    lib.as_ref()
        .ok_or_else(|| Failure(DnStatus::NullArgument, "`lib` is null".into()))
}

unsafe fn hand_out(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(DnStatus::NullArgument, "`out` is null".into()));
    }
    let c = CString::new(value)
        .map_err(|_| Failure(DnStatus::Internal, "result contains a nul byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure(DnStatus::Internal, e.to_string()))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(DnStatus::InvalidArgument, message.into())
}

/// Loads the snapshot, links and index from `dir` into a new handle.
///
/// # Safety
/// `dir` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dn_library_open(dir: *const c_char, out: *mut *mut DnLibrary) -> DnStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(DnStatus::NullArgument, "`out` is null".into()));
        }
        *out = ptr::null_mut();
        let dir = text(dir, "dir")?;
        let corpus = ServedCorpus::load(&ArtifactDir::new(dir))?;
        *out = Box::into_raw(Box::new(DnLibrary { corpus }));
        Ok(())
    })
}

/// Releases a handle from [`dn_library_open`]. Null is ignored.
///
/// # Safety
/// `lib` must come from [`dn_library_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dn_library_free(lib: *mut DnLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Number of searchable records, or 0 for a null handle.
///
/// # Safety
/// `lib` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dn_library_record_count(lib: *const DnLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.corpus.records.len())
}

/// Runs a search. `request_json` is an object with `q` and optional `type`,
/// `from`, `size` and facet arrays `year`, `source`, `language`. The result is
/// the same JSON the HTTP search endpoint returns.
///
/// # Safety
/// `lib` must be a live handle, `request_json` nul-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_search(
    lib: *const DnLibrary,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let lib = library(lib)?;
        let request: serde_json::Value = serde_json::from_str(text(request_json, "request_json")?)
            .map_err(|e| invalid(e.to_string()))?;
        let object = request
            .as_object()
            .ok_or_else(|| invalid("request must be a JSON object"))?;
        let mut params = Vec::new();
        for (key, value) in object {
            let values = match value {
                serde_json::Value::Array(items) => items.clone(),
                other => vec![other.clone()],
            };
            for v in values {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => return Err(invalid(format!("`{key}`: unsupported value {other}"))),
                };
                params.push((key.clone(), v));
            }
        }
        let query = search_query_from_params(&params).map_err(|e| invalid(e.message))?;
        let result = execute_query(&lib.corpus.index, &lib.corpus.records, &query)?;
        hand_out(out, json(&result)?)
    })
}

/// Writes the record detail (record plus link counts) as JSON. Merged-away ids
/// resolve to their surviving record.
///
/// # Safety
/// `lib` must be a live handle, `id` nul-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_record(
    lib: *const DnLibrary,
    id: *const c_char,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let lib = library(lib)?;
        let id = text(id, "id")?;
        let record = lib
            .corpus
            .get(id)
            .ok_or_else(|| Failure(DnStatus::NotFound, format!("unknown record `{id}`")))?;
        hand_out(out, json(&record_detail(&lib.corpus, record))?)
    })
}

/// Writes the linked entries of a record as a JSON array. `category` may be
/// null or `"all"` for every category.
///
/// # Safety
/// `lib` must be a live handle, `id` nul-terminated, `category` null or
/// nul-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_record_links(
    lib: *const DnLibrary,
    id: *const c_char,
    category: *const c_char,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let lib = library(lib)?;
        let id = text(id, "id")?;
        let filter: CategoryFilter = if category.is_null() {
            CategoryFilter::All
        } else {
            text(category, "category")?.parse()?
        };
        let record = lib
            .corpus
            .get(id)
            .ok_or_else(|| Failure(DnStatus::NotFound, format!("unknown record `{id}`")))?;
        let entries: Vec<_> = lib
            .corpus
            .link_index
            .summary(&record.id)
            .map(|s| {
                s.entries
                    .iter()
                    .filter(|e| filter.admits(e.category))
                    .collect()
            })
            .unwrap_or_default();
        hand_out(out, json(&entries)?)
    })
}

/// Renders a citation; `format` is `bibtex`, `ris`, `endnote` or `apa_text`.
///
/// # Safety
/// `lib` must be a live handle, `id` and `format` nul-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_citation(
    lib: *const DnLibrary,
    id: *const c_char,
    format: *const c_char,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let lib = library(lib)?;
        let id = text(id, "id")?;
        let format: CitationFormat = text(format, "format")?.parse().map_err(invalid)?;
        let record = lib
            .corpus
            .get(id)
            .ok_or_else(|| Failure(DnStatus::NotFound, format!("unknown record `{id}`")))?;
        hand_out(out, datanexus::api::render_citation(record, format))
    })
}

/// Labels a link confidence: exactly 1 is `Used`, anything else in [0, 1] is
/// `Mentioned`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dn_classify_link_label(
    confidence: f64,
    out: *mut DnLinkLabel,
) -> DnStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure(DnStatus::NullArgument, "`out` is null".into()));
        }
        *out = match classify_link_label(confidence)? {
            LinkLabel::Used => DnLinkLabel::Used,
            LinkLabel::Mentioned => DnLinkLabel::Mentioned,
        };
        Ok(())
    })
}

/// Normalizes an identifier; `scheme` is `doi`, `dara`, `urn` or `isbn`.
///
/// # Safety
/// `scheme` and `raw` must be nul-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_normalize_identifier(
    scheme: *const c_char,
    raw: *const c_char,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let scheme: IdScheme = text(scheme, "scheme")?.parse()?;
        hand_out(out, normalize_identifier(scheme, text(raw, "raw")?)?)
    })
}

/// Computes the usage report over one JSONL event log and writes it as JSON.
/// `timeout_minutes` splits sessions; `path_depth` bounds the path analysis.
///
/// # Safety
/// `log_path` must be nul-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn dn_analyze_logs(
    log_path: *const c_char,
    timeout_minutes: u32,
    path_depth: u32,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let path = PathBuf::from(text(log_path, "log_path")?);
        if timeout_minutes == 0 || path_depth == 0 {
            return Err(invalid("timeout and path depth must be at least 1"));
        }
        let report = analytics::analyze_files(
            &[path],
            &Vocabulary::default(),
            chrono::Duration::minutes(i64::from(timeout_minutes)),
            path_depth as usize,
        )?;
        hand_out(out, json(&report)?)
    })
}

/// Frees a string returned through an `out` parameter. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next `dn_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
