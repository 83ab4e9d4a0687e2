//! C ABI over the `dualneighbors` library.
//!
//! Every function returns a [`DnStatus`]; on failure a description is kept in
//! thread-local storage and can be read with [`dn_last_error`]. Strings handed
//! out by the library must be released with [`dn_string_free`], bundles with
//! [`dn_bundle_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use dualneighbors::bundle::{build_from_files, Bundle};
use dualneighbors::config::BuildConfig;
use dualneighbors::embedding::Mode;
use dualneighbors::graph::MetricsOptions;
use dualneighbors::service::{neighbors_body, search_body};
use dualneighbors::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    EmptyQuery = 4,
    InvalidArgument = 5,
    BufferTooSmall = 6,
    Io = 7,
    Parse = 8,
    Bundle = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnMode {
    Replacement = 0,
    Expansion = 1,
}

/// Which similarity produced a neighbor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnSource {
    Word = 0,
    Embedding = 1,
    Both = 2,
}

/// One entry of a dual neighbor list. Ranks are 1-based; 0 means the
/// document is absent from that list and the matching score is NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DnNeighbor {
    /// Corpus position of the neighbor.
    pub index: usize,
    pub source: DnSource,
    pub word_rank: u32,
    pub word_score: f64,
    pub embedding_rank: u32,
    pub embedding_score: f64,
}

/// Connectivity metrics of one recommendation graph. `dist` is NaN when no
/// pair of documents is connected.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DnMetrics {
    pub lambda2: f64,
    pub unconnected: f64,
    pub dist: f64,
    pub d90_in: usize,
    pub ego3_10: usize,
    pub sampled: bool,
}

/// Opaque handle to a loaded bundle.
pub struct DnBundle {
    inner: Bundle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &Error) -> DnStatus {
    match err {
        Error::UnknownDocument(_) => DnStatus::NotFound,
        Error::EmptyQuery(_) => DnStatus::EmptyQuery,
        Error::InvalidConfig(_)
        | Error::ExceedsCache { .. }
        | Error::CorpusTooSmall(_)
        | Error::EmptyLexicon
        | Error::DuplicateId(_)
        | Error::MissingEmbedding(_)
        | Error::DimensionMismatch { .. } => DnStatus::InvalidArgument,
        Error::MalformedRow { .. } | Error::EmbeddingParse { .. } | Error::Json(_) | Error::Csv(_) => DnStatus::Parse,
        Error::Io(_) => DnStatus::Io,
        Error::Bundle { .. } => DnStatus::Bundle,
        Error::MissingVector(_) => DnStatus::Internal,
    }
}

struct Failure(DnStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

/// Run `body`, translating errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            DnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DnStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(DnStatus::NullArgument, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DnStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn bundle_arg<'a>(p: *const DnBundle) -> Result<&'a Bundle, Failure> {
    p.as_ref().map(|b| &b.inner).ok_or_else(|| null("bundle"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    let s = CString::new(text).map_err(|_| Failure(DnStatus::Internal, "string contains NUL".into()))?;
    write_out(out, s.into_raw(), "out")
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn dn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a bundle from a key = value configuration file. `skipped` (may be
/// null) receives whether the bundle was already up to date.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `skipped` null or writable.
#[no_mangle]
pub unsafe extern "C" fn dn_build(config_path: *const c_char, force: bool, skipped: *mut bool) -> DnStatus {
    guard(|| {
        let path = str_arg(config_path, "config_path")?;
        let config = BuildConfig::from_file(Path::new(path))?;
        let summary = build_from_files(&config, force)?;
        if !skipped.is_null() {
            skipped.write(summary.skipped);
        }
        Ok(())
    })
}

/// Load a bundle directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_bundle_open(path: *const c_char, out: *mut *mut DnBundle) -> DnStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Bundle::load(Path::new(path))?;
        out.write(Box::into_raw(Box::new(DnBundle { inner })));
        Ok(())
    })
}

/// Release a bundle. Null is ignored.
///
/// # Safety
/// `bundle` must come from [`dn_bundle_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dn_bundle_free(bundle: *mut DnBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Number of documents.
///
/// # Safety
/// `bundle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_bundle_len(bundle: *const DnBundle, out: *mut usize) -> DnStatus {
    guard(|| write_out(out, bundle_arg(bundle)?.meta.n, "out"))
}

/// Id of the document at corpus position `index`.
///
/// # Safety
/// `bundle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_document_id(bundle: *const DnBundle, index: usize, out: *mut *mut c_char) -> DnStatus {
    guard(|| {
        let doc = bundle_arg(bundle)?
            .corpus
            .get(index)
            .ok_or_else(|| Failure(DnStatus::NotFound, format!("no document at position {index}")))?;
        write_string(out, doc.id.clone())
    })
}

/// Corpus position of the document `id`.
///
/// # Safety
/// `bundle` must be a live handle, `id` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_document_index(bundle: *const DnBundle, id: *const c_char, out: *mut usize) -> DnStatus {
    guard(|| {
        let pos = bundle_arg(bundle)?.position(str_arg(id, "id")?)?;
        write_out(out, pos, "out")
    })
}

/// Dual neighbors of `id` written into `out[0..capacity]`; `written`
/// receives the list length. When `capacity` is too small nothing is copied,
/// `written` holds the required length and `BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `bundle` must be a live handle, `id` NUL-terminated, `out` valid for
/// `capacity` elements (may be null when `capacity` is 0) and `written`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dn_neighbors(
    bundle: *const DnBundle,
    id: *const c_char,
    nw: usize,
    ne: usize,
    out: *mut DnNeighbor,
    capacity: usize,
    written: *mut usize,
) -> DnStatus {
    guard(|| {
        let bundle = bundle_arg(bundle)?;
        let list = bundle.neighbors(str_arg(id, "id")?, nw, ne)?;
        write_out(written, list.entries.len(), "written")?;
        if list.entries.len() > capacity {
            return Err(Failure(
                DnStatus::BufferTooSmall,
                format!("{} entries do not fit in {capacity}", list.entries.len()),
            ));
        }
        if list.entries.is_empty() {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        for (k, entry) in list.entries.iter().enumerate() {
            let (word_rank, word_score) = entry.word.map_or((0, f64::NAN), |r| (r.rank as u32, r.score));
            let (embedding_rank, embedding_score) = entry.embedding.map_or((0, f64::NAN), |r| (r.rank as u32, r.score));
            let source = match (entry.word.is_some(), entry.embedding.is_some()) {
                (true, true) => DnSource::Both,
                (true, false) => DnSource::Word,
                _ => DnSource::Embedding,
            };
            out.add(k).write(DnNeighbor {
                index: entry.doc,
                source,
                word_rank,
                word_score,
                embedding_rank,
                embedding_score,
            });
        }
        Ok(())
    })
}

/// Dual neighbors of `id` as the same JSON document the HTTP service returns.
///
/// # Safety
/// `bundle` must be a live handle, `id` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_neighbors_json(
    bundle: *const DnBundle,
    id: *const c_char,
    nw: usize,
    ne: usize,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let body = neighbors_body(bundle_arg(bundle)?, str_arg(id, "id")?, nw, ne)?;
        write_string(out, serde_json::to_string(&body).map_err(Error::from)?)
    })
}

/// Connectivity metrics of the (nw, ne) recommendation graph.
///
/// # Safety
/// `bundle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_metrics(
    bundle: *const DnBundle,
    nw: usize,
    ne: usize,
    mode: DnMode,
    out: *mut DnMetrics,
) -> DnStatus {
    guard(|| {
        let bundle = bundle_arg(bundle)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            DnMode::Replacement => Mode::Replacement,
            DnMode::Expansion => Mode::Expansion,
        };
        if nw + ne == 0 {
            return Err(Failure(DnStatus::InvalidArgument, "nw + ne must be at least 1".into()));
        }
        let r = bundle.metrics(nw, ne, mode, &MetricsOptions::default())?;
        out.write(DnMetrics {
            lambda2: r.lambda2,
            unconnected: r.unconnected,
            dist: r.dist.unwrap_or(f64::NAN),
            d90_in: r.d90_in,
            ego3_10: r.ego3_10,
            sampled: r.sampled,
        });
        Ok(())
    })
}

/// Rank documents against free text; `lang` may be null for the bundle's
/// default language. Writes the service's search JSON to `out`.
///
/// # Safety
/// `bundle` must be a live handle, `query` NUL-terminated, `lang` null or
/// NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dn_search_json(
    bundle: *const DnBundle,
    query: *const c_char,
    lang: *const c_char,
    n: usize,
    out: *mut *mut c_char,
) -> DnStatus {
    guard(|| {
        let bundle = bundle_arg(bundle)?;
        let query = str_arg(query, "query")?;
        let lang = if lang.is_null() { None } else { Some(str_arg(lang, "lang")?) };
        let body = search_body(bundle, query, lang, n)?;
        write_string(out, serde_json::to_string(&body).map_err(Error::from)?)
    })
}
