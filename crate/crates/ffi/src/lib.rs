//! C interface.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns a `DsyncStatus`; on failure
//! `dsync_last_error` describes what went wrong on the calling thread.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with `dsync_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dsync::config::RunConfig;
use dsync::extract::discover;
use dsync::replay::replay_checked;
use dsync::report::Report;
use dsync::sim::{simulate, SimConfig};
use dsync::{Error, Log, Net};

/// A validated timed colored Petri net.
pub struct DsyncNet(Net);

/// An event log.
pub struct DsyncLog(Log);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsyncStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Deadlock = 6,
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> DsyncStatus {
    match err {
        Error::Io { .. } => DsyncStatus::Io,
        Error::ModelFormat(_)
        | Error::LogRow { .. }
        | Error::LogFormat(_)
        | Error::ConstraintSyntax { .. }
        | Error::Json(_)
        | Error::Csv(_) => DsyncStatus::Parse,
        Error::Deadlock(_) => DsyncStatus::Deadlock,
        _ => DsyncStatus::Validation,
    }
}

struct Fail(DsyncStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsyncStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DsyncStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            DsyncStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(DsyncStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DsyncStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(DsyncStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(DsyncStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

fn into_c(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(DsyncStatus::Internal, "output contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn dsync_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn dsync_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn dsync_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a net from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_net_from_json(json: *const c_char, out: *mut *mut DsyncNet) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let net = Net::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(DsyncNet(net)));
        Ok(())
    })
}

/// Loads a net from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_net_load(path: *const c_char, out: *mut *mut DsyncNet) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let net = Net::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(DsyncNet(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dsync_net_free(net: *mut DsyncNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Parses a CSV event log.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_log_parse_csv(csv: *const c_char, out: *mut *mut DsyncLog) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let log = Log::parse(text(csv, "csv")?)?;
        *out = Box::into_raw(Box::new(DsyncLog(log)));
        Ok(())
    })
}

/// Loads a CSV event log from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_log_load(path: *const c_char, out: *mut *mut DsyncLog) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let log = Log::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(DsyncLog(log)));
        Ok(())
    })
}

/// # Safety
/// `log` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dsync_log_free(log: *mut DsyncLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Number of events in the log; 0 for a null handle.
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dsync_log_len(log: *const DsyncLog) -> usize {
    log.as_ref().map_or(0, |l| l.0.len())
}

/// Writes the log as CSV text into `*out`.
///
/// # Safety
/// `log` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_log_to_csv(log: *const DsyncLog, out: *mut *mut c_char) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let log = get(log, "log")?;
        *out = into_c(log.0.to_csv())?;
        Ok(())
    })
}

/// Simulates the net. `max_cases` of 0 means unbounded, which requires a
/// positive `horizon`; a `horizon` of 0 or less means none.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_simulate(
    net: *const DsyncNet,
    seed: u64,
    max_cases: usize,
    horizon: f64,
    out: *mut *mut DsyncLog,
) -> DsyncStatus {
    guard(|| {
        check_out(out)?;
        let net = get(net, "net")?;
        let cfg = SimConfig {
            seed,
            max_cases,
            horizon: (horizon > 0.0).then_some(horizon),
            ..SimConfig::default()
        };
        let log = simulate(&net.0, &cfg)?;
        *out = Box::into_raw(Box::new(DsyncLog(log)));
        Ok(())
    })
}

/// Runs discovery and writes the JSON report into `*out_json`. `config_toml`
/// may be null for the default settings.
///
/// # Safety
/// `net` and `log` must be live handles; `config_toml` must be null or a
/// NUL-terminated string; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_discover(
    net: *const DsyncNet,
    log: *const DsyncLog,
    config_toml: *const c_char,
    out_json: *mut *mut c_char,
) -> DsyncStatus {
    guard(|| {
        check_out(out_json)?;
        let (net, log) = (get(net, "net")?, get(log, "log")?);
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_toml(text(config_toml, "config")?)?
        };
        let d = discover(&log.0, &net.0, &cfg.tree, &cfg.extraction)?;
        let report = Report::build(&net.0, &log.0, &d, &cfg)?;
        *out_json = into_c(report.to_json())?;
        Ok(())
    })
}

/// Replays the log on the net with its guards enforced and reports how many
/// events fit. Either count pointer may be null.
///
/// # Safety
/// `net` and `log` must be live handles; non-null count pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dsync_check(
    net: *const DsyncNet,
    log: *const DsyncLog,
    matched: *mut usize,
    unmatched: *mut usize,
) -> DsyncStatus {
    guard(|| {
        let (net, log) = (get(net, "net")?, get(log, "log")?);
        let r = replay_checked(&log.0, &net.0)?.report;
        if let Some(m) = matched.as_mut() {
            *m = r.matched;
        }
        if let Some(u) = unmatched.as_mut() {
            *u = r.unmatched.len();
        }
        Ok(())
    })
}
