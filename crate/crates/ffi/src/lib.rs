//! C ABI over the coverlab library.
//!
//! Objects cross the boundary as opaque handles built from JSON. Every
//! fallible call returns a [`CoverlabStatus`]; on failure the message is
//! available from [`coverlab_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`coverlab_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coverlab::coverage::{coverability, PolicySet};
use coverlab::golf::{default_beta, golf_run, GolfConfig};
use coverlab::harness::claims::write_ledger;
use coverlab::harness::{instance, verify_claims};
use coverlab::mdp::optimal_values;
use coverlab::{Error, LayeredMdp, ValueFunctionFamily};

/// Result codes. `COVERLAB_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Json = 3,
    Structure = 4,
    InvalidParameter = 5,
    Budget = 6,
    Bracket = 7,
    EmptyConfidenceSet = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

/// Opaque layered MDP.
pub struct CoverlabMdp {
    inner: LayeredMdp,
}

/// Opaque value-function family.
pub struct CoverlabFamily {
    inner: ValueFunctionFamily,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: CoverlabStatus,
    message: String,
}

impl Failure {
    fn new(status: CoverlabStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Structure(_) => CoverlabStatus::Structure,
            Error::InvalidParameter(_) => CoverlabStatus::InvalidParameter,
            Error::Budget(_) => CoverlabStatus::Budget,
            Error::Bracket { .. } => CoverlabStatus::Bracket,
            Error::EmptyConfidenceSet { .. } => CoverlabStatus::EmptyConfidenceSet,
            Error::Config(_) => CoverlabStatus::Config,
            Error::Json(_) => CoverlabStatus::Json,
            Error::Io { .. } => CoverlabStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(CoverlabStatus::Json, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|l| *l.borrow_mut() = Some(c));
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CoverlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CoverlabStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            CoverlabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(CoverlabStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(CoverlabStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(CoverlabStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(CoverlabStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure::new(CoverlabStatus::InvalidUtf8, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn coverlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn coverlab_last_error() -> *const c_char {
    LAST_ERROR.with(|l| l.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn coverlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an MDP from its JSON interchange form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coverlab_mdp_from_json(json: *const c_char, out: *mut *mut CoverlabMdp) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        let inner = LayeredMdp::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(CoverlabMdp { inner }));
        Ok(())
    })
}

/// Serializes an MDP; free the result with `coverlab_string_free`.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coverlab_mdp_to_json(mdp: *const CoverlabMdp, out: *mut *mut c_char) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = to_c_string(ref_arg(mdp, "mdp")?.inner.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `mdp` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn coverlab_mdp_free(mdp: *mut CoverlabMdp) {
    if !mdp.is_null() {
        drop(Box::from_raw(mdp));
    }
}

/// Number of layers, or 0 for a null handle.
///
/// # Safety
/// `mdp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coverlab_mdp_horizon(mdp: *const CoverlabMdp) -> usize {
    mdp.as_ref().map_or(0, |m| m.inner.horizon())
}

/// Optimal value from the initial state.
///
/// # Safety
/// `mdp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coverlab_mdp_optimal_value(mdp: *const CoverlabMdp, out: *mut f64) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = optimal_values(&ref_arg(mdp, "mdp")?.inner).value;
        Ok(())
    })
}

/// Parses a family. When `mdp` is non-null its shapes are checked against it.
///
/// # Safety
/// `json` must be a NUL-terminated string, `mdp` null or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coverlab_family_from_json(
    json: *const c_char,
    mdp: *const CoverlabMdp,
    out: *mut *mut CoverlabFamily,
) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        let inner = ValueFunctionFamily::from_json(str_arg(json, "json")?)?;
        if let Some(m) = mdp.as_ref() {
            inner.check_shape(&m.inner)?;
        }
        *out = Box::into_raw(Box::new(CoverlabFamily { inner }));
        Ok(())
    })
}

/// Serializes a family; free the result with `coverlab_string_free`.
///
/// # Safety
/// `family` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn coverlab_family_to_json(family: *const CoverlabFamily, out: *mut *mut c_char) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = to_c_string(ref_arg(family, "family")?.inner.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `family` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn coverlab_family_free(family: *mut CoverlabFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Number of members, or 0 for a null handle.
///
/// # Safety
/// `family` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn coverlab_family_len(family: *const CoverlabFamily) -> usize {
    family.as_ref().map_or(0, |f| f.inner.len())
}

/// Builds a named construction (`tree`, `two-layer`, `bandit`, `peak-bandit`, `exbmdp`).
///
/// `params_json` is a JSON object of numbers and may be null. `out_manifest`
/// may be null; otherwise it receives the manifest as JSON.
///
/// # Safety
/// String arguments must be NUL-terminated; `out_mdp` and `out_family` must be valid.
#[no_mangle]
pub unsafe extern "C" fn coverlab_construct(
    name: *const c_char,
    params_json: *const c_char,
    out_mdp: *mut *mut CoverlabMdp,
    out_family: *mut *mut CoverlabFamily,
    out_manifest: *mut *mut c_char,
) -> CoverlabStatus {
    guard(|| {
        out_arg(out_mdp, "out_mdp")?;
        out_arg(out_family, "out_family")?;
        let name = str_arg(name, "name")?;
        let params: BTreeMap<String, f64> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?)?
        };
        let c = instance::construct(name, &params)?;
        if !out_manifest.is_null() {
            *out_manifest = to_c_string(serde_json::to_string(&c.manifest)?)?;
        }
        *out_mdp = Box::into_raw(Box::new(CoverlabMdp { inner: c.mdp }));
        *out_family = Box::into_raw(Box::new(CoverlabFamily { inner: c.family }));
        Ok(())
    })
}

/// Coverability over the greedy policies of `family`, or over all policies when it is null.
///
/// # Safety
/// `mdp` must be a live handle, `family` null or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn coverlab_coverability(
    mdp: *const CoverlabMdp,
    family: *const CoverlabFamily,
    out: *mut f64,
) -> CoverlabStatus {
    guard(|| {
        out_arg(out, "out")?;
        let mdp = &ref_arg(mdp, "mdp")?.inner;
        let set = match family.as_ref() {
            Some(f) => {
                f.inner.check_shape(mdp)?;
                PolicySet::induced(&f.inner)
            }
            None => PolicySet::All,
        };
        *out = coverability(mdp, &set).value;
        Ok(())
    })
}

/// Runs optimistic exploration for `rounds` episodes.
///
/// A non-positive `beta` selects the default width at `delta = 0.05`.
/// `out_log` may be null; otherwise it receives the full run log as JSON.
///
/// # Safety
/// Handles must be live; `out_regret` must be valid.
#[no_mangle]
pub unsafe extern "C" fn coverlab_golf_run(
    mdp: *const CoverlabMdp,
    family: *const CoverlabFamily,
    rounds: usize,
    beta: f64,
    seed: u64,
    out_regret: *mut f64,
    out_log: *mut *mut c_char,
) -> CoverlabStatus {
    guard(|| {
        out_arg(out_regret, "out_regret")?;
        let mdp = &ref_arg(mdp, "mdp")?.inner;
        let family = &ref_arg(family, "family")?.inner;
        family.check_shape(mdp)?;
        let beta = if beta > 0.0 {
            beta
        } else {
            default_beta(rounds, mdp.horizon(), family.len(), 0.05)
        };
        let log = golf_run(mdp, family, &GolfConfig::new(rounds, beta, seed)).map_err(Error::from)?;
        if !out_log.is_null() {
            *out_log = to_c_string(serde_json::to_string(&log)?)?;
        }
        *out_regret = log.regret();
        Ok(())
    })
}

/// Runs a claim suite. `out_failures` receives the number of failing rows;
/// `out_csv` may be null, otherwise it receives the ledger as CSV.
///
/// # Safety
/// `suite` must be NUL-terminated and `out_failures` valid.
#[no_mangle]
pub unsafe extern "C" fn coverlab_verify_claims(
    suite: *const c_char,
    out_failures: *mut usize,
    out_csv: *mut *mut c_char,
) -> CoverlabStatus {
    guard(|| {
        out_arg(out_failures, "out_failures")?;
        let rows = verify_claims(str_arg(suite, "suite")?)?;
        if !out_csv.is_null() {
            let mut buf = Vec::new();
            write_ledger(&rows, &mut buf)?;
            *out_csv = to_c_string(String::from_utf8(buf).map_err(|e| Failure::new(CoverlabStatus::InvalidUtf8, e.to_string()))?)?;
        }
        *out_failures = rows.iter().filter(|r| !r.pass).count();
        Ok(())
    })
}
