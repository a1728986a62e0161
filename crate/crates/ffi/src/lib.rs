//! C interface to `smd_core`.
//!
//! Instances are opaque handles. Every call returns an [`SmdStatus`]; on a
//! nonzero status [`smd_last_error`] holds a message for the calling thread.
//! Strings handed out by the library are released with [`smd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use smd_core::boundedness::{check_nupbr_loc, NupbrVerdict};
use smd_core::cli::{report_for, resolve_xhat, Format};
use smd_core::deflator::{synth_deflator_dsv, synth_deflator_nupbr};
use smd_core::gallery::gallery;
use smd_core::instance::{Instance, InstanceError};
use smd_core::process::{classify, ClassKind};
use smd_core::rational::fmt_q;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    Null = -1,
    /// A string argument was not UTF-8.
    Utf8 = -2,
    /// The instance text or an argument was rejected.
    Parse = -3,
    /// Unknown gallery name, command or process name.
    Unknown = -4,
    /// The library panicked; the handle is still valid.
    Internal = -5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdKind {
    Sp = 0,
    Spd = 1,
    Spp = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmdMode {
    Nupbr = 0,
    Dsv = 1,
}

/// Opaque instance handle.
pub struct SmdInstance {
    inner: Instance,
}

/// Commands accepted by [`smd_report_json`].
const COMMANDS: &[&str] = &["classify", "check-nupbr", "check-dsv", "synth-deflator", "pasting-pipeline", "gsm-check"];

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SmdStatus, String);

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        let status = match e {
            InstanceError::UnknownGallery { .. } => SmdStatus::Unknown,
            _ => SmdStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SmdStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            SmdStatus::Internal
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SmdStatus::Null, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(SmdStatus::Utf8, format!("{what}: {e}")))
}

unsafe fn handle<'a>(p: *const SmdInstance) -> Result<&'a Instance, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("instance"))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn smd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses an instance from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_instance_from_json(json: *const c_char, out: *mut *mut SmdInstance) -> SmdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let inner = Instance::parse(text(json, "json")?)?;
        out.write(Box::into_raw(Box::new(SmdInstance { inner })));
        Ok(())
    })
}

/// Loads a built-in instance by name.
///
/// # Safety
/// `name` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_instance_from_gallery(name: *const c_char, out: *mut *mut SmdInstance) -> SmdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let inner = gallery(text(name, "name")?)?;
        out.write(Box::into_raw(Box::new(SmdInstance { inner })));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `instance` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smd_instance_free(instance: *mut SmdInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Canonical JSON of the instance.
///
/// # Safety
/// `instance` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_instance_json(instance: *const SmdInstance, out: *mut *mut c_char) -> SmdStatus {
    guard(|| {
        let inst = handle(instance)?;
        put(out, owned(inst.to_json()), "out")
    })
}

/// `fail_time` is the first time with an unbounded closure level, or -1.
///
/// # Safety
/// `instance` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_check_nupbr(instance: *const SmdInstance, holds: *mut bool, fail_time: *mut i64) -> SmdStatus {
    guard(|| {
        let inst = handle(instance)?;
        if holds.is_null() || fail_time.is_null() {
            return Err(null("out"));
        }
        let r = check_nupbr_loc(&inst.gens);
        let (h, t) = match r.verdict {
            NupbrVerdict::Holds => (true, -1),
            NupbrVerdict::Fails { time, .. } => (false, time as i64),
        };
        holds.write(h);
        fail_time.write(t);
        Ok(())
    })
}

/// # Safety
/// `instance` must be a live handle; `kind` must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_classify(instance: *const SmdInstance, kind: *mut SmdKind) -> SmdStatus {
    guard(|| {
        let inst = handle(instance)?;
        let k = match classify(&inst.gens).kind {
            ClassKind::Sp => SmdKind::Sp,
            ClassKind::Spd => SmdKind::Spd,
            ClassKind::Spp => SmdKind::Spp,
        };
        put(kind, k, "kind")
    })
}

/// Solves the deflator LP. `xhat` may be null in NUPBR mode and, in DSV
/// mode, falls back to the instance's dominating process. `delta` receives
/// the optimal margin as a rational string, to be freed with
/// [`smd_string_free`].
///
/// # Safety
/// `instance` must be a live handle; `xhat` null or nul-terminated; the out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_synth_deflator(
    instance: *const SmdInstance,
    mode: SmdMode,
    xhat: *const c_char,
    feasible: *mut bool,
    delta: *mut *mut c_char,
) -> SmdStatus {
    guard(|| {
        let inst = handle(instance)?;
        if feasible.is_null() || delta.is_null() {
            return Err(null("out"));
        }
        delta.write(ptr::null_mut());
        let res = match mode {
            SmdMode::Nupbr => synth_deflator_nupbr(&inst.gens),
            SmdMode::Dsv => {
                let name = if xhat.is_null() { None } else { Some(text(xhat, "xhat")?.to_string()) };
                if let Some(n) = &name {
                    if inst.gens.resolve(n).is_none() {
                        return Err(Failure(SmdStatus::Unknown, format!("unknown process {n:?}")));
                    }
                }
                let (_, hat) = resolve_xhat(inst, &name)?;
                synth_deflator_dsv(&inst.gens, &hat)
            }
        }
        .map_err(|e| Failure(SmdStatus::Parse, e.to_string()))?;
        feasible.write(res.feasible());
        delta.write(owned(fmt_q(&res.delta)));
        Ok(())
    })
}

/// Machine-format report of a command run with default options; `exit`
/// receives the command-line exit code.
///
/// # Safety
/// `instance` must be a live handle; `command` nul-terminated; the out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn smd_report_json(
    instance: *const SmdInstance,
    command: *const c_char,
    exit: *mut i32,
    out: *mut *mut c_char,
) -> SmdStatus {
    guard(|| {
        let inst = handle(instance)?;
        let command = text(command, "command")?;
        if exit.is_null() || out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        if !COMMANDS.contains(&command) {
            return Err(Failure(SmdStatus::Unknown, format!("unknown command {command:?}; available: {}", COMMANDS.join(", "))));
        }
        let rep = report_for(command, inst)?;
        exit.write(rep.exit);
        out.write(owned(rep.render(Format::Machine)));
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn smd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_error_tracks_status() {
        let mut h = ptr::null_mut();
        let name = CString::new("nope").unwrap();
        assert_eq!(unsafe { smd_instance_from_gallery(name.as_ptr(), &mut h) }, SmdStatus::Unknown);
        assert!(h.is_null());
        let msg = unsafe { CStr::from_ptr(smd_last_error()) }.to_str().unwrap();
        assert!(msg.contains("available"), "{msg}");
        let name = CString::new("binomial").unwrap();
        assert_eq!(unsafe { smd_instance_from_gallery(name.as_ptr(), &mut h) }, SmdStatus::Ok);
        assert_eq!(unsafe { CStr::from_ptr(smd_last_error()) }.to_bytes(), b"");
        unsafe { smd_instance_free(h) };
    }

    #[test]
    fn guard_catches_panics() {
        assert_eq!(guard(|| panic!("boom")), SmdStatus::Internal);
        let msg = unsafe { CStr::from_ptr(smd_last_error()) }.to_str().unwrap().to_string();
        assert_eq!(msg, "internal error: boom");
    }
}
