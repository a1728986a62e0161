use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use smd_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(smd_last_error()) }.to_str().unwrap().to_string()
}

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { smd_string_free(s) };
    out
}

fn load(name: &str) -> *mut SmdInstance {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { smd_instance_from_gallery(cs(name).as_ptr(), &mut h) }, SmdStatus::Ok, "{}", last_error());
    h
}

#[test]
fn nupbr_and_classify_through_handles() {
    let ex1 = load("ex1");
    let (mut holds, mut t) = (true, 0i64);
    assert_eq!(unsafe { smd_check_nupbr(ex1, &mut holds, &mut t) }, SmdStatus::Ok);
    assert_eq!((holds, t), (false, 1));
    let bin = load("binomial");
    assert_eq!(unsafe { smd_check_nupbr(bin, &mut holds, &mut t) }, SmdStatus::Ok);
    assert_eq!((holds, t), (true, -1));
    let mut kind = SmdKind::Sp;
    assert_eq!(unsafe { smd_classify(bin, &mut kind) }, SmdStatus::Ok);
    assert_eq!(kind, SmdKind::Spp);
    let xq = load("xquestion");
    assert_eq!(unsafe { smd_classify(xq, &mut kind) }, SmdStatus::Ok);
    assert_eq!(kind, SmdKind::Spd);
    unsafe {
        smd_instance_free(ex1);
        smd_instance_free(bin);
        smd_instance_free(xq);
        smd_instance_free(ptr::null_mut());
    }
}

#[test]
fn deflator_margins() {
    let bin = load("binomial");
    let (mut ok, mut delta) = (false, ptr::null_mut());
    assert_eq!(unsafe { smd_synth_deflator(bin, SmdMode::Nupbr, ptr::null(), &mut ok, &mut delta) }, SmdStatus::Ok);
    assert!(ok);
    assert_eq!(take(delta), "4/5");

    let ladder = load("ladder");
    let late = cs("late");
    assert_eq!(unsafe { smd_synth_deflator(ladder, SmdMode::Dsv, late.as_ptr(), &mut ok, &mut delta) }, SmdStatus::Ok);
    assert!(ok);
    assert_eq!(take(delta), "1");

    let missing = cs("missing");
    assert_eq!(
        unsafe { smd_synth_deflator(ladder, SmdMode::Dsv, missing.as_ptr(), &mut ok, &mut delta) },
        SmdStatus::Unknown
    );
    assert!(delta.is_null());
    assert!(last_error().contains("missing"));

    let ex1 = load("ex1");
    assert_eq!(unsafe { smd_synth_deflator(ex1, SmdMode::Nupbr, ptr::null(), &mut ok, &mut delta) }, SmdStatus::Ok);
    assert!(!ok);
    assert_eq!(take(delta), "0");
    unsafe {
        smd_instance_free(bin);
        smd_instance_free(ladder);
        smd_instance_free(ex1);
    }
}

#[test]
fn json_round_trip_and_reports() {
    let bin = load("binomial");
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { smd_instance_json(bin, &mut text) }, SmdStatus::Ok);
    let json = take(text);
    let mut again = ptr::null_mut();
    assert_eq!(unsafe { smd_instance_from_json(cs(&json).as_ptr(), &mut again) }, SmdStatus::Ok);

    let (mut exit, mut out) = (-1, ptr::null_mut());
    assert_eq!(unsafe { smd_report_json(again, cs("synth-deflator").as_ptr(), &mut exit, &mut out) }, SmdStatus::Ok);
    assert_eq!(exit, 0);
    let report = take(out);
    assert!(report.contains("\"delta\": \"4/5\""), "{report}");

    let sec3 = load("sec3");
    assert_eq!(unsafe { smd_report_json(sec3, cs("gsm-check").as_ptr(), &mut exit, &mut out) }, SmdStatus::Ok);
    assert_eq!(exit, 0);
    take(out);

    assert_eq!(unsafe { smd_report_json(bin, cs("launch").as_ptr(), &mut exit, &mut out) }, SmdStatus::Unknown);
    assert!(out.is_null());
    assert!(last_error().contains("classify"));
    assert_eq!(unsafe { smd_report_json(bin, cs("gsm-check").as_ptr(), &mut exit, &mut out) }, SmdStatus::Parse);
    unsafe {
        smd_instance_free(bin);
        smd_instance_free(again);
        smd_instance_free(sec3);
    }
}

#[test]
fn argument_errors() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { smd_instance_from_json(ptr::null(), &mut h) }, SmdStatus::Null);
    assert_eq!(unsafe { smd_instance_from_gallery(cs("binomial").as_ptr(), ptr::null_mut()) }, SmdStatus::Null);
    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { smd_instance_from_json(bad.as_ptr().cast(), &mut h) }, SmdStatus::Utf8);
    assert_eq!(unsafe { smd_instance_from_json(cs("{\"horizon\": 1,").as_ptr(), &mut h) }, SmdStatus::Parse);
    assert!(h.is_null());
    assert!(last_error().starts_with("parse error at line 1"), "{}", last_error());
    let mut kind = SmdKind::Sp;
    assert_eq!(unsafe { smd_classify(ptr::null(), &mut kind) }, SmdStatus::Null);
    assert_eq!(last_error(), "instance is null");
}

fn target_dir() -> PathBuf {
    // deps/<test binary> sits two levels under the profile directory
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libsmd_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let out = std::env::temp_dir().join(format!("smd_smoke_{}", std::process::id()));
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok\n");
}
