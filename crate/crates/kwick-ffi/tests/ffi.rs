use kwick_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

const OSC: &str = "[channel]\nfield = real\nhbar = 1\ntruncation = 8\n[xlabels]\nx1\n[modes]\nk1 1.0 1 0 0 0 1 0 0 0\n";

fn spec() -> *mut KwSpec {
    let text = CString::new(OSC).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kw_spec_parse(text.as_ptr(), &mut s) }, KwStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(kw_last_error_message()) }.to_str().unwrap().to_string()
}

#[test]
fn expect_matches_oracle() {
    let s = spec();
    assert_eq!(unsafe { kw_spec_num_xlabels(s) }, 1);
    let e = CString::new("vev[Q-(x1,2.0) Q+(x1,0.5)]").unwrap();
    let (mut w, mut o) = (KwComplex::default(), KwComplex::default());
    assert_eq!(unsafe { kw_expect(s, e.as_ptr(), &mut w) }, KwStatus::Ok);
    assert_eq!(unsafe { kw_oracle_expect(s, e.as_ptr(), &mut o) }, KwStatus::Ok);
    assert!((w.re - 0.5 * 1.5f64.cos()).abs() < 1e-12 && (w.im + 0.5 * 1.5f64.sin()).abs() < 1e-12);
    assert!((w.re - o.re).abs() < 1e-12 && (w.im - o.im).abs() < 1e-12);
    unsafe { kw_spec_free(s) };
}

#[test]
fn error_codes() {
    let bad = CString::new("[channel]\nhue = 3\n").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kw_spec_parse(bad.as_ptr(), &mut s) }, KwStatus::Syntax);
    assert!(s.is_null());
    assert!(last_error().contains("line 2"));

    let neg = CString::new(OSC.replace("k1 1.0", "k1 -1.0")).unwrap();
    assert_eq!(unsafe { kw_spec_parse(neg.as_ptr(), &mut s) }, KwStatus::Invariant);
    assert_eq!(unsafe { kw_spec_parse(ptr::null(), &mut s) }, KwStatus::NullPointer);

    let s = spec();
    let mut out = KwComplex::default();
    let e = CString::new("Q+(y,1)").unwrap();
    assert_eq!(unsafe { kw_expect(s, e.as_ptr(), &mut out) }, KwStatus::UnknownLabel);
    let e = CString::new("Q(x1,1)").unwrap();
    assert_eq!(unsafe { kw_expect(s, e.as_ptr(), &mut out) }, KwStatus::Syntax);
    let e = CString::new("Q+(x1,1)").unwrap();
    assert_eq!(unsafe { kw_expect(ptr::null(), e.as_ptr(), &mut out) }, KwStatus::NullPointer);
    assert_eq!(unsafe { kw_expect(s, e.as_ptr(), &mut out) }, KwStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { kw_spec_free(s) };
}

#[test]
fn json_outputs() {
    let s = spec();
    let e = CString::new("Q+(x1,1) Q-(x1,0)").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { kw_expand_json(s, e.as_ptr(), &mut out) }, KwStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
    unsafe { kw_string_free(out) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["terms"].as_array().unwrap().len(), 2);

    let suite = CString::new("grassmann").unwrap();
    assert_eq!(unsafe { kw_verify_json(s, suite.as_ptr(), &mut out) }, KwStatus::Ok);
    unsafe { kw_string_free(out) };
    let suite = CString::new("colour").unwrap();
    assert_eq!(unsafe { kw_verify_json(s, suite.as_ptr(), &mut out) }, KwStatus::Syntax);
    unsafe { kw_spec_free(s) };
}

#[test]
fn grassmann_handles() {
    let (a, b) = (kw_grassmann_generator(1), kw_grassmann_generator(2));
    assert!(kw_grassmann_generator(0).is_null());
    unsafe {
        let ab = kw_grassmann_mul(a, b);
        let ba = kw_grassmann_mul(b, a);
        let sum = kw_grassmann_add(ab, ba);
        assert_eq!(kw_grassmann_num_terms(sum), 0);
        let aa = kw_grassmann_mul(a, a);
        assert_eq!(kw_grassmann_num_terms(aa), 0);

        let mut c = KwComplex::default();
        assert_eq!(kw_grassmann_coeff(ab, [2u32, 1].as_ptr(), 2, &mut c), KwStatus::Ok);
        assert_eq!(c, KwComplex { re: -1.0, im: 0.0 });
        let d = kw_grassmann_left_deriv(ab, 1);
        assert_eq!(kw_grassmann_coeff(d, [2u32].as_ptr(), 1, &mut c), KwStatus::Ok);
        assert_eq!(c.re, 1.0);
        let d2 = kw_grassmann_left_deriv(ab, 2);
        assert_eq!(kw_grassmann_coeff(d2, [1u32].as_ptr(), 1, &mut c), KwStatus::Ok);
        assert_eq!(c.re, -1.0);
        let k = kw_grassmann_scalar(KwComplex { re: 2.0, im: 1.0 });
        assert_eq!(kw_grassmann_coeff(k, ptr::null(), 0, &mut c), KwStatus::Ok);
        assert_eq!(c, KwComplex { re: 2.0, im: 1.0 });
        assert!(kw_grassmann_mul(ptr::null(), a).is_null());
        for p in [a, b, ab, ba, sum, aa, d, d2, k] {
            kw_grassmann_free(p);
        }
        kw_grassmann_free(ptr::null_mut());
    }
}

#[test]
fn header_lists_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/kwick.h")).unwrap();
    for sym in ["kw_spec_parse", "kw_expect", "kw_expand_json", "kw_verify_json", "kw_grassmann_mul", "kw_last_error_message", "typedef struct KwSpec KwSpec", "KW_STATUS_OK = 0"] {
        assert!(h.contains(sym), "{}", sym);
    }
}

/// Compiles a small C program against the header and static library.
#[test]
fn c_program_links() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libkwick_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = std::env::temp_dir().join(format!("kwick-ffi-c-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "kwick.h"
int main(void) {
    const char *text = "[channel]\nfield = real\n[xlabels]\nx1\n[modes]\nk1 1.0 1 0 0 0 1 0 0 0\n";
    KwSpec *spec = NULL;
    if (kw_spec_parse(text, &spec) != KW_STATUS_OK) return 3;
    KwComplex v;
    KwStatus st = kw_expect(spec, "vev[Q+(x1,1.0) Q+(x1,0.0)]", &v);
    kw_spec_free(spec);
    if (st != KW_STATUS_OK) return 4;
    printf("%.12f %.12f\n", v.re, v.im);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.join("main");
    let status = std::process::Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let want = format!("{:.12} {:.12}", 0.5 * 1f64.cos(), -0.5 * 1f64.sin());
    assert_eq!(text.trim(), want);
}
