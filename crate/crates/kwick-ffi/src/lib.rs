//! C ABI for kwick.
//!
//! Every entry point returns a [`KwStatus`]; on failure the message is
//! available from [`kw_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function. Strings
//! returned through `out` parameters are released with [`kw_string_free`].

use kwick::cli::{expansion_json, parse_expr, parse_spec, report_json, SpecFile};
use kwick::fock_oracle::Oracle;
use kwick::grassmann::GrassmannPoly;
use kwick::verify::{suite_all, suite_causal, suite_grassmann, suite_kernels, suite_wick};
use kwick::wick_engine::{vacuum_value, wick_expand};
use kwick::Error;
use num_complex::Complex64;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    Invariant = 4,
    UnknownLabel = 5,
    DimensionCap = 6,
    EqualTimeTie = 7,
    VerificationFailed = 8,
    Panic = 9,
    Other = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KwComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for KwComplex {
    fn from(z: Complex64) -> Self {
        KwComplex { re: z.re, im: z.im }
    }
}

/// Parsed spec file.
pub struct KwSpec {
    inner: SpecFile,
}

/// Grassmann polynomial.
pub struct KwGrassmann {
    inner: GrassmannPoly,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> KwStatus {
    match e {
        Error::Syntax { .. } => KwStatus::Syntax,
        Error::Invariant(_) | Error::Nyquist { .. } => KwStatus::Invariant,
        Error::UnknownLabel(_) | Error::Statistics(_) => KwStatus::UnknownLabel,
        Error::DimensionCap { .. } => KwStatus::DimensionCap,
        Error::TieAtEqualTime(..) => KwStatus::EqualTimeTie,
        _ => KwStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), KwStatus>) -> KwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            KwStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            KwStatus::Panic
        }
    }
}

fn fail(e: Error) -> KwStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> KwStatus {
    set_error(&format!("{} is null", what));
    KwStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, KwStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error(&format!("{} is not UTF-8", what));
        KwStatus::InvalidUtf8
    })
}

unsafe fn spec_ref<'a>(p: *const KwSpec) -> Result<&'a SpecFile, KwStatus> {
    // SAFETY: non-null handles come from kw_spec_parse.
    unsafe { p.as_ref() }.map(|s| &s.inner).ok_or_else(|| null("spec"))
}

unsafe fn poly_ref<'a>(p: *const KwGrassmann) -> Result<&'a GrassmannPoly, KwStatus> {
    // SAFETY: non-null handles come from the kw_grassmann constructors.
    unsafe { p.as_ref() }.map(|g| &g.inner).ok_or_else(|| null("polynomial"))
}

fn give_string(out: *mut *mut c_char, s: String) -> Result<(), KwStatus> {
    let c = CString::new(s).map_err(|_| fail(Error::Shape("string contains NUL".into())))?;
    // SAFETY: out checked non-null by the caller.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn kw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next kw_* call on the same thread.
#[no_mangle]
pub extern "C" fn kw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses spec-file text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kw_spec_parse(text: *const c_char, out: *mut *mut KwSpec) -> KwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let text = unsafe { read_str(text, "text") }?;
        let inner = parse_spec(text).map_err(fail)?;
        // SAFETY: out is non-null.
        unsafe { *out = Box::into_raw(Box::new(KwSpec { inner })) };
        Ok(())
    })
}

/// # Safety
/// `spec` must come from kw_spec_parse and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kw_spec_free(spec: *mut KwSpec) {
    if !spec.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Number of x-labels in the spec, 0 for a null handle.
///
/// # Safety
/// `spec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_spec_num_xlabels(spec: *const KwSpec) -> usize {
    // SAFETY: forwarded caller contract.
    unsafe { spec.as_ref() }.map_or(0, |s| s.inner.spec.nx())
}

/// Contour-ordered vacuum value of `expr` via Wick expansion.
///
/// # Safety
/// `spec` must be live, `expr` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kw_expect(spec: *const KwSpec, expr: *const c_char, out: *mut KwComplex) -> KwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let (s, e) = unsafe { (spec_ref(spec)?, read_str(expr, "expr")?) };
        let ops = parse_expr(e).and_then(|x| x.bind(&s.spec)).map_err(fail)?;
        let v = wick_expand(&ops, &s.spec).map(|w| vacuum_value(&w)).map_err(fail)?;
        // SAFETY: out is non-null.
        unsafe { *out = v.into() };
        Ok(())
    })
}

/// The same value computed on the truncated Fock space.
///
/// # Safety
/// As for kw_expect.
#[no_mangle]
pub unsafe extern "C" fn kw_oracle_expect(spec: *const KwSpec, expr: *const c_char, out: *mut KwComplex) -> KwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let (s, e) = unsafe { (spec_ref(spec)?, read_str(expr, "expr")?) };
        let ops = parse_expr(e).and_then(|x| x.bind(&s.spec)).map_err(fail)?;
        let v = Oracle::new(&s.spec, s.options.dim_cap).and_then(|o| o.tc_vev(&ops)).map_err(fail)?;
        // SAFETY: out is non-null.
        unsafe { *out = v.into() };
        Ok(())
    })
}

/// Wick expansion of `expr` as JSON.
///
/// # Safety
/// `spec` must be live, `expr` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kw_expand_json(spec: *const KwSpec, expr: *const c_char, out: *mut *mut c_char) -> KwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let (s, e) = unsafe { (spec_ref(spec)?, read_str(expr, "expr")?) };
        let ops = parse_expr(e).and_then(|x| x.bind(&s.spec)).map_err(fail)?;
        let w = wick_expand(&ops, &s.spec).map_err(fail)?;
        give_string(out, expansion_json(&w, &s.spec).to_string())
    })
}

/// Runs a verification suite (`kernels`, `causal`, `wick`, `grassmann` or
/// `all`) and writes its JSON report. A failing report is still written
/// and the call returns `KW_STATUS_VERIFICATION_FAILED`.
///
/// # Safety
/// `spec` must be live, `suite` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kw_verify_json(spec: *const KwSpec, suite: *const c_char, out: *mut *mut c_char) -> KwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let (s, name) = unsafe { (spec_ref(spec)?, read_str(suite, "suite")?) };
        let o = &s.options;
        let rep = match name {
            "kernels" => suite_kernels(&s.spec, s.grid(), o),
            "causal" => suite_causal(&s.spec, o),
            "wick" => suite_wick(&s.spec, o),
            "grassmann" => suite_grassmann(o),
            "all" => suite_all(&s.spec, s.grid(), o),
            _ => return Err(fail(Error::Syntax { line: 0, msg: format!("unknown suite '{}'", name) })),
        }
        .map_err(fail)?;
        give_string(out, report_json(&rep).to_string())?;
        if rep.pass() {
            Ok(())
        } else {
            set_error("verification failed");
            Err(KwStatus::VerificationFailed)
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kw_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { CString::from_raw(s) });
    }
}

fn new_poly(p: GrassmannPoly) -> *mut KwGrassmann {
    Box::into_raw(Box::new(KwGrassmann { inner: p }))
}

/// Generator `k` (counted from 1). Returns null for `k == 0`.
#[no_mangle]
pub extern "C" fn kw_grassmann_generator(k: u32) -> *mut KwGrassmann {
    if k == 0 {
        set_error("generators are numbered from 1");
        return ptr::null_mut();
    }
    new_poly(GrassmannPoly::generator(k))
}

#[no_mangle]
pub extern "C" fn kw_grassmann_scalar(c: KwComplex) -> *mut KwGrassmann {
    new_poly(GrassmannPoly::scalar(Complex64::new(c.re, c.im)))
}

/// Product `a b`, or null if either operand is null.
///
/// # Safety
/// Operands must be null or live handles.
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_mul(a: *const KwGrassmann, b: *const KwGrassmann) -> *mut KwGrassmann {
    // SAFETY: forwarded caller contract.
    match unsafe { (poly_ref(a), poly_ref(b)) } {
        (Ok(a), Ok(b)) => new_poly(a.mul(b)),
        _ => ptr::null_mut(),
    }
}

/// Sum `a + b`, or null if either operand is null.
///
/// # Safety
/// Operands must be null or live handles.
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_add(a: *const KwGrassmann, b: *const KwGrassmann) -> *mut KwGrassmann {
    // SAFETY: forwarded caller contract.
    match unsafe { (poly_ref(a), poly_ref(b)) } {
        (Ok(a), Ok(b)) => new_poly(a.add(b)),
        _ => ptr::null_mut(),
    }
}

/// Left derivative with respect to generator `k`.
///
/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_left_deriv(a: *const KwGrassmann, k: u32) -> *mut KwGrassmann {
    // SAFETY: forwarded caller contract.
    match unsafe { poly_ref(a) } {
        Ok(a) => new_poly(a.left_deriv(k)),
        Err(_) => ptr::null_mut(),
    }
}

/// Coefficient of the monomial `gens[0] gens[1] ...` (any order; the sign
/// of the reordering is applied).
///
/// # Safety
/// `a` must be live; `gens` must point to `len` readable values (or be null with `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_coeff(a: *const KwGrassmann, gens: *const u32, len: usize, out: *mut KwComplex) -> KwStatus {
    guard(|| {
        if out.is_null() || (gens.is_null() && len > 0) {
            return Err(null("out or gens"));
        }
        // SAFETY: forwarded caller contract.
        let a = unsafe { poly_ref(a) }?;
        // SAFETY: gens holds len values.
        let seq: &[u32] = if len == 0 { &[] } else { unsafe { std::slice::from_raw_parts(gens, len) } };
        let probe = GrassmannPoly::monomial(seq, Complex64::new(1.0, 0.0));
        let (mon, sign) = match probe.terms().next() {
            Some((m, c)) => (m.clone(), c.re),
            None => (Vec::new(), 0.0),
        };
        // SAFETY: out is non-null.
        unsafe { *out = (a.coeff(&mon) * sign).into() };
        Ok(())
    })
}

/// Number of nonzero terms.
///
/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_num_terms(a: *const KwGrassmann) -> usize {
    // SAFETY: forwarded caller contract.
    unsafe { poly_ref(a) }.map_or(0, |p| p.terms().count())
}

/// # Safety
/// `a` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kw_grassmann_free(a: *mut KwGrassmann) {
    if !a.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(a) });
    }
}
