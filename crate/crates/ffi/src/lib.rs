//! C interface to the attrdbg evaluator and debugger.
//!
//! Grammars and evaluated trees are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns
//! an [`AttrdbgStatus`]; on failure `attrdbg_last_error` describes it.
//! Strings handed out by the library are freed with `attrdbg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use attrdbg::evaluator::{evaluate, AttributedTree};
use attrdbg::gad::{GadConfig, Strategy, Termination};
use attrdbg::grammar::{validate_against, ShapeCheck};
use attrdbg::sentence::parse_input;
use attrdbg::session::{instance, run_trace, ReferenceOracle, SessionError};
use attrdbg::Grammar;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttrdbgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    GrammarError = 3,
    SentenceError = 4,
    Circularity = 5,
    UnknownInstance = 6,
    /// The value is undefined because evaluation hit a runtime error.
    Undefined = 7,
    ShapeMismatch = 8,
    NothingToDebug = 9,
    InvalidArgument = 10,
    Aborted = 11,
    Internal = 99,
}

/// A parsed, checked grammar.
pub struct AttrdbgGrammar(Arc<Grammar>);

/// An evaluated sentence with its computation trace.
pub struct AttrdbgTrace(Arc<AttributedTree>);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(AttrdbgStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AttrdbgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AttrdbgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            AttrdbgStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(AttrdbgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(AttrdbgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(AttrdbgStatus::NullArgument, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(AttrdbgStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn attrdbg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static version string.
#[no_mangle]
pub extern "C" fn attrdbg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses grammar source text.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_grammar_parse(source: *const c_char, out: *mut *mut AttrdbgGrammar) -> AttrdbgStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let src = str_arg(source, "source")?;
        let g = attrdbg::parse_grammar(src).map_err(|e| Fail(AttrdbgStatus::GrammarError, e.to_string()))?;
        *out = Box::into_raw(Box::new(AttrdbgGrammar(Arc::new(g))));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from `attrdbg_grammar_parse`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_grammar_free(g: *mut AttrdbgGrammar) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of semantic rules, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live grammar handle.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_grammar_rule_count(g: *const AttrdbgGrammar) -> usize {
    g.as_ref().map_or(0, |g| g.0.rule_count())
}

/// Parses and evaluates a sentence. A runtime fault still yields a trace;
/// check it with `attrdbg_trace_failed`.
///
/// # Safety
/// `g` must be a live grammar handle, `input` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_eval(g: *const AttrdbgGrammar, input: *const c_char, out: *mut *mut AttrdbgTrace) -> AttrdbgStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let g = ref_arg(g, "grammar")?;
        let input = str_arg(input, "input")?;
        let tree = parse_input(&g.0, input).map_err(|e| Fail(AttrdbgStatus::SentenceError, e.to_string()))?;
        let at = evaluate(g.0.clone(), tree).map_err(|e| Fail(AttrdbgStatus::Circularity, e.to_string()))?;
        *out = Box::into_raw(Box::new(AttrdbgTrace(Arc::new(at))));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from `attrdbg_eval`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_trace_free(t: *mut AttrdbgTrace) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// True when evaluation stopped at a runtime error.
///
/// # Safety
/// `t` must be null or a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_trace_failed(t: *const AttrdbgTrace) -> bool {
    t.as_ref().is_some_and(|t| t.0.is_failed())
}

/// Value of an attribute instance such as `B[3].pos`, or a root attribute
/// given by bare name (`val`), rendered as text.
///
/// # Safety
/// `t` must be a live trace handle, `label` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_trace_value(t: *const AttrdbgTrace, label: *const c_char, out: *mut *mut c_char) -> AttrdbgStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let at = &ref_arg(t, "trace")?.0;
        let label = str_arg(label, "label")?;
        let id = match at.root_outputs().into_iter().find(|(i, _)| at.attr_name(*i) == label) {
            Some((i, _)) => i,
            None => instance(at, label).map_err(|e| Fail(AttrdbgStatus::UnknownInstance, e.to_string()))?,
        };
        let v = at.value(id).ok_or_else(|| Fail(AttrdbgStatus::Undefined, format!("{} is undefined", at.label(id))))?;
        *out = c_string(v.to_string());
        Ok(())
    })
}

/// The computation trace as JSON lines.
///
/// # Safety
/// `t` must be a live trace handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_trace_export(t: *const AttrdbgTrace, out: *mut *mut c_char) -> AttrdbgStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = c_string(ref_arg(t, "trace")?.0.export_trace());
        Ok(())
    })
}

/// Runs a debugging session on `t`, answering every query by comparing with
/// `intended`. `strategy` is "slice", "ad" or "gad". Writes the bug report as
/// JSON to `report_json`. Returns `Aborted` (with the report still written)
/// when the session ended without localizing.
///
/// # Safety
/// `t` and `intended` must be live handles, `strategy` a NUL-terminated
/// string and `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn attrdbg_debug_reference(
    t: *const AttrdbgTrace,
    intended: *const AttrdbgGrammar,
    strategy: *const c_char,
    epsilon: usize,
    report_json: *mut *mut c_char,
) -> AttrdbgStatus {
    let mut aborted = false;
    let status = guard(|| {
        out_arg(report_json, "report_json")?;
        *report_json = ptr::null_mut();
        let at = ref_arg(t, "trace")?.0.clone();
        let intended = ref_arg(intended, "intended")?.0.clone();
        let strategy: Strategy = str_arg(strategy, "strategy")?.parse().map_err(|e: String| Fail(AttrdbgStatus::InvalidArgument, e.to_string()))?;
        if let ShapeCheck::ShapeMismatch(d) = validate_against(&at.grammar, &intended) {
            return Err(Fail(AttrdbgStatus::ShapeMismatch, d.join("; ")));
        }
        let mut oracle = ReferenceOracle::new(intended);
        let outcome = run_trace(at.clone(), GadConfig::new(strategy, epsilon), &mut oracle).map_err(|e| match e {
            SessionError::NothingToDebug => Fail(AttrdbgStatus::NothingToDebug, e.to_string()),
            e => Fail(AttrdbgStatus::InvalidArgument, e.to_string()),
        })?;
        let mut report = serde_json::to_value(&outcome.report).map_err(|e| Fail(AttrdbgStatus::Internal, e.to_string()))?;
        report["candidate_comps"] = outcome.report.candidate_comps.iter().map(|&c| at.label(c)).collect();
        aborted = outcome.report.terminated_by == Termination::Abort;
        *report_json = c_string(report.to_string());
        Ok(())
    });
    if status == AttrdbgStatus::Ok && aborted {
        set_error("session aborted");
        return AttrdbgStatus::Aborted;
    }
    status
}
