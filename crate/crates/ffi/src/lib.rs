//! C ABI for scver.
//!
//! A design is loaded once into an opaque [`ScverDesign`] handle and then
//! checked, translated or used for test generation. Results come back as
//! NUL-terminated JSON (or Promela) strings owned by the caller, released
//! with [`scver_string_free`]. Every entry point returns a [`ScverCode`];
//! on failure [`scver_last_error`] describes what went wrong on the calling
//! thread.
//!
//! Codes 0 to 4 carry the same meaning as the CLI exit codes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scver::explorer::{self, CheckConfig, ExploreError};
use scver::integration::{self, IntegrationError, LearnConfig};
use scver::kernel::{EnvPolicy, Kernel, KernelConfig};
use scver::promela::{self, EmitOptions};
use scver::scl::{self, Design, DesignAst};
use scver::testgen::{self, Criterion};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScverCode {
    /// Success; for checks, the property holds within the bounds.
    Ok = 0,
    /// A property or assertion is violated; the JSON carries a trace.
    Violation = 1,
    /// A bound or the state cap was hit.
    Bound = 2,
    /// Syntax, type or usage error in the input.
    Invalid = 3,
    /// Infrastructure error.
    Infra = 4,
    /// A required pointer argument was null.
    NullArgument = 5,
    /// A string argument was not valid UTF-8.
    Utf8 = 6,
    /// Internal panic caught at the boundary.
    Panic = 7,
}

/// Environment policy for open inputs.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScverEnv {
    MostGeneral = 0,
    ClosedDefault = 1,
}

/// Exploration bounds. Obtain defaults from [`scver_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ScverConfig {
    pub max_time: u32,
    pub max_delta: u32,
    pub step_limit: u32,
    pub state_cap: u64,
    /// A [`ScverEnv`] value.
    pub env: u32,
    pub check_deadlock: bool,
}

/// Opaque handle to a parsed and elaborated design.
pub struct ScverDesign {
    ast: DesignAst,
    design: Design,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(ScverCode, String);

impl From<ExploreError> for Failure {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::StateCap { .. } => Failure(ScverCode::Bound, e.to_string()),
            ExploreError::UnknownProperty(_) => Failure(ScverCode::Invalid, e.to_string()),
        }
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::Explore(x) => x.into(),
            IntegrationError::StateCap { .. } | IntegrationError::Kernel(_) => Failure(ScverCode::Bound, e.to_string()),
            IntegrationError::Cancelled => Failure(ScverCode::Infra, e.to_string()),
            _ => Failure(ScverCode::Invalid, e.to_string()),
        }
    }
}

/// Runs `f` behind the panic boundary and records any error message.
fn guard(f: impl FnOnce() -> Result<ScverCode, Failure>) -> ScverCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => {
            set_error("");
            code
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal error: {msg}"));
            ScverCode::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(ScverCode::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(ScverCode::Utf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn design_arg<'a>(d: *const ScverDesign) -> Result<&'a ScverDesign, Failure> {
    d.as_ref().ok_or_else(|| Failure(ScverCode::NullArgument, "design is null".into()))
}

unsafe fn out_arg(out: *mut *mut c_char) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(ScverCode::NullArgument, "output pointer is null".into()));
    }
    *out = ptr::null_mut();
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(ScverCode::Infra, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn config_arg(cfg: *const ScverConfig) -> Result<CheckConfig, Failure> {
    let c = cfg.as_ref().copied().unwrap_or_else(|| scver_config_default());
    if c.max_time == 0 || c.max_delta == 0 || c.step_limit == 0 || c.state_cap == 0 {
        return Err(Failure(ScverCode::Invalid, "all bounds must be positive".into()));
    }
    Ok(CheckConfig {
        kernel: KernelConfig { max_time: c.max_time, max_delta: c.max_delta, step_limit: c.step_limit },
        env: match c.env {
            x if x == ScverEnv::MostGeneral as u32 => EnvPolicy::MostGeneral,
            x if x == ScverEnv::ClosedDefault as u32 => EnvPolicy::ClosedDefault,
            x => return Err(Failure(ScverCode::Invalid, format!("unknown environment {x}"))),
        },
        state_cap: usize::try_from(c.state_cap).unwrap_or(usize::MAX),
        check_deadlock: c.check_deadlock,
    })
}

fn json_text(j: &serde_json::Value) -> String {
    serde_json::to_string_pretty(j).expect("JSON values serialize")
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn scver_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default bounds: time 100, 64 deltas, 10000 statements per run,
/// 5,000,000 states, most-general environment, deadlock checking on.
#[no_mangle]
pub extern "C" fn scver_config_default() -> ScverConfig {
    let k = KernelConfig::default();
    let c = CheckConfig::default();
    ScverConfig {
        max_time: k.max_time,
        max_delta: k.max_delta,
        step_limit: k.step_limit,
        state_cap: c.state_cap as u64,
        env: ScverEnv::MostGeneral as u32,
        check_deadlock: c.check_deadlock,
    }
}

/// Message for the last failed call on this thread, or "" after a success.
/// Valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn scver_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses and elaborates `source`. On success `*out` owns a new handle.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scver_design_load(source: *const c_char, out: *mut *mut ScverDesign) -> ScverCode {
    guard(|| {
        if out.is_null() {
            return Err(Failure(ScverCode::NullArgument, "output pointer is null".into()));
        }
        *out = ptr::null_mut();
        let src = str_arg(source, "source")?;
        let ast = scl::parse(src).map_err(|e| Failure(ScverCode::Invalid, e.to_string()))?;
        let design = scl::elaborate(&ast).map_err(|e| Failure(ScverCode::Invalid, e.to_string()))?;
        *out = Box::into_raw(Box::new(ScverDesign { ast, design }));
        Ok(ScverCode::Ok)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `d` must come from [`scver_design_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scver_design_free(d: *mut ScverDesign) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Checks `property`, or assertions and deadlocks when it is null. Writes
/// the verdict JSON to `*json_out` and returns Ok, Violation or Bound.
///
/// # Safety
/// `d` must be a live handle; `property` null or NUL-terminated; `cfg` null
/// or valid; `json_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scver_check(
    d: *const ScverDesign,
    property: *const c_char,
    cfg: *const ScverConfig,
    json_out: *mut *mut c_char,
) -> ScverCode {
    guard(|| {
        out_arg(json_out)?;
        let h = design_arg(d)?;
        let prop = opt_str_arg(property, "property")?;
        let cfg = config_arg(cfg)?;
        let v = match prop {
            Some(p) => explorer::check_property(&h.design, p, &cfg)?,
            None => explorer::check_design(&h.design, &cfg)?,
        };
        put_string(json_out, json_text(&v.to_json(&h.design, &cfg)))?;
        Ok(if v.status.is_violation() {
            ScverCode::Violation
        } else if v.status.is_bound() {
            ScverCode::Bound
        } else {
            ScverCode::Ok
        })
    })
}

/// Emits Promela for `property`, or for all properties when null.
///
/// # Safety
/// As for [`scver_check`].
#[no_mangle]
pub unsafe extern "C" fn scver_emit_promela(
    d: *const ScverDesign,
    property: *const c_char,
    cfg: *const ScverConfig,
    pml_out: *mut *mut c_char,
) -> ScverCode {
    guard(|| {
        out_arg(pml_out)?;
        let h = design_arg(d)?;
        let prop = opt_str_arg(property, "property")?;
        let cfg = config_arg(cfg)?;
        let names: Vec<&str> = prop.into_iter().collect();
        let opts = EmitOptions { kernel: cfg.kernel, env: cfg.env };
        let pml = promela::emit_promela(&h.design, prop.map(|_| names.as_slice()), &opts)
            .map_err(|e| Failure(ScverCode::Invalid, e.to_string()))?;
        put_string(pml_out, pml)?;
        Ok(ScverCode::Ok)
    })
}

/// Learns an interface stub for `instance` with depth `k` and history `h`.
/// Writes the stub file contents to `*json_out`.
///
/// # Safety
/// `d` must be a live handle; `instance` NUL-terminated; `cfg` null or
/// valid; `json_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scver_learn_stub(
    d: *const ScverDesign,
    instance: *const c_char,
    k: u32,
    h: u32,
    cfg: *const ScverConfig,
    json_out: *mut *mut c_char,
) -> ScverCode {
    guard(|| {
        out_arg(json_out)?;
        let hd = design_arg(d)?;
        let inst = str_arg(instance, "instance")?;
        let cfg = config_arg(cfg)?;
        let lc = LearnConfig { kernel: cfg.kernel, state_cap: cfg.state_cap, cancel: None };
        let stub = integration::learn_stub(&hd.ast, inst, k as usize, h as usize, &lc)?;
        put_string(json_out, stub.to_json_string())?;
        Ok(ScverCode::Ok)
    })
}

/// Generates abstract tests for statement and toggle coverage. Writes
/// `{"tests": [...], "uncovered": [...]}` to `*json_out`.
///
/// # Safety
/// `d` must be a live handle; `cfg` null or valid; `json_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scver_testgen(
    d: *const ScverDesign,
    cfg: *const ScverConfig,
    json_out: *mut *mut c_char,
) -> ScverCode {
    guard(|| {
        out_arg(json_out)?;
        let h = design_arg(d)?;
        let cfg = config_arg(cfg)?;
        let k = Kernel::new(&h.design, cfg.kernel.clone(), cfg.env);
        let goals = testgen::enumerate_goals(&h.design, &[Criterion::Statements, Criterion::Toggles]);
        let g = testgen::generate_tests(&k, &goals, cfg.state_cap);
        put_string(json_out, json_text(&g.to_json()))?;
        Ok(ScverCode::Ok)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scver_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
