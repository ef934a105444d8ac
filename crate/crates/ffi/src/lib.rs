//! C ABI over the `warmqaoa` core.
//!
//! Every fallible call returns a [`WqStatus`]; on failure a message is
//! available from [`wq_last_error`] until the next call on the same thread.
//! Instances are opaque handles created by `wq_instance_*` constructors and
//! released with [`wq_instance_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use warmqaoa::experiment::{run_single, ExperimentConfig, InstanceSource, Scoring, Variant};
use warmqaoa::metrics::brute_force_spectrum;
use warmqaoa::relaxation::relax;
use warmqaoa::{appendix_instance, Error, PortfolioInstance};

/// Result codes shared by every function in this library.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInstance = 3,
    Parse = 4,
    TooManyQubits = 5,
    Computation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WqVariant {
    Standard = 0,
    Warmstart = 1,
    /// Uses the `delta0` / `delta1` arguments of [`wq_run_qaoa`].
    Preprocessed = 2,
}

/// Opaque portfolio instance.
pub struct WqInstance {
    inner: PortfolioInstance,
}

/// Extremes of the unpenalized cost over selections meeting the budget.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WqSpectrum {
    pub fc_min: f64,
    pub fc_max: f64,
    /// Basis index of the optimum; bit `i` is asset `i`.
    pub argmin_index: u64,
    pub feasible_count: u64,
    /// Number of selections tied with the optimum.
    pub optimal_count: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WqQaoaOptions {
    pub restarts: u32,
    pub max_evals_per_layer: u32,
    pub shots: u64,
    pub seed: u64,
    /// Nonzero scores the exact output distribution instead of sampled shots.
    pub exact_scoring: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WqQaoaResult {
    pub approx_ratio: f64,
    pub ground_state_probability: f64,
    pub expectation: f64,
    /// Free qubits after rounding, or -1 for variants without rounding.
    pub n_free: i64,
    /// Objective evaluations at the requested depth.
    pub evaluations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WqStatus {
    match e {
        Error::TooManyQubits { .. } => WqStatus::TooManyQubits,
        Error::InvalidInstance(_) | Error::NotConvex { .. } | Error::InfeasibleOptimum { .. } => {
            WqStatus::InvalidInstance
        }
        Error::Json(_) => WqStatus::Parse,
        Error::LengthMismatch { .. } | Error::InvalidArgument(_) | Error::Config(_) => {
            WqStatus::InvalidArgument
        }
        _ => WqStatus::Computation,
    }
}

/// Clears the last error, runs `f`, and converts errors and panics to codes.
fn guard(f: impl FnOnce() -> Result<(), (WqStatus, String)>) -> WqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            WqStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (WqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WqStatus, String) {
    (WqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn instance_ref<'a>(
    p: *const WqInstance,
) -> Result<&'a PortfolioInstance, (WqStatus, String)> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("instance"))
}

unsafe fn bits_slice<'a>(bits: *const u8, len: usize) -> Result<&'a [u8], (WqStatus, String)> {
    if bits.is_null() {
        return Err(null("bits"));
    }
    Ok(std::slice::from_raw_parts(bits, len))
}

fn boxed(inst: PortfolioInstance) -> *mut WqInstance {
    Box::into_raw(Box::new(WqInstance { inner: inst }))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// owned by the library and valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn wq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses an instance from NUL-terminated JSON.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_instance_from_json(
    json: *const c_char,
    out: *mut *mut WqInstance,
) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (WqStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let inst = PortfolioInstance::from_json_str(text).map_err(core_err)?;
        *out = boxed(inst);
        Ok(())
    })
}

/// The bundled ten-asset DAX instance.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wq_instance_appendix(out: *mut *mut WqInstance) -> WqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = boxed(appendix_instance());
        Ok(())
    })
}

/// Releases an instance; null is ignored.
///
/// # Safety
/// `inst` must come from a `wq_instance_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wq_instance_free(inst: *mut WqInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wq_instance_n_assets(
    inst: *const WqInstance,
    out: *mut usize,
) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = inst.n_assets();
        Ok(())
    })
}

/// Portfolio cost without the budget penalty.
///
/// # Safety
/// `bits` must point to `len` bytes, each 0 or 1; `inst` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wq_portfolio_cost(
    inst: *const WqInstance,
    bits: *const u8,
    len: usize,
    out: *mut f64,
) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        let bits = bits_slice(bits, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = inst.portfolio_cost(bits).map_err(core_err)?;
        Ok(())
    })
}

/// Portfolio cost plus the quadratic budget penalty.
///
/// # Safety
/// Same contract as [`wq_portfolio_cost`].
#[no_mangle]
pub unsafe extern "C" fn wq_penalized_cost(
    inst: *const WqInstance,
    bits: *const u8,
    len: usize,
    out: *mut f64,
) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        let bits = bits_slice(bits, len)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = inst.penalized_cost(bits).map_err(core_err)?;
        Ok(())
    })
}

/// Solves the continuous relaxation; writes `len` values into `x_out`.
/// `objective_out` may be null.
///
/// # Safety
/// `x_out` must have room for `len` doubles, `len` equal to the asset count.
#[no_mangle]
pub unsafe extern "C" fn wq_relax(
    inst: *const WqInstance,
    x_out: *mut f64,
    len: usize,
    objective_out: *mut f64,
) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        if x_out.is_null() {
            return Err(null("x_out"));
        }
        if len != inst.n_assets() {
            return Err(core_err(Error::LengthMismatch {
                expected: inst.n_assets(),
                got: len,
            }));
        }
        let sol = relax(&inst.to_qubo()).map_err(core_err)?;
        std::slice::from_raw_parts_mut(x_out, len).copy_from_slice(&sol.x_star);
        if let Some(o) = objective_out.as_mut() {
            *o = sol.objective;
        }
        Ok(())
    })
}

/// Brute-force spectrum over all budget-feasible selections.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wq_spectrum(inst: *const WqInstance, out: *mut WqSpectrum) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = brute_force_spectrum(inst).map_err(core_err)?;
        *out = WqSpectrum {
            fc_min: s.fc_min,
            fc_max: s.fc_max,
            argmin_index: s.argmin_index as u64,
            feasible_count: s.feasible_count as u64,
            optimal_count: s.optimal_indices.len() as u64,
        };
        Ok(())
    })
}

/// Defaults: 10 restarts, 2000 evaluations per layer, 1000 shots, seed 0, shot scoring.
#[no_mangle]
pub extern "C" fn wq_qaoa_options_default() -> WqQaoaOptions {
    let cfg = ExperimentConfig::new(InstanceSource::Fixture { path: None });
    WqQaoaOptions {
        restarts: cfg.optimizer.restarts as u32,
        max_evals_per_layer: cfg.optimizer.max_evals_per_layer as u32,
        shots: cfg.shots,
        seed: cfg.seed,
        exact_scoring: 0,
    }
}

/// Optimizes depths `0..=depth` with warm-seeded restarts and scores depth
/// `depth` on the full problem. `options` may be null for the defaults;
/// `delta0`/`delta1` are read only for [`WqVariant::Preprocessed`].
///
/// # Safety
/// `inst` and `out` must be valid pointers; `options` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn wq_run_qaoa(
    inst: *const WqInstance,
    variant: WqVariant,
    delta0: f64,
    delta1: f64,
    depth: usize,
    options: *const WqQaoaOptions,
    out: *mut WqQaoaResult,
) -> WqStatus {
    guard(|| {
        let inst = instance_ref(inst)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| wq_qaoa_options_default());
        let mut cfg = ExperimentConfig::new(InstanceSource::Fixture { path: None });
        cfg.variants = vec![match variant {
            WqVariant::Standard => Variant::Standard,
            WqVariant::Warmstart => Variant::Warmstart,
            WqVariant::Preprocessed => Variant::Preprocessed { delta0, delta1 },
        }];
        cfg.depths = (0..=depth).collect();
        cfg.shots = opts.shots;
        cfg.seed = opts.seed;
        cfg.scoring = if opts.exact_scoring != 0 {
            Scoring::Exact
        } else {
            Scoring::Shots
        };
        cfg.optimizer.restarts = opts.restarts as usize;
        cfg.optimizer.max_evals_per_layer = opts.max_evals_per_layer as usize;
        let cells = run_single(inst.clone(), 0, &cfg).map_err(core_err)?;
        let cell = cells.last().expect("at least depth 0 is run");
        if let Some(msg) = &cell.error {
            return Err((WqStatus::Computation, msg.clone()));
        }
        *out = WqQaoaResult {
            approx_ratio: cell.r_mean.unwrap_or(f64::NAN),
            ground_state_probability: cell.probability.unwrap_or(f64::NAN),
            expectation: cell.expectation.unwrap_or(f64::NAN),
            n_free: cell.n_free.map_or(-1, |n| n as i64),
            evaluations: cell.optimizer.as_ref().map_or(0, |m| m.evaluations as u64),
        };
        Ok(())
    })
}
