//! C ABI over the region tracer and the binned-code simulator.
//!
//! Objects are opaque handles created and released by this library. Every
//! fallible call returns an [`MsStatus`]; on failure the message is kept per
//! thread and read with [`ms_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use macstate::binsim::{self, SimError, SimParams};
use macstate::macmodel::{self, AuxPolicy, CoopConfig, InputConstraint, MacChannel, Mode};
use macstate::optimizer::{self, OptError, SearchConfig};
use macstate::rateregion::{region_contains, RatePoint, RateRegion};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    InvalidArgument = 1,
    Infeasible = 2,
    ResourceGuard = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsMode {
    OneWay = 0,
    TwoWay = 1,
    Split = 2,
    StateOnly = 3,
    MessageOnly = 4,
}

impl From<MsMode> for Mode {
    fn from(m: MsMode) -> Mode {
        match m {
            MsMode::OneWay => Mode::OneWay,
            MsMode::TwoWay => Mode::TwoWay,
            MsMode::Split => Mode::Split,
            MsMode::StateOnly => Mode::StateOnly,
            MsMode::MessageOnly => Mode::MessageOnly,
        }
    }
}

/// Cooperation setting. Rates that the mode does not use must be zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsCoop {
    pub mode: MsMode,
    pub c12: f64,
    pub c21: f64,
    pub c12m: f64,
    pub c12s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsSearch {
    pub u_card: usize,
    pub v_card: usize,
    pub directions: usize,
    pub restarts: usize,
    pub local_steps: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MsSimResult {
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub ci95_halfwidth: f64,
    pub coverage_fail: usize,
    pub decoder_errors: usize,
}

/// Channel plus its input-cost caps.
pub struct MsChannel {
    channel: MacChannel,
    constraint: InputConstraint,
}

/// Traced region with its witnesses.
pub struct MsRegion {
    region: RateRegion,
    coop: CoopConfig,
    witnesses: Vec<AuxPolicy>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(MsStatus, String);

impl From<OptError> for Fail {
    fn from(e: OptError) -> Self {
        let s = match e {
            OptError::Infeasible(_) => MsStatus::Infeasible,
            _ => MsStatus::InvalidArgument,
        };
        Fail(s, e.to_string())
    }
}

impl From<SimError> for Fail {
    fn from(e: SimError) -> Self {
        let s = match e {
            SimError::MemoryGuard(_) => MsStatus::ResourceGuard,
            _ => MsStatus::InvalidArgument,
        };
        Fail(s, e.to_string())
    }
}

impl From<macmodel::ModelError> for Fail {
    fn from(e: macmodel::ModelError) -> Self {
        Fail(MsStatus::InvalidArgument, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MsStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MsStatus::Ok
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            MsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MsStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn give_string(s: String, out: &mut *mut c_char) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail(MsStatus::InvalidArgument, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Defaults used by the command-line tool.
#[no_mangle]
pub extern "C" fn ms_search_default() -> MsSearch {
    let d = SearchConfig::default();
    MsSearch {
        u_card: d.u_card,
        v_card: d.v_card,
        directions: d.weight_count,
        restarts: d.restarts,
        local_steps: d.local_steps,
        seed: d.seed,
    }
}

/// Switch channel with flip probability `pz`. Pass a negative cap to leave
/// that encoder unconstrained.
///
/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn ms_channel_switch_bsc(
    pz: f64,
    p1: f64,
    p2: f64,
    out: *mut *mut MsChannel,
) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let channel = macmodel::build_switch_bsc(pz)?;
        let constraint = InputConstraint {
            p1: p1.max(0.0),
            p2: p2.max(0.0),
            active1: p1 >= 0.0,
            active2: p2 >= 0.0,
        };
        constraint.validate()?;
        *out = Box::into_raw(Box::new(MsChannel {
            channel,
            constraint,
        }));
        Ok(())
    })
}

/// Channel from the JSON spec format accepted by the command-line tool.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_channel_from_json(
    json: *const c_char,
    out: *mut *mut MsChannel,
) -> MsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (channel, constraint) = macmodel::parse_channel_spec(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(MsChannel {
            channel,
            constraint,
        }));
        Ok(())
    })
}

/// # Safety
/// `ch` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ms_channel_free(ch: *mut MsChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// # Safety
/// `ch` must be a live channel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_trace_region(
    ch: *const MsChannel,
    coop: MsCoop,
    search: MsSearch,
    out: *mut *mut MsRegion,
) -> MsStatus {
    guard(|| {
        let ch = ref_arg(ch, "ch")?;
        let out = out_arg(out, "out")?;
        let coop = CoopConfig {
            mode: coop.mode.into(),
            c12: coop.c12,
            c21: coop.c21,
            c12m: coop.c12m,
            c12s: coop.c12s,
        };
        coop.validate()?;
        let cfg = SearchConfig {
            u_card: search.u_card,
            v_card: search.v_card,
            weight_count: search.directions,
            restarts: search.restarts,
            local_steps: search.local_steps,
            seed: search.seed,
            ..SearchConfig::default()
        };
        let res = optimizer::trace_boundary(&ch.channel, &coop, &ch.constraint, &cfg)?;
        *out = Box::into_raw(Box::new(MsRegion {
            region: res.region,
            coop,
            witnesses: res.witnesses,
        }));
        Ok(())
    })
}

/// Number of frontier vertices; 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live region handle.
#[no_mangle]
pub unsafe extern "C" fn ms_region_len(r: *const MsRegion) -> usize {
    r.as_ref().map_or(0, |r| r.region.boundary.len())
}

/// # Safety
/// `r` must be a live region handle; `r1`, `r2` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ms_region_point(
    r: *const MsRegion,
    index: usize,
    r1: *mut f64,
    r2: *mut f64,
) -> MsStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        let (o1, o2) = (out_arg(r1, "r1")?, out_arg(r2, "r2")?);
        let p = r.region.boundary.get(index).ok_or_else(|| {
            Fail(
                MsStatus::InvalidArgument,
                format!("index {index} out of range 0..{}", r.region.boundary.len()),
            )
        })?;
        *o1 = p.r1;
        *o2 = p.r2;
        Ok(())
    })
}

/// Writes 1 to `inside` when (r1, r2) lies in the region up to `tol`, else 0.
///
/// # Safety
/// `r` must be a live region handle; `inside` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_region_contains(
    r: *const MsRegion,
    r1: f64,
    r2: f64,
    tol: f64,
    inside: *mut i32,
) -> MsStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        let inside = out_arg(inside, "inside")?;
        if !(tol >= 0.0) {
            return Err(Fail(MsStatus::InvalidArgument, "tol must be >= 0".into()));
        }
        *inside = region_contains(&r.region, RatePoint { r1, r2 }, tol) as i32;
        Ok(())
    })
}

/// Frontier CSV. Release with [`ms_string_free`].
///
/// # Safety
/// `r` must be a live region handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_region_to_csv(r: *const MsRegion, out: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        give_string(r.region.to_csv(&r.coop), out_arg(out, "out")?)
    })
}

/// Policy achieving frontier vertex `index`, as JSON. Release with
/// [`ms_string_free`].
///
/// # Safety
/// `r` must be a live region handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_region_witness_json(
    r: *const MsRegion,
    index: usize,
    out: *mut *mut c_char,
) -> MsStatus {
    guard(|| {
        let r = ref_arg(r, "r")?;
        let w = r.witnesses.get(index).ok_or_else(|| {
            Fail(MsStatus::InvalidArgument, format!("no witness {index}"))
        })?;
        let json = serde_json::to_string(w).expect("policy serializes");
        give_string(json, out_arg(out, "out")?)
    })
}

/// # Safety
/// `s` must come from this library. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `r` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ms_region_free(r: *mut MsRegion) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Monte Carlo error rate of the binned code at blocklength `n` using the
/// policy given as JSON.
///
/// # Safety
/// `ch` must be a live channel handle, `policy_json` a NUL-terminated
/// string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_simulate(
    ch: *const MsChannel,
    policy_json: *const c_char,
    n: usize,
    r1: f64,
    r2: f64,
    c12: f64,
    eps: f64,
    trials: usize,
    seed: u64,
    out: *mut MsSimResult,
) -> MsStatus {
    guard(|| {
        let ch = ref_arg(ch, "ch")?;
        let out = out_arg(out, "out")?;
        let policy: AuxPolicy = serde_json::from_str(str_arg(policy_json, "policy_json")?)
            .map_err(|e| Fail(MsStatus::InvalidArgument, format!("policy: {e}")))?;
        let p = SimParams {
            channel: ch.channel.clone(),
            policy,
            n,
            r1,
            r2,
            c12,
            eps,
            trials,
            seed,
        };
        let r = binsim::estimate_error(&p)?;
        *out = MsSimResult {
            trials: r.trials,
            errors: r.errors,
            error_rate: r.error_rate,
            ci95_halfwidth: r.ci95_halfwidth,
            coverage_fail: r.breakdown.coverage_fail,
            decoder_errors: r.breakdown.decoder_side(),
        };
        Ok(())
    })
}
