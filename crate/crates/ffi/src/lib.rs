//! C ABI for `rare_switch`.
//!
//! Matrices cross the boundary as dense row-major `double` arrays of length
//! `dim * dim`. Every function returns an [`RsStatus`]; on failure a message
//! is available from [`rs_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rare_switch::analysis::{find_counterexample, AnalysisError, SearchMode};
use rare_switch::linalg::{self, LinalgError, SpdMatrix, SymMatrix, Vector};
use rare_switch::noise::{NoiseBudget, NoiseError, NoiseKind, NoiseModel};
use rare_switch::switching::{update_count_bound, RuleKind, StreamConfig, SwitchError, SwitchRule, SwitchTracker};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotSymmetric = 4,
    NotPositiveDefinite = 5,
    BoundVacuous = 6,
    StreamFinished = 7,
    NotFound = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsRuleKind {
    Determinant = 0,
    Rayleigh = 1,
    RayleighLoewnerForm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsNoiseKind {
    None = 0,
    GaussianOrthogonalRescaled = 1,
    AdversarialDiagonal = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsSearchMode {
    Analytic = 0,
    Grid = 1,
}

/// Parameters of a switching stream.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RsStreamParams {
    pub dim: usize,
    pub horizon: usize,
    pub lambda: f64,
    pub eta: f64,
    /// Cap `L` on action norms.
    pub action_norm_cap: f64,
    pub alpha: f64,
    pub rule: RsRuleKind,
    pub noise: RsNoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

/// Outcome of one stream step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RsStepRecord {
    pub t: u64,
    /// Last update time, `t` itself if this step switched.
    pub tau: u64,
    pub statistic: f64,
    pub switched: bool,
}

/// Opaque switching stream.
pub struct RsStream {
    tracker: SwitchTracker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(RsStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: RsStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, msg.into()))
}

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        let status = match e {
            LinalgError::DimensionMismatch { .. } | LinalgError::NotSquare { .. } => RsStatus::DimensionMismatch,
            LinalgError::NotSymmetric { .. } => RsStatus::NotSymmetric,
            LinalgError::NotPositiveDefinite => RsStatus::NotPositiveDefinite,
            LinalgError::Empty | LinalgError::NonFinite => RsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<NoiseError> for Failure {
    fn from(e: NoiseError) -> Self {
        Failure(RsStatus::InvalidArgument, e.to_string())
    }
}

impl From<SwitchError> for Failure {
    fn from(e: SwitchError) -> Self {
        match e {
            SwitchError::Linalg(l) => l.into(),
            SwitchError::BoundVacuous { .. } => Failure(RsStatus::BoundVacuous, e.to_string()),
            SwitchError::DimensionMismatch { .. } => Failure(RsStatus::DimensionMismatch, e.to_string()),
            SwitchError::PerturbedNotPd { .. } => Failure(RsStatus::NotPositiveDefinite, e.to_string()),
            other => Failure(RsStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RsStatus::Internal
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return fail(RsStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .map_or_else(|| fail(RsStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn sym(dim: usize, p: *const f64, name: &str) -> FfiResult<SymMatrix> {
    if dim == 0 {
        return fail(RsStatus::InvalidArgument, "dim must be at least 1");
    }
    let len = dim
        .checked_mul(dim)
        .ok_or_else(|| Failure(RsStatus::InvalidArgument, "dim too large".into()))?;
    Ok(SymMatrix::from_row_major(dim, slice(p, len, name)?)?)
}

fn rule_kind(k: RsRuleKind) -> RuleKind {
    match k {
        RsRuleKind::Determinant => RuleKind::Determinant,
        RsRuleKind::Rayleigh => RuleKind::Rayleigh,
        RsRuleKind::RayleighLoewnerForm => RuleKind::RayleighLoewnerForm,
    }
}

fn noise_kind(k: RsNoiseKind) -> NoiseKind {
    match k {
        RsNoiseKind::None => NoiseKind::None,
        RsNoiseKind::GaussianOrthogonalRescaled => NoiseKind::GaussianOrthogonalRescaled,
        RsNoiseKind::AdversarialDiagonal => NoiseKind::AdversarialDiagonal,
    }
}

fn stream_config(p: &RsStreamParams) -> FfiResult<StreamConfig> {
    let budget = NoiseBudget::new(p.eta, p.lambda)?;
    let noise = NoiseModel::new(noise_kind(p.noise), p.sigma, p.seed)?;
    let rule = SwitchRule::new(rule_kind(p.rule), p.alpha)?;
    Ok(StreamConfig::new(
        p.dim,
        p.horizon,
        p.action_norm_cap,
        rule,
        noise,
        budget,
    )?)
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn rs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `λ_max(B^{-1/2} A B^{-1/2})` for symmetric `A` and positive definite `B`.
///
/// # Safety
/// `a` and `b` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_gen_rayleigh_max(dim: usize, a: *const f64, b: *const f64, out: *mut f64) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let a = sym(dim, a, "a")?;
        let b = SpdMatrix::new(sym(dim, b, "b")?)?;
        *out = linalg::gen_rayleigh_max(&a, &b)?;
        Ok(())
    })
}

/// `ln det A` for positive definite `A`.
///
/// # Safety
/// `a` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_log_det(dim: usize, a: *const f64, out: *mut f64) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let a = SpdMatrix::new(sym(dim, a, "a")?)?;
        *out = a.log_det();
        Ok(())
    })
}

/// Whether `A ⪰ B`, i.e. `λ_min(A − B) ≥ −tol`. A negative `tol` selects
/// the default tolerance `1e-10 (1 + ‖A‖ + ‖B‖)`.
///
/// # Safety
/// `a` and `b` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_loewner_dominates(
    dim: usize,
    a: *const f64,
    b: *const f64,
    tol: f64,
    out: *mut bool,
) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let a = sym(dim, a, "a")?;
        let b = sym(dim, b, "b")?;
        let tol = if tol < 0.0 {
            linalg::default_loewner_tol(&a, &b)
        } else {
            tol
        };
        *out = linalg::loewner_dominates(&a, &b, tol)?;
        Ok(())
    })
}

/// Bound on the number of updates after the first one. Fails with
/// `BoundVacuous` when `alpha <= c_rho`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_update_count_bound(params: *const RsStreamParams, out: *mut f64) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = params
            .as_ref()
            .ok_or_else(|| Failure(RsStatus::NullPointer, "params is null".into()))?;
        *out = update_count_bound(&stream_config(params)?)?;
        Ok(())
    })
}

/// Creates a stream; release it with [`rs_stream_free`].
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_new(params: *const RsStreamParams, out: *mut *mut RsStream) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let params = params
            .as_ref()
            .ok_or_else(|| Failure(RsStatus::NullPointer, "params is null".into()))?;
        let tracker = SwitchTracker::new(stream_config(params)?)?;
        *out = Box::into_raw(Box::new(RsStream { tracker }));
        Ok(())
    })
}

/// Evaluates the rule at the next step, then absorbs action `x` of length
/// `len`. On failure the stream is left unchanged.
///
/// # Safety
/// `stream` must come from [`rs_stream_new`]; `x` must point to `len`
/// doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_step(
    stream: *mut RsStream,
    x: *const f64,
    len: usize,
    out: *mut RsStepRecord,
) -> RsStatus {
    guard(|| {
        let stream = out_ref(stream, "stream")?;
        let out = out_ref(out, "out")?;
        let cfg = *stream.tracker.config();
        if stream.tracker.t() >= cfg.horizon as u64 {
            return fail(
                RsStatus::StreamFinished,
                format!("stream already ran {} steps", cfg.horizon),
            );
        }
        if len != cfg.dim {
            return fail(
                RsStatus::DimensionMismatch,
                format!("action has length {len}, expected {}", cfg.dim),
            );
        }
        let x = Vector::from_column_slice(slice(x, len, "x")?);
        let norm = x.norm();
        if !(norm.is_finite() && norm <= cfg.action_norm_cap * (1.0 + 1e-12)) {
            return fail(
                RsStatus::InvalidArgument,
                format!("action norm {norm} exceeds cap L = {}", cfg.action_norm_cap),
            );
        }
        let mut next = stream.tracker.clone();
        let rec = next.advance()?;
        next.absorb(&x)?;
        stream.tracker = next;
        *out = RsStepRecord {
            t: rec.t,
            tau: rec.tau,
            statistic: rec.statistic,
            switched: rec.switched,
        };
        Ok(())
    })
}

/// Updates so far, including the one at step 1.
///
/// # Safety
/// `stream` must come from [`rs_stream_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_update_count(stream: *const RsStream, out: *mut usize) -> RsStatus {
    guard(|| {
        let stream = stream
            .as_ref()
            .ok_or_else(|| Failure(RsStatus::NullPointer, "stream is null".into()))?;
        *out_ref(out, "out")? = stream.tracker.trace().m;
        Ok(())
    })
}

/// # Safety
/// `stream` must come from [`rs_stream_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rs_stream_free(stream: *mut RsStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// Verified counterexample as a text block with full-precision matrices.
/// Fails with `NotFound` when none exists (e.g. `eta = 0`). Release the
/// string with [`rs_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rs_counterexample_text(
    alpha: f64,
    eta: f64,
    lambda: f64,
    mode: RsSearchMode,
    out: *mut *mut c_char,
) -> RsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let budget = NoiseBudget::new(eta, lambda)?;
        let mode = match mode {
            RsSearchMode::Analytic => SearchMode::Analytic,
            RsSearchMode::Grid => SearchMode::Grid,
        };
        let c = match find_counterexample(alpha, &budget, mode) {
            Ok(c) => c,
            Err(AnalysisError::NoCounterexample { reason }) => return fail(RsStatus::NotFound, reason),
            Err(e) => return fail(RsStatus::InvalidArgument, e.to_string()),
        };
        c.verify().map_err(|e| Failure(RsStatus::Internal, e.to_string()))?;
        *out = CString::new(c.to_text())
            .map_err(|_| Failure(RsStatus::Internal, "text contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn rs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
