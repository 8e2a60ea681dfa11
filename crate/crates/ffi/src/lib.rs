//! C interface to the `ssav` integrator.
//!
//! Every object crosses the boundary as an opaque pointer created by a `*_new` or
//! `*_from_*` function and released by the matching `*_free`. Every fallible function
//! returns an [`SsavStatus`]; on failure the message is available from
//! [`ssav_last_error_message`] on the same thread until the next failing call.
//!
//! Vectors are passed as `(pointer, length)` pairs and the length must equal the model
//! dimension.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ssav::config::{LoadedModel, ModelConfig};
use ssav::noise::{CoupledNoise, NoiseSource};
use ssav::{AugmentedState, ModelSpec, NoisePlan, SsavError, StepNoise};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The auxiliary-variable radicand fell below 1; C_H is too small.
    AssumptionViolation = 3,
    /// Malformed JSON or an unknown potential.
    Parse = 4,
    NoConvergence = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
    Internal = 7,
}

/// A validated model: potential, parameters and noise matrix.
pub struct SsavModel {
    inner: LoadedModel,
}

/// An augmented state (v, u, ρ).
pub struct SsavState {
    inner: AugmentedState,
}

/// A single path advanced with the scheme and its own keyed noise stream.
pub struct SsavSampler {
    model: ModelSpec,
    h: f64,
    state: AugmentedState,
    noise: CoupledNoise,
    buf: StepNoise,
    steps: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(SsavStatus, String);

impl From<SsavError> for Fail {
    fn from(e: SsavError) -> Self {
        let status = match &e {
            SsavError::AssumptionViolation { .. } => SsavStatus::AssumptionViolation,
            SsavError::NoConvergence { .. } => SsavStatus::NoConvergence,
            SsavError::Json(_) | SsavError::Config(_) => SsavStatus::Parse,
            SsavError::InvalidModel(_) | SsavError::InvalidArgument(_) | SsavError::NonFinite { .. } => {
                SsavStatus::InvalidArgument
            }
            _ => SsavStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SsavStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(SsavStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsavStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SsavStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn as_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, dim: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len != dim {
        return Err(invalid(format!("{what} has length {len}, model dimension is {dim}")));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, dim: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len != dim {
        return Err(invalid(format!("{what} has length {len}, model dimension is {dim}")));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn export_state(s: &AugmentedState, v_out: *mut f64, u_out: *mut f64, len: usize, rho_out: *mut f64) -> Result<(), Fail> {
    let dim = s.dim();
    slice_mut(v_out, len, dim, "v_out")?.copy_from_slice(&s.v);
    slice_mut(u_out, len, dim, "u_out")?.copy_from_slice(&s.u);
    write_out(rho_out, s.rho, "rho_out")
}

/// Message of the last failing call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn ssav_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from a JSON configuration string.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssav_model_from_json(json: *const c_char, out: *mut *mut SsavModel) -> SsavStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(SsavStatus::Parse, format!("config is not UTF-8: {e}")))?;
        let inner = ModelConfig::from_json(text)?.build()?;
        out.write(Box::into_raw(Box::new(SsavModel { inner })));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ssav_model_from_json`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssav_model_free(model: *mut SsavModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dimension m of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssav_model_dim(model: *const SsavModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.model.dim())
}

/// H(v, u) = |v|²/2 + κΦ(u).
///
/// # Safety
/// `v` and `u` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_hamiltonian(
    model: *const SsavModel,
    v: *const f64,
    u: *const f64,
    len: usize,
    out: *mut f64,
) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let v = slice(v, len, m.dim(), "v")?;
        let u = slice(u, len, m.dim(), "u")?;
        write_out(out, ssav::hamiltonian(m, v, u), "out")
    })
}

/// ρ = √(κΦ(u) + C_H − α|u|²); fails with `AssumptionViolation` when the radicand is below 1.
///
/// # Safety
/// `u` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_rho_init(model: *const SsavModel, u: *const f64, len: usize, out: *mut f64) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let u = slice(u, len, m.dim(), "u")?;
        write_out(out, ssav::rho_init(m, u)?, "out")
    })
}

/// New state (v, u) with ρ initialized from u.
///
/// # Safety
/// `v` and `u` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_state_new(
    model: *const SsavModel,
    v: *const f64,
    u: *const f64,
    len: usize,
    out: *mut *mut SsavState,
) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let v = slice(v, len, m.dim(), "v")?;
        let u = slice(u, len, m.dim(), "u")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = AugmentedState::initial(m, v.to_vec(), u.to_vec())?;
        out.write(Box::into_raw(Box::new(SsavState { inner })));
        Ok(())
    })
}

/// Copies the state into caller buffers of length `len`.
///
/// # Safety
/// Buffers must hold `len` doubles; `rho_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_state_get(
    state: *const SsavState,
    v_out: *mut f64,
    u_out: *mut f64,
    len: usize,
    rho_out: *mut f64,
) -> SsavStatus {
    guard(|| export_state(&as_ref(state, "state")?.inner, v_out, u_out, len, rho_out))
}

/// # Safety
/// `state` must come from [`ssav_state_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssav_state_free(state: *mut SsavState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Modified energy |v|²/2 + α|u|² + ρ² of a state.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_modified_energy(model: *const SsavModel, state: *const SsavState, out: *mut f64) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let s = &as_ref(state, "state")?.inner;
        if s.dim() != m.dim() {
            return Err(invalid("state and model dimensions differ"));
        }
        write_out(out, ssav::modified_energy(m, s), "out")
    })
}

/// Replaces the state with the explicit energy-conserving substep of size `h`.
///
/// # Safety
/// Handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ssav_deterministic_substep(model: *const SsavModel, state: *mut SsavState, h: f64) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let s = as_mut(state, "state")?;
        if s.inner.dim() != m.dim() {
            return Err(invalid("state and model dimensions differ"));
        }
        s.inner = ssav::ssav_deterministic_substep(m, &s.inner, h)?;
        Ok(())
    })
}

/// One full step with caller-supplied raw noise: `ou_integral` is ∫ e^{−γ(t_{n+1}−s)} dW_s
/// and `wiener_increment` is the Brownian increment, both before the noise matrix is applied.
///
/// # Safety
/// Handles must be live; noise buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssav_step(
    model: *const SsavModel,
    state: *mut SsavState,
    h: f64,
    ou_integral: *const f64,
    wiener_increment: *const f64,
    len: usize,
) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let s = as_mut(state, "state")?;
        let noise = StepNoise {
            ou_integral: slice(ou_integral, len, m.dim(), "ou_integral")?.to_vec(),
            wiener_increment: slice(wiener_increment, len, m.dim(), "wiener_increment")?.to_vec(),
        };
        if s.inner.dim() != m.dim() {
            return Err(invalid("state and model dimensions differ"));
        }
        s.inner = ssav::ssav_step(m, &s.inner, h, &noise)?;
        Ok(())
    })
}

/// Sampler starting from a copy of `state`, drawing noise keyed by `(seed, path)`.
/// Two samplers with the same key and stepsize produce bitwise identical paths.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_sampler_new(
    model: *const SsavModel,
    state: *const SsavState,
    h: f64,
    seed: u64,
    path: u64,
    out: *mut *mut SsavSampler,
) -> SsavStatus {
    guard(|| {
        let m = &as_ref(model, "model")?.inner.model;
        let s = &as_ref(state, "state")?.inner;
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(format!("stepsize must be positive and finite, got {h}")));
        }
        if s.dim() != m.dim() {
            return Err(invalid("state and model dimensions differ"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        // the stream is read sequentially, so the nominal interval count only sets the horizon label
        let plan = NoisePlan::uniform(seed, path, m.gamma(), m.dim(), h, u64::MAX >> 16);
        let sampler = SsavSampler {
            model: m.clone(),
            h,
            state: s.clone(),
            noise: CoupledNoise::direct(&plan),
            buf: StepNoise::zeros(m.dim()),
            steps: 0,
        };
        out.write(Box::into_raw(Box::new(sampler)));
        Ok(())
    })
}

/// Advances the sampler by `n_steps`. On failure the state is left at the last good step.
///
/// # Safety
/// `sampler` must be live.
#[no_mangle]
pub unsafe extern "C" fn ssav_sampler_advance(sampler: *mut SsavSampler, n_steps: u64) -> SsavStatus {
    guard(|| {
        let s = as_mut(sampler, "sampler")?;
        for _ in 0..n_steps {
            s.noise.fill(&mut s.buf);
            let next = ssav::ssav_step(&s.model, &s.state, s.h, &s.buf).map_err(|e| {
                let mut f = Fail::from(e);
                f.1 = format!("{} (step {})", f.1, s.steps + 1);
                f
            })?;
            s.state = next;
            s.steps += 1;
        }
        Ok(())
    })
}

/// Steps taken so far, or 0 for a null handle.
///
/// # Safety
/// `sampler` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ssav_sampler_steps(sampler: *const SsavSampler) -> u64 {
    sampler.as_ref().map_or(0, |s| s.steps)
}

/// Copies the sampler's current state into caller buffers.
///
/// # Safety
/// Buffers must hold `len` doubles; `rho_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssav_sampler_state(
    sampler: *const SsavSampler,
    v_out: *mut f64,
    u_out: *mut f64,
    len: usize,
    rho_out: *mut f64,
) -> SsavStatus {
    guard(|| export_state(&as_ref(sampler, "sampler")?.state, v_out, u_out, len, rho_out))
}

/// # Safety
/// `sampler` must come from [`ssav_sampler_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssav_sampler_free(sampler: *mut SsavSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}
