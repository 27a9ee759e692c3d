//! C interface to the nphoton engine.
//!
//! Models are opaque handles created by `nphoton_model_*` and released with
//! [`nphoton_model_free`]. Every fallible call returns an [`NphotonStatus`];
//! on failure a description is available from [`nphoton_last_error`] on the
//! same thread until the next failing call. Panics are caught at the
//! boundary and reported as `NPHOTON_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nphoton::liouville::build_liouvillian;
use nphoton::models::{jaynes_cummings, jc_ladder, thermal_cavity, JCParams, System};
use nphoton::oracle::{g2_zero_delay, FilterSpec};
use nphoton::regression::DEFAULT_RTOL;
use nphoton::sensors::{attach_sensors_with, g2_signed_delays, gn_zero_delay, sensor_spectrum_point, SensorOptions, SensorSpec};
use nphoton::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NphotonStatus {
    Ok = 0,
    NullPointer = 1,
    /// Parameters rejected before any computation.
    InvalidArgument = 2,
    /// The engine failed while computing.
    ComputationFailed = 3,
    /// Caller-provided buffer is too small; the required size is reported.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque model handle.
pub struct NphotonModel {
    system: System,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn classify(e: &Error) -> NphotonStatus {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDelays(_)
        | Error::ThermalDivergence
        | Error::TransitionOverdamped(_)
        | Error::SensorBackAction { .. } => NphotonStatus::InvalidArgument,
        _ => NphotonStatus::ComputationFailed,
    }
}

/// Runs `f` behind the panic guard and records errors.
fn guard(f: impl FnOnce() -> Result<(), (NphotonStatus, String)>) -> NphotonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NphotonStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            NphotonStatus::Panic
        }
    }
}

fn engine(e: Error) -> (NphotonStatus, String) {
    (classify(&e), e.to_string())
}

fn null(what: &str) -> (NphotonStatus, String) {
    (NphotonStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `n` readable values.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (NphotonStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or point to `n` writable values.
unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], (NphotonStatus, String)> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

/// # Safety
/// `m` must be null or a live handle from this library.
unsafe fn model<'a>(m: *const NphotonModel) -> Result<&'a NphotonModel, (NphotonStatus, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

fn options(chi: f64) -> SensorOptions {
    SensorOptions {
        chi,
        ..Default::default()
    }
}

/// Message of the last failure on this thread, empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nphoton_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nphoton_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
unsafe fn store(system: Result<System, Error>, out: *mut *mut NphotonModel) -> Result<(), (NphotonStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = ptr::null_mut();
    let system = system.map_err(engine)?;
    *out = Box::into_raw(Box::new(NphotonModel { system }));
    Ok(())
}

/// Dissipative Jaynes–Cummings model with `g = 1`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nphoton_model_jc(
    gamma_a: f64,
    gamma_s: f64,
    p_s: f64,
    n_max: usize,
    out: *mut *mut NphotonModel,
) -> NphotonStatus {
    guard(|| store(jaynes_cummings(&JCParams::new(gamma_a, gamma_s, p_s, n_max)), out))
}

/// Incoherently pumped cavity.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn nphoton_model_thermal(p_a: f64, gamma_a: f64, n_max: usize, out: *mut *mut NphotonModel) -> NphotonStatus {
    guard(|| store(thermal_cavity(p_a, gamma_a, n_max), out))
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nphoton_model_free(m: *mut NphotonModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Physical spectrum at `n` frequencies through one sensor of width `gamma`.
/// Starved frequencies give 0.
///
/// # Safety
/// `omegas` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn nphoton_sensor_spectrum(
    m: *const NphotonModel,
    omegas: *const f64,
    n: usize,
    gamma: f64,
    chi: f64,
    out: *mut f64,
) -> NphotonStatus {
    guard(|| {
        let sys = &model(m)?.system;
        let omegas = slice(omegas, n, "omegas")?;
        let out = slice_mut(out, n, "out")?;
        for (w, o) in omegas.iter().zip(out.iter_mut()) {
            *o = sensor_spectrum_point(&sys.me, &sys.probe, SensorSpec::new(*w, gamma), &options(chi))
                .map_err(engine)?
                .value;
        }
        Ok(())
    })
}

/// Zero-delay correlation of `n` sensors at `(omegas[k], gammas[k])`.
///
/// # Safety
/// `omegas` and `gammas` must hold `n` values, `out` one.
#[no_mangle]
pub unsafe extern "C" fn nphoton_gn_zero_delay(
    m: *const NphotonModel,
    omegas: *const f64,
    gammas: *const f64,
    n: usize,
    chi: f64,
    out: *mut f64,
) -> NphotonStatus {
    guard(|| {
        let sys = &model(m)?.system;
        let specs: Vec<SensorSpec> = slice(omegas, n, "omegas")?
            .iter()
            .zip(slice(gammas, n, "gammas")?)
            .map(|(w, g)| SensorSpec::new(*w, *g))
            .collect();
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ss = attach_sensors_with(&sys.me, &sys.probe, &specs, &options(chi)).map_err(engine)?;
        *out = gn_zero_delay(&ss).map_err(engine)?.value;
        Ok(())
    })
}

/// Two-sensor correlation at `n` signed delays (positive: sensor 2 after
/// sensor 1).
///
/// # Safety
/// `taus` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn nphoton_g2_delays(
    m: *const NphotonModel,
    omega1: f64,
    gamma1: f64,
    omega2: f64,
    gamma2: f64,
    taus: *const f64,
    n: usize,
    chi: f64,
    out: *mut f64,
) -> NphotonStatus {
    guard(|| {
        let sys = &model(m)?.system;
        let taus = slice(taus, n, "taus")?;
        let out = slice_mut(out, n, "out")?;
        let specs = [SensorSpec::new(omega1, gamma1), SensorSpec::new(omega2, gamma2)];
        let ss = attach_sensors_with(&sys.me, &sys.probe, &specs, &options(chi)).map_err(engine)?;
        for (o, r) in out.iter_mut().zip(g2_signed_delays(&ss, taus, DEFAULT_RTOL).map_err(engine)?) {
            *o = r.value;
        }
        Ok(())
    })
}

/// Zero-delay two-photon correlation from the integral-method oracle.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nphoton_g2_oracle(
    m: *const NphotonModel,
    omega1: f64,
    gamma1: f64,
    omega2: f64,
    gamma2: f64,
    out: *mut f64,
) -> NphotonStatus {
    guard(|| {
        let sys = &model(m)?.system;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f1 = FilterSpec::new(omega1, gamma1).map_err(engine)?;
        let f2 = FilterSpec::new(omega2, gamma2).map_err(engine)?;
        let l = build_liouvillian(&sys.me).map_err(engine)?;
        let rho = l.steady_state().map_err(engine)?;
        *out = g2_zero_delay(&l, &rho, &sys.probe, f1, f2).map_err(engine)?;
        Ok(())
    })
}

/// Jaynes–Cummings transitions up to `rungs`. Writes at most `capacity`
/// frequency/linewidth pairs and always stores the total in `count`; a
/// short buffer yields `NPHOTON_STATUS_BUFFER_TOO_SMALL`.
///
/// # Safety
/// `frequencies` and `linewidths` must hold `capacity` values; `count` must
/// be valid.
#[no_mangle]
pub unsafe extern "C" fn nphoton_ladder(
    gamma_a: f64,
    gamma_s: f64,
    rungs: u32,
    frequencies: *mut f64,
    linewidths: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> NphotonStatus {
    guard(|| {
        let count = count.as_mut().ok_or_else(|| null("count"))?;
        let ts = jc_ladder(&JCParams::new(gamma_a, gamma_s, 0.0, 1), rungs).map_err(engine)?;
        *count = ts.len();
        if ts.len() > capacity {
            return Err((NphotonStatus::BufferTooSmall, format!("{} transitions, capacity {capacity}", ts.len())));
        }
        let f = slice_mut(frequencies, ts.len(), "frequencies")?;
        let w = slice_mut(linewidths, ts.len(), "linewidths")?;
        for (k, t) in ts.iter().enumerate() {
            f[k] = t.frequency;
            w[k] = t.linewidth;
        }
        Ok(())
    })
}
