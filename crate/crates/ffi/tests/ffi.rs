use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use nphoton::liouville::build_liouvillian;
use nphoton::models::{jaynes_cummings, jc_ladder, ladder_linewidth, rabi, JCParams};
use nphoton::oracle::{filtered_spectrum, g2_zero_delay, FilterSpec};
use nphoton_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nphoton_last_error()) }.to_string_lossy().into_owned()
}

fn jc(n_max: usize) -> *mut NphotonModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { nphoton_model_jc(0.1, 0.01, 0.01, n_max, &mut m) }, NphotonStatus::Ok);
    assert!(!m.is_null());
    m
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(nphoton_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn spectrum_agrees_with_oracle() {
    let p = JCParams::new(0.1, 0.01, 0.01, 4);
    let gamma = ladder_linewidth(&p, 2);
    let m = jc(4);
    let omegas = [-1.0, 0.0, 1.0];
    let mut out = [0.0; 3];
    let st = unsafe { nphoton_sensor_spectrum(m, omegas.as_ptr(), 3, gamma, 1e-2, out.as_mut_ptr()) };
    assert_eq!(st, NphotonStatus::Ok, "{}", last_error());

    let sys = jaynes_cummings(&p).unwrap();
    let l = build_liouvillian(&sys.me).unwrap();
    let rho = l.steady_state().unwrap();
    for (w, s) in omegas.iter().zip(out) {
        let o = filtered_spectrum(&l, &rho, &sys.probe, FilterSpec::new(*w, gamma).unwrap()).unwrap();
        assert!(rel(s, o) < 1e-3, "omega {w}: {s} vs {o}");
    }
    unsafe { nphoton_model_free(m) };
}

#[test]
fn g2_paths_agree() {
    let p = JCParams::new(0.1, 0.01, 0.01, 4);
    let gamma = ladder_linewidth(&p, 2);
    let r = rabi(&p).unwrap();
    let m = jc(4);
    let (mut oracle, mut zero) = (0.0, 0.0);
    unsafe {
        assert_eq!(nphoton_g2_oracle(m, r, gamma, -r, gamma, &mut oracle), NphotonStatus::Ok);
        let w = [r, -r];
        let g = [gamma, gamma];
        assert_eq!(nphoton_gn_zero_delay(m, w.as_ptr(), g.as_ptr(), 2, 1e-2, &mut zero), NphotonStatus::Ok);
    }
    let sys = jaynes_cummings(&p).unwrap();
    let l = build_liouvillian(&sys.me).unwrap();
    let rho = l.steady_state().unwrap();
    let direct = g2_zero_delay(&l, &rho, &sys.probe, FilterSpec::new(r, gamma).unwrap(), FilterSpec::new(-r, gamma).unwrap()).unwrap();
    assert_eq!(oracle, direct);
    assert!(rel(zero, oracle) < 1e-2, "{zero} vs {oracle}");

    let taus = [0.0, 5.0, -5.0];
    let mut out = [0.0; 3];
    let st = unsafe { nphoton_g2_delays(m, r, gamma, -r, gamma, taus.as_ptr(), 3, 1e-2, out.as_mut_ptr()) };
    assert_eq!(st, NphotonStatus::Ok, "{}", last_error());
    assert!(rel(out[0], zero) < 1e-6);
    assert!(out.iter().all(|v| v.is_finite() && *v > 0.0));
    unsafe { nphoton_model_free(m) };
}

#[test]
fn ladder_reports_count_and_short_buffer() {
    let mut count = 0usize;
    let mut f = [0.0; 4];
    let mut w = [0.0; 4];
    let st = unsafe { nphoton_ladder(0.1, 0.01, 3, f.as_mut_ptr(), w.as_mut_ptr(), 4, &mut count) };
    assert_eq!(st, NphotonStatus::BufferTooSmall);
    assert_eq!(count, 10);
    assert!(last_error().contains("10 transitions"));

    let mut f = vec![0.0; count];
    let mut w = vec![0.0; count];
    let st = unsafe { nphoton_ladder(0.1, 0.01, 3, f.as_mut_ptr(), w.as_mut_ptr(), count, &mut count) };
    assert_eq!(st, NphotonStatus::Ok);
    let expected = jc_ladder(&JCParams::new(0.1, 0.01, 0.0, 1), 3).unwrap();
    for (k, t) in expected.iter().enumerate() {
        assert_eq!((f[k], w[k]), (t.frequency, t.linewidth));
    }
}

#[test]
fn errors_are_reported_not_raised() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(nphoton_model_thermal(0.2, -1.0, 10, &mut m), NphotonStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(nphoton_model_thermal(0.2, 1.0, 10, ptr::null_mut()), NphotonStatus::NullPointer);
        let mut v = 0.0;
        assert_eq!(nphoton_g2_oracle(ptr::null(), 0.0, 1.0, 0.0, 1.0, &mut v), NphotonStatus::NullPointer);
        assert_eq!(last_error(), "model is null");

        let m = jc(3);
        let w = [0.0];
        let g = [-1.0];
        assert_eq!(nphoton_sensor_spectrum(m, ptr::null(), 1, 1.0, 1e-2, &mut v), NphotonStatus::NullPointer);
        assert_eq!(nphoton_gn_zero_delay(m, w.as_ptr(), g.as_ptr(), 1, 1e-2, &mut v), NphotonStatus::InvalidArgument);
        nphoton_model_free(m);
        nphoton_model_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/nphoton.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "nphoton_last_error",
        "nphoton_version",
        "nphoton_model_jc",
        "nphoton_model_thermal",
        "nphoton_model_free",
        "nphoton_sensor_spectrum",
        "nphoton_gn_zero_delay",
        "nphoton_g2_delays",
        "nphoton_g2_oracle",
        "nphoton_ladder",
        "NPHOTON_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Compile check when a C compiler is around.
    if let Ok(out) = Command::new("cc").args(["-std=c99", "-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
