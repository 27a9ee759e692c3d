//! Sensor-versus-oracle self check behind `nphoton validate`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::Result;
use crate::liouville::build_liouvillian;
use crate::models::{jaynes_cummings, ladder_frequency, ladder_linewidth, rabi, thermal_cavity, JCParams};
use crate::oracle::{eigendecompose, filtered_spectrum, g2_tau, g2_zero_delay, spectrum_at_shift, FilterSpec};
use crate::sensors::{attach_sensors, gn_zero_delay, g2_signed_delays, sensor_spectrum, SensorSpec};
use crate::regression::DEFAULT_RTOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    /// Mutation checks pass when the error is large.
    pub expect_failure: bool,
}

impl Check {
    pub fn passed(&self) -> bool {
        if self.expect_failure {
            self.measured > 100.0 * self.tolerance
        } else {
            self.measured < self.tolerance
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// N=1 on a thermal cavity, returning the error against the true oracle and
/// against one with the filter pole moved to the wrong half plane.
fn thermal_spectrum(points: usize) -> Result<(f64, f64)> {
    let sys = thermal_cavity(0.5, 1.0, 20)?;
    let gamma = 0.7;
    let l = build_liouvillian(&sys.me)?;
    let rho = l.steady_state()?;
    let omegas = linspace(-3.0, 3.0, points);
    let s = sensor_spectrum(&sys.me, &sys.probe, &omegas, gamma)?;
    let (mut good, mut broken) = (0.0f64, 0.0f64);
    for (w, p) in omegas.iter().zip(&s) {
        let o = filtered_spectrum(&l, &rho, &sys.probe, FilterSpec::new(*w, gamma)?)?;
        let m = spectrum_at_shift(&l, &rho, &sys.probe, C64::new(gamma / 2.0, -w))?;
        good = good.max(rel(p.value, o));
        broken = broken.max(rel(p.value, m));
    }
    Ok((good, broken))
}

fn reference_jc(n_max: usize) -> JCParams {
    JCParams::new(0.1, 0.01, 0.01, n_max)
}

fn jc_spectrum() -> Result<f64> {
    let p = reference_jc(4);
    let sys = jaynes_cummings(&p)?;
    let gamma = ladder_linewidth(&p, 2);
    let l = build_liouvillian(&sys.me)?;
    let rho = l.steady_state()?;
    let omegas = linspace(-3.0, 3.0, 50);
    let s = sensor_spectrum(&sys.me, &sys.probe, &omegas, gamma)?;
    let mut err = 0.0f64;
    for (w, p) in omegas.iter().zip(&s) {
        err = err.max(rel(p.value, filtered_spectrum(&l, &rho, &sys.probe, FilterSpec::new(*w, gamma)?)?));
    }
    Ok(err)
}

fn jc_pairs(p: &JCParams) -> Result<Vec<(f64, f64)>> {
    let r = rabi(p)?;
    let r2m = ladder_frequency(p, 2, false)?;
    let r2p = ladder_frequency(p, 2, true)?;
    Ok(vec![(r, r2m), (r, -r), (r, r), (0.0, 0.0), (r2m, -r2m), (-r, r2p), (0.5, -1.5), (r2m, r), (2.0, 1.0), (-r2p, r)])
}

fn two_photon_zero() -> Result<f64> {
    let p = reference_jc(4);
    let sys = jaynes_cummings(&p)?;
    let gamma = ladder_linewidth(&p, 2);
    let l = build_liouvillian(&sys.me)?;
    let rho = l.steady_state()?;
    let mut err = 0.0f64;
    for (w1, w2) in jc_pairs(&p)? {
        let ss = attach_sensors(&sys.me, &sys.probe, &[SensorSpec::new(w1, gamma), SensorSpec::new(w2, gamma)])?;
        let o = g2_zero_delay(&l, &rho, &sys.probe, FilterSpec::new(w1, gamma)?, FilterSpec::new(w2, gamma)?)?;
        err = err.max(rel(gn_zero_delay(&ss)?.value, o));
    }
    Ok(err)
}

fn two_photon_delay() -> Result<f64> {
    let p = reference_jc(3);
    let sys = jaynes_cummings(&p)?;
    let gamma = ladder_linewidth(&p, 2);
    let l = build_liouvillian(&sys.me)?;
    let rho = l.steady_state()?;
    let eig = eigendecompose(&l)?;
    let taus: Vec<f64> = [0.1, 0.5, 1.0, 5.0, 20.0].iter().map(|t| t / gamma).collect();
    let (w1, w2) = (rabi(&p)?, ladder_frequency(&p, 2, false)?);
    let (f1, f2) = (FilterSpec::new(w1, gamma)?, FilterSpec::new(w2, gamma)?);
    let ss = attach_sensors(&sys.me, &sys.probe, &[SensorSpec::new(w1, gamma), SensorSpec::new(w2, gamma)])?;
    let s = g2_signed_delays(&ss, &taus, DEFAULT_RTOL)?;
    let mut err = 0.0f64;
    for (t, r) in taus.iter().zip(&s) {
        err = err.max(rel(r.value, g2_tau(&l, &rho, &sys.probe, f1, f2, *t, &eig)?));
    }
    Ok(err)
}

fn check(name: &str, measured: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        measured,
        tolerance,
        expect_failure: false,
    }
}

pub fn run(level: Level) -> Result<Vec<Check>> {
    let points = if level == Level::Quick { 20 } else { 50 };
    let (good, broken) = thermal_spectrum(points)?;
    let mut out = vec![
        check(&format!("N=1 thermal cavity, {points} frequencies"), good, 1e-3),
        Check {
            name: "mutation: filter pole sign flipped".into(),
            measured: broken,
            tolerance: 1e-3,
            expect_failure: true,
        },
    ];
    if level == Level::Full {
        out.push(check("N=1 Jaynes-Cummings, 50 frequencies", jc_spectrum()?, 1e-3));
        out.push(check("N=2 zero delay, 10 frequency pairs", two_photon_zero()?, 1e-2));
        out.push(check("N=2 at 5 delays", two_photon_delay()?, 1e-2));
    }
    Ok(out)
}

pub fn table(checks: &[Check]) -> String {
    let mut s = format!("{:<40} {:>12} {:>12}  result\n", "check", "error", "tolerance");
    for c in checks {
        let verdict = match (c.passed(), c.expect_failure) {
            (true, false) => "pass",
            (true, true) => "pass (mutation caught)",
            (false, false) => "FAIL",
            (false, true) => "FAIL (mutation missed)",
        };
        s += &format!("{:<40} {:>12.3e} {:>12.1e}  {verdict}\n", c.name, c.measured, c.tolerance);
    }
    s
}
