//! Frequency-resolved photon correlations from weakly coupled sensors.
//!
//! Each sensor is a two-level system at frequency `ω_i` with linewidth `Γ_i`
//! coupled to the probed operator `a` through `ε_i(aς_i† + a†ς_i)`. As the
//! couplings vanish, normalized sensor intensity correlations converge to
//! the filtered N-photon correlations of the light emitted through `a`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilator, CompositeSpace, FactorSpec, Operator};
use crate::liouville::{build_liouvillian, expectation, DensityMatrix, Dissipator, Liouvillian, MasterEquation};
use crate::regression::{march, DelayGrid, LiouvilleVector};

pub const DEFAULT_CHI: f64 = 1e-2;
/// Populations above this mean the sensors perturb the system.
pub const POPULATION_CEILING: f64 = 1e-3;
/// Populations below this mean nothing is emitted at the sensor frequency.
pub const POPULATION_FLOOR: f64 = 1e-30;
pub const MAX_SENSORS: usize = 4;
const MAX_HALVINGS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub omega: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl SensorSpec {
    pub fn new(omega: f64, gamma: f64) -> Self {
        Self {
            omega,
            gamma,
            epsilon: None,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensorKind {
    TwoLevel,
    /// Bosonic sensor truncated at `n_max` excitations.
    Harmonic { n_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorOptions {
    /// Prefactor of the automatic coupling rule.
    pub chi: f64,
    /// Multiplies every coupling, automatic or explicit.
    pub epsilon_scale: f64,
    pub kind: SensorKind,
}

impl Default for SensorOptions {
    fn default() -> Self {
        Self {
            chi: DEFAULT_CHI,
            epsilon_scale: 1.0,
            kind: SensorKind::TwoLevel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub value: f64,
    pub epsilon_used: Vec<f64>,
    /// Relative change under the last ε-halving, when convergence was checked.
    pub convergence_estimate: Option<f64>,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SensedSystem {
    base: MasterEquation,
    probe: Operator,
    sensors: Vec<SensorSpec>,
    epsilons: Vec<f64>,
    gamma_q: f64,
    kind: SensorKind,
    lowering: Vec<Operator>,
    numbers: Vec<Operator>,
    liouvillian: Liouvillian,
    rho: DensityMatrix,
    populations: Vec<f64>,
}

/// Smallest nonzero system rate, pump included.
pub fn gamma_q(me: &MasterEquation) -> Result<f64> {
    me.smallest_rate()
        .ok_or_else(|| Error::InvalidParameter("system has no dissipation, sensors need a nonzero rate".into()))
}

/// Largest admissible coupling `√(Γγ_Q/2)`.
pub fn epsilon_bound(gamma: f64, gamma_q: f64) -> f64 {
    (gamma * gamma_q / 2.0).sqrt()
}

pub fn attach_sensors(me: &MasterEquation, probe: &Operator, sensors: &[SensorSpec]) -> Result<SensedSystem> {
    attach_sensors_with(me, probe, sensors, &SensorOptions::default())
}

pub fn attach_sensors_with(
    me: &MasterEquation,
    probe: &Operator,
    sensors: &[SensorSpec],
    opts: &SensorOptions,
) -> Result<SensedSystem> {
    if sensors.is_empty() || sensors.len() > MAX_SENSORS {
        return Err(Error::InvalidParameter(format!("between 1 and {MAX_SENSORS} sensors supported, got {}", sensors.len())));
    }
    if **probe.space() != **me.space() {
        return Err(Error::SpaceMismatch);
    }
    if !(opts.chi > 0.0 && opts.epsilon_scale > 0.0) {
        return Err(Error::InvalidParameter("chi and epsilon scale must be positive".into()));
    }
    let gq = gamma_q(me)?;
    let mut epsilons = Vec::with_capacity(sensors.len());
    for (k, s) in sensors.iter().enumerate() {
        if !(s.gamma > 0.0 && s.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sensor {k}: gamma must be > 0, got {}", s.gamma)));
        }
        if !s.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("sensor {k}: omega must be finite")));
        }
        let bound = epsilon_bound(s.gamma, gq);
        let eps = s.epsilon.unwrap_or(opts.chi * bound) * opts.epsilon_scale;
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("sensor {k}: epsilon must be > 0, got {eps}")));
        }
        if eps >= bound {
            return Err(Error::SensorBackAction { index: k, epsilon: eps, bound });
        }
        epsilons.push(eps);
    }

    let (enlarged, lowering) = enlarge(me, probe, sensors, &epsilons, opts.kind)?;
    let numbers = lowering
        .iter()
        .map(|s| s.adjoint().matmul(s))
        .collect::<Result<Vec<_>>>()?;
    let scales = sensor_scales(me, probe, sensors, &epsilons, opts.kind)?;
    let state_scale = grading(enlarged.space(), me.space().factors().len(), &scales);
    let liouvillian = Liouvillian::with_state_scale(enlarged, state_scale)?;
    let rho = liouvillian.steady_state()?;
    let populations = numbers
        .iter()
        .map(|n| Ok(expectation(&rho, n)?.re))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensedSystem {
        base: me.clone(),
        probe: probe.clone(),
        sensors: sensors.to_vec(),
        epsilons,
        gamma_q: gq,
        kind: opts.kind,
        lowering,
        numbers,
        liouvillian,
        rho,
        populations,
    })
}

fn sensor_label(k: usize) -> String {
    format!("sensor{}", k + 1)
}

fn enlarge(
    me: &MasterEquation,
    probe: &Operator,
    sensors: &[SensorSpec],
    epsilons: &[f64],
    kind: SensorKind,
) -> Result<(MasterEquation, Vec<Operator>)> {
    let factors = (0..sensors.len())
        .map(|k| match kind {
            SensorKind::TwoLevel => FactorSpec::qubit(sensor_label(k)),
            SensorKind::Harmonic { n_max } => FactorSpec::boson(sensor_label(k), n_max),
        })
        .collect();
    let space: Arc<CompositeSpace> = me.space().extended(factors)?;
    let lifted = me.lift(&space)?;
    let a = probe.lift(&space)?;
    let mut h = Operator::zero(&space);
    let mut diss = Vec::new();
    let mut lowering = Vec::new();
    for (k, (s, &eps)) in sensors.iter().zip(epsilons).enumerate() {
        let c = annihilator(&space, &sensor_label(k))?;
        let n = c.adjoint().matmul(&c)?;
        let tunnel = a.matmul(&c.adjoint())?;
        h = h.add(&n.scale(s.omega))?.add(&tunnel.add(&tunnel.adjoint())?.scale(eps))?;
        diss.push(Dissipator {
            rate: s.gamma,
            collapse: c.clone(),
        });
        lowering.push(c);
    }
    Ok((lifted.with_terms(&h, diss)?, lowering))
}

/// Per-sensor amplitude scale used to grade the enlarged Liouvillian:
/// roughly `√⟨n_k⟩`, taken from single-sensor solves when several sensors
/// are attached.
fn sensor_scales(
    me: &MasterEquation,
    probe: &Operator,
    sensors: &[SensorSpec],
    epsilons: &[f64],
    kind: SensorKind,
) -> Result<Vec<f64>> {
    let base = build_liouvillian(me)?.steady_state()?;
    let occupation = expectation(&base, &probe.adjoint().matmul(probe)?)?.re;
    let heuristic: Vec<f64> = sensors
        .iter()
        .zip(epsilons)
        .map(|(s, &e)| {
            if occupation > 0.0 {
                2.0 * e * occupation.sqrt() / s.gamma
            } else {
                e / s.gamma
            }
        })
        .collect();
    if sensors.len() == 1 {
        return Ok(heuristic);
    }
    let nbase = me.space().factors().len();
    let mut out = Vec::with_capacity(sensors.len());
    for (k, s) in sensors.iter().enumerate() {
        let (single, low) = enlarge(me, probe, std::slice::from_ref(s), &epsilons[k..=k], kind)?;
        let scale = grading(single.space(), nbase, &heuristic[k..=k]);
        let l = Liouvillian::with_state_scale(single, scale)?;
        let rho = l.steady_state()?;
        let n = expectation(&rho, &low[0].adjoint().matmul(&low[0])?)?.re;
        out.push(if n > 0.0 && n.is_finite() { n.sqrt() } else { heuristic[k] });
    }
    Ok(out)
}

/// `s_i = ∏_k scale_k^{level_k(i)}` over the sensor factors of `space`.
fn grading(space: &Arc<CompositeSpace>, nbase: usize, scales: &[f64]) -> Vec<f64> {
    (0..space.dim())
        .map(|i| {
            scales
                .iter()
                .enumerate()
                .map(|(k, s)| s.powi(space.level(i, nbase + k) as i32))
                .product::<f64>()
                .max(f64::MIN_POSITIVE)
        })
        .collect()
}

impl SensedSystem {
    pub fn base(&self) -> &MasterEquation {
        &self.base
    }

    pub fn probe(&self) -> &Operator {
        &self.probe
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn gamma_q(&self) -> f64 {
        self.gamma_q
    }

    pub fn kind(&self) -> SensorKind {
        self.kind
    }

    pub fn enlarged(&self) -> &MasterEquation {
        self.liouvillian.master_equation()
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.liouvillian
    }

    pub fn steady_state(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Steady-state occupations `⟨n_k⟩`.
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn sensor_lowering(&self, k: usize) -> &Operator {
        &self.lowering[k]
    }

    pub fn sensor_number(&self, k: usize) -> &Operator {
        &self.numbers[k]
    }

    /// Fails when a sensor is starved or overdriven.
    pub fn check_populations(&self) -> Result<()> {
        for (k, &p) in self.populations.iter().enumerate() {
            if !(p >= POPULATION_FLOOR) {
                return Err(Error::SensorStarved {
                    index: k,
                    omega: self.sensors[k].omega,
                    population: p,
                });
            }
            if p > POPULATION_CEILING {
                return Err(Error::EpsilonTooLarge { index: k, population: p });
            }
        }
        Ok(())
    }

    fn result(&self, value: f64) -> CorrelationResult {
        CorrelationResult {
            value: value.max(0.0),
            epsilon_used: self.epsilons.clone(),
            convergence_estimate: None,
            populations: self.populations.clone(),
        }
    }

    fn normalization(&self, order: &[usize]) -> f64 {
        order.iter().map(|&k| self.populations[k]).product()
    }

    /// Normally ordered single-sensor moment `⟨c†^m c^m⟩ / ⟨c†c⟩^m`; for a
    /// harmonic sensor this is its `g⁽ᵐ⁾(0)`.
    pub fn single_sensor_moment(&self, k: usize, m: u32) -> Result<CorrelationResult> {
        self.check_populations()?;
        let c = &self.lowering[k];
        let mut cm = c.clone();
        for _ in 1..m {
            cm = cm.matmul(c)?;
        }
        let moment = expectation(&self.rho, &cm.adjoint().matmul(&cm)?)?.re;
        Ok(self.result(moment / self.populations[k].powi(m as i32)))
    }
}

/// `⟨n₁…n_N⟩ / (⟨n₁⟩…⟨n_N⟩)` in the steady state.
pub fn gn_zero_delay(ss: &SensedSystem) -> Result<CorrelationResult> {
    ss.check_populations()?;
    let mut prod = ss.numbers[0].clone();
    for n in &ss.numbers[1..] {
        prod = prod.matmul(n)?;
    }
    let joint = expectation(&ss.rho, &prod)?.re;
    let all: Vec<usize> = (0..ss.numbers.len()).collect();
    Ok(ss.result(joint / ss.normalization(&all)))
}

/// Time-resolved correlation with detections in sensor-list order.
///
/// `lead` holds the detection times of sensors 2..N−1 measured from the
/// first detection (non-decreasing, empty for two sensors); `grid` scans the
/// detection time of the last sensor, which must not precede the last lead.
pub fn gn_delays(ss: &SensedSystem, lead: &[f64], grid: &DelayGrid) -> Result<Vec<CorrelationResult>> {
    let order: Vec<usize> = (0..ss.sensors.len()).collect();
    gn_delays_ordered(ss, &order, lead, grid)
}

/// As [`gn_delays`] with detections in the given sensor order.
pub fn gn_delays_ordered(ss: &SensedSystem, order: &[usize], lead: &[f64], grid: &DelayGrid) -> Result<Vec<CorrelationResult>> {
    let n = ss.sensors.len();
    if n < 2 {
        return Err(Error::InvalidParameter("time-resolved correlations need at least two sensors".into()));
    }
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::InvalidParameter("detection order must be a permutation of the sensors".into()));
    }
    if lead.len() != n - 2 {
        return Err(Error::InvalidDelays(format!("{} sensors need {} intermediate delays, got {}", n, n - 2, lead.len())));
    }
    if lead.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || lead.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidDelays("intermediate delays must be sorted and non-negative".into()));
    }
    ss.check_populations()?;
    let l = &ss.liouvillian;
    let rtol = grid.rtol();
    let mut sigma = ss.rho.as_vector().sandwich(&ss.lowering[order[0]])?;
    let mut t = 0.0;
    for (&k, &tau) in order[1..n - 1].iter().zip(lead) {
        sigma = crate::regression::propagate(l, &sigma, tau - t, rtol)?.sandwich(&ss.lowering[k])?;
        t = tau;
    }
    let last = &ss.numbers[order[n - 1]];
    let norm = ss.normalization(order);
    let values = march(l, &sigma, t, grid, |_, s| Ok(s.trace_with(last)?.re / norm))?;
    Ok(values.into_iter().map(|v| ss.result(v)).collect())
}

/// Two-sensor correlation at signed delays: `τ ≥ 0` means sensor 2 clicks
/// `τ` after sensor 1, `τ < 0` means sensor 1 clicks `|τ|` after sensor 2.
/// Results follow the input order; delays need not be sorted.
pub fn g2_signed_delays(ss: &SensedSystem, taus: &[f64], rtol: f64) -> Result<Vec<CorrelationResult>> {
    if ss.sensors.len() != 2 {
        return Err(Error::InvalidParameter("signed delays are defined for two sensors".into()));
    }
    let mut out: Vec<Option<CorrelationResult>> = vec![None; taus.len()];
    for negative in [false, true] {
        let mut idx: Vec<usize> = (0..taus.len()).filter(|&k| (taus[k] < 0.0) == negative).collect();
        if idx.is_empty() {
            continue;
        }
        idx.sort_by(|&x, &y| taus[x].abs().total_cmp(&taus[y].abs()));
        let grid = DelayGrid::with_rtol(idx.iter().map(|&k| taus[k].abs()).collect(), rtol)?;
        let order = if negative { [1, 0] } else { [0, 1] };
        for (k, r) in idx.into_iter().zip(gn_delays_ordered(ss, &order, &[], &grid)?) {
            out[k] = Some(r);
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every delay evaluated")).collect())
}

/// Two-sensor correlation in the intensity form
/// `Re Tr[n₂ e^{Lτ}(n₁ρ)] / (⟨n₁⟩⟨n₂⟩)`.
pub fn g2_delays_intensity_form(ss: &SensedSystem, grid: &DelayGrid) -> Result<Vec<CorrelationResult>> {
    if ss.sensors.len() != 2 {
        return Err(Error::InvalidParameter("the intensity form is defined for two sensors".into()));
    }
    ss.check_populations()?;
    let seed: LiouvilleVector = ss.rho.as_vector().left_mul(&ss.numbers[0])?;
    let norm = ss.normalization(&[0, 1]);
    let values = march(&ss.liouvillian, &seed, 0.0, grid, |_, s| Ok(s.trace_with(&ss.numbers[1])?.re / norm))?;
    Ok(values.into_iter().map(|v| ss.result(v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub value: f64,
    pub population: f64,
    pub epsilon: f64,
    /// True when the sensor saw no emission and `value` was set to zero.
    pub starved: bool,
}

/// Physical spectrum from one sensor per frequency: `S = Γ⟨n⟩/(2πε²)`.
pub fn sensor_spectrum(me: &MasterEquation, probe: &Operator, omegas: &[f64], gamma: f64) -> Result<Vec<SpectrumPoint>> {
    sensor_spectrum_with(me, probe, omegas, gamma, &SensorOptions::default())
}

pub fn sensor_spectrum_with(
    me: &MasterEquation,
    probe: &Operator,
    omegas: &[f64],
    gamma: f64,
    opts: &SensorOptions,
) -> Result<Vec<SpectrumPoint>> {
    omegas
        .iter()
        .map(|&w| sensor_spectrum_point(me, probe, SensorSpec::new(w, gamma), opts))
        .collect()
}

pub fn sensor_spectrum_point(me: &MasterEquation, probe: &Operator, sensor: SensorSpec, opts: &SensorOptions) -> Result<SpectrumPoint> {
    let ss = attach_sensors_with(me, probe, &[sensor], opts)?;
    let n = ss.populations[0];
    let eps = ss.epsilons[0];
    if n > POPULATION_CEILING {
        return Err(Error::EpsilonTooLarge { index: 0, population: n });
    }
    let starved = !(n >= POPULATION_FLOOR);
    let value = if starved { 0.0 } else { sensor.gamma * n / (2.0 * PI * eps * eps) };
    Ok(SpectrumPoint {
        omega: sensor.omega,
        value,
        population: n,
        epsilon: eps,
        starved,
    })
}

/// Repeats `compute(scale)` with the couplings multiplied by `scale`,
/// halving until the value changes by less than `tol` relative.
pub fn converge_epsilon(mut compute: impl FnMut(f64) -> Result<CorrelationResult>, tol: f64) -> Result<CorrelationResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut prev = compute(1.0)?;
    let mut values = vec![prev.value];
    let mut change = f64::INFINITY;
    for k in 1..=MAX_HALVINGS {
        let mut cur = compute(0.5f64.powi(k as i32))?;
        values.push(cur.value);
        let scale = cur.value.abs().max(prev.value.abs());
        change = if scale == 0.0 { 0.0 } else { (cur.value - prev.value).abs() / scale };
        if change < tol {
            cur.convergence_estimate = Some(change);
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::EpsilonNotConverged {
        halvings: MAX_HALVINGS,
        last_change: change,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{jaynes_cummings, pumped_qubit, JCParams};

    #[test]
    fn auto_epsilon_rule() {
        let sys = jaynes_cummings(&JCParams::new(0.01, 0.01, 0.01, 4)).unwrap();
        let s = SensorSpec::new(1.0, 0.03);
        let ss = attach_sensors(&sys.me, &sys.probe, &[s, s]).unwrap();
        assert_eq!(ss.enlarged().space().dim(), 40);
        assert!((ss.gamma_q() - 0.01).abs() < 1e-15);
        let expect = 1e-2 * (0.03f64 * 0.01 / 2.0).sqrt();
        assert!((ss.epsilons()[0] - expect).abs() < 1e-18);
        assert!((expect - 1.2247e-4).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_sensors() {
        let sys = pumped_qubit(0.1, 1.0).unwrap();
        let zero = SensorSpec::new(0.0, 0.0);
        assert!(matches!(attach_sensors(&sys.me, &sys.probe, &[zero]), Err(Error::InvalidParameter(_))));
        let strong = SensorSpec::new(0.0, 1.0).with_epsilon(1.0);
        assert!(matches!(attach_sensors(&sys.me, &sys.probe, &[strong]), Err(Error::SensorBackAction { .. })));
    }

    #[test]
    fn vacuum_starves_sensor() {
        let sys = jaynes_cummings(&JCParams::new(0.1, 0.01, 0.0, 3)).unwrap();
        let pts = sensor_spectrum(&sys.me, &sys.probe, &[0.0, 1.0], 0.1).unwrap();
        assert!(pts.iter().all(|p| p.starved && p.value == 0.0));
        let ss = attach_sensors(&sys.me, &sys.probe, &[SensorSpec::new(1.0, 0.1); 2]).unwrap();
        assert!(matches!(gn_zero_delay(&ss), Err(Error::SensorStarved { .. })));
    }

    #[test]
    fn converge_stops_on_small_change() {
        let mut calls = 0;
        let r = converge_epsilon(
            |s| {
                calls += 1;
                Ok(CorrelationResult {
                    value: 2.0 + s * s,
                    epsilon_used: vec![s],
                    convergence_estimate: None,
                    populations: vec![],
                })
            },
            1e-3,
        )
        .unwrap();
        assert!(r.convergence_estimate.unwrap() < 1e-3);
        assert_eq!(calls, 7);
        let err = converge_epsilon(
            |s| {
                Ok(CorrelationResult {
                    value: 1.0 / s,
                    epsilon_used: vec![],
                    convergence_estimate: None,
                    populations: vec![],
                })
            },
            1e-3,
        );
        assert!(matches!(err, Err(Error::EpsilonNotConverged { halvings: 6, .. })));
    }
}
