//! Grid scans over sensor frequencies, linewidths and delays.
//!
//! Every grid point is evaluated independently from the request alone, so
//! results do not depend on the worker count or on execution order. Workers
//! pull point indices from a shared counter and send finished points to the
//! calling thread, which is the only writer of the result store and of the
//! checkpoint files.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::models::{truncation_fraction, ModelSpec, System, TRUNCATION_TOLERANCE};
use crate::regression::{DelayGrid, DEFAULT_RTOL};
use crate::sensors::{
    attach_sensors_with, converge_epsilon, gn_delays, g2_signed_delays, gn_zero_delay, sensor_spectrum_point,
    CorrelationResult, SensedSystem, SensorOptions, SensorSpec, DEFAULT_CHI, POPULATION_FLOOR,
};

/// Minimum spacing between progressive checkpoint writes.
const CHECKPOINT_INTERVAL: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Spectrum,
    GnZero,
    GnTau,
    G2Map,
}

/// Scanned axis. `Omega1` moves the first sensor, `Gamma` sets the linewidth
/// of every sensor, `Tau` is the delay of the last detection and `Omega12`
/// is a product grid with `omega1` outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Axis {
    Omega1 { values: Vec<f64> },
    Gamma { values: Vec<f64> },
    Tau { values: Vec<f64> },
    Omega12 { omega1: Vec<f64>, omega2: Vec<f64> },
}

impl Axis {
    pub fn len(&self) -> usize {
        match self {
            Axis::Omega1 { values } | Axis::Gamma { values } | Axis::Tau { values } => values.len(),
            Axis::Omega12 { omega1, omega2 } => omega1.len() * omega2.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> Vec<&'static str> {
        match self {
            Axis::Omega1 { .. } => vec!["omega1"],
            Axis::Gamma { .. } => vec!["gamma"],
            Axis::Tau { .. } => vec!["tau"],
            Axis::Omega12 { .. } => vec!["omega1", "omega2"],
        }
    }

    /// Coordinates of point `i`.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        match self {
            Axis::Omega1 { values } | Axis::Gamma { values } | Axis::Tau { values } => vec![values[i]],
            Axis::Omega12 { omega1, omega2 } => vec![omega1[i / omega2.len()], omega2[i % omega2.len()]],
        }
    }

    fn all_values(&self) -> impl Iterator<Item = &f64> {
        let (a, b): (&[f64], &[f64]) = match self {
            Axis::Omega1 { values } | Axis::Gamma { values } | Axis::Tau { values } => (values, &[]),
            Axis::Omega12 { omega1, omega2 } => (omega1, omega2),
        };
        a.iter().chain(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum EpsilonPolicy {
    Fixed {
        #[serde(default = "default_chi")]
        chi: f64,
    },
    /// Halve the couplings until the value moves by less than `tol`.
    Converge {
        #[serde(default = "default_chi")]
        chi: f64,
        tol: f64,
    },
}

fn default_chi() -> f64 {
    DEFAULT_CHI
}

fn default_rtol() -> f64 {
    DEFAULT_RTOL
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::Fixed { chi: DEFAULT_CHI }
    }
}

impl EpsilonPolicy {
    pub fn chi(&self) -> f64 {
        match *self {
            EpsilonPolicy::Fixed { chi } | EpsilonPolicy::Converge { chi, .. } => chi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRequest {
    pub model: ModelSpec,
    pub mode: ScanMode,
    pub sensors: Vec<SensorSpec>,
    pub axis: Axis,
    #[serde(default)]
    pub epsilon: EpsilonPolicy,
    /// Intermediate detection times for `gn_tau` with more than two sensors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lead: Vec<f64>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    /// Carried into the output metadata only; the computation is deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScanRequest {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.axis.is_empty() {
            return bad("scan grid is empty".into());
        }
        if let Some(v) = self.axis.all_values().find(|v| !v.is_finite()) {
            return bad(format!("scan grid contains a non-finite value {v}"));
        }
        if self.sensors.iter().any(|s| !(s.omega.is_finite() && s.gamma.is_finite())) {
            return bad("sensor frequencies and linewidths must be finite".into());
        }
        let n = self.sensors.len();
        let axis_ok = match (self.mode, &self.axis) {
            (ScanMode::Spectrum, Axis::Omega1 { .. } | Axis::Gamma { .. }) => n == 1,
            (ScanMode::GnZero, Axis::Omega1 { .. } | Axis::Gamma { .. }) => n >= 2,
            (ScanMode::GnTau, Axis::Tau { .. }) => n >= 2,
            (ScanMode::G2Map, Axis::Omega12 { .. }) => n == 2,
            _ => false,
        };
        if !axis_ok {
            return bad(format!(
                "mode {:?} cannot scan {:?} with {n} sensor(s)",
                self.mode,
                self.axis.names()
            ));
        }
        if let Axis::Gamma { values } = &self.axis {
            if values.iter().any(|g| *g <= 0.0) {
                return bad("linewidth grid must be positive".into());
            }
        }
        if self.mode == ScanMode::GnTau {
            if self.lead.len() != n - 2 {
                return Err(Error::InvalidDelays(format!("{n} sensors need {} intermediate delays", n - 2)));
            }
            if let Axis::Tau { values } = &self.axis {
                let start = self.lead.last().copied().unwrap_or(0.0);
                if n > 2 && values.iter().any(|t| *t < start) {
                    return Err(Error::InvalidDelays("delays must not precede the last intermediate delay".into()));
                }
            }
        }
        match self.epsilon {
            EpsilonPolicy::Fixed { chi } if chi > 0.0 => {}
            EpsilonPolicy::Converge { chi, tol } if chi > 0.0 && tol > 0.0 => {}
            _ => return bad("epsilon policy needs positive chi and tolerance".into()),
        }
        if !(self.rtol > 0.0) {
            return bad("rtol must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Ok,
    Starved,
    NotConverged,
    Error,
    Missing,
    /// Computed, but the watched mode fills its top Fock level.
    Truncation,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::Ok => "ok",
            Flag::Starved => "starved",
            Flag::NotConverged => "not_converged",
            Flag::Error => "error",
            Flag::Missing => "missing",
            Flag::Truncation => "truncation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ok" => Flag::Ok,
            "starved" => Flag::Starved,
            "not_converged" => Flag::NotConverged,
            "error" => Flag::Error,
            "missing" => Flag::Missing,
            "truncation" => Flag::Truncation,
            _ => return None,
        })
    }

    /// Flags a resumed scan recomputes. Starved and truncated points are
    /// properties of the request and would come out the same.
    pub fn needs_recompute(self) -> bool {
        matches!(self, Flag::Missing | Flag::Error | Flag::NotConverged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub coords: Vec<f64>,
    pub value: f64,
    pub flag: Flag,
    /// Coupling of the first sensor actually used.
    pub epsilon: f64,
    pub wall_time: f64,
    pub message: Option<String>,
}

impl PointResult {
    fn missing(coords: Vec<f64>) -> Self {
        Self {
            coords,
            value: f64::NAN,
            flag: Flag::Missing,
            epsilon: f64::NAN,
            wall_time: 0.0,
            message: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub request: ScanRequest,
    pub points: Vec<PointResult>,
    /// Top-level fraction of the truncated mode, if the model has one.
    pub truncation: Option<f64>,
}

impl ScanResult {
    pub fn value_name(&self) -> String {
        value_name(&self.request)
    }

    pub fn count(&self, flag: Flag) -> usize {
        self.points.iter().filter(|p| p.flag == flag).count()
    }
}

pub fn value_name(req: &ScanRequest) -> String {
    match req.mode {
        ScanMode::Spectrum => "spectrum".into(),
        ScanMode::G2Map => "g2".into(),
        _ => format!("g{}", req.sensors.len()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the available parallelism.
    pub workers: usize,
    /// `(directory, basename)` for progressive checkpoints.
    pub checkpoint: Option<(PathBuf, String)>,
}

/// Evaluates every grid point.
pub fn run(req: &ScanRequest, opts: &RunOptions) -> Result<ScanResult> {
    req.validate()?;
    let points = (0..req.axis.len()).map(|i| PointResult::missing(req.axis.coords(i))).collect();
    let start = ScanResult {
        request: req.clone(),
        points,
        truncation: None,
    };
    complete(start, opts).map(|(r, _)| r)
}

/// Loads a checkpoint and recomputes its missing, failed and unconverged
/// points. Returns the result and the number of recomputed points.
pub fn resume(dir: &Path, basename: &str, opts: &RunOptions) -> Result<(ScanResult, usize)> {
    let prev = checkpoint::read(dir, basename)?;
    complete(prev, opts)
}

fn complete(mut res: ScanResult, opts: &RunOptions) -> Result<(ScanResult, usize)> {
    let req = res.request.clone();
    req.validate()?;
    let todo: Vec<usize> = (0..res.points.len()).filter(|&i| res.points[i].flag.needs_recompute()).collect();
    if todo.is_empty() {
        return Ok((res, 0));
    }
    let ctx = Context::new(&req)?;
    res.truncation = ctx.truncation;
    let workers = match opts.workers {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        w => w,
    }
    .min(todo.len());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, PointResult)>();
    let mut last_write = Instant::now();
    let mut write_err = None;
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (ctx, todo, next) = (&ctx, &todo, &next);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = todo.get(k) else { break };
                if tx.send((i, ctx.point(i))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, p) in rx {
            res.points[i] = p;
            if let Some((dir, base)) = &opts.checkpoint {
                if last_write.elapsed() >= CHECKPOINT_INTERVAL {
                    if let Err(e) = checkpoint::write(&res, dir, base) {
                        write_err.get_or_insert(e);
                    }
                    last_write = Instant::now();
                }
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    if let Some((dir, base)) = &opts.checkpoint {
        checkpoint::write(&res, dir, base)?;
    }
    if res.points.iter().all(|p| p.flag == Flag::Error) {
        let msg = res.points[0].message.clone().unwrap_or_default();
        return Err(Error::InvalidParameter(format!("every grid point failed; first: {msg}")));
    }
    Ok((res, todo.len()))
}

struct Context {
    req: ScanRequest,
    system: System,
    truncation: Option<f64>,
    /// Sensors shared by all delays of a fixed-coupling `gn_tau` scan.
    shared: Option<std::result::Result<SensedSystem, Error>>,
}

impl Context {
    fn new(req: &ScanRequest) -> Result<Self> {
        let system = req.model.build()?;
        let truncation = truncation_fraction(&system)?;
        let shared = match (req.mode, req.epsilon) {
            (ScanMode::GnTau, EpsilonPolicy::Fixed { chi }) => {
                Some(attach_sensors_with(&system.me, &system.probe, &req.sensors, &options(chi, 1.0)))
            }
            _ => None,
        };
        Ok(Self {
            req: req.clone(),
            system,
            truncation,
            shared,
        })
    }

    fn point(&self, i: usize) -> PointResult {
        let t0 = Instant::now();
        let coords = self.req.axis.coords(i);
        let out = match self.req.epsilon {
            EpsilonPolicy::Fixed { chi } => match &self.shared {
                Some(Ok(ss)) => self.on_shared(ss, coords[0]),
                Some(Err(e)) => Err(e.clone()),
                None => self.evaluate(&coords, chi, 1.0),
            },
            EpsilonPolicy::Converge { chi, tol } => converge_epsilon(|s| self.evaluate(&coords, chi, s), tol),
        };
        let truncated = self.truncation.is_some_and(|f| f > TRUNCATION_TOLERANCE);
        let (value, flag, epsilon, message) = match out {
            Ok(r) => {
                let starved = r.populations.iter().any(|p| !(*p >= POPULATION_FLOOR));
                let flag = if starved {
                    Flag::Starved
                } else if truncated {
                    Flag::Truncation
                } else {
                    Flag::Ok
                };
                (r.value, flag, r.epsilon_used.first().copied().unwrap_or(f64::NAN), None)
            }
            Err(e @ Error::SensorStarved { .. }) => (f64::NAN, Flag::Starved, f64::NAN, Some(e.to_string())),
            Err(e @ Error::EpsilonNotConverged { .. }) => {
                let last = match &e {
                    Error::EpsilonNotConverged { values, .. } => values.last().copied().unwrap_or(f64::NAN),
                    _ => unreachable!(),
                };
                (last, Flag::NotConverged, f64::NAN, Some(e.to_string()))
            }
            Err(e) => (f64::NAN, Flag::Error, f64::NAN, Some(e.to_string())),
        };
        PointResult {
            coords,
            value,
            flag,
            epsilon,
            wall_time: t0.elapsed().as_secs_f64(),
            message,
        }
    }

    fn sensors_at(&self, coords: &[f64]) -> Vec<SensorSpec> {
        let mut s = self.req.sensors.clone();
        match &self.req.axis {
            Axis::Omega1 { .. } => s[0].omega = coords[0],
            Axis::Gamma { .. } => s.iter_mut().for_each(|x| x.gamma = coords[0]),
            Axis::Omega12 { .. } => {
                s[0].omega = coords[0];
                s[1].omega = coords[1];
            }
            Axis::Tau { .. } => {}
        }
        s
    }

    fn evaluate(&self, coords: &[f64], chi: f64, scale: f64) -> Result<CorrelationResult> {
        let sensors = self.sensors_at(coords);
        let opts = options(chi, scale);
        let (me, probe) = (&self.system.me, &self.system.probe);
        match self.req.mode {
            ScanMode::Spectrum => {
                let p = sensor_spectrum_point(me, probe, sensors[0], &opts)?;
                Ok(CorrelationResult {
                    value: p.value,
                    epsilon_used: vec![p.epsilon],
                    convergence_estimate: None,
                    populations: vec![p.population],
                })
            }
            ScanMode::GnZero | ScanMode::G2Map => gn_zero_delay(&attach_sensors_with(me, probe, &sensors, &opts)?),
            ScanMode::GnTau => self.on_shared(&attach_sensors_with(me, probe, &sensors, &opts)?, coords[0]),
        }
    }

    fn on_shared(&self, ss: &SensedSystem, tau: f64) -> Result<CorrelationResult> {
        let mut out = if ss.sensors().len() == 2 {
            g2_signed_delays(ss, &[tau], self.req.rtol)?
        } else {
            gn_delays(ss, &self.req.lead, &DelayGrid::with_rtol(vec![tau], self.req.rtol)?)?
        };
        Ok(out.remove(0))
    }
}

fn options(chi: f64, scale: f64) -> SensorOptions {
    SensorOptions {
        chi,
        epsilon_scale: scale,
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::JCParams;

    fn jc_request(mode: ScanMode, sensors: Vec<SensorSpec>, axis: Axis) -> ScanRequest {
        ScanRequest {
            model: ModelSpec::Jc(JCParams::new(0.1, 0.01, 0.01, 4)),
            mode,
            sensors,
            axis,
            epsilon: EpsilonPolicy::default(),
            lead: vec![],
            rtol: DEFAULT_RTOL,
            seed: None,
        }
    }

    #[test]
    fn rejects_mismatched_axis() {
        let r = jc_request(ScanMode::GnTau, vec![SensorSpec::new(1.0, 0.2); 2], Axis::Omega1 { values: vec![0.0] });
        assert!(matches!(r.validate(), Err(Error::InvalidParameter(_))));
        let r = jc_request(ScanMode::GnZero, vec![SensorSpec::new(1.0, 0.2); 2], Axis::Omega1 { values: vec![] });
        assert!(r.validate().is_err());
        let r = jc_request(ScanMode::GnZero, vec![SensorSpec::new(1.0, 0.2); 2], Axis::Omega1 { values: vec![f64::NAN] });
        assert!(r.validate().is_err());
    }

    #[test]
    fn single_point_matches_direct_call() {
        let s = vec![SensorSpec::new(0.4, 0.21), SensorSpec::new(1.0, 0.21)];
        let req = jc_request(ScanMode::GnZero, s.clone(), Axis::Omega1 { values: vec![0.4] });
        let res = run(&req, &RunOptions::default()).unwrap();
        let sys = req.model.build().unwrap();
        let direct = gn_zero_delay(&attach_sensors_with(&sys.me, &sys.probe, &s, &SensorOptions::default()).unwrap()).unwrap();
        assert_eq!(res.points[0].value.to_bits(), direct.value.to_bits());
        assert_eq!(res.points[0].flag, Flag::Ok);
    }

    #[test]
    fn product_grid_order() {
        let a = Axis::Omega12 { omega1: vec![1.0, 2.0], omega2: vec![3.0, 4.0, 5.0] };
        assert_eq!(a.len(), 6);
        assert_eq!(a.coords(0), vec![1.0, 3.0]);
        assert_eq!(a.coords(4), vec![2.0, 4.0]);
    }

    #[test]
    fn starved_points_are_flagged() {
        // an unpumped qubit relaxes to its ground state and emits nothing
        let req = ScanRequest {
            model: ModelSpec::Qubit { pump: 0.0, gamma: 1.0 },
            mode: ScanMode::Spectrum,
            sensors: vec![SensorSpec::new(0.0, 1.0)],
            axis: Axis::Omega1 { values: vec![0.0, 1.0] },
            epsilon: EpsilonPolicy::default(),
            lead: vec![],
            rtol: DEFAULT_RTOL,
            seed: None,
        };
        let res = run(&req, &RunOptions { workers: 2, checkpoint: None }).unwrap();
        assert!(res.points.iter().all(|p| p.flag == Flag::Starved && p.value == 0.0));
    }
}
