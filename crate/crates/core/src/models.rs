//! Ready-made master equations and the Jaynes–Cummings ladder.
//!
//! All rates and frequencies are in units of the light–matter coupling `g`,
//! in the frame rotating at the common cavity/emitter frequency.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilator, make_space, number, FactorSpec, Operator};
use crate::liouville::{expectation, DensityMatrix, Dissipator, MasterEquation};

/// A master equation together with the system operator that emits the
/// detected light.
#[derive(Debug, Clone)]
pub struct System {
    pub me: MasterEquation,
    pub probe: Operator,
    /// Label of the bosonic factor watched by the truncation guard, if any.
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JCParams {
    #[serde(default = "unit")]
    pub g: f64,
    pub gamma_a: f64,
    pub gamma_s: f64,
    #[serde(default)]
    pub p_s: f64,
    pub n_max: usize,
}

fn unit() -> f64 {
    1.0
}

impl JCParams {
    pub fn new(gamma_a: f64, gamma_s: f64, p_s: f64, n_max: usize) -> Self {
        Self {
            g: 1.0,
            gamma_a,
            gamma_s,
            p_s,
            n_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", self.g), ("gamma_a", self.gamma_a), ("gamma_s", self.gamma_s), ("p_s", self.p_s)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(())
    }

    fn detuning_term(&self) -> f64 {
        ((self.gamma_a - self.gamma_s) / 4.0).powi(2)
    }
}

/// Resonant Jaynes–Cummings model with cavity decay, emitter decay and
/// incoherent emitter pumping. The probe is the cavity field.
pub fn jaynes_cummings(p: &JCParams) -> Result<System> {
    p.validate()?;
    let space = make_space(vec![FactorSpec::boson("a", p.n_max), FactorSpec::qubit("sigma")])?;
    let a = annihilator(&space, "a")?;
    let s = annihilator(&space, "sigma")?;
    let h = a.adjoint().matmul(&s)?.add(&a.matmul(&s.adjoint())?)?.scale(p.g);
    let me = MasterEquation::new(
        h,
        vec![
            Dissipator { rate: p.gamma_a, collapse: a.clone() },
            Dissipator { rate: p.gamma_s, collapse: s.clone() },
            Dissipator { rate: p.p_s, collapse: s.adjoint() },
        ],
    )?;
    Ok(System {
        me,
        probe: a,
        truncated: Some("a".into()),
    })
}

/// Incoherently pumped cavity: `(P_a/2)L_{a†} + (γ_a/2)L_a`, `H = 0`.
pub fn thermal_cavity(p_a: f64, gamma_a: f64, n_max: usize) -> Result<System> {
    if !(p_a >= 0.0 && gamma_a > 0.0) {
        return Err(Error::InvalidParameter(format!("thermal cavity needs p_a >= 0 and gamma_a > 0, got ({p_a}, {gamma_a})")));
    }
    if p_a >= gamma_a {
        return Err(Error::ThermalDivergence);
    }
    let space = make_space(vec![FactorSpec::boson("a", n_max)])?;
    let a = annihilator(&space, "a")?;
    let me = MasterEquation::new(
        Operator::zero(&space),
        vec![
            Dissipator { rate: p_a, collapse: a.adjoint() },
            Dissipator { rate: gamma_a, collapse: a.clone() },
        ],
    )?;
    Ok(System {
        me,
        probe: a,
        truncated: Some("a".into()),
    })
}

/// Coherently driven cavity: `H = Ω(a + a†)`, `(γ_a/2)L_a`.
pub fn driven_cavity(omega: f64, gamma_a: f64, n_max: usize) -> Result<System> {
    if !(gamma_a > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("driven cavity needs gamma_a > 0, got {gamma_a}")));
    }
    let expected = 4.0 * omega * omega / (gamma_a * gamma_a);
    if (n_max as f64) < 8.0 * expected {
        return Err(Error::InvalidParameter(format!(
            "n_max = {n_max} too small for mean photon number {expected}; need n_max >= {}",
            (8.0 * expected).ceil()
        )));
    }
    let space = make_space(vec![FactorSpec::boson("a", n_max)])?;
    let a = annihilator(&space, "a")?;
    let me = MasterEquation::new(a.add(&a.adjoint())?.scale(omega), vec![Dissipator { rate: gamma_a, collapse: a.clone() }])?;
    Ok(System {
        me,
        probe: a,
        truncated: Some("a".into()),
    })
}

/// Incoherently pumped two-level emitter; its emission line is a single
/// Lorentzian of width `γ + P`.
pub fn pumped_qubit(pump: f64, gamma: f64) -> Result<System> {
    if !(pump >= 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("pumped qubit needs pump >= 0 and gamma > 0, got ({pump}, {gamma})")));
    }
    let space = make_space(vec![FactorSpec::qubit("sigma")])?;
    let s = annihilator(&space, "sigma")?;
    let me = MasterEquation::new(
        Operator::zero(&space),
        vec![
            Dissipator { rate: gamma, collapse: s.clone() },
            Dissipator { rate: pump, collapse: s.adjoint() },
        ],
    )?;
    Ok(System {
        me,
        probe: s,
        truncated: None,
    })
}

/// Largest tolerated [`top_level_fraction`] before results are flagged.
pub const TRUNCATION_TOLERANCE: f64 = 1e-4;

/// Top-level fraction of the watched mode in the system's own steady
/// state, `None` when nothing is watched.
pub fn truncation_fraction(sys: &System) -> Result<Option<f64>> {
    let Some(label) = &sys.truncated else {
        return Ok(None);
    };
    let l = crate::liouville::build_liouvillian(&sys.me)?;
    let rho = l.steady_state()?;
    top_level_fraction(&rho, label).map(Some)
}

/// Population of the top Fock level of `label` relative to its mean
/// occupation. Returns 0 for an empty mode.
pub fn top_level_fraction(rho: &DensityMatrix, label: &str) -> Result<f64> {
    let space = rho.space().clone();
    let k = space.factor_index(label)?;
    let top = space.factors()[k].local_dim() - 1;
    let pop: f64 = (0..space.dim())
        .filter(|&i| space.level(i, k) == top)
        .map(|i| rho.get(i, i).re)
        .sum();
    let mean = expectation(rho, &number(&space, label)?)?.re;
    Ok(if mean > 0.0 { pop / mean } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        })
    }
}

/// One dressed-state transition `|n, upper⟩ → |n−1, lower⟩`; `lower` is
/// `None` for the decay of the first rung into vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub rung: u32,
    pub upper: Branch,
    pub lower: Option<Branch>,
    pub frequency: f64,
    pub linewidth: f64,
}

impl Transition {
    /// Symbolic name of the frequency, e.g. `R`, `-R2+`, `R3-`.
    pub fn symbol(&self) -> String {
        let sign = if self.frequency < 0.0 { "-" } else { "" };
        match self.lower {
            None => format!("{sign}R"),
            Some(lower) => {
                let kind = if lower == self.upper { "-" } else { "+" };
                format!("{sign}R{}{kind}", self.rung)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self.lower {
            None => format!("|1{}> -> |0>", self.upper),
            Some(l) => format!("|{}{}> -> |{}{}>", self.rung, self.upper, self.rung - 1, l),
        }
    }
}

/// Dressed-state energy `√(n g² − ((γ_a−γ_σ)/4)²)` of rung `n`.
fn rung_root(p: &JCParams, n: u32) -> Result<f64> {
    let arg = n as f64 * p.g * p.g - p.detuning_term();
    if arg <= 0.0 {
        return Err(Error::TransitionOverdamped(n));
    }
    Ok(arg.sqrt())
}

/// Rabi frequency `R` of the first rung.
pub fn rabi(p: &JCParams) -> Result<f64> {
    rung_root(p, 1)
}

/// `R_n^±` for `n ≥ 2`.
pub fn ladder_frequency(p: &JCParams, n: u32, plus: bool) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("R_n^± needs n >= 2".into()));
    }
    let (hi, lo) = (rung_root(p, n)?, rung_root(p, n - 1)?);
    Ok(if plus { hi + lo } else { hi - lo })
}

/// `γ₁ = (γ_a+γ_σ)/2` and `γ_n = 2(n−1)γ_a + γ_σ` for `n ≥ 2`.
pub fn ladder_linewidth(p: &JCParams, n: u32) -> f64 {
    if n <= 1 {
        (p.gamma_a + p.gamma_s) / 2.0
    } else {
        2.0 * (n as f64 - 1.0) * p.gamma_a + p.gamma_s
    }
}

/// All ladder transitions up to `max_rung`: `±R`, then `±R_n^±` per rung.
pub fn jc_ladder(p: &JCParams, max_rung: u32) -> Result<Vec<Transition>> {
    if max_rung < 1 {
        return Err(Error::InvalidParameter("max_rung must be at least 1".into()));
    }
    let r = rabi(p)?;
    let g1 = ladder_linewidth(p, 1);
    let mut out = vec![
        Transition { rung: 1, upper: Branch::Plus, lower: None, frequency: r, linewidth: g1 },
        Transition { rung: 1, upper: Branch::Minus, lower: None, frequency: -r, linewidth: g1 },
    ];
    for n in 2..=max_rung {
        let (rp, rm) = (ladder_frequency(p, n, true)?, ladder_frequency(p, n, false)?);
        let w = ladder_linewidth(p, n);
        use Branch::*;
        out.extend([
            Transition { rung: n, upper: Plus, lower: Some(Plus), frequency: rm, linewidth: w },
            Transition { rung: n, upper: Minus, lower: Some(Minus), frequency: -rm, linewidth: w },
            Transition { rung: n, upper: Plus, lower: Some(Minus), frequency: rp, linewidth: w },
            Transition { rung: n, upper: Minus, lower: Some(Plus), frequency: -rp, linewidth: w },
        ]);
    }
    Ok(out)
}

/// Resolves a symbolic ladder frequency (`R`, `-R`, `R2-`, `-R3+`, …) or a
/// plain number.
pub fn parse_frequency(p: &JCParams, s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    let bad = || Error::Config(format!("cannot parse frequency `{s}`"));
    let rest = body.strip_prefix('R').ok_or_else(bad)?;
    if rest.is_empty() {
        return Ok(sign * rabi(p)?);
    }
    let (digits, branch) = rest.split_at(rest.len() - 1);
    let plus = match branch {
        "+" => true,
        "-" => false,
        _ => return Err(bad()),
    };
    let n: u32 = digits.parse().map_err(|_| bad())?;
    Ok(sign * ladder_frequency(p, n, plus)?)
}

/// Resolves a symbolic linewidth (`gamma1`, `gamma2`, …) or a plain number.
pub fn parse_linewidth(p: &JCParams, s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let n: u32 = t
        .strip_prefix("gamma")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::Config(format!("cannot parse linewidth `{s}`")))?;
    Ok(ladder_linewidth(p, n))
}

/// Model selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    Jc(JCParams),
    Thermal { p_a: f64, gamma_a: f64, n_max: usize },
    Driven { omega: f64, gamma_a: f64, n_max: usize },
    Qubit { pump: f64, gamma: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<System> {
        match self {
            ModelSpec::Jc(p) => jaynes_cummings(p),
            ModelSpec::Thermal { p_a, gamma_a, n_max } => thermal_cavity(*p_a, *gamma_a, *n_max),
            ModelSpec::Driven { omega, gamma_a, n_max } => driven_cavity(*omega, *gamma_a, *n_max),
            ModelSpec::Qubit { pump, gamma } => pumped_qubit(*pump, *gamma),
        }
    }

    pub fn jc(&self) -> Option<&JCParams> {
        match self {
            ModelSpec::Jc(p) => Some(p),
            _ => None,
        }
    }
}
