//! TOML run configuration. All frequencies and rates are in units of `g`.
//!
//! ```toml
//! [model]
//! name = "jc"            # jc | thermal | driven | qubit
//! gamma_a = 0.1
//! gamma_s = 0.01
//! p_s = 0.01
//! n_max = 4
//!
//! [[sensors]]
//! omega = "R"            # number, or a ladder symbol for jc: R, -R, R2-, -R3+
//! gamma = "gamma2"       # number, or gammaN for jc
//! # epsilon = 1e-5       # explicit coupling, or
//! # chi = 5e-3           # per-sensor prefactor of the automatic rule
//!
//! [scan]
//! omega1 = { from = -2.5, to = 2.5, points = 201 }   # or a list
//! # gamma, tau, omega2, lead, rtol
//!
//! [epsilon]
//! chi = 1e-2
//! # converge = 1e-3
//!
//! [output]
//! directory = "out"
//! basename = "g2_vs_omega1"
//! ```

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::models::{parse_frequency, parse_linewidth, JCParams, ModelSpec};
use crate::regression::DEFAULT_RTOL;
use crate::sensors::{epsilon_bound, gamma_q, SensorSpec, DEFAULT_CHI};
use crate::sweep::{Axis, EpsilonPolicy, ScanMode, ScanRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub basename: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub request: ScanRequest,
    pub output: OutputSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub chi: Option<f64>,
    pub converge: Option<f64>,
    pub directory: Option<PathBuf>,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn missing(path: &str) -> Error {
    err(format!("missing field `{path}`"))
}

fn table<'a>(t: &'a Table, key: &str, path: &str) -> Result<&'a Table> {
    match t.get(key) {
        Some(Value::Table(x)) => Ok(x),
        Some(_) => Err(err(format!("`{path}` must be a table"))),
        None => Err(missing(path)),
    }
}

fn number(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(err(format!("`{path}` must be a number"))),
    }
}

fn opt_number(t: &Table, key: &str, path: &str) -> Result<Option<f64>> {
    t.get(key).map(|v| number(v, path)).transpose()
}

fn req_number(t: &Table, key: &str, path: &str) -> Result<f64> {
    opt_number(t, key, path)?.ok_or_else(|| missing(path))
}

fn req_usize(t: &Table, key: &str, path: &str) -> Result<usize> {
    match t.get(key) {
        Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
        Some(_) => Err(err(format!("`{path}` must be a non-negative integer"))),
        None => Err(missing(path)),
    }
}

/// A number or, for JC models, a ladder symbol.
fn quantity(v: &Value, path: &str, jc: Option<&JCParams>, linewidth: bool) -> Result<f64> {
    match (v, jc) {
        (Value::String(s), Some(p)) => {
            let r = if linewidth { parse_linewidth(p, s) } else { parse_frequency(p, s) };
            r.map_err(|e| err(format!("`{path}`: {e}")))
        }
        (Value::String(s), None) => s
            .trim()
            .parse()
            .map_err(|_| err(format!("`{path}`: symbol `{s}` needs a jc model"))),
        _ => number(v, path),
    }
}

fn grid(v: &Value, path: &str, jc: Option<&JCParams>, linewidth: bool) -> Result<Vec<f64>> {
    match v {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, x)| quantity(x, &format!("{path}[{i}]"), jc, linewidth))
            .collect(),
        Value::Table(t) => {
            let from = quantity(t.get("from").ok_or_else(|| missing(&format!("{path}.from")))?, &format!("{path}.from"), jc, linewidth)?;
            let to = quantity(t.get("to").ok_or_else(|| missing(&format!("{path}.to")))?, &format!("{path}.to"), jc, linewidth)?;
            let n = req_usize(t, "points", &format!("{path}.points"))?;
            let log = matches!(t.get("log"), Some(Value::Boolean(true)));
            if n == 0 {
                return Err(err(format!("`{path}.points` must be at least 1")));
            }
            if log && !(from > 0.0 && to > 0.0) {
                return Err(err(format!("`{path}`: log grid needs positive endpoints")));
            }
            Ok((0..n)
                .map(|i| {
                    let s = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if log {
                        (from.ln() + s * (to.ln() - from.ln())).exp()
                    } else {
                        from + s * (to - from)
                    }
                })
                .collect())
        }
        _ => number(v, path).map(|x| vec![x]),
    }
}

fn model(t: &Table) -> Result<ModelSpec> {
    let m = table(t, "model", "model")?;
    let name = match m.get("name") {
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(err("`model.name` must be a string")),
        None => return Err(missing("model.name")),
    };
    Ok(match name {
        "jc" => ModelSpec::Jc(JCParams {
            g: opt_number(m, "g", "model.g")?.unwrap_or(1.0),
            gamma_a: req_number(m, "gamma_a", "model.gamma_a")?,
            gamma_s: req_number(m, "gamma_s", "model.gamma_s")?,
            p_s: opt_number(m, "p_s", "model.p_s")?.unwrap_or(0.0),
            n_max: req_usize(m, "n_max", "model.n_max")?,
        }),
        "thermal" => ModelSpec::Thermal {
            p_a: req_number(m, "p_a", "model.p_a")?,
            gamma_a: req_number(m, "gamma_a", "model.gamma_a")?,
            n_max: req_usize(m, "n_max", "model.n_max")?,
        },
        "driven" => ModelSpec::Driven {
            omega: req_number(m, "omega", "model.omega")?,
            gamma_a: req_number(m, "gamma_a", "model.gamma_a")?,
            n_max: req_usize(m, "n_max", "model.n_max")?,
        },
        "qubit" => ModelSpec::Qubit {
            pump: opt_number(m, "pump", "model.pump")?.unwrap_or(0.0),
            gamma: req_number(m, "gamma", "model.gamma")?,
        },
        other => return Err(err(format!("`model.name`: unknown model `{other}`"))),
    })
}

pub fn parse(text: &str, mode: ScanMode, ov: &Overrides) -> Result<RunConfig> {
    let t: Table = text.parse().map_err(|e: toml::de::Error| err(format!("invalid TOML: {}", e.message())))?;
    let model = model(&t)?;
    let jc = model.jc().copied();
    let jc = jc.as_ref();
    let scan = match t.get("scan") {
        Some(Value::Table(s)) => s.clone(),
        Some(_) => return Err(err("`scan` must be a table")),
        None => Table::new(),
    };
    let axis_grid = |key: &str, lw: bool| -> Result<Option<Vec<f64>>> {
        scan.get(key).map(|v| grid(v, &format!("scan.{key}"), jc, lw)).transpose()
    };
    let axis = match mode {
        ScanMode::Spectrum | ScanMode::GnZero => match (axis_grid("omega1", false)?, axis_grid("gamma", true)?) {
            (Some(values), None) => Axis::Omega1 { values },
            (None, Some(values)) => Axis::Gamma { values },
            (Some(_), Some(_)) => return Err(err("`scan` must set exactly one of `omega1` and `gamma`")),
            (None, None) => return Err(missing("scan.omega1")),
        },
        ScanMode::GnTau => Axis::Tau {
            values: axis_grid("tau", false)?.ok_or_else(|| missing("scan.tau"))?,
        },
        ScanMode::G2Map => Axis::Omega12 {
            omega1: axis_grid("omega1", false)?.ok_or_else(|| missing("scan.omega1"))?,
            omega2: axis_grid("omega2", false)?.ok_or_else(|| missing("scan.omega2"))?,
        },
    };
    let scanned_omega = |k: usize| match &axis {
        Axis::Omega1 { .. } => k == 0,
        Axis::Omega12 { .. } => k <= 1,
        _ => false,
    };
    let scanned_gamma = matches!(axis, Axis::Gamma { .. });

    let eps_table = match t.get("epsilon") {
        Some(Value::Table(e)) => e.clone(),
        Some(_) => return Err(err("`epsilon` must be a table")),
        None => Table::new(),
    };
    let chi = ov.chi.or(opt_number(&eps_table, "chi", "epsilon.chi")?).unwrap_or(DEFAULT_CHI);
    let converge = ov.converge.or(opt_number(&eps_table, "converge", "epsilon.converge")?);
    let epsilon = match converge {
        Some(tol) => EpsilonPolicy::Converge { chi, tol },
        None => EpsilonPolicy::Fixed { chi },
    };

    let list = match t.get("sensors") {
        Some(Value::Array(a)) if !a.is_empty() => a,
        Some(Value::Array(_)) | None => return Err(missing("sensors[0]")),
        Some(_) => return Err(err("`sensors` must be an array of tables")),
    };
    let mut gq = None;
    let mut sensors = Vec::with_capacity(list.len());
    for (k, v) in list.iter().enumerate() {
        let path = format!("sensors[{k}]");
        let Value::Table(s) = v else {
            return Err(err(format!("`{path}` must be a table")));
        };
        let omega = match s.get("omega") {
            Some(v) => quantity(v, &format!("{path}.omega"), jc, false)?,
            None if scanned_omega(k) => 0.0,
            None => return Err(missing(&format!("{path}.omega"))),
        };
        let gamma = match s.get("gamma") {
            Some(v) => quantity(v, &format!("{path}.gamma"), jc, true)?,
            None if scanned_gamma => 1.0,
            None => return Err(missing(&format!("{path}.gamma"))),
        };
        let mut spec = SensorSpec::new(omega, gamma);
        let explicit = opt_number(s, "epsilon", &format!("{path}.epsilon"))?;
        let own_chi = opt_number(s, "chi", &format!("{path}.chi"))?;
        match (explicit, own_chi) {
            (Some(_), Some(_)) => return Err(err(format!("`{path}` sets both `epsilon` and `chi`"))),
            (Some(e), None) => spec = spec.with_epsilon(e),
            (None, Some(c)) => {
                if scanned_gamma {
                    return Err(err(format!("`{path}.chi` cannot be combined with a linewidth scan")));
                }
                let q = match gq {
                    Some(q) => q,
                    None => *gq.insert(gamma_q(&model.build()?.me)?),
                };
                spec = spec.with_epsilon(c * epsilon_bound(gamma, q));
            }
            (None, None) => {}
        }
        sensors.push(spec);
    }

    let lead = match scan.get("lead") {
        Some(v) => grid(v, "scan.lead", None, false)?,
        None => vec![],
    };
    let request = ScanRequest {
        model,
        mode,
        sensors,
        axis,
        epsilon,
        lead,
        rtol: opt_number(&scan, "rtol", "scan.rtol")?.unwrap_or(DEFAULT_RTOL),
        seed: match scan.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
            Some(_) => return Err(err("`scan.seed` must be a non-negative integer")),
            None => None,
        },
    };
    request.validate().map_err(|e| err(e.to_string()))?;

    let out = match t.get("output") {
        Some(Value::Table(o)) => o.clone(),
        Some(_) => return Err(err("`output` must be a table")),
        None => Table::new(),
    };
    let directory = match (&ov.directory, out.get("directory")) {
        (Some(d), _) => d.clone(),
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(_)) => return Err(err("`output.directory` must be a string")),
        (None, None) => PathBuf::from("."),
    };
    let basename = match out.get("basename") {
        Some(Value::String(s)) if !s.is_empty() && !s.contains(['/', '\\']) => s.clone(),
        Some(_) => return Err(err("`output.basename` must be a plain file name")),
        None => default_basename(mode).into(),
    };
    Ok(RunConfig {
        request,
        output: OutputSpec { directory, basename },
    })
}

fn default_basename(mode: ScanMode) -> &'static str {
    match mode {
        ScanMode::Spectrum => "spectrum",
        ScanMode::GnZero => "gn",
        ScanMode::GnTau => "gtau",
        ScanMode::G2Map => "g2map",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JC_G2: &str = r#"
[model]
name = "jc"
gamma_a = 0.1
gamma_s = 0.01
p_s = 0.01
n_max = 4

[[sensors]]
gamma = "gamma2"

[[sensors]]
omega = "R"
gamma = "gamma2"

[scan]
omega1 = { from = -2.5, to = 2.5, points = 201 }

[output]
basename = "g2_vs_omega1"
"#;

    #[test]
    fn parses_symbolic_config() {
        let c = parse(JC_G2, ScanMode::GnZero, &Overrides::default()).unwrap();
        let p = c.request.model.jc().unwrap();
        assert!((c.request.sensors[1].omega - crate::models::rabi(p).unwrap()).abs() < 1e-15);
        assert!((c.request.sensors[0].gamma - 0.21).abs() < 1e-15);
        let Axis::Omega1 { values } = &c.request.axis else { panic!() };
        assert_eq!(values.len(), 201);
        assert!((values[100]).abs() < 1e-15 && values[200] == 2.5);
        assert_eq!(c.output.basename, "g2_vs_omega1");
        assert_eq!(c.request.epsilon, EpsilonPolicy::Fixed { chi: DEFAULT_CHI });
    }

    #[test]
    fn missing_gamma_names_field() {
        let text = JC_G2.replacen("gamma = \"gamma2\"\n", "", 1);
        let e = parse(&text, ScanMode::GnZero, &Overrides::default()).unwrap_err();
        assert_eq!(e, Error::Config("missing field `sensors[0].gamma`".into()));
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            chi: Some(5e-3),
            converge: Some(1e-3),
            directory: Some("elsewhere".into()),
        };
        let c = parse(JC_G2, ScanMode::GnZero, &ov).unwrap();
        assert_eq!(c.request.epsilon, EpsilonPolicy::Converge { chi: 5e-3, tol: 1e-3 });
        assert_eq!(c.output.directory, PathBuf::from("elsewhere"));
    }

    #[test]
    fn wrong_axis_for_mode() {
        let e = parse(JC_G2, ScanMode::GnTau, &Overrides::default()).unwrap_err();
        assert_eq!(e, Error::Config("missing field `scan.tau`".into()));
    }

    #[test]
    fn log_grid() {
        let t: Table = "x = { from = 0.01, to = 10.0, points = 4, log = true }".parse().unwrap();
        let v = grid(&t["x"], "x", None, false).unwrap();
        for (a, b) in v.iter().zip([0.01, 0.1, 1.0, 10.0]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
}
