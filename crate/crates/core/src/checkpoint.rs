//! Scan output files: `<base>.csv` with one row per grid point and
//! `<base>.meta.json` holding the request, the CSV digest and per-point
//! messages. The pair doubles as a resumable checkpoint.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! that reading a file back and writing it again reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{jc_ladder, Transition};
use crate::sweep::{value_name, Flag, PointResult, ScanRequest, ScanResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMessage {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub request: ScanRequest,
    pub columns: Vec<String>,
    pub csv_sha256: String,
    pub points: usize,
    pub flags: BTreeMap<String, usize>,
    pub truncation_fraction: Option<f64>,
    pub total_wall_time: f64,
    #[serde(default)]
    pub messages: Vec<PointMessage>,
    /// Ladder transitions for guide lines, JC models only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<Transition>,
}

pub fn csv_path(dir: &Path, base: &str) -> PathBuf {
    dir.join(format!("{base}.csv"))
}

pub fn meta_path(dir: &Path, base: &str) -> PathBuf {
    dir.join(format!("{base}.meta.json"))
}

/// Shortest text that parses back to the same float, 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn columns(req: &ScanRequest) -> Vec<String> {
    let mut c: Vec<String> = req.axis.names().into_iter().map(String::from).collect();
    c.push(value_name(req));
    c.extend(["flag", "epsilon1", "wall_time_s"].map(String::from));
    c
}

pub fn to_csv(res: &ScanResult) -> String {
    let mut s = columns(&res.request).join(",");
    s.push('\n');
    for p in &res.points {
        for c in &p.coords {
            let _ = write!(s, "{},", format_float(*c));
        }
        let _ = writeln!(
            s,
            "{},{},{},{}",
            format_float(p.value),
            p.flag.as_str(),
            format_float(p.epsilon),
            format_float(p.wall_time)
        );
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn meta(res: &ScanResult, csv: &str) -> Meta {
    let mut flags = BTreeMap::new();
    for p in &res.points {
        *flags.entry(p.flag.as_str().to_string()).or_insert(0) += 1;
    }
    let ladder = res
        .request
        .model
        .jc()
        .and_then(|p| jc_ladder(p, (res.request.sensors.len() as u32 + 1).max(3)).ok())
        .unwrap_or_default();
    Meta {
        version: VERSION.into(),
        request: res.request.clone(),
        columns: columns(&res.request),
        csv_sha256: sha256_hex(csv.as_bytes()),
        points: res.points.len(),
        flags,
        truncation_fraction: res.truncation,
        total_wall_time: res.points.iter().map(|p| p.wall_time).sum(),
        messages: res
            .points
            .iter()
            .enumerate()
            .filter_map(|(index, p)| p.message.clone().map(|message| PointMessage { index, message }))
            .collect(),
        ladder,
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes both files, creating `dir` if needed.
pub fn write(res: &ScanResult, dir: &Path, base: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv = to_csv(res);
    let meta = serde_json::to_string_pretty(&meta(res, &csv)).map_err(|e| Error::Io(e.to_string()))?;
    write_atomic(&csv_path(dir, base), &csv)?;
    write_atomic(&meta_path(dir, base), &(meta + "\n"))
}

fn unreadable(msg: impl Into<String>) -> Error {
    Error::CheckpointUnreadable(msg.into())
}

fn parse_float(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| unreadable(format!("bad number `{s}`")))
}

pub fn read(dir: &Path, base: &str) -> Result<ScanResult> {
    let meta_text = fs::read_to_string(meta_path(dir, base)).map_err(|e| unreadable(e.to_string()))?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| unreadable(e.to_string()))?;
    let csv = fs::read_to_string(csv_path(dir, base)).map_err(|e| unreadable(e.to_string()))?;
    if sha256_hex(csv.as_bytes()) != meta.csv_sha256 {
        return Err(unreadable("checksum mismatch"));
    }
    from_csv(&csv, meta)
}

fn from_csv(csv: &str, meta: Meta) -> Result<ScanResult> {
    let req = meta.request;
    let cols = columns(&req);
    let mut lines = csv.lines();
    if lines.next() != Some(cols.join(",").as_str()) {
        return Err(unreadable("header does not match the request"));
    }
    let naxis = req.axis.names().len();
    let mut points = Vec::with_capacity(req.axis.len());
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() || i >= req.axis.len() {
            return Err(unreadable(format!("malformed row {}", i + 1)));
        }
        let coords = f[..naxis].iter().map(|s| parse_float(s)).collect::<Result<Vec<_>>>()?;
        let expect = req.axis.coords(i);
        if coords.iter().zip(&expect).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(unreadable(format!("row {} does not match the grid", i + 1)));
        }
        points.push(PointResult {
            coords,
            value: parse_float(f[naxis])?,
            flag: Flag::parse(f[naxis + 1]).ok_or_else(|| unreadable(format!("unknown flag `{}`", f[naxis + 1])))?,
            epsilon: parse_float(f[naxis + 2])?,
            wall_time: parse_float(f[naxis + 3])?,
            message: None,
        });
    }
    if points.len() != req.axis.len() {
        return Err(unreadable(format!("{} rows for {} grid points", points.len(), req.axis.len())));
    }
    for m in meta.messages {
        let p = points.get_mut(m.index).ok_or_else(|| unreadable("message for a missing row"))?;
        p.message = Some(m.message);
    }
    Ok(ScanResult {
        request: req,
        points,
        truncation: meta.truncation_fraction,
    })
}
