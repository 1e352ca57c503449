//! Binary snapshots, trajectory files, and JSON run reports.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha1::{Digest, Sha1};

use crate::cnls::{ComplexField, SimState};
use crate::error::{Error, Result};
use crate::geometry::{Domain, GridSpec};
use crate::reduced_dynamics::Trajectory;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CNLS";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 40;

fn snapshot_error(message: impl Into<String>) -> Error {
    Error::Format {
        format: "snapshot",
        message: message.into(),
    }
}

/// Header followed by interleaved `(re, im)` pairs, row-major, `u` then `v`.
pub fn encode_snapshot(state: &SimState) -> Vec<u8> {
    let (ny, nx) = state.u.data.dim();
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 32 * nx * ny);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(ny as u32).to_le_bytes());
    for x in [state.t, state.epsilon, state.g] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for field in [&state.u, &state.v] {
        for z in field.data.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

/// Decodes a snapshot onto `domain`; every malformed input is an error.
pub fn decode_snapshot(bytes: &[u8], domain: &Domain) -> Result<SimState> {
    if bytes.len() < SNAPSHOT_HEADER_LEN {
        return Err(snapshot_error(format!(
            "{} bytes is shorter than the {SNAPSHOT_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(snapshot_error("bad magic"));
    }
    let version = u32_at(bytes, 4);
    if version != SNAPSHOT_VERSION {
        return Err(snapshot_error(format!("unsupported version {version}")));
    }
    let nx = u32_at(bytes, 8) as usize;
    let ny = u32_at(bytes, 12) as usize;
    let (t, epsilon, g) = (f64_at(bytes, 16), f64_at(bytes, 24), f64_at(bytes, 32));
    let grid = GridSpec::new(nx, ny).map_err(|e| snapshot_error(e.to_string()))?;
    let expected = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(32))
        .and_then(|n| n.checked_add(SNAPSHOT_HEADER_LEN))
        .ok_or_else(|| snapshot_error("grid size overflows"))?;
    if bytes.len() != expected {
        return Err(snapshot_error(format!(
            "expected {expected} bytes for a {nx} x {ny} grid, got {}",
            bytes.len()
        )));
    }
    if !t.is_finite() {
        return Err(snapshot_error("time is not finite"));
    }
    let body = &bytes[SNAPSHOT_HEADER_LEN..];
    if body
        .chunks_exact(8)
        .any(|c| !f64::from_le_bytes(c.try_into().expect("8 bytes")).is_finite())
    {
        return Err(snapshot_error("field samples must be finite"));
    }
    let n = nx * ny;
    let field = |k: usize| -> Result<ComplexField> {
        let data = Array2::from_shape_fn((ny, nx), |(j, i)| {
            let at = 16 * (k * n + j * nx + i);
            Complex64::new(f64_at(body, at), f64_at(body, at + 8))
        });
        ComplexField::new(*domain, grid, data).map_err(|e| snapshot_error(e.to_string()))
    };
    let u = field(0)?;
    let v = field(1)?;
    let mut state = SimState::new(u, v, epsilon, g).map_err(|e| snapshot_error(e.to_string()))?;
    state.t = t;
    Ok(state)
}

pub fn write_snapshot(path: &Path, state: &SimState) -> Result<()> {
    fs::write(path, encode_snapshot(state)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path, domain: &Domain) -> Result<SimState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, domain)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    traj.write_csv(&mut out).map_err(|e| Error::io(path, e))?;
    std::io::Write::flush(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Trajectory::read_csv(std::io::BufReader::new(file))
}

/// Git blob object id: SHA-1 of `"blob <len>\0" ++ content`, lowercase hex.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub const REPORT_SCHEMA: &str = "cnls-vortex/report/v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub experiment: String,
    pub status: Status,
    /// Stage that failed, when `status` is `failed`.
    pub stage: Option<String>,
    pub error: Option<String>,
    pub exit_code: i32,
    pub input_hash: String,
    pub config: Value,
    pub metrics: Value,
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, config: Value, input_hash: String) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            experiment: experiment.to_string(),
            status: Status::Ok,
            stage: None,
            error: None,
            exit_code: 0,
            input_hash,
            config,
            metrics: json!({}),
            artifacts: Vec::new(),
        }
    }

    pub fn fail(&mut self, stage: &str, err: &Error) {
        self.status = Status::Failed;
        self.stage = Some(stage.to_string());
        self.error = Some(err.to_string());
        self.exit_code = err.exit_code();
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))
}

/// Checks a parsed report against the documented schema.
pub fn validate_report(value: &Value) -> std::result::Result<(), String> {
    let obj = value.as_object().ok_or("report must be an object")?;
    let field = |k: &str| obj.get(k).ok_or_else(|| format!("missing field `{k}`"));
    if field("schema")?.as_str() != Some(REPORT_SCHEMA) {
        return Err(format!("`schema` must be \"{REPORT_SCHEMA}\""));
    }
    let experiment = field("experiment")?
        .as_str()
        .ok_or("`experiment` must be a string")?;
    if !crate::config::Experiment::ALL
        .iter()
        .any(|e| e.name() == experiment)
    {
        return Err(format!("unknown experiment `{experiment}`"));
    }
    let status = field("status")?
        .as_str()
        .ok_or("`status` must be a string")?;
    let failed = match status {
        "ok" => false,
        "failed" => true,
        other => return Err(format!("unknown status `{other}`")),
    };
    for k in ["stage", "error"] {
        let v = field(k)?;
        if failed && !v.is_string() || !failed && !v.is_null() {
            return Err(format!("`{k}` must be a string iff the run failed"));
        }
    }
    let code = field("exit_code")?
        .as_i64()
        .ok_or("`exit_code` must be an integer")?;
    if failed == (code == 0) || ![0, 2, 3, 4].contains(&code) {
        return Err(format!(
            "`exit_code` {code} is inconsistent with status `{status}`"
        ));
    }
    let hash = field("input_hash")?
        .as_str()
        .ok_or("`input_hash` must be a string")?;
    if hash.len() != 40
        || !hash
            .bytes()
            .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
    {
        return Err("`input_hash` must be 40 lowercase hex digits".into());
    }
    if !field("config")?.is_object() {
        return Err("`config` must be an object".into());
    }
    if !field("metrics")?.is_object() {
        return Err("`metrics` must be an object".into());
    }
    let artifacts = field("artifacts")?
        .as_array()
        .ok_or("`artifacts` must be an array")?;
    if !artifacts.iter().all(Value::is_string) {
        return Err("`artifacts` must hold strings".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec2::Vec2;

    fn state() -> SimState {
        let d = Domain::centered_square(1.0).unwrap();
        let grid = GridSpec::new(16, 8).unwrap();
        let f = |s: f64| {
            ComplexField::from_fn(d, grid, move |x: Vec2| {
                Complex64::new(x.x * s, (3.0 * x.y).sin())
            })
            .unwrap()
        };
        let mut st = SimState::new(f(1.0), f(-0.5), 0.5, 0.5).unwrap();
        st.t = 0.125;
        st
    }

    #[test]
    fn snapshot_round_trip_is_bit_identical() {
        let st = state();
        let bytes = encode_snapshot(&st);
        assert_eq!(bytes.len(), 40 + 32 * 16 * 8);
        let back = decode_snapshot(&bytes, &st.u.domain).unwrap();
        assert_eq!(back.t.to_bits(), st.t.to_bits());
        for (a, b) in
            st.u.data
                .iter()
                .chain(st.v.data.iter())
                .zip(back.u.data.iter().chain(back.v.data.iter()))
        {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(encode_snapshot(&back), bytes);
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        let st = state();
        let d = st.u.domain;
        let bytes = encode_snapshot(&st);
        assert!(decode_snapshot(&bytes[..39], &d).is_err());
        assert!(decode_snapshot(&bytes[..bytes.len() - 1], &d).is_err());
        let mut b = bytes.clone();
        b[0] = b'X';
        assert!(decode_snapshot(&b, &d).is_err());
        let mut b = bytes.clone();
        b[4] = 9;
        assert!(decode_snapshot(&b, &d).is_err());
        let mut b = bytes.clone();
        b[40..48].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_snapshot(&b, &d).is_err());
    }

    #[test]
    fn git_blob_hash() {
        assert_eq!(
            content_hash(b""),
            "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
        );
        assert_eq!(
            content_hash(b"hello\n"),
            "ce013625030ba8dba906f756967f9e9ca394464a"
        );
    }

    #[test]
    fn report_schema() {
        let r = Report::new("gamma", json!({"g": 0.5}), content_hash(b"x"));
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        validate_report(&v).unwrap();
        let mut failed = r.clone();
        failed.fail("solve", &Error::Blowup { t: 1.0 });
        let v: Value = serde_json::from_str(&failed.to_json()).unwrap();
        validate_report(&v).unwrap();
        assert_eq!(v["exit_code"], 3);
        let mut broken = v.clone();
        broken["input_hash"] = json!("XYZ");
        assert!(validate_report(&broken).is_err());
        broken = v;
        broken.as_object_mut().unwrap().remove("metrics");
        assert!(validate_report(&broken).is_err());
    }
}
