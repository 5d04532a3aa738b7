//! Run configuration, canonical hashing, and the append-only JSON-lines
//! result store.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Store schema version accepted by this build.
pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable overriding the store path.
pub const STORE_ENV: &str = "HYPERMAG_STORE";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("config parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("store record has schema version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersionMismatch(u32),
    #[error("config invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Serialize an f64 with 17 significant digits — enough to round-trip any
/// double exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parameters of a run, as read from CLI flags or a config file. One flat
/// schema for every subcommand; unused keys stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub k0: Option<f64>,
    pub r: Option<f64>,
    pub eps: Option<f64>,
    /// Curvature selector for k₁ (see `curvature::parse_selector`).
    pub k1: Option<String>,
    /// Chart base point (ambient coordinates, renormalized on use).
    pub chart_base: Option<[f64; 3]>,
    pub radii: Option<Vec<f64>>,
    pub c_values: Option<Vec<f64>>,
    pub t_span: Option<f64>,
    pub tol: Option<f64>,
    pub step: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub grid_half_width: Option<f64>,
    pub out: Option<String>,
    pub store: Option<String>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.r.is_some() && self.k0.is_some() {
            return Err(StoreError::InvalidConfig(
                "r and k0 are mutually exclusive".into(),
            ));
        }
        if let Some(r) = self.r {
            if r <= 0.0 {
                return Err(StoreError::InvalidConfig("r must be positive".into()));
            }
        }
        Ok(())
    }

    /// Canonical 64-bit content hash (FNV-1a over the canonical JSON form).
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// Render as a `key = value` config file.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("command", self.command.clone());
        let fv = |x: f64| fmt_f64(x);
        if let Some(x) = self.k0 { push("k0", fv(x)) }
        if let Some(x) = self.r { push("r", fv(x)) }
        if let Some(x) = self.eps { push("eps", fv(x)) }
        if let Some(s) = &self.k1 { push("k1", s.clone()) }
        if let Some(b) = self.chart_base {
            push("chart_base", b.map(fv).join(","))
        }
        if let Some(v) = &self.radii {
            push("radii", v.iter().map(|x| fv(*x)).collect::<Vec<_>>().join(","))
        }
        if let Some(v) = &self.c_values {
            push("c_values", v.iter().map(|x| fv(*x)).collect::<Vec<_>>().join(","))
        }
        if let Some(x) = self.t_span { push("t_span", fv(x)) }
        if let Some(x) = self.tol { push("tol", fv(x)) }
        if let Some(x) = self.step { push("step", fv(x)) }
        if let Some(x) = self.samples { push("samples", x.to_string()) }
        if let Some(x) = self.seed { push("seed", x.to_string()) }
        if let Some(x) = self.grid_n { push("grid_n", x.to_string()) }
        if let Some(x) = self.grid_half_width { push("grid_half_width", fv(x)) }
        if let Some(s) = &self.out { push("out", s.clone()) }
        if let Some(s) = &self.store { push("store", s.clone()) }
        out
    }

    /// Parse a `key = value` config (UTF-8, `#` comments, blank lines ok).
    /// Unknown keys are rejected with the offending line number.
    pub fn from_config_str(text: &str) -> Result<RunConfig, StoreError> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(StoreError::ParseError {
                line: line_no,
                msg: format!("expected `key = value`, got `{raw}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let err = |msg: String| StoreError::ParseError { line: line_no, msg };
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| err(format!("`{v}` is not a number")))
            };
            let parse_list = |v: &str| -> Result<Vec<f64>, StoreError> {
                v.split(',')
                    .map(|p| {
                        p.trim().parse::<f64>().map_err(|_| StoreError::ParseError {
                            line: line_no,
                            msg: format!("`{p}` is not a number"),
                        })
                    })
                    .collect()
            };
            match key {
                "command" => cfg.command = value.to_string(),
                "k0" => cfg.k0 = Some(parse_f64(value)?),
                "r" => cfg.r = Some(parse_f64(value)?),
                "eps" => cfg.eps = Some(parse_f64(value)?),
                "k1" => cfg.k1 = Some(value.to_string()),
                "chart_base" => {
                    let v = parse_list(value)?;
                    if v.len() != 3 {
                        return Err(err("chart_base needs three components".into()));
                    }
                    cfg.chart_base = Some([v[0], v[1], v[2]]);
                }
                "radii" => cfg.radii = Some(parse_list(value)?),
                "c_values" => cfg.c_values = Some(parse_list(value)?),
                "t_span" => cfg.t_span = Some(parse_f64(value)?),
                "tol" => cfg.tol = Some(parse_f64(value)?),
                "step" => cfg.step = Some(parse_f64(value)?),
                "samples" => {
                    cfg.samples =
                        Some(value.parse().map_err(|_| err("bad sample count".into()))?)
                }
                "seed" => cfg.seed = Some(value.parse().map_err(|_| err("bad seed".into()))?),
                "grid_n" => {
                    cfg.grid_n = Some(value.parse().map_err(|_| err("bad grid size".into()))?)
                }
                "grid_half_width" => cfg.grid_half_width = Some(parse_f64(value)?),
                "out" => cfg.out = Some(value.to_string()),
                "store" => cfg.store = Some(value.to_string()),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, StoreError> {
    RunConfig::from_config_str(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Orbit,
    Audit,
    Reduction,
    Sweep,
}

/// One line of the JSON-lines result store.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoreRecord {
    pub v: u32,
    pub kind: RecordKind,
    pub payload: serde_json::Value,
    /// Hex FNV-1a hash of the producing RunConfig.
    pub config_hash: String,
    pub tool_version: String,
    pub created_unix: u64,
}

impl StoreRecord {
    pub fn new(kind: RecordKind, payload: serde_json::Value, config: &RunConfig) -> Self {
        StoreRecord {
            v: SCHEMA_VERSION,
            kind,
            payload,
            config_hash: format!("{:016x}", config.hash()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Append one record; the line is written with a single O_APPEND write so
/// concurrent producers stay line-atomic.
pub fn append_record(store: &Path, rec: &StoreRecord) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(rec)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(store)?;
    f.write_all(line.as_bytes())?;
    Ok(())
}

/// Read records, optionally filtered by kind and/or config hash. Rejects any
/// line with a foreign schema version.
pub fn read_records(
    store: &Path,
    kind: Option<RecordKind>,
    config_hash: Option<&str>,
) -> Result<Vec<StoreRecord>, StoreError> {
    let mut out = Vec::new();
    if !store.exists() {
        return Ok(out);
    }
    for line in BufReader::new(std::fs::File::open(store)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StoreRecord = serde_json::from_str(&line)?;
        if rec.v != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersionMismatch(rec.v));
        }
        if kind.is_some_and(|k| k != rec.kind) {
            continue;
        }
        if config_hash.is_some_and(|h| h != rec.config_hash) {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Canonical JSON for payloads: maps with sorted keys and floats via
/// [`fmt_f64`]-compatible default formatting.
pub fn sorted_json(value: &serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(map) => {
            let sorted: BTreeMap<_, _> =
                map.iter().map(|(k, v)| (k.clone(), sorted_json(v))).collect();
            serde_json::to_value(sorted).expect("object reserializes")
        }
        serde_json::Value::Array(items) => {
            serde_json::Value::Array(items.iter().map(sorted_json).collect())
        }
        other => other.clone(),
    }
}
