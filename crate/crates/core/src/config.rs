//! Run configuration: flat `key = value` files whose keys mirror the CLI flags.
//!
//! ```text
//! # tuning run
//! nbest = dev.nbest
//! refs = dev.ref0, dev.ref1
//! rotate = lm:d
//! grid_step = 0.05
//! ```
//!
//! Dashes and underscores in keys are interchangeable. List values are
//! comma-separated. Relative paths resolve against the working directory.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::kcd::KcdConfig;
use crate::rss::AlphaGrid;

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!("line {}: expected `key = value`, got {raw:?}", i + 1)));
        };
        let key = normalize_key(k);
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", i + 1)));
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

/// Reals separated by whitespace, commas or newlines; `#` comments allowed.
pub fn parse_weights(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidConfig(format!("weight {t:?} is not a finite number")))
        })
        .collect()
}

/// One weight per line, in feature order.
pub fn format_weights(w: &[f64]) -> String {
    w.iter().map(|x| format!("{x}\n")).collect()
}

/// A rotation request as written by the user: features by name or index.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationRequest {
    pub from: String,
    pub to: String,
    /// Fixed α; `None` means the pair is gridded.
    pub alpha: Option<f64>,
}

/// Parses `A:B` or `A:B=alpha`.
pub fn parse_rotation(text: &str) -> Result<RotationRequest> {
    let bad = || Error::InvalidConfig(format!("rotation {text:?} is not `from:to` or `from:to=alpha`"));
    let (pair, alpha) = match text.split_once('=') {
        Some((p, a)) => (p, Some(a.trim().parse::<f64>().map_err(|_| bad())?)),
        None => (text, None),
    };
    let (from, to) = pair.split_once(':').ok_or_else(bad)?;
    let (from, to) = (from.trim(), to.trim());
    if from.is_empty() || to.is_empty() {
        return Err(bad());
    }
    Ok(RotationRequest {
        from: from.to_owned(),
        to: to.to_owned(),
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitWeights {
    Uniform,
    Inline(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nbest: PathBuf,
    pub refs: Vec<PathBuf>,
    pub open_nbest: Option<PathBuf>,
    pub open_refs: Vec<PathBuf>,
    pub init: InitWeights,
    pub kcd: KcdConfig,
    pub rotations: Vec<RotationRequest>,
    pub grid: AlphaGrid,
    pub out_dir: PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "nbest",
    "refs",
    "open_nbest",
    "open_refs",
    "init",
    "init_file",
    "epsilon",
    "max_iter",
    "sweep_mode",
    "parallel",
    "rotate",
    "grid_start",
    "grid_end",
    "grid_step",
    "out_dir",
];

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

fn parse_num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{key} = {v:?} is not a valid number"))),
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{v:?} is not a boolean"))),
    }
}

impl RunConfig {
    /// Builds a config from merged key/value settings (flags already applied on top).
    pub fn from_map(kv: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(unknown) = kv.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::InvalidConfig(format!("unknown setting {unknown:?}")));
        }
        let nbest = kv
            .get("nbest")
            .map(PathBuf::from)
            .ok_or_else(|| Error::InvalidConfig("no N-best file given (nbest)".into()))?;
        let refs: Vec<PathBuf> = kv.get("refs").map(|v| list(v)).unwrap_or_default().into_iter().map(PathBuf::from).collect();
        if refs.is_empty() {
            return Err(Error::InvalidConfig("no reference files given (refs)".into()));
        }
        let open_nbest = kv.get("open_nbest").map(PathBuf::from);
        let open_refs: Vec<PathBuf> = kv
            .get("open_refs")
            .map(|v| list(v))
            .unwrap_or_default()
            .into_iter()
            .map(PathBuf::from)
            .collect();
        if open_nbest.is_some() != !open_refs.is_empty() {
            return Err(Error::InvalidConfig("open_nbest and open_refs must be given together".into()));
        }

        let init = match (kv.get("init"), kv.get("init_file")) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give init or init_file, not both".into())),
            (Some(v), None) => InitWeights::Inline(parse_weights(v)?),
            (None, Some(p)) => InitWeights::File(PathBuf::from(p)),
            (None, None) => InitWeights::Uniform,
        };

        let defaults = KcdConfig::default();
        let kcd = KcdConfig {
            epsilon: parse_num(kv, "epsilon", defaults.epsilon)?,
            max_iter: parse_num(kv, "max_iter", defaults.max_iter)?,
            sweep_mode: kv.get("sweep_mode").map(|v| v.parse()).transpose()?.unwrap_or_default(),
            parallel: kv.get("parallel").map(|v| parse_bool(v)).transpose()?.unwrap_or(defaults.parallel),
        };
        kcd.validate()?;

        let rotations = kv
            .get("rotate")
            .map(|v| list(v))
            .unwrap_or_default()
            .iter()
            .map(|r| parse_rotation(r))
            .collect::<Result<Vec<_>>>()?;

        let g = AlphaGrid::default();
        let grid = AlphaGrid::new(
            parse_num(kv, "grid_start", g.start)?,
            parse_num(kv, "grid_end", g.end)?,
            parse_num(kv, "grid_step", g.step)?,
        )
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

        Ok(RunConfig {
            nbest,
            refs,
            open_nbest,
            open_refs,
            init,
            kcd,
            rotations,
            grid,
            out_dir: kv.get("out_dir").map_or_else(|| PathBuf::from("."), PathBuf::from),
        })
    }
}
