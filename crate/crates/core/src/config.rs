//! Flat `key = value` settings for [`FusionConfig`].
//!
//! ```text
//! # fusion.cfg
//! mode = mfif
//! ssf.lambda = 0.1
//! pyr.levels = 4
//! ```
//!
//! Later entries override earlier ones. Unless `ssf.beta0` is given, it
//! follows `2 · ssf.lambda`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::FusionConfig;
use crate::ssf::{InnerSolver, SsfParams};

/// Every recognised key.
pub const KEYS: &[&str] = &[
    "mode",
    "chroma",
    "ssf.alpha",
    "ssf.lambda",
    "ssf.beta0",
    "ssf.beta_mult",
    "ssf.beta_max",
    "ssf.inner_tol",
    "ssf.max_outer_iters",
    "ssf.solver",
    "pyr.levels",
    "sf.window",
    "cv.area_frac",
    "cv.levels",
    "grad.p",
    "grad.diff",
    "struct.block",
    "struct.rule",
];

/// Splits config text into `(key, value)` pairs.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!("line {}: expected `key = value`", no + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::InvalidParameter(format!("line {}: expected `key = value`", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Reads and parses a config file.
pub fn read_entries(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Unreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_entries(&text)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse `{v}`")))
}

/// Applies one setting.
pub fn set(cfg: &mut FusionConfig, key: &str, value: &str) -> Result<()> {
    let s = &mut cfg.ssf;
    match key {
        "mode" => cfg.mode = value.parse()?,
        "chroma" => cfg.chroma = value.parse()?,
        "ssf.alpha" => s.alpha = num(key, value)?,
        "ssf.lambda" => s.lambda = num(key, value)?,
        "ssf.beta0" => s.beta0 = num(key, value)?,
        "ssf.beta_mult" => s.beta_mult = num(key, value)?,
        "ssf.beta_max" => s.beta_max = num(key, value)?,
        "ssf.inner_tol" => s.inner_tol = num(key, value)?,
        "ssf.max_outer_iters" => s.max_outer_iters = num(key, value)?,
        "ssf.solver" => {
            s.solver = match value {
                "spectral" => InnerSolver::Spectral,
                "cg" => InnerSolver::ConjugateGradient,
                _ => return Err(Error::InvalidParameter(format!("ssf.solver: expected spectral or cg, got `{value}`"))),
            }
        }
        "pyr.levels" => cfg.pyr_levels = num(key, value)?,
        "sf.window" => cfg.sf_window = num(key, value)?,
        "cv.area_frac" => cfg.verify.area_frac = num(key, value)?,
        "cv.levels" => cfg.verify.levels = num(key, value)?,
        "grad.p" => cfg.grad_p = num(key, value)?,
        "grad.diff" => cfg.grad_diff = value.parse()?,
        "struct.block" => cfg.struct_block = num(key, value)?,
        "struct.rule" => cfg.struct_rule = value.parse()?,
        _ => return Err(Error::UnknownKey(key.to_string())),
    }
    Ok(())
}

/// Builds a validated config from defaults plus ordered overrides.
pub fn from_entries<K: AsRef<str>, V: AsRef<str>>(entries: &[(K, V)]) -> Result<FusionConfig> {
    let mut cfg = FusionConfig::default();
    let mut beta0_given = false;
    for (k, v) in entries {
        set(&mut cfg, k.as_ref(), v.as_ref())?;
        beta0_given |= k.as_ref() == "ssf.beta0";
    }
    if !beta0_given {
        cfg.ssf.beta0 = SsfParams::with_lambda(cfg.ssf.lambda).beta0;
    }
    cfg.validate()?;
    Ok(cfg)
}
