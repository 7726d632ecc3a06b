//! Flat `key = value` run configuration.
//!
//! ```text
//! # two bubbles, coarse
//! preset = ex42
//! scheme = bdf2
//! variant = cp
//! nx = 32
//! n_steps = 200
//! ```
//!
//! The preset supplies every default; the remaining keys override it.

use std::collections::HashMap;
use std::path::PathBuf;

use chns_core::convergence::RunSpec;
use chns_core::ieq::{PhysParams, Scheme, Variant};
use chns_core::manufactured::Example;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` is set twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: cannot parse `{value}` as {expected} for `{key}`")]
    Malformed { line: usize, key: String, value: String, expected: &'static str },
    #[error("line {line}: missing required key `{key}`")]
    Missing { line: usize, key: &'static str },
    #[error("line {line}: {key} {reason}")]
    Invalid { line: usize, key: &'static str, reason: String },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::Malformed { line, .. }
            | ConfigError::Missing { line, .. }
            | ConfigError::Invalid { line, .. } => *line,
        }
    }
}

pub const KEYS: [&str; 17] = [
    "preset",
    "scheme",
    "variant",
    "nx",
    "ny",
    "tau",
    "t_end",
    "n_steps",
    "gamma",
    "mu",
    "lambda",
    "eps",
    "b",
    "solver_tol",
    "output_dir",
    "vtk_every",
    "history_every",
];

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub example: Example,
    pub scheme: Scheme,
    pub variant: Variant,
    pub nx: usize,
    pub ny: usize,
    pub tau: f64,
    pub n_steps: usize,
    pub params: PhysParams,
    pub solver_tol: f64,
    pub output_dir: PathBuf,
    /// Steps between field dumps; 0 disables them.
    pub vtk_every: usize,
    /// Steps between history rows.
    pub history_every: usize,
}

impl RunConfig {
    /// Defaults of `example`: its recommended mesh, step and final time.
    pub fn from_example(example: Example) -> RunConfig {
        let p = example.preset();
        RunConfig {
            example,
            scheme: Scheme::Bdf1,
            variant: Variant::P,
            nx: p.nx,
            ny: p.ny,
            tau: p.tau,
            n_steps: steps_for(p.t_end, p.tau),
            params: p.params,
            solver_tol: 1e-11,
            output_dir: PathBuf::from("output"),
            vtk_every: 0,
            history_every: 1,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.n_steps as f64 * self.tau
    }

    pub fn run_spec(&self, threads: usize) -> RunSpec {
        RunSpec {
            nx: self.nx,
            ny: self.ny,
            tau: self.tau,
            t_end: self.t_end(),
            params: self.params,
            threads,
            solver_tol: self.solver_tol,
            ..RunSpec::from_example(self.example, self.scheme, self.variant)
        }
    }
}

fn steps_for(t_end: f64, tau: f64) -> usize {
    (t_end / tau).round() as usize
}

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

impl Entry<'_> {
    fn malformed(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::Malformed { line: self.line, key: key.to_string(), value: self.value.to_string(), expected }
    }
}

pub fn parse_scheme(s: &str) -> Option<Scheme> {
    match s.to_ascii_lowercase().as_str() {
        "bdf1" | "1" => Some(Scheme::Bdf1),
        "bdf2" | "2" => Some(Scheme::Bdf2),
        _ => None,
    }
}

pub fn parse_variant(s: &str) -> Option<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "c" => Some(Variant::C),
        "p" => Some(Variant::P),
        "cp" => Some(Variant::Cp),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<&str, Entry> = HashMap::new();
    let mut n_lines = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        n_lines = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        let Some(&key) = KEYS.iter().find(|k| **k == key) else {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        };
        if let Some(first) = entries.get(key) {
            return Err(ConfigError::Duplicate { line, key: key.to_string(), first: first.line });
        }
        entries.insert(key, Entry { line, value });
    }

    let preset = entries.get("preset").ok_or(ConfigError::Missing { line: n_lines + 1, key: "preset" })?;
    let example = Example::parse(preset.value).ok_or_else(|| preset.malformed("preset", "an example name"))?;
    let mut cfg = RunConfig::from_example(example);
    let base = example.preset();

    let float = |key: &'static str| -> Result<Option<(f64, usize)>, ConfigError> {
        let Some(e) = entries.get(key) else { return Ok(None) };
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some((v, e.line))),
            _ => Err(e.malformed(key, "a finite number")),
        }
    };
    let count = |key: &'static str| -> Result<Option<(usize, usize)>, ConfigError> {
        let Some(e) = entries.get(key) else { return Ok(None) };
        e.value.parse::<usize>().map(|v| Some((v, e.line))).map_err(|_| e.malformed(key, "a non-negative integer"))
    };
    let positive = |key: &'static str, v: f64, line: usize| -> Result<f64, ConfigError> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::Invalid { line, key, reason: format!("must be positive, got {v}") })
        }
    };
    let at_least_one = |key: &'static str, v: usize, line: usize| -> Result<usize, ConfigError> {
        if v >= 1 {
            Ok(v)
        } else {
            Err(ConfigError::Invalid { line, key, reason: "must be at least 1".to_string() })
        }
    };

    if let Some(e) = entries.get("scheme") {
        cfg.scheme = parse_scheme(e.value).ok_or_else(|| e.malformed("scheme", "bdf1 or bdf2"))?;
    }
    if let Some(e) = entries.get("variant") {
        cfg.variant = parse_variant(e.value).ok_or_else(|| e.malformed("variant", "c, p or cp"))?;
    }
    match (count("nx")?, count("ny")?) {
        (Some((nx, lx)), ny) => {
            cfg.nx = at_least_one("nx", nx, lx)?;
            cfg.ny = match ny {
                Some((ny, ly)) => at_least_one("ny", ny, ly)?,
                // keep the preset's aspect ratio
                None => ((nx * base.ny + base.nx / 2) / base.nx).max(1),
            };
        }
        (None, Some((ny, ly))) => cfg.ny = at_least_one("ny", ny, ly)?,
        (None, None) => {}
    }
    if let Some((v, line)) = float("tau")? {
        cfg.tau = positive("tau", v, line)?;
    }
    match (float("t_end")?, count("n_steps")?) {
        (Some(_), Some((_, line))) => {
            return Err(ConfigError::Invalid { line, key: "n_steps", reason: "conflicts with t_end".to_string() })
        }
        (Some((t, line)), None) => {
            if t < 0.0 {
                return Err(ConfigError::Invalid { line, key: "t_end", reason: format!("must not be negative, got {t}") });
            }
            cfg.n_steps = steps_for(t, cfg.tau);
        }
        (None, Some((n, _))) => cfg.n_steps = n,
        (None, None) => cfg.n_steps = steps_for(base.t_end, cfg.tau),
    }
    for (key, slot) in [
        ("gamma", &mut cfg.params.gamma),
        ("mu", &mut cfg.params.mu),
        ("lambda", &mut cfg.params.lambda),
        ("eps", &mut cfg.params.eps),
        ("b", &mut cfg.params.shift),
    ] {
        if let Some((v, line)) = float(key)? {
            *slot = positive(key, v, line)?;
        }
    }
    if let Some((v, line)) = float("solver_tol")? {
        if !(v > 0.0 && v < 1.0) {
            return Err(ConfigError::Invalid { line, key: "solver_tol", reason: format!("must lie in (0, 1), got {v}") });
        }
        cfg.solver_tol = v;
    }
    if let Some(e) = entries.get("output_dir") {
        cfg.output_dir = PathBuf::from(e.value);
    }
    if let Some((v, _)) = count("vtk_every")? {
        cfg.vtk_every = v;
    }
    if let Some((v, line)) = count("history_every")? {
        cfg.history_every = at_least_one("history_every", v, line)?;
    }
    Ok(cfg)
}
