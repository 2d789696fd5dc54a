//! Run configuration: flat `key = value` files plus flag overrides.

use std::path::PathBuf;

use bdf_core::adapt::{AdaptConfig, RefinementMode};
use bdf_core::solver::{Scheme, StopCriteria, StopMode};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },

    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: String,
    pub re: f64,
    pub c_in: f64,
    /// Initial grid parameter: the case's base grid is divided `n0` times per unit.
    pub n0: usize,
    pub scheme: Scheme,
    pub stop_mode: StopMode,
    pub tol_abs: f64,
    pub gamma_tilde: f64,
    pub max_iter: usize,
    pub theta: f64,
    pub max_levels: usize,
    pub mode: RefinementMode,
    pub quad_degree: usize,
    pub output_dir: PathBuf,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stop = StopCriteria::default();
        RunConfig {
            case: "manufactured".into(),
            re: 100.0,
            c_in: 0.2,
            n0: 8,
            scheme: Scheme::Relaxed,
            stop_mode: stop.mode,
            tol_abs: stop.tol_abs,
            gamma_tilde: stop.gamma_tilde,
            max_iter: stop.max_iter,
            theta: 0.5,
            max_levels: 5,
            mode: RefinementMode::Adaptive,
            quad_degree: bdf_core::quadrature::DEFAULT_DEGREE,
            output_dir: PathBuf::from("out"),
            deterministic: true,
        }
    }
}

/// Splits config text into `(key, value)` pairs. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, message: format!("expected `key = value`, got `{line}`") });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
        }
        if pairs.iter().any(|(k, _): &(String, String)| k == key) {
            return Err(ConfigError::Syntax { line: i + 1, message: format!("duplicate key `{key}`") });
        }
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        for (key, value) in parse_pairs(text)? {
            config.set(&key, &value)?;
        }
        Ok(config)
    }

    /// Assigns one key; the value is parsed but range checks wait for
    /// [`RunConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "case" => self.case = value.to_string(),
            "re" => self.re = parse_value(key, value)?,
            "c_in" => self.c_in = parse_value(key, value)?,
            "n0" => self.n0 = parse_value(key, value)?,
            "scheme" => self.scheme = parse_value(key, value)?,
            "stop_mode" => self.stop_mode = parse_value(key, value)?,
            "tol_abs" => self.tol_abs = parse_value(key, value)?,
            "gamma_tilde" => self.gamma_tilde = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "theta" => self.theta = parse_value(key, value)?,
            "max_levels" => self.max_levels = parse_value(key, value)?,
            "mode" => self.mode = parse_value(key, value)?,
            "quad_degree" => self.quad_degree = parse_value(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "deterministic" => self.deterministic = parse_value(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(ConfigError::InvalidValue { key: key.into(), value, reason: reason.into() })
        };
        if !matches!(self.case.as_str(), "manufactured" | "packed_bed") {
            return bad("case", self.case.clone(), "expected `manufactured` or `packed_bed`");
        }
        if !(self.re.is_finite() && self.re > 0.0) {
            return bad("re", self.re.to_string(), "must be positive");
        }
        if !(self.c_in.is_finite() && self.c_in > 0.0) {
            return bad("c_in", self.c_in.to_string(), "must be positive");
        }
        if self.n0 == 0 {
            return bad("n0", "0".into(), "must be at least 1");
        }
        if !(self.tol_abs.is_finite() && self.tol_abs > 0.0) {
            return bad("tol_abs", self.tol_abs.to_string(), "must be positive");
        }
        if !(self.gamma_tilde.is_finite() && self.gamma_tilde > 0.0) {
            return bad("gamma_tilde", self.gamma_tilde.to_string(), "must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter", "0".into(), "must be at least 1");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return bad("theta", self.theta.to_string(), "must lie in (0, 1]");
        }
        if self.max_levels == 0 {
            return bad("max_levels", "0".into(), "must be at least 1");
        }
        if !(1..=40).contains(&self.quad_degree) {
            return bad("quad_degree", self.quad_degree.to_string(), "must lie in 1..=40");
        }
        Ok(())
    }

    pub fn stop_criteria(&self) -> StopCriteria {
        StopCriteria {
            mode: self.stop_mode,
            tol_abs: self.tol_abs,
            gamma_tilde: self.gamma_tilde,
            max_iter: self.max_iter,
        }
    }

    pub fn adapt_config(&self, mode: RefinementMode, threads: usize) -> AdaptConfig {
        AdaptConfig {
            theta: self.theta,
            max_levels: self.max_levels,
            mode,
            scheme: self.scheme,
            stop: self.stop_criteria(),
            quad_degree: self.quad_degree,
            threads: if self.deterministic { 1 } else { threads },
            ..AdaptConfig::default()
        }
    }
}
