//! Run configuration: plain-text config files (flat `key = value` pairs,
//! `[section]` headers allowed), command-line overrides, and the snapshot
//! written next to every output set.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TqcError};
use crate::model::ModelParams;
use crate::quantum::DEFAULT_MAX_DIM;

/// Fully resolved run configuration. Flags win over config-file keys, which
/// win over the defaults below.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub omega: f64,
    pub omega0: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub n_qubits: usize,
    pub n_max: usize,
    pub dt_per_period: u64,
    pub n_periods: u64,
    pub max_dim: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega: 1.0,
            omega0: 1.0,
            kappa: 0.05,
            lambda: 1.0,
            epsilon: 0.0,
            n_qubits: 2,
            n_max: 30,
            dt_per_period: 1000,
            n_periods: 5000,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl RunConfig {
    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            omega: self.omega,
            omega0: self.omega0,
            kappa: self.kappa,
            lambda_max: self.lambda,
            n_qubits: Some(self.n_qubits),
        }
    }

    /// Applies config-file keys. Unknown keys are rejected so typos fail
    /// loudly rather than silently falling back to defaults.
    pub fn apply_file_keys(&mut self, keys: &BTreeMap<String, (usize, String)>) -> Result<()> {
        for (key, (line, value)) in keys {
            let parse_f64 = || {
                value.parse::<f64>().map_err(|_| TqcError::Parse {
                    line: *line,
                    msg: format!("key '{key}' expects a number, got '{value}'"),
                })
            };
            let parse_usize = || {
                value.parse::<usize>().map_err(|_| TqcError::Parse {
                    line: *line,
                    msg: format!("key '{key}' expects a nonnegative integer, got '{value}'"),
                })
            };
            match key.as_str() {
                "omega" => self.omega = parse_f64()?,
                "omega0" => self.omega0 = parse_f64()?,
                "kappa" => self.kappa = parse_f64()?,
                "lambda" => self.lambda = parse_f64()?,
                "epsilon" => self.epsilon = parse_f64()?,
                "n_qubits" => self.n_qubits = parse_usize()?,
                "n_max" => self.n_max = parse_usize()?,
                "dt_per_period" => self.dt_per_period = parse_usize()? as u64,
                "n_periods" => self.n_periods = parse_usize()? as u64,
                "max_dim" => self.max_dim = parse_usize()?,
                other => {
                    return Err(TqcError::Parse {
                        line: *line,
                        msg: format!("unknown config key '{other}'"),
                    })
                }
            }
        }
        Ok(())
    }

    /// Applies the TQC_MAX_DIM environment override.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var("TQC_MAX_DIM") {
            self.max_dim = raw.parse::<usize>().map_err(|_| {
                TqcError::Config(format!("TQC_MAX_DIM must be an integer, got '{raw}'"))
            })?;
        }
        Ok(())
    }
}

/// Parses a flat `key = value` config file. `[section]` headers and `#`/`;`
/// comment lines are accepted; keys live in a single flat namespace. Returns
/// key → (line number, value) so downstream errors can name the line.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, (usize, String)>> {
    let text = std::fs::read_to_string(path)?;
    parse_config_text(&text)
}

pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut keys = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(TqcError::Parse {
                    line: line_no,
                    msg: format!("malformed section header '{line}'"),
                });
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(TqcError::Parse {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(TqcError::Parse {
                line: line_no,
                msg: "empty key".into(),
            });
        }
        keys.insert(key, (line_no, value));
    }
    Ok(keys)
}
