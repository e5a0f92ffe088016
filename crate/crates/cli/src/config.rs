//! Flag/config-file resolution.
//!
//! The optional config file is flat `key=value` (keys match the long flag
//! names), `#` starts a comment. Command-line flags always override file
//! values.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use flipdml::estimator::PolySpec;
use flipdml::nuisance::LearnerSpec;
use flipdml::panel::ValidationMode;
use flipdml::simgen::GKind;
use flipdml::{Error, Result};

#[derive(Debug, Default)]
pub struct FileConfig(HashMap<String, String>);

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    i + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("config key `{key}`: cannot parse `{v}`"))
            }),
        }
    }
}

/// Flag value if given, else config-file value, else default.
pub fn resolve<T: FromStr>(cli: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T> {
    match cli {
        Some(v) => Ok(v),
        None => Ok(file.parsed(key)?.unwrap_or(default)),
    }
}

/// Flag value if given, else config-file value, else `None`.
pub fn resolve_opt<T: FromStr>(cli: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>> {
    match cli {
        Some(v) => Ok(Some(v)),
        None => file.parsed(key),
    }
}

/// Boolean switch: a set flag wins, else the config file, else false.
pub fn resolve_switch(cli: bool, file: &FileConfig, key: &str) -> Result<bool> {
    if cli {
        return Ok(true);
    }
    match file.raw(key) {
        None => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(v) => Err(Error::InvalidConfig(format!(
            "config key `{key}`: expected true/false, got `{v}`"
        ))),
    }
}

pub fn parse_spec(s: &str) -> Result<PolySpec> {
    match s {
        "constant" => Ok(PolySpec::constant()),
        "linear" => Ok(PolySpec::linear()),
        "cubic" => Ok(PolySpec::cubic()),
        other => {
            if let Some(q) = other.strip_prefix("q=") {
                let q: usize = q.parse().map_err(|_| {
                    Error::InvalidConfig(format!("invalid polynomial degree `{other}`"))
                })?;
                Ok(PolySpec::new(q))
            } else {
                Err(Error::InvalidConfig(format!(
                    "unknown spec `{other}` (expected constant|linear|cubic|q=N)"
                )))
            }
        }
    }
}

pub fn parse_learner(s: &str) -> Result<LearnerSpec> {
    match s {
        "mean" => Ok(LearnerSpec::Mean),
        "linear" => Ok(LearnerSpec::Linear),
        "ridge" => Ok(LearnerSpec::Ridge { lambda: None }),
        "boosted" => Ok(LearnerSpec::boosted_default()),
        other => {
            if let Some(l) = other.strip_prefix("ridge=") {
                let lambda: f64 = l.parse().map_err(|_| {
                    Error::InvalidConfig(format!("invalid ridge penalty `{other}`"))
                })?;
                Ok(LearnerSpec::Ridge {
                    lambda: Some(lambda),
                })
            } else {
                Err(Error::InvalidConfig(format!(
                    "unknown learner `{other}` (expected mean|linear|ridge[=λ]|boosted)"
                )))
            }
        }
    }
}

pub fn parse_validation(s: &str) -> Result<ValidationMode> {
    match s {
        "strict" => Ok(ValidationMode::Strict),
        "synthetic" => Ok(ValidationMode::Synthetic),
        other => Err(Error::InvalidConfig(format!(
            "unknown validation mode `{other}` (expected strict|synthetic)"
        ))),
    }
}

pub fn parse_g_kind(s: &str) -> Result<GKind> {
    match s {
        "linear" => Ok(GKind::Linear),
        "nonlinear" => Ok(GKind::Nonlinear),
        other => Err(Error::InvalidConfig(format!(
            "unknown g kind `{other}` (expected linear|nonlinear)"
        ))),
    }
}

/// Comma-separated coefficient list for custom effect polynomials.
pub fn parse_theta_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("invalid coefficient `{v}`")))
        })
        .collect()
}
