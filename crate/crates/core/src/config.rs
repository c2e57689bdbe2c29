//! Flat `key=value` configuration files.
//!
//! Precedence is built-in defaults, then the config file, then command-line
//! flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::connect::ConnectConfig;
use crate::engine::ParseConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config key {key:?}: {message}")]
    Value { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Conllu,
    Brackets,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "conllu" => Ok(OutputFormat::Conllu),
            "brackets" => Ok(OutputFormat::Brackets),
            other => Err(format!("unknown format {other:?} (expected json, conllu or brackets)")),
        }
    }
}

/// Every tunable the commands accept.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub parse: ParseConfig,
    pub connect: ConnectConfig,
    pub k: usize,
    pub jobs: usize,
    pub format: OutputFormat,
    pub gold_tags: bool,
    pub rule_limit: Option<usize>,
    pub grammar: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub closed_class: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            parse: ParseConfig::default(),
            connect: ConnectConfig::default(),
            k: 1,
            jobs: 1,
            format: OutputFormat::Json,
            gold_tags: false,
            rule_limit: None,
            grammar: None,
            model: None,
            closed_class: None,
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: format!("expected key=value, got {line:?}") })?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value { key: key.into(), message: format!("cannot parse {value:?}") })
}

fn positive(key: &str, value: &str) -> Result<usize, ConfigError> {
    let n: usize = num(key, value)?;
    if n == 0 {
        return Err(ConfigError::Value { key: key.into(), message: "must be at least 1".into() });
    }
    Ok(n)
}

impl Settings {
    /// Applies one setting by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::Value { key: key.into(), message };
        match key {
            "max_skip" => self.parse.max_skip = num(key, value)?,
            "beam" => {
                self.parse.beam_per_cell = match value {
                    "none" | "off" => None,
                    v => Some(positive(key, v)?),
                }
            }
            "max_phrases" => self.parse.max_phrases = positive(key, value)?,
            "cutoff" => {
                let c: f64 = num(key, value)?;
                if !(0.0..1.0).contains(&c) {
                    return Err(bad("must be in [0, 1)".into()));
                }
                self.parse.tag_cutoff = c;
            }
            "lambda" => self.connect.lambda = num(key, value)?,
            "mu" => self.connect.mu = num(key, value)?,
            "epsilon" => {
                let e: f64 = num(key, value)?;
                if e.is_nan() || e <= 0.0 {
                    return Err(bad("must be positive".into()));
                }
                self.connect.epsilon = e;
            }
            "sigma" => {
                let s: f64 = num(key, value)?;
                if s.is_nan() || s <= 0.0 {
                    return Err(bad("must be positive".into()));
                }
                self.connect.sigma = s;
            }
            "alpha" => self.connect.alpha = num(key, value)?,
            "beta" => self.connect.beta = num(key, value)?,
            "alternatives" => self.connect.alternatives = positive(key, value)?,
            "root" => self.connect.root = value.parse().map_err(bad)?,
            "k" => self.k = positive(key, value)?,
            "jobs" => self.jobs = positive(key, value)?,
            "format" => self.format = value.parse().map_err(bad)?,
            "gold_tags" => self.gold_tags = num(key, value)?,
            "rule_limit" => self.rule_limit = Some(num(key, value)?),
            "grammar" => self.grammar = Some(value.into()),
            "model" => self.model = Some(value.into()),
            "closed_class" => self.closed_class = Some(value.into()),
            _ => return Err(bad("unknown setting".into())),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, v) in parse_pairs(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }
}
