//! Unit constants, output format and seed, read from a JSON file.

use serde::Deserialize;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub hbar: f64,
    pub k_boltzmann: f64,
    pub h_planck: f64,
    pub c_light: f64,
    pub output_format: OutputFormat,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self { hbar: 1.0, k_boltzmann: 1.0, h_planck: 1.0, c_light: 1.0, output_format: OutputFormat::Csv, seed: 0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(ParseError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} column {}: {}", self.line, self.column, self.message)
    }
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        // serde_json appends its own position; keep the bare message.
        let text = e.to_string();
        let message = match text.rfind(" at line ") {
            Some(i) => text[..i].to_string(),
            None => text,
        };
        Self { line: e.line(), column: e.column(), message }
    }
}

pub fn parse_config(text: &str) -> Result<Config, ParseError> {
    let config: Config = serde_json::from_str(text)?;
    let constants = [
        ("hbar", config.hbar),
        ("k_boltzmann", config.k_boltzmann),
        ("h_planck", config.h_planck),
        ("c_light", config.c_light),
    ];
    for (key, v) in constants {
        if !(v.is_finite() && v > 0.0) {
            let (line, column) = locate(text, key);
            return Err(ParseError { line, column, message: format!("{key} must be positive, got {v}") });
        }
    }
    Ok(config)
}

/// One-based line and column of the first `"key"` in `text`.
fn locate(text: &str, key: &str) -> (usize, usize) {
    let quoted = format!("\"{key}\"");
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.find(&quoted) {
            return (i + 1, c + 1);
        }
    }
    (1, 1)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text).map_err(ConfigError::Parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(parse_config("{}").unwrap(), Config::default());
    }

    #[test]
    fn partial_override() {
        let c = parse_config(r#"{"hbar": 2}"#).unwrap();
        assert_eq!(c.hbar, 2.0);
        assert_eq!(Config { hbar: 1.0, ..c }, Config::default());
    }

    #[test]
    fn non_positive_constant_reports_position() {
        let e = parse_config("{\n  \"hbar\": -1\n}").unwrap_err();
        assert_eq!(e.line, 2);
        assert!(e.message.contains("positive"), "{e}");
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(parse_config(r#"{"hbarr": 1}"#).is_err());
        assert!(parse_config(r#"{"output_format": "xml"}"#).is_err());
        assert_eq!(parse_config(r#"{"output_format": "json", "seed": 7}"#).unwrap().seed, 7);
    }
}
