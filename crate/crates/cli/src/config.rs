//! Config files: TOML text, `key=value` overrides and strict decoding.

use std::path::Path;

use fabric::sim::config::ExperimentConfig;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("override `{0}`: expected key=value")]
    OverrideSyntax(String),
    #[error("override `{key}`: {reason}")]
    OverridePath { key: String, reason: String },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub fn read_config(path: &Path, overrides: &[String]) -> Result<(ExperimentConfig, Table), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, overrides)
}

/// Parses `text`, applies overrides and decodes it. Also returns the
/// effective document.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<(ExperimentConfig, Table), ConfigError> {
    let mut doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg = decode(doc.clone())?;
    Ok((cfg, doc))
}

pub fn decode(doc: Table) -> Result<ExperimentConfig, ConfigError> {
    serde_path_to_error::deserialize(Value::Table(doc)).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().message().to_string(),
    })
}

fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `a.b.0.c = value`; numeric segments index arrays. Missing tables
/// along the path are created.
pub fn apply_override(doc: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::OverrideSyntax(spec.into()))?;
    let key = key.trim();
    let segments: Vec<&str> = key.split('.').collect();
    if key.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::OverrideSyntax(spec.into()));
    }
    let value = parse_value(raw.trim());
    let mut root = Value::Table(std::mem::take(doc));
    let result = set_path(&mut root, &segments, value).map_err(|reason| ConfigError::OverridePath {
        key: key.into(),
        reason: reason.into(),
    });
    if let Value::Table(t) = root {
        *doc = t;
    }
    result
}

fn set_path(root: &mut Value, segments: &[&str], value: Value) -> Result<(), &'static str> {
    let (last, parents) = segments.split_last().expect("non-empty path");
    let mut cur = root;
    for seg in parents {
        cur = match cur {
            Value::Table(t) => t.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| "array segments must be indices")?;
                a.get_mut(i).ok_or("index out of range")?
            }
            _ => return Err("path goes through a scalar"),
        };
    }
    match cur {
        Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| "array segments must be indices")?;
            *a.get_mut(i).ok_or("index out of range")? = value;
        }
        _ => return Err("path goes through a scalar"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
name = "t"
kind = "point_mass"
seed = 1

[tree]
dim = 2

[[tree.components]]
kind = "baseline"
lambda = 1.0

[integration]
dt = 0.01
horizon = 1.0
"#;

    #[test]
    fn override_sets_nested_values() {
        let (cfg, _) = parse_config(MINIMAL, &["integration.dt=0.02".into(), "tree.components.0.lambda=2".into()]).unwrap();
        assert_eq!(cfg.integration.dt, 0.02);
        assert!(matches!(cfg.tree.components[0], fabric::sim::config::Component::Baseline { lambda } if lambda == 2.0));
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = parse_config(MINIMAL, &["tree.components.0.lamda=2".into()]).unwrap_err();
        match err {
            ConfigError::Schema { path, message } => {
                assert_eq!(path, "tree.components[0]");
                assert!(message.contains("lamda"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_override_syntax() {
        assert!(matches!(parse_config(MINIMAL, &["integration.dt".into()]), Err(ConfigError::OverrideSyntax(_))));
        assert!(matches!(
            parse_config(MINIMAL, &["tree.components.9.lambda=1".into()]),
            Err(ConfigError::OverridePath { .. })
        ));
    }

    #[test]
    fn string_values_fall_back_to_text() {
        assert_eq!(parse_value("forced"), Value::String("forced".into()));
        assert_eq!(parse_value("\"forced\""), Value::String("forced".into()));
        assert_eq!(parse_value("3"), Value::Integer(3));
    }
}
