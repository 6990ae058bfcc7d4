use std::path::Path;

use wpiot::config::RunConfig;

use crate::error::CliError;

fn field_path(path: &serde_path_to_error::Path) -> String {
    let text = path.to_string();
    if text == "." {
        "<document>".into()
    } else {
        text
    }
}

fn parse_toml(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
        path: "<document>".into(),
        reason: e.to_string().trim().to_string(),
    })?;
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: field_path(e.path()),
        reason: e.inner().to_string().trim().to_string(),
    })
}

/// A JSON document is either a bare config or a run manifest holding one
/// under `config`.
fn parse_json(text: &str) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config {
        path: "<document>".into(),
        reason: e.to_string(),
    })?;
    let (prefix, body) = match value.get_mut("config") {
        Some(inner) => ("config.", inner.take()),
        None => ("", value),
    };
    serde_path_to_error::deserialize(body).map_err(|e| CliError::Config {
        path: format!("{prefix}{}", field_path(e.path())),
        reason: e.inner().to_string(),
    })
}

/// Reads and validates a config; without a path the defaults are used.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let config = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            if p.extension().is_some_and(|e| e == "json") {
                parse_json(&text)?
            } else {
                parse_toml(&text)?
            }
        }
    };
    Ok(config)
}
