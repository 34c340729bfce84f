//! Key-value run configuration files.
//!
//! The format is one `key = value` pair per line; blank lines and lines
//! starting with `#` are skipped. Keys mirror the command-line flags of
//! the subcommand that echoed the file, plus a `command` key naming that
//! subcommand. Unknown keys are rejected so typos fail loudly, and every
//! key can be overridden by the matching flag.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

/// A parsed config file: key to (line number, raw value).
#[derive(Debug, Default)]
pub struct ConfigMap {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigMap {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected `key = value`, got `{line}`",
                    path.display(),
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!(
                    "{}:{}: empty key",
                    path.display(),
                    idx + 1
                )));
            }
            if let Some((prev, _)) = entries.insert(key.clone(), (idx + 1, value)) {
                return Err(CliError::Usage(format!(
                    "{}:{}: key `{key}` already set on line {prev}",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    /// Reject keys the running subcommand does not understand, and a
    /// `command` entry echoed by a different subcommand.
    pub fn check_keys(&self, command: &str, known: &[&str]) -> Result<(), CliError> {
        for (key, (line, value)) in &self.entries {
            if key == "command" {
                if value != command {
                    return Err(CliError::Usage(format!(
                        "{}:{}: config file was echoed by `{value}`, not `{command}`",
                        self.path.display(),
                        line
                    )));
                }
                continue;
            }
            if !known.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{}:{}: unknown key `{key}` for `{command}` (known: {})",
                    self.path.display(),
                    line,
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parse the value under `key`, if present.
    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!(
                    "{}:{}: invalid value `{value}` for `{key}`: {e}",
                    self.path.display(),
                    line
                ))
            }),
        }
    }
}

/// Flag value if given, else the config entry, else the default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &Option<ConfigMap>,
    key: &str,
    default: T,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    Ok(resolve_optional(flag, config, key)?.unwrap_or(default))
}

/// Like [`resolve`], but the key may legitimately stay unset.
pub fn resolve_optional<T: FromStr>(
    flag: Option<T>,
    config: &Option<ConfigMap>,
    key: &str,
) -> Result<Option<T>, CliError>
where
    T::Err: Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    match config {
        Some(map) => map.parse(key),
        None => Ok(None),
    }
}

/// Like [`resolve`], but the key must come from somewhere.
pub fn resolve_required<T: FromStr>(
    flag: Option<T>,
    config: &Option<ConfigMap>,
    key: &str,
) -> Result<T, CliError>
where
    T::Err: Display,
{
    resolve_optional(flag, config, key)?.ok_or_else(|| {
        CliError::Usage(format!("missing `--{}` (or `{key}` in the config file)", key.replace('_', "-")))
    })
}

/// An echoed effective configuration, reproducible via `--config`.
pub struct ConfigEcho {
    lines: Vec<String>,
}

impl ConfigEcho {
    pub fn new(command: &str) -> Self {
        Self {
            lines: vec![
                format!("# effective configuration; rerun with: regpinn {command} --config <this file>"),
                format!("command = {command}"),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.lines.push(format!("{key} = {value}"));
        self
    }

    pub fn push_optional(&mut self, key: &str, value: Option<impl Display>) -> &mut Self {
        if let Some(v) = value {
            self.push(key, v);
        }
        self
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| {
            CliError::Usage(format!("cannot write config echo {}: {e}", path.display()))
        })
    }
}

/// Echo path for a command whose primary output is `out`:
/// `data.csv` becomes `data.csv.config.txt` alongside it.
pub fn echo_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".config.txt");
    out.with_file_name(name)
}

/// Join floats for list-valued keys, in full round-trip precision.
pub fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Parse a comma-separated float list.
pub fn parse_float_list(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("invalid {what} entry `{tok}`: {e}")))
        })
        .collect()
}

/// Parse a comma-separated layer-size list.
pub fn parse_layer_list(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Usage(format!("invalid layer size `{tok}`: {e}")))
        })
        .collect()
}
