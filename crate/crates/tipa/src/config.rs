//! `--config FILE`: TOML defaults for subcommand flags.
//!
//! ```toml
//! typology = "typology.csv"
//!
//! [build-proxy]
//! pool-dir = "adapters"
//! top-k = 5
//! skip-tensors = ["*.bias"]
//! ```
//!
//! Top-level keys apply to every subcommand that accepts them; keys in a
//! `[subcommand]` table apply to that subcommand only and take precedence.
//! Keys are flag names without the leading `--`. Arrays repeat the flag,
//! `true` sets a switch and `false` leaves it out. Flags given on the
//! command line win, and so does every flag in the same exclusive group.

use std::path::Path;

use clap::CommandFactory;

use crate::error::{Error, Result};

const EXCLUSIVE: &[&[&str]] = &[&["top-k", "threshold"], &["typology", "matrix"], &["pool", "pool-dir"]];

fn group_of(key: &str) -> &'static [&'static str] {
    EXCLUSIVE.iter().find(|g| g.contains(&key)).copied().unwrap_or(&[])
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

fn scalar(path: &Path, key: &str, v: &toml::Value) -> Result<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        _ => Err(Error::malformed(path, format!("`{key}`: unsupported value {v}"))),
    }
}

/// Flags for `subcommand` from `path`, minus those `cli` already sets.
/// `accepts` tells which long flags the subcommand defines.
pub fn config_args(
    path: &Path,
    subcommand: &str,
    accepts: impl Fn(&str) -> bool,
    cli: &[String],
) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: toml::Table = toml::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
    let mut merged = toml::Table::new();
    for (key, value) in &doc {
        if !value.is_table() && accepts(key) {
            merged.insert(key.clone(), value.clone());
        }
    }
    if let Some(section) = doc.get(subcommand).and_then(toml::Value::as_table) {
        for (key, value) in section {
            if !accepts(key) {
                return Err(Error::malformed(path, format!("[{subcommand}] has no flag `--{key}`")));
            }
            merged.insert(key.clone(), value.clone());
        }
    }
    let on_cli: Vec<&str> = cli.iter().filter_map(|a| flag_name(a)).collect();
    let overridden = |key: &str| {
        on_cli.contains(&key) || group_of(key).iter().any(|k| on_cli.contains(k))
    };

    let mut out = Vec::new();
    for (key, value) in &merged {
        if key == "config" {
            return Err(Error::malformed(path, "`config` cannot be nested"));
        }
        if overridden(key) {
            continue;
        }
        let flag = format!("--{key}");
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    out.push(flag.clone());
                    out.push(scalar(path, key, item)?);
                }
            }
            other => {
                out.push(flag);
                out.push(scalar(path, key, other)?);
            }
        }
    }
    Ok(out)
}

/// Strip `--config PATH` from `args` and splice the file's flags in right
/// after the subcommand name.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            let p = it.next().ok_or_else(|| Error::Usage("--config needs a path".into()))?;
            config = Some(p);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(config) = config else { return Ok(rest) };
    let Some(pos) = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1) else {
        return Ok(rest);
    };
    let command = crate::cli::Cli::command();
    let Some(sub) = command.find_subcommand(&rest[pos]) else {
        return Ok(rest);
    };
    let accepts = |key: &str| sub.get_arguments().any(|a| a.get_long() == Some(key));
    let extra = config_args(Path::new(&config), &rest[pos].clone(), accepts, &rest[pos + 1..])?;
    rest.splice(pos + 1..pos + 1, extra);
    Ok(rest)
}
