//! `--config` files: `key=value` lines expanded into flags placed before
//! the command-line flags, so explicit flags win.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Rewrites `args` with the options of any `--config` file inserted right
/// after the subcommand name.
pub fn expand(cmd: &Command, args: Vec<String>) -> Result<Vec<String>> {
    let Some(sub_pos) = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1) else {
        return Ok(args);
    };
    let Some(sub) = cmd.find_subcommand(&args[sub_pos]) else {
        return Ok(args);
    };
    let mut path = None;
    let mut i = sub_pos + 1;
    while i < args.len() {
        if args[i] == "--config" {
            path = args.get(i + 1).cloned();
            i += 1;
        } else if let Some(p) = args[i].strip_prefix("--config=") {
            path = Some(p.to_string());
        }
        i += 1;
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let flags = flags_from_file(sub, Path::new(&path))?;
    let mut out = args[..=sub_pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[sub_pos + 1..]);
    Ok(out)
}

fn flags_from_file(sub: &Command, path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(crate::UsageError(format!("{}:{}: expected key=value", path.display(), n + 1)));
        };
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!(crate::UsageError(format!(
                "{}:{}: `{key}` is not an option of `{}`",
                path.display(),
                n + 1,
                sub.get_name()
            )));
        };
        if key == "config" {
            bail!(crate::UsageError(format!("{}:{}: config files cannot nest", path.display(), n + 1)));
        }
        if arg.get_action().takes_values() {
            flags.push(format!("--{key}={value}"));
        } else {
            match value {
                "true" => flags.push(format!("--{key}")),
                "false" => {}
                other => bail!(crate::UsageError(format!(
                    "{}:{}: `{key}` takes true or false, got `{other}`",
                    path.display(),
                    n + 1
                ))),
            }
        }
    }
    Ok(flags)
}
