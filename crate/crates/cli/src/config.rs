//! Flat `key = value` config files and run manifests.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use cellwell::rng::GENERATOR;

pub const SUBCOMMANDS: [&str; 4] = ["simulate", "analyze", "uncertainty", "toy"];

/// Replaces `--config PATH` by the file's settings, inserted right after the
/// subcommand so that flags given on the command line take precedence.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = iter.next().context("--config needs a file path")?;
            config = Some(path);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(OsString::from(path));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let flags = read_config(Path::new(&path))?;
    let Some(at) = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
    else {
        bail!("--config given without a subcommand");
    };
    rest.splice(at + 1..at + 1, flags);
    Ok(rest)
}

fn read_config(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), n + 1);
        };
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') {
            bail!("{}:{}: bad key `{key}`", path.display(), n + 1);
        }
        flags.push(OsString::from(format!("--{key}={}", value.trim())));
    }
    Ok(flags)
}

/// Writes `manifest.txt`: metadata as comments, then the resolved settings in
/// the config-file format, so `--config manifest.txt` repeats the run.
pub fn write_manifest(dir: &Path, command: &str, settings: &[(&str, String)]) -> Result<()> {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "# cellwell run manifest").ok();
    writeln!(out, "# command: {command}").ok();
    writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION")).ok();
    writeln!(out, "# generator: {GENERATOR}").ok();
    writeln!(out, "# timestamp_unix: {stamp}").ok();
    writeln!(out, "# rerun: cellwell {command} --config <this file>").ok();
    for (k, v) in settings {
        writeln!(out, "{k} = {v}").ok();
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, out).with_context(|| format!("cannot write {}", path.display()))
}
