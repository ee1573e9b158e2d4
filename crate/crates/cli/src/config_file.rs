//! `key=value` config files merged into the argument list.
//!
//! Each key names a long flag of the subcommand. Keys that also appear on the
//! command line are dropped, so the command line wins.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got '{line}'", i + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

fn long_flags(args: &[String]) -> HashSet<String> {
    args.iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect()
}

/// Finds `--config PATH` or `--config=PATH`.
fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Appends the entries of the `--config` file (if any) to `args`, skipping
/// keys given on the command line. `true`/`false` values toggle bare flags.
pub fn merge(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let entries = parse(&text).with_context(|| format!("in config file {path}"))?;
    let present = long_flags(&args);
    let mut merged = args;
    for (key, value) in entries {
        if key == "config" || present.contains(&key) {
            continue;
        }
        match value.as_str() {
            "true" => merged.push(format!("--{key}")),
            "false" => {}
            _ => merged.push(format!("--{key}={value}")),
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_and_skips_comments() {
        let e = parse("# x\nseed = 4\n\nnull_p_threshold=0.1\n").unwrap();
        assert_eq!(
            e,
            vec![("seed".into(), "4".into()), ("null-p-threshold".into(), "0.1".into())]
        );
        assert!(parse("seed 4").is_err());
    }

    #[test]
    fn command_line_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "seed=1\ndelta=0.02\nstrict=true\n").unwrap();
        let args = strings(&["egg", "fit", "--config", path.to_str().unwrap(), "--seed", "9"]);
        let merged = merge(args).unwrap();
        assert!(merged.contains(&"--delta=0.02".to_string()));
        assert!(merged.contains(&"--strict".to_string()));
        assert!(!merged.iter().any(|a| a == "--seed=1"));
        assert!(merged.ends_with(&strings(&["--delta=0.02", "--strict"])));
    }
}
