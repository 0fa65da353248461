//! `--config FILE` support.
//!
//! The file holds `key = value` lines named after the long flags (`p_in` and
//! `p-in` are both accepted). Its entries are spliced into the argument list
//! ahead of the user's own flags, so anything given on the command line wins.
//! Keys that only another subcommand understands are skipped, which lets one
//! file serve several commands.

use std::path::Path;

use clap::Command;

fn config_path(raw: &[String]) -> Option<String> {
    let mut it = raw.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn parse_pairs(text: &str, path: &Path) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| format!("{}:{}: expected `key = value`", path.display(), no + 1))?;
        let v = v.trim().trim_matches('"');
        pairs.push((k.trim().replace('_', "-"), v.to_string()));
    }
    Ok(pairs)
}

fn longs(cmd: &Command, global: Option<bool>) -> Vec<String> {
    cmd.get_arguments()
        .filter(|a| global.is_none_or(|g| a.is_global_set() == g))
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect()
}

/// Returns `raw` with the config entries inserted.
pub fn expand(raw: Vec<String>, cmd: &Command) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&raw) else {
        return Ok(raw);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let pairs = parse_pairs(&text, path)?;

    let globals = longs(cmd, Some(true));
    let sub_pos = raw
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| cmd.get_subcommands().any(|s| s.get_name() == a.as_str()))
        .map(|(i, _)| i);
    let sub_args = sub_pos.and_then(|i| cmd.find_subcommand(&raw[i])).map(|s| longs(s, None)).unwrap_or_default();
    let known_anywhere = |k: &str| {
        globals.iter().any(|g| g == k) || cmd.get_subcommands().any(|s| longs(s, None).iter().any(|l| l == k))
    };

    let mut head = Vec::new();
    let mut tail = Vec::new();
    for (k, v) in pairs {
        if k == "config" {
            continue;
        }
        // `K` is the only upper-case flag; accept `k` too
        let key = if k == "k" { "K".to_string() } else { k };
        if globals.contains(&key) {
            head.push(format!("--{key}={v}"));
        } else if sub_args.contains(&key) {
            tail.push(format!("--{key}={v}"));
        } else if !known_anywhere(&key) {
            return Err(format!("{}: unknown key `{key}`", path.display()));
        }
    }

    let mut out = Vec::with_capacity(raw.len() + head.len() + tail.len());
    out.push(raw[0].clone());
    out.extend(head);
    match sub_pos {
        Some(i) => {
            out.extend(raw[1..=i].iter().cloned());
            out.extend(tail);
            out.extend(raw[i + 1..].iter().cloned());
        }
        None => out.extend(raw[1..].iter().cloned()),
    }
    Ok(out)
}
