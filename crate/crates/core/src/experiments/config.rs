//! Flat `key=value` experiment configs.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{ExperimentKind, ExperimentSpec};
use crate::error::{Error, Result};

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(field, format!("cannot parse `{value}`")))
}

/// Parses a config; keys absent from the text take the kind's defaults.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            reason: format!("expected key=value, found `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(config_err(key, "given more than once"));
        }
        entries.push((key, value));
    }
    let kind = entries
        .iter()
        .find(|(k, _)| *k == "kind")
        .map(|(_, v)| {
            ExperimentKind::from_name(v)
                .ok_or_else(|| config_err("kind", format!("unknown kind `{v}`")))
        })
        .ok_or_else(|| config_err("kind", "missing"))??;
    let mut spec = ExperimentSpec::defaults(kind);
    for (key, value) in entries {
        match key {
            "kind" => {}
            "snr_grid_db" => {
                spec.snr_grid_db = value
                    .split(',')
                    .map(|v| v.trim())
                    .filter(|v| !v.is_empty())
                    .map(|v| parse_num::<f64>(key, v))
                    .collect::<Result<_>>()?
            }
            "n_trials" => spec.n_trials = parse_num(key, value)?,
            "nt" => spec.nt = parse_num(key, value)?,
            "nr" => spec.nr = parse_num(key, value)?,
            "n_taps" => spec.n_taps = parse_num(key, value)?,
            "l" => spec.l = parse_num(key, value)?,
            "m" => spec.m = parse_num(key, value)?,
            "q" => spec.q = parse_num(key, value)?,
            "block_len" => spec.block_len = parse_num(key, value)?,
            "discard" => spec.discard = parse_num(key, value)?,
            "seed" => spec.seed = parse_num(key, value)?,
            "half_len" => spec.half_len = Some(parse_num(key, value)?),
            "target_rate" => spec.target_rate = Some(parse_num(key, value)?),
            other => return Err(config_err(other, "unknown key")),
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Serializes every field, so `parse_config(&write_config(s)) == s`.
pub fn write_config(spec: &ExperimentSpec) -> String {
    let grid: Vec<String> = spec.snr_grid_db.iter().map(|v| format!("{v}")).collect();
    let mut out = String::new();
    let _ = writeln!(out, "kind={}", spec.kind.name());
    let _ = writeln!(out, "snr_grid_db={}", grid.join(","));
    let _ = writeln!(out, "n_trials={}", spec.n_trials);
    let _ = writeln!(out, "nt={}", spec.nt);
    let _ = writeln!(out, "nr={}", spec.nr);
    let _ = writeln!(out, "n_taps={}", spec.n_taps);
    let _ = writeln!(out, "l={}", spec.l);
    let _ = writeln!(out, "m={}", spec.m);
    let _ = writeln!(out, "q={}", spec.q);
    let _ = writeln!(out, "block_len={}", spec.block_len);
    let _ = writeln!(out, "discard={}", spec.discard);
    if let Some(h) = spec.half_len {
        let _ = writeln!(out, "half_len={h}");
    }
    let _ = writeln!(out, "seed={}", spec.seed);
    if let Some(r) = spec.target_rate {
        let _ = writeln!(out, "target_rate={r}");
    }
    out
}
