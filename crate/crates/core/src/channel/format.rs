//! Plain-text tap files.
//!
//! ```text
//! # optional comments
//! nt=2 nr=1 rate=snq l=4
//! 0 1.0e0 0.0e0 0.5e0 -0.25e0
//! 1 ...
//! ```
//!
//! Each data row holds a tap index followed by `re im` pairs for every
//! antenna pair in receive-major order `(r, t)`.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{ChannelTaps, Rate};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Serializes taps with enough digits for a bit-exact round trip.
pub fn write_taps(taps: &ChannelTaps) -> String {
    let (tag, l) = match taps.rate() {
        Rate::Nyquist => ("nyquist", 1),
        Rate::Snq(l) => ("snq", l),
    };
    let mut out = format!("nt={} nr={} rate={tag} l={l}\n", taps.nt(), taps.nr());
    for (n, tap) in taps.taps().iter().enumerate() {
        let _ = write!(out, "{n}");
        for v in tap.as_slice() {
            let _ = write!(out, " {:.16e} {:.16e}", v.re, v.im);
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

struct Header {
    nt: usize,
    nr: usize,
    rate: Rate,
}

fn parse_header(line_no: usize, line: &str) -> Result<Header> {
    let (mut nt, mut nr, mut rate, mut l) = (None, None, None, None);
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key=value, found `{field}`")))?;
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| parse_err(line_no, format!("`{key}` must be a positive integer")))
        };
        let slot = match key {
            "nt" => &mut nt,
            "nr" => &mut nr,
            "l" => &mut l,
            "rate" => {
                if rate.is_some() {
                    return Err(parse_err(line_no, "duplicate `rate`"));
                }
                rate = Some(match value {
                    "nyquist" => false,
                    "snq" => true,
                    other => return Err(parse_err(line_no, format!("unknown rate `{other}`"))),
                });
                continue;
            }
            other => return Err(parse_err(line_no, format!("unknown header key `{other}`"))),
        };
        if slot.is_some() {
            return Err(parse_err(line_no, format!("duplicate `{key}`")));
        }
        *slot = Some(count()?);
    }
    let missing = |k: &str| parse_err(line_no, format!("header is missing `{k}`"));
    let nt = nt.ok_or_else(|| missing("nt"))?;
    let nr = nr.ok_or_else(|| missing("nr"))?;
    let snq = rate.ok_or_else(|| missing("rate"))?;
    let l = l.unwrap_or(1);
    let rate = match (snq, l) {
        (true, l) => Rate::Snq(l),
        (false, 1) => Rate::Nyquist,
        (false, _) => return Err(parse_err(line_no, "Nyquist-rate taps must have l=1")),
    };
    // Guards the allocation below against absurd headers.
    if nt.checked_mul(nr).is_none_or(|p| p > 1 << 16) {
        return Err(parse_err(line_no, "antenna counts are too large"));
    }
    Ok(Header { nt, nr, rate })
}

/// Parses the format produced by [`write_taps`].
pub fn parse_taps(text: &str) -> Result<ChannelTaps> {
    let mut header = None;
    let mut taps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(h) = &header else {
            header = Some(parse_header(line_no, line)?);
            continue;
        };
        let h: &Header = h;
        let mut fields = line.split_whitespace();
        let index: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(line_no, "expected a tap index"))?;
        if index != taps.len() {
            return Err(parse_err(
                line_no,
                format!("tap index {index} out of order, expected {}", taps.len()),
            ));
        }
        let numbers = fields
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line_no, format!("`{s}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = 2 * h.nt * h.nr;
        if numbers.len() != expected {
            return Err(parse_err(
                line_no,
                format!("expected {expected} values, found {}", numbers.len()),
            ));
        }
        let data = numbers
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        taps.push(CMatrix::from_row_major(h.nr, h.nt, data));
    }
    let h = header.ok_or_else(|| parse_err(0, "missing header"))?;
    if taps.is_empty() {
        return Err(parse_err(0, "no taps"));
    }
    ChannelTaps::mimo(h.nr, h.nt, taps, h.rate)
}
