//! CSV output with a `#` metadata preamble.

use std::fmt::Write as _;

use super::{write_config, ExperimentKind, ExperimentResult};

fn units(result: &ExperimentResult) -> String {
    let spec = result.spec();
    match spec.kind {
        ExperimentKind::SisoRateless => format!(
            "capacity in bits per SNQ symbol (multiply by L = {} for bits per Nyquist interval); packets counts trials that decode",
            spec.l
        ),
        _ => "capacity and throughput columns in bits per Nyquist interval (b/s/Hz); gap_db in dB".to_string(),
    }
}

/// Renders the result; values carry 10 significant digits.
pub(super) fn write_csv(result: &ExperimentResult) -> String {
    let spec = result.spec();
    let mut out = String::new();
    let _ = writeln!(out, "# snq-sim {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# seed={}", spec.seed);
    let _ = writeln!(out, "# units: {}", units(result));
    if spec.kind != ExperimentKind::SisoRateless {
        let _ = writeln!(
            out,
            "# snq_symbol_to_nyquist_factor={} (L/Nt applied to the snq column)",
            spec.conversion_factor()
        );
    }
    for line in write_config(spec).lines() {
        let _ = writeln!(out, "# spec: {line}");
    }
    out.push_str(&result.columns().join(","));
    out.push('\n');
    for row in result.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
