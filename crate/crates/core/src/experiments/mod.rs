//! Monte Carlo experiment runner.
//!
//! Every trial draws its channels from a generator seeded by
//! [`trial_seed`], then evaluates every SNR point and method on the same
//! draws. Trials run in parallel and are collected in index order, so the
//! output depends only on the spec.

mod cli;
mod config;
mod csv;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    default_half_len, random_gaussian_channel_from, snq_gain_grid, upsample_to_snq, ChannelTaps,
    LinkParams, WhiteInputSpectrum,
};
use crate::error::{Error, Result};
use crate::mimo_snq::{build_effective_model, phase_report_from_profile};
use crate::snq_link::packets_to_decode;
use crate::spectral::integrate_log_capacity;
use crate::vblast::{vblast_best_order, vblast_fixed_order, MAX_EXHAUSTIVE_STREAMS};

pub use cli::cli_main;
pub use config::{parse_config, write_config};

/// Largest accepted block length; bounds the banded Gram's memory.
pub const MAX_BLOCK_LEN: usize = 1 << 15;
pub const MAX_ANTENNAS: usize = 16;
pub const MAX_OVERSIGNALING: usize = 256;
pub const MAX_GRID: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Packets accumulate over independent SISO ISI channels until `C(S) > R`.
    SisoRateless,
    /// MIMO-SNQ against V-BLAST on flat MIMO channels.
    MimoNoIsi,
    /// MIMO-SNQ gap to capacity on random MIMO ISI channels.
    MimoIsi,
    /// SNR-domain gap on long MIMO ISI channels.
    LongChannel,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SisoRateless => "siso_rateless",
            ExperimentKind::MimoNoIsi => "mimo_noisi",
            ExperimentKind::MimoIsi => "mimo_isi",
            ExperimentKind::LongChannel => "long_channel",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            ExperimentKind::SisoRateless,
            ExperimentKind::MimoNoIsi,
            ExperimentKind::MimoIsi,
            ExperimentKind::LongChannel,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }

    /// Per-trial metrics, in sample order.
    fn metrics(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::SisoRateless => &["capacity", "packets"],
            ExperimentKind::MimoNoIsi => &["capacity", "snq", "vblast_fixed", "vblast_best"],
            ExperimentKind::MimoIsi => &["capacity", "snq", "gap"],
            ExperimentKind::LongChannel => &["capacity", "snq", "gap_db"],
        }
    }
}

/// Declarative description of a Monte Carlo run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub snr_grid_db: Vec<f64>,
    pub n_trials: usize,
    pub nt: usize,
    pub nr: usize,
    /// Nyquist-rate taps per antenna pair.
    pub n_taps: usize,
    pub l: usize,
    /// Packet budget `M`.
    pub m: usize,
    /// Frequency grid size.
    pub q: usize,
    pub block_len: usize,
    pub discard: usize,
    /// Sinc half-length in SNQ samples; `64·L` when unset.
    pub half_len: Option<usize>,
    pub seed: u64,
    /// Target rate `R` in bits per SNQ symbol (rateless runs only).
    pub target_rate: Option<f64>,
}

fn field_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl ExperimentSpec {
    /// Desk-scale defaults for a kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            snr_grid_db: grid(0.0, 20.0, 4.0),
            n_trials: 200,
            nt: 2,
            nr: 2,
            n_taps: 1,
            l: 2,
            m: 1,
            q: 4096,
            block_len: 1024,
            discard: 64,
            half_len: None,
            seed: 1,
            target_rate: None,
        };
        match kind {
            ExperimentKind::SisoRateless => Self {
                nt: 1,
                nr: 1,
                n_taps: 3,
                l: 4,
                m: 4,
                target_rate: Some(1.0),
                ..base
            },
            ExperimentKind::MimoNoIsi => Self {
                snr_grid_db: grid(0.0, 20.0, 2.0),
                n_trials: 500,
                ..base
            },
            ExperimentKind::MimoIsi => Self { n_taps: 5, ..base },
            ExperimentKind::LongChannel => Self {
                snr_grid_db: grid(0.0, 14.0, 2.0),
                n_trials: 20,
                n_taps: 100,
                block_len: 2048,
                discard: 256,
                ..base
            },
        }
    }

    pub fn half_len(&self) -> usize {
        self.half_len.unwrap_or_else(|| default_half_len(self.l))
    }

    /// Checks every field; the error names the offending one.
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(field_err("snr_grid_db", "must not be empty"));
        }
        if self
            .snr_grid_db
            .iter()
            .any(|v| !v.is_finite() || v.abs() > 200.0)
        {
            return Err(field_err(
                "snr_grid_db",
                "values must be finite dB levels within ±200",
            ));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_err("snr_grid_db", "must be strictly increasing"));
        }
        if self.n_trials == 0 {
            return Err(field_err("n_trials", "must be at least 1"));
        }
        for (name, v) in [
            ("nt", self.nt),
            ("nr", self.nr),
            ("n_taps", self.n_taps),
            ("l", self.l),
            ("m", self.m),
        ] {
            if v == 0 {
                return Err(field_err(name, "must be at least 1"));
            }
        }
        if self.q < 2 || !self.q.is_power_of_two() {
            return Err(field_err("q", "must be a power of two, at least 2"));
        }
        if self.n_taps > self.q {
            return Err(field_err(
                "n_taps",
                format!("{} taps exceed the {}-point grid", self.n_taps, self.q),
            ));
        }
        for (name, v, max) in [
            ("nt", self.nt, MAX_ANTENNAS),
            ("nr", self.nr, MAX_ANTENNAS),
            ("l", self.l, MAX_OVERSIGNALING),
            ("q", self.q, MAX_GRID),
        ] {
            if v > max {
                return Err(field_err(name, format!("must be at most {max}")));
            }
        }
        if let Some(h) = self.half_len {
            if h < 8 * self.l || h > MAX_BLOCK_LEN {
                return Err(field_err(
                    "half_len",
                    format!(
                        "must lie in [8·L, {MAX_BLOCK_LEN}] = [{}, {MAX_BLOCK_LEN}]",
                        8 * self.l
                    ),
                ));
            }
        }
        match self.kind {
            ExperimentKind::SisoRateless => {
                if self.nt != 1 {
                    return Err(field_err("nt", "rateless SISO runs need nt=1"));
                }
                if self.nr != 1 {
                    return Err(field_err("nr", "rateless SISO runs need nr=1"));
                }
                if self.m > self.l {
                    return Err(field_err(
                        "m",
                        format!("packet budget {} exceeds L = {}", self.m, self.l),
                    ));
                }
                match self.target_rate {
                    Some(r) if r > 0.0 && r.is_finite() => {}
                    Some(_) => return Err(field_err("target_rate", "must be positive and finite")),
                    None => return Err(field_err("target_rate", "required for siso_rateless")),
                }
            }
            kind => {
                if self.target_rate.is_some() {
                    return Err(field_err("target_rate", "only used by siso_rateless"));
                }
                if kind == ExperimentKind::MimoNoIsi {
                    if self.n_taps != 1 {
                        return Err(field_err("n_taps", "mimo_noisi channels have a single tap"));
                    }
                    if self.m != 1 {
                        return Err(field_err(
                            "m",
                            "mimo_noisi compares single-packet transmissions",
                        ));
                    }
                    if self.nt > MAX_EXHAUSTIVE_STREAMS {
                        return Err(field_err(
                            "nt",
                            format!(
                                "V-BLAST ordering search supports nt ≤ {MAX_EXHAUSTIVE_STREAMS}"
                            ),
                        ));
                    }
                }
                if self.nt.checked_mul(self.m).is_none_or(|need| self.l < need) {
                    return Err(field_err(
                        "l",
                        format!("L must be at least nt·m = {}·{}", self.nt, self.m),
                    ));
                }
                if self.block_len > MAX_BLOCK_LEN {
                    return Err(field_err(
                        "block_len",
                        format!("must be at most {MAX_BLOCK_LEN}"),
                    ));
                }
                let need = self
                    .discard
                    .checked_mul(2)
                    .and_then(|d| d.checked_add(4 * self.nt));
                if need.is_none_or(|need| self.block_len < need) {
                    return Err(field_err(
                        "discard",
                        format!(
                            "block_len {} leaves fewer than 4·nt steady-state symbols",
                            self.block_len
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Converts MIMO-SNQ throughput in bits per SNQ symbol to bits per
    /// Nyquist interval: `L/N_t`.
    pub fn conversion_factor(&self) -> f64 {
        self.l as f64 / self.nt as f64
    }
}

/// SplitMix64 finalizer over `seed` and the trial index.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// `[snr][metric]` values of one trial.
type TrialSamples = Vec<Vec<f64>>;

fn run_trial(spec: &ExperimentSpec, t: usize) -> Result<TrialSamples> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.seed, t as u64));
    let nyquist: Vec<ChannelTaps> = (0..spec.m)
        .map(|_| random_gaussian_channel_from(&mut rng, spec.nt, spec.nr, spec.n_taps))
        .collect::<Result<_>>()?;
    let snq: Vec<ChannelTaps> = nyquist
        .iter()
        .map(|h| upsample_to_snq(h, spec.l, spec.half_len()))
        .collect::<Result<_>>()?;
    if spec.kind == ExperimentKind::SisoRateless {
        return siso_trial(spec, &snq);
    }
    let l = spec.l as f64;
    let received: Vec<usize> = (0..spec.m).collect();
    let link = LinkParams::new(1.0, 1.0, spec.l)?
        .with_antennas(spec.nt, spec.nr)?
        .with_packet_budget(spec.m)?;
    let gram = build_effective_model(&snq, &received, &link, spec.block_len)?.gram();
    let spectra: Vec<WhiteInputSpectrum> = nyquist
        .iter()
        .map(|h| WhiteInputSpectrum::new(h, spec.q))
        .collect::<Result<_>>()?;
    let capacity = |p: f64| spectra.iter().map(|s| s.capacity(p)).sum::<f64>();
    spec.snr_grid_db
        .iter()
        .map(|&snr_db| {
            let p = db(snr_db);
            // symbol power P/(L·Nt) against noise L·N₀
            let rho = p / (l * spec.nt as f64) / l;
            let report = phase_report_from_profile(&gram.profile(rho)?, spec.nt, spec.discard)?;
            let snq = report.throughput() * spec.conversion_factor();
            let cap = capacity(p);
            Ok(match spec.kind {
                ExperimentKind::MimoNoIsi => {
                    let h = &nyquist[0].taps()[0];
                    let per_stream = p / spec.nt as f64;
                    vec![
                        cap,
                        snq,
                        vblast_fixed_order(h, per_stream)?.throughput(),
                        vblast_best_order(h, per_stream)?.throughput(),
                    ]
                }
                ExperimentKind::MimoIsi => vec![cap, snq, cap - snq],
                ExperimentKind::LongChannel => {
                    vec![cap, snq, snr_db - equivalent_snr_db(&capacity, snq, snr_db)]
                }
                ExperimentKind::SisoRateless => unreachable!(),
            })
        })
        .collect()
}

/// SNR (dB) at which `capacity` reaches `rate`, by bisection around `near_db`.
fn equivalent_snr_db(capacity: &dyn Fn(f64) -> f64, rate: f64, near_db: f64) -> f64 {
    let (mut lo, mut hi) = (near_db - 60.0, near_db + 30.0);
    if capacity(db(lo)) >= rate {
        return lo;
    }
    if capacity(db(hi)) <= rate {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if capacity(db(mid)) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn siso_trial(spec: &ExperimentSpec, snq: &[ChannelTaps]) -> Result<TrialSamples> {
    let gains = snq
        .iter()
        .map(|b| snq_gain_grid(b, spec.q))
        .collect::<Result<Vec<_>>>()?;
    let rate = spec.target_rate.expect("validated");
    spec.snr_grid_db
        .iter()
        .map(|&snr_db| {
            let scale = db(snr_db) / spec.l as f64;
            let caps = gains
                .iter()
                .map(|k| integrate_log_capacity(&k.map(|g| scale * g)))
                .collect::<Result<Vec<f64>>>()?;
            let packets = packets_to_decode(&caps, rate).map_or(f64::NAN, |k| k as f64);
            Ok(vec![caps.iter().sum(), packets])
        })
        .collect()
}

/// Mean and standard error of the finite entries.
fn mean_se(values: &[f64]) -> (f64, f64, usize) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = finite.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, n);
    }
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Tabulated output of a run, plus the per-trial samples behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    spec: ExperimentSpec,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    /// `[snr][metric][trial]`
    samples: Vec<Vec<Vec<f64>>>,
}

impl ExperimentResult {
    fn from_trials(spec: &ExperimentSpec, trials: Vec<TrialSamples>) -> Self {
        let metrics = spec.kind.metrics();
        let samples: Vec<Vec<Vec<f64>>> = (0..spec.snr_grid_db.len())
            .map(|s| {
                (0..metrics.len())
                    .map(|k| trials.iter().map(|t| t[s][k]).collect())
                    .collect()
            })
            .collect();
        let mut columns = vec!["snr_db".to_string()];
        columns.extend(metrics.iter().map(|m| m.to_string()));
        match spec.kind {
            ExperimentKind::SisoRateless => columns.push("fail_rate".into()),
            ExperimentKind::LongChannel => columns.push("gap_db_median".into()),
            _ => {}
        }
        columns.extend(metrics.iter().map(|m| format!("se_{m}")));
        let rows = spec
            .snr_grid_db
            .iter()
            .zip(&samples)
            .map(|(&snr, per_metric)| {
                let stats: Vec<(f64, f64, usize)> = per_metric.iter().map(|v| mean_se(v)).collect();
                let mut row = vec![snr];
                row.extend(stats.iter().map(|s| s.0));
                match spec.kind {
                    ExperimentKind::SisoRateless => {
                        row.push(1.0 - stats[1].2 as f64 / spec.n_trials as f64);
                    }
                    ExperimentKind::LongChannel => row.push(median(&per_metric[2])),
                    _ => {}
                }
                row.extend(stats.iter().map(|s| s.1));
                row
            })
            .collect();
        Self {
            spec: spec.clone(),
            columns,
            rows,
            samples,
        }
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// One column across the SNR grid.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// Per-trial values of `metric` at SNR index `snr_idx`, in trial order.
    pub fn samples(&self, metric: &str, snr_idx: usize) -> Option<&[f64]> {
        let k = self.spec.kind.metrics().iter().position(|m| *m == metric)?;
        self.samples.get(snr_idx).map(|s| s[k].as_slice())
    }

    /// `snr_db=… name=value …` per grid point.
    pub fn summary_lines(&self) -> Vec<String> {
        let metrics = self.spec.kind.metrics();
        self.rows
            .iter()
            .map(|row| {
                let mut line = format!("snr_db={:6.2}", row[0]);
                for (name, v) in metrics.iter().zip(&row[1..]) {
                    line.push_str(&format!(" {name}={v:.4}"));
                }
                line
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        csv::write_csv(self)
    }
}

/// Validates `spec` and runs every trial.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let trials = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::from_trials(spec, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::defaults(kind);
        spec.n_trials = 3;
        spec.snr_grid_db = vec![0.0, 10.0, 20.0];
        spec.block_len = 128;
        spec.discard = 16;
        spec.q = 256;
        spec.half_len = Some(16 * spec.l);
        if kind == ExperimentKind::LongChannel {
            spec.n_taps = 20;
        }
        spec
    }

    #[test]
    fn defaults_validate() {
        for kind in ["siso_rateless", "mimo_noisi", "mimo_isi", "long_channel"] {
            let kind = ExperimentKind::from_name(kind).unwrap();
            ExperimentSpec::defaults(kind).validate().unwrap();
            assert_eq!(ExperimentKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(ExperimentKind::from_name("mimo"), None);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn every_kind_runs_and_is_monotone_in_snr() {
        for kind in [
            ExperimentKind::SisoRateless,
            ExperimentKind::MimoNoIsi,
            ExperimentKind::MimoIsi,
            ExperimentKind::LongChannel,
        ] {
            let spec = small(kind);
            let result = run_experiment(&spec).unwrap();
            assert_eq!(result.rows().len(), 3);
            assert_eq!(result.columns().len(), result.rows()[0].len());
            for metric in kind
                .metrics()
                .iter()
                .filter(|m| ["capacity", "snq", "vblast_fixed", "vblast_best"].contains(m))
            {
                for t in 0..spec.n_trials {
                    let v: Vec<f64> = (0..3)
                        .map(|s| result.samples(metric, s).unwrap()[t])
                        .collect();
                    assert!(
                        v.windows(2).all(|w| w[1] >= w[0] - 1e-9),
                        "{kind:?} {metric}: {v:?}"
                    );
                }
            }
            for name in result.columns().iter().filter(|c| c.starts_with("se_")) {
                assert!(result
                    .column(name)
                    .unwrap()
                    .iter()
                    .all(|v| v.is_nan() || *v >= 0.0));
            }
        }
    }

    #[test]
    fn rateless_packets_decrease_with_snr() {
        let result = run_experiment(&small(ExperimentKind::SisoRateless)).unwrap();
        let packets = result.column("packets").unwrap();
        let fail = result.column("fail_rate").unwrap();
        assert!(fail[2] <= fail[0]);
        assert!(packets[2] <= packets[1] || packets[1].is_nan());
    }

    #[test]
    fn invalid_spec_is_rejected_before_running() {
        let mut spec = small(ExperimentKind::MimoIsi);
        spec.snr_grid_db = vec![4.0, 2.0];
        assert!(
            matches!(run_experiment(&spec), Err(Error::Config { field, .. }) if field == "snr_grid_db")
        );
    }

    #[test]
    fn equivalent_snr_inverts_capacity() {
        let cap = |p: f64| (1.0 + p).log2();
        let x = equivalent_snr_db(&cap, cap(db(7.5)), 10.0);
        assert!((x - 7.5).abs() < 1e-9);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
