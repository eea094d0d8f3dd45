//! MIMO-SNQ: a single scalar stream spread over `N_t` antennas by the
//! time-varying DFT beamformer `v[n]_i = e^{-j2πin/N_t}`.
//!
//! The beamformer makes the effective channel periodic in `n` with period
//! `N_t`, so symbols fall into `N_t` phases with distinct DFE SINRs. A
//! fixed-rate code sees the worst phase, hence the throughput rule
//! `N_t · min_p C_p`.

use num_complex::Complex64;

use crate::channel::{ChannelTaps, LinkParams, Rate};
use crate::dfe::{block_dfe_profile, BlockLinearModel, SinrProfile};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::snq_link::{check_distinct_dithers, convolve, dither_sequence};
use crate::spectral::twiddle;

/// `[1, e^{-j2πn/N_t}, …, e^{-j2π(N_t−1)n/N_t}]ᵀ`.
pub fn beamforming_vector(n: usize, nt: usize) -> Vec<Complex64> {
    assert!(nt > 0, "beamformer needs at least one antenna");
    let n = n % nt;
    (0..nt)
        .map(|i| twiddle(((i * n) % nt) as i64, nt))
        .collect()
}

/// Observation model of the shifted-back packets `ỹ_m`, rows stacked over
/// packets and receive antennas.
///
/// Packet `m` (dither index `received[k] = m`) sees the SNQ-rate MIMO
/// channel `channels[k]`; after shift-back its taps become
/// `B̃_m[l] = B_m[l]·e^{+j2πml/L}`. Symbols carry `P/(L·N_t)` per antenna
/// and each SNQ sample sees noise of power `L·N₀`.
pub fn build_effective_model(
    channels: &[ChannelTaps],
    received: &[usize],
    link: &LinkParams,
    n_symbols: usize,
) -> Result<BlockLinearModel> {
    let (l, nt, nr) = (link.l(), link.nt(), link.nr());
    if channels.len() != received.len() {
        return Err(Error::LengthMismatch {
            expected: received.len(),
            found: channels.len(),
        });
    }
    if channels.is_empty() {
        return Err(invalid("channels", "need at least one packet"));
    }
    if received.len() > link.packet_budget() {
        return Err(invalid(
            "S",
            format!(
                "{} packets exceed the budget M = {}",
                received.len(),
                link.packet_budget()
            ),
        ));
    }
    check_distinct_dithers(received, l)?;
    let mut packets = Vec::with_capacity(channels.len());
    for (k, (b, &m)) in channels.iter().zip(received).enumerate() {
        if b.nr() != nr || b.nt() != nt {
            return Err(Error::DimensionMismatch(format!(
                "packet {k} channel is {}x{}, link expects {nr}x{nt}",
                b.nr(),
                b.nt()
            )));
        }
        if b.rate() != Rate::Snq(l) {
            return Err(invalid(
                "rate",
                format!("packet {k} is not at SNQ rate L = {l}"),
            ));
        }
        let shift = dither_sequence(m, l, 0..b.len());
        packets.push(
            b.taps()
                .iter()
                .zip(shift)
                .map(|(tap, v)| tap.scaled(v.conj()))
                .collect(),
        );
    }
    let beams = (0..nt).map(|p| beamforming_vector(p, nt)).collect();
    BlockLinearModel::periodic_mimo(
        nr,
        nt,
        packets,
        beams,
        n_symbols,
        link.symbol_power(),
        l as f64 * link.n0(),
    )
}

/// Per-phase steady-state capacities of a periodic effective channel.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseReport {
    per_phase_capacity: Vec<f64>,
    min_phase: f64,
    sum_phase: f64,
    throughput: f64,
}

impl PhaseReport {
    /// Bits per SNQ symbol, one entry per phase `n mod N_t`.
    pub fn per_phase_capacity(&self) -> &[f64] {
        &self.per_phase_capacity
    }

    pub fn min_phase(&self) -> f64 {
        self.min_phase
    }

    pub fn max_phase(&self) -> f64 {
        self.per_phase_capacity
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum_phase(&self) -> f64 {
        self.sum_phase
    }

    /// `N_t · min_phase`.
    pub fn throughput(&self) -> f64 {
        self.throughput
    }
}

/// Groups steady-state per-symbol capacities by phase.
pub fn phase_report_from_profile(
    profile: &SinrProfile,
    nt: usize,
    discard: usize,
) -> Result<PhaseReport> {
    if nt == 0 {
        return Err(invalid("Nt", "must be at least 1"));
    }
    let n = profile.len();
    if n < 2 * discard + 4 * nt {
        return Err(invalid(
            "discard",
            format!("{n} symbols leave fewer than 4·Nt after discarding {discard} at each edge"),
        ));
    }
    let mut sums = vec![0.0; nt];
    let mut counts = vec![0usize; nt];
    for (idx, c) in profile.per_symbol_capacity()[discard..n - discard]
        .iter()
        .enumerate()
    {
        let p = (idx + discard) % nt;
        sums[p] += c;
        counts[p] += 1;
    }
    let per_phase_capacity: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &k)| s / k as f64)
        .collect();
    let min_phase = per_phase_capacity
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let sum_phase = per_phase_capacity.iter().sum();
    Ok(PhaseReport {
        per_phase_capacity,
        min_phase,
        sum_phase,
        throughput: nt as f64 * min_phase,
    })
}

/// Runs the block DFE on `model` and reports per-phase capacities.
pub fn phase_report(model: &BlockLinearModel, nt: usize, discard: usize) -> Result<PhaseReport> {
    phase_report_from_profile(&block_dfe_profile(model)?, nt, discard)
}

/// Embeds `N` SISO SNQ-rate channels as one diagonal `N × N` MIMO channel,
/// each transmit antenna feeding its own receive antenna.
pub fn parallel_channel_embedding(
    siso_channels: &[ChannelTaps],
    link: &LinkParams,
) -> Result<ChannelTaps> {
    let n = siso_channels.len();
    if n == 0 {
        return Err(invalid("channels", "need at least one sub-channel"));
    }
    if link.nt() != n || link.nr() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} sub-channels need an {n}x{n} link, found {}x{}",
            link.nr(),
            link.nt()
        )));
    }
    let scalar = siso_channels
        .iter()
        .map(|b| {
            if b.rate() != Rate::Snq(link.l()) {
                return Err(invalid(
                    "rate",
                    "sub-channels must be at the link's SNQ rate",
                ));
            }
            b.scalar_taps()
        })
        .collect::<Result<Vec<_>>>()?;
    let len = scalar.iter().map(Vec::len).max().unwrap_or(1);
    let taps = (0..len)
        .map(|t| {
            CMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    scalar[r].get(t).copied().unwrap_or_default()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    ChannelTaps::mimo(n, n, taps, Rate::Snq(link.l()))
}

/// Pulse-shaped per-antenna transmit streams of every packet,
/// `x_{m,i}[n] = (g ∗ (v_m·v_i·s))[n]`, ordered packet-major.
pub fn transmit_streams(
    s: &[Complex64],
    nt: usize,
    packets: &[usize],
    l: usize,
    pulse: &[Complex64],
) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(packets.len() * nt);
    for &m in packets {
        let dither = dither_sequence(m, l, 0..s.len());
        for i in 0..nt {
            let x: Vec<Complex64> = s
                .iter()
                .enumerate()
                .zip(&dither)
                .map(|((n, sn), d)| sn * d * beamforming_vector(n, nt)[i])
                .collect();
            out.push(convolve(pulse, &x));
        }
    }
    out
}

/// Zero-lag sample covariance with batch-means standard errors.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub mean: CMatrix,
    /// Standard error of each entry's magnitude-relevant part, row-major.
    pub std_err: Vec<f64>,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.mean.rows()
    }

    pub fn std_err_at(&self, i: usize, j: usize) -> f64 {
        self.std_err[i * self.dim() + j]
    }
}

/// Empirical covariance `(1/N)·Σ_n x[n]·x[n]ᴴ` across streams, from
/// `batches` contiguous batches so the error estimate tolerates the
/// filtering-induced correlation in time.
pub fn empirical_transmit_covariance(
    streams: &[Vec<Complex64>],
    batches: usize,
) -> Result<CovarianceEstimate> {
    let k = streams.len();
    if k == 0 {
        return Err(invalid("streams", "need at least one stream"));
    }
    let n = streams[0].len();
    if let Some(bad) = streams.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    if batches < 2 || n < batches {
        return Err(invalid(
            "batches",
            format!("need 2 ≤ batches ≤ {n}, got {batches}"),
        ));
    }
    let batch_len = n / batches;
    let mut per_batch = Vec::with_capacity(batches);
    for b in 0..batches {
        let range = b * batch_len..(b + 1) * batch_len;
        let cov = CMatrix::from_fn(k, k, |i, j| {
            streams[i][range.clone()]
                .iter()
                .zip(&streams[j][range.clone()])
                .map(|(x, y)| x * y.conj())
                .sum::<Complex64>()
                / batch_len as f64
        });
        per_batch.push(cov);
    }
    let nb = batches as f64;
    let mean = CMatrix::from_fn(k, k, |i, j| {
        per_batch.iter().map(|c| c[(i, j)]).sum::<Complex64>() / nb
    });
    let std_err = (0..k * k)
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            let var = per_batch
                .iter()
                .map(|c| (c[(i, j)] - mean[(i, j)]).norm_sqr())
                .sum::<f64>()
                / (nb - 1.0);
            (var / nb).sqrt()
        })
        .collect();
    Ok(CovarianceEstimate { mean, std_err })
}
