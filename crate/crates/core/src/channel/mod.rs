//! Discrete-time channel models at the Nyquist and super-Nyquist rates.
//!
//! Nyquist-rate taps `h[k]` describe a band-limited channel sampled every
//! `T₀`. Signaling `L` times faster with the sinc pulse `g(t) = sinc(t/T₀)`
//! produces the SNQ-rate cascade `b[n] = (h ∗ g)(nT)`, `T = T₀/L`.
//!
//! SNQ taps are stored as raw samples of the cascade, so `g[0] = 1`. In the
//! white-noise-per-sample model used for capacities and block models the
//! cascade is scaled by `√(T/T₀) = 1/√L`; this keeps a flat channel at
//! `(1/L)·log2(1 + P/N₀)` bits per SNQ symbol.

mod format;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::spectral::{dtft_at, dtft_grid, grid_frequency, integrate_log_capacity, FreqGrid};

pub use format::{parse_taps, write_taps};

/// Sampling rate a tap sequence is expressed at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rate {
    Nyquist,
    /// Super-Nyquist with oversignaling ratio `L`.
    Snq(usize),
}

impl Rate {
    /// Samples per Nyquist interval.
    pub fn oversampling(self) -> usize {
        match self {
            Rate::Nyquist => 1,
            Rate::Snq(l) => l,
        }
    }
}

/// Finite impulse response with `N_r × N_t` matrix taps (1×1 for SISO).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTaps {
    nr: usize,
    nt: usize,
    taps: Vec<CMatrix>,
    rate: Rate,
    /// Nyquist-rate taps whose sinc cascade these SNQ samples truncate.
    source: Option<Box<ChannelTaps>>,
}

impl ChannelTaps {
    pub fn siso(taps: Vec<Complex64>, rate: Rate) -> Result<Self> {
        Self::mimo(1, 1, taps.into_iter().map(CMatrix::scalar).collect(), rate)
    }

    pub fn mimo(nr: usize, nt: usize, taps: Vec<CMatrix>, rate: Rate) -> Result<Self> {
        if nr == 0 || nt == 0 {
            return Err(invalid("taps", "antenna counts must be positive"));
        }
        if taps.is_empty() {
            return Err(invalid("taps", "a channel needs at least one tap"));
        }
        if let Some(k) = taps.iter().position(|t| t.rows() != nr || t.cols() != nt) {
            return Err(Error::DimensionMismatch(format!(
                "tap {k} is {}x{}, expected {nr}x{nt}",
                taps[k].rows(),
                taps[k].cols()
            )));
        }
        if let Rate::Snq(0) = rate {
            return Err(invalid("L", "oversignaling ratio must be at least 1"));
        }
        Ok(Self {
            nr,
            nt,
            taps,
            rate,
            source: None,
        })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn is_siso(&self) -> bool {
        self.nr == 1 && self.nt == 1
    }

    pub fn taps(&self) -> &[CMatrix] {
        &self.taps
    }

    /// Scalar taps of a SISO channel.
    pub fn scalar_taps(&self) -> Result<Vec<Complex64>> {
        if !self.is_siso() {
            return Err(Error::DimensionMismatch(format!(
                "expected a SISO channel, found {}x{}",
                self.nr, self.nt
            )));
        }
        Ok(self.taps.iter().map(|t| t[(0, 0)]).collect())
    }

    /// Taps of the `(r, t)` antenna pair.
    pub fn entry_taps(&self, r: usize, t: usize) -> Vec<Complex64> {
        self.taps.iter().map(|m| m[(r, t)]).collect()
    }

    /// Total energy `Σ_n ‖b[n]‖²_F`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(CMatrix::norm_sqr).sum()
    }

    /// Nyquist-rate channel behind a sinc cascade, when known.
    pub fn nyquist_source(&self) -> Option<&ChannelTaps> {
        self.source.as_deref()
    }

    /// The same finite taps without any band-limited source attached.
    pub fn finite(&self) -> ChannelTaps {
        ChannelTaps {
            source: None,
            ..self.clone()
        }
    }

    /// Multiplies every tap by `c`.
    pub fn scaled(&self, c: Complex64) -> ChannelTaps {
        ChannelTaps {
            taps: self.taps.iter().map(|t| t.scaled(c)).collect(),
            source: self.source.as_ref().map(|s| Box::new(s.scaled(c))),
            ..self.clone()
        }
    }

    /// Prepends `k` zero taps. A band-limited source survives only whole
    /// Nyquist-interval delays.
    pub fn delayed(&self, k: usize) -> ChannelTaps {
        let mut taps = vec![CMatrix::zeros(self.nr, self.nt); k];
        taps.extend(self.taps.iter().cloned());
        let l = self.rate.oversampling();
        let source = match &self.source {
            Some(s) if k.is_multiple_of(l) => Some(Box::new(s.delayed(k / l))),
            _ => None,
        };
        ChannelTaps {
            taps,
            source,
            ..self.clone()
        }
    }

    pub(crate) fn with_source(mut self, source: ChannelTaps) -> Self {
        self.source = Some(Box::new(source));
        self
    }

    /// Frequency response matrix `Σ_n b[n]·e^{-j2πfn}`.
    pub fn response_at(&self, f: f64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.nr, self.nt);
        for (n, tap) in self.taps.iter().enumerate() {
            acc.add_assign(&tap.scaled(Complex64::from_polar(1.0, -2.0 * PI * f * n as f64)));
        }
        acc
    }
}

/// Power, noise and structural parameters of a link. SNR is `P/N₀` with
/// the bandwidth normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    p: f64,
    n0: f64,
    l: usize,
    nt: usize,
    nr: usize,
    m: usize,
}

impl LinkParams {
    /// Single-antenna link with a packet budget of one.
    pub fn new(p: f64, n0: f64, l: usize) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(invalid("P", format!("power must be positive, got {p}")));
        }
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(invalid(
                "N0",
                format!("noise density must be positive, got {n0}"),
            ));
        }
        if l == 0 {
            return Err(invalid("L", "oversignaling ratio must be at least 1"));
        }
        Ok(Self {
            p,
            n0,
            l,
            nt: 1,
            nr: 1,
            m: 1,
        })
    }

    /// Unit noise density and `P` set from an SNR in dB.
    pub fn from_snr_db(snr_db: f64, l: usize) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0), 1.0, l)
    }

    pub fn with_antennas(mut self, nt: usize, nr: usize) -> Result<Self> {
        if nt == 0 || nr == 0 {
            return Err(invalid("antennas", "Nt and Nr must be at least 1"));
        }
        self.nt = nt;
        self.nr = nr;
        Ok(self)
    }

    pub fn with_packet_budget(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("M", "packet budget must be at least 1"));
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_power(self, p: f64) -> Result<Self> {
        Self::new(p, self.n0, self.l)?
            .with_antennas(self.nt, self.nr)?
            .with_packet_budget(self.m)
    }

    pub fn power(&self) -> f64 {
        self.p
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn packet_budget(&self) -> usize {
        self.m
    }

    pub fn snr(&self) -> f64 {
        self.p / self.n0
    }

    /// Per-element, per-SNQ-sample symbol power `P/(L·N_t)`.
    pub fn symbol_power(&self) -> f64 {
        self.p / (self.l * self.nt) as f64
    }
}

/// `sin(πx)/(πx)`, exactly zero at nonzero integers.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Truncated sinc pulse `g[n] = sinc(n/L)`, `n = -half_len..=half_len`,
/// stored causally (the peak sits at index `half_len`).
pub fn sinc_pulse_snq(l: usize, half_len: usize) -> Result<ChannelTaps> {
    if l == 0 {
        return Err(invalid("L", "oversignaling ratio must be at least 1"));
    }
    if half_len < 8 * l {
        return Err(invalid(
            "half_len",
            format!("{half_len} is shorter than 8·L = {}", 8 * l),
        ));
    }
    let h = half_len as i64;
    let taps = (-h..=h)
        .map(|n| Complex64::new(sinc(n as f64 / l as f64), 0.0))
        .collect();
    ChannelTaps::siso(taps, Rate::Snq(l))
}

/// Default sinc half-length, `64·L`.
pub fn default_half_len(l: usize) -> usize {
    64 * l
}

/// SNQ-rate cascade `b[n] = Σ_k h[k]·g[n - kL]` of Nyquist taps with the
/// truncated sinc. `L = 1` returns the taps unchanged.
pub fn upsample_to_snq(nyquist: &ChannelTaps, l: usize, half_len: usize) -> Result<ChannelTaps> {
    if nyquist.rate != Rate::Nyquist {
        return Err(invalid("rate", "upsampling needs Nyquist-rate taps"));
    }
    let pulse = sinc_pulse_snq(l, half_len)?.scalar_taps()?;
    if l == 1 {
        let b = ChannelTaps {
            rate: Rate::Snq(1),
            ..nyquist.clone()
        };
        return Ok(b.with_source(nyquist.clone()));
    }
    let len = pulse.len() + l * (nyquist.len() - 1);
    let mut taps = vec![CMatrix::zeros(nyquist.nr, nyquist.nt); len];
    for (k, h) in nyquist.taps.iter().enumerate() {
        for (i, g) in pulse.iter().enumerate() {
            if g.re != 0.0 {
                taps[k * l + i].add_assign(&h.scaled(*g));
            }
        }
    }
    let b = ChannelTaps::mimo(nyquist.nr, nyquist.nt, taps, Rate::Snq(l))?;
    Ok(b.with_source(nyquist.clone()))
}

/// Normalized SNQ-rate gain `K(f)`: the per-sample SNR density is
/// `(P/L)·K(f)/N₀`.
///
/// With a known Nyquist source the exact band-limited spectrum is used,
/// `K(f) = L·|H(e^{j2πfL})|²` on `|f| < 1/(2L)` and zero elsewhere;
/// otherwise `K(f) = |B(e^{j2πf})|²/L` from the finite taps.
pub fn snq_gain_grid(b: &ChannelTaps, q: usize) -> Result<FreqGrid<f64>> {
    let l = match b.rate {
        Rate::Snq(l) => l,
        Rate::Nyquist => return Err(invalid("rate", "expected SNQ-rate taps")),
    };
    let taps = b.scalar_taps()?;
    match b.nyquist_source() {
        Some(src) => {
            let h = src.scalar_taps()?;
            let half = 0.5 / l as f64;
            let values = (0..q)
                .map(|k| {
                    let f = grid_frequency(k, q);
                    if f >= -half && f < half {
                        l as f64 * dtft_at(&h, f * l as f64).norm_sqr()
                    } else {
                        0.0
                    }
                })
                .collect();
            FreqGrid::new(values)
        }
        None => Ok(dtft_grid(&taps, q)?.power().map(|v| v / l as f64)),
    }
}

/// SNR density `(P/L)·K(f)/N₀` of a SISO SNQ channel.
pub fn snr_density_snq(b: &ChannelTaps, link: &LinkParams, q: usize) -> Result<FreqGrid<f64>> {
    check_rate(b, link)?;
    let scale = link.power() / (link.l() as f64 * link.n0());
    Ok(snq_gain_grid(b, q)?.map(|k| scale * k))
}

/// White-input capacity in bits per SNQ symbol.
pub fn channel_capacity_snq(b: &ChannelTaps, link: &LinkParams, q: usize) -> Result<f64> {
    integrate_log_capacity(&snr_density_snq(b, link, q)?)
}

fn check_rate(b: &ChannelTaps, link: &LinkParams) -> Result<()> {
    match b.rate {
        Rate::Snq(l) if l == link.l() => Ok(()),
        Rate::Snq(l) => Err(invalid(
            "L",
            format!("taps are at L = {l} but the link uses L = {}", link.l()),
        )),
        Rate::Nyquist => Err(invalid("rate", "expected SNQ-rate taps")),
    }
}

/// I.i.d. `CN(0, 1/n_taps)` Nyquist-rate taps from a seeded generator.
pub fn random_gaussian_channel(
    nt: usize,
    nr: usize,
    n_taps: usize,
    seed: u64,
) -> Result<ChannelTaps> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_gaussian_channel_from(&mut rng, nt, nr, n_taps)
}

pub fn random_gaussian_channel_from<R: Rng + ?Sized>(
    rng: &mut R,
    nt: usize,
    nr: usize,
    n_taps: usize,
) -> Result<ChannelTaps> {
    if n_taps == 0 {
        return Err(invalid("n_taps", "need at least one tap"));
    }
    let scale = (0.5 / n_taps as f64).sqrt();
    let taps = (0..n_taps)
        .map(|_| {
            CMatrix::from_fn(nr, nt, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * scale, im * scale)
            })
        })
        .collect();
    ChannelTaps::mimo(nr, nt, taps, Rate::Nyquist)
}

/// Per-frequency `H(f)ᴴH(f)` of a Nyquist-rate channel, for evaluating the
/// white-input capacity at many SNRs.
#[derive(Clone, Debug)]
pub struct WhiteInputSpectrum {
    nt: usize,
    grams: Vec<CMatrix>,
}

impl WhiteInputSpectrum {
    pub fn new(h: &ChannelTaps, q: usize) -> Result<Self> {
        if h.rate != Rate::Nyquist {
            return Err(invalid(
                "rate",
                "white-input capacity needs Nyquist-rate taps",
            ));
        }
        if q < 2 || !q.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "size {q} must be a power of two"
            )));
        }
        if h.len() > q {
            return Err(Error::TapsTooLong { taps: h.len(), q });
        }
        let fft = FftPlanner::new().plan_fft_forward(q);
        let mut responses = vec![CMatrix::zeros(h.nr, h.nt); q];
        for r in 0..h.nr {
            for t in 0..h.nt {
                let mut buf = vec![Complex64::new(0.0, 0.0); q];
                for (n, tap) in h.taps.iter().enumerate() {
                    buf[n] = tap[(r, t)];
                }
                fft.process(&mut buf);
                for (resp, v) in responses.iter_mut().zip(buf) {
                    resp[(r, t)] = v;
                }
            }
        }
        let grams = responses.iter().map(|hf| &hf.adjoint() * hf).collect();
        Ok(Self { nt: h.nt, grams })
    }

    /// `mean_f log2 det(I + (P/(N_t N₀))·H(f)ᴴH(f))`, bits per Nyquist interval.
    pub fn capacity(&self, snr: f64) -> f64 {
        let rho = Complex64::new(snr / self.nt as f64, 0.0);
        let eye = CMatrix::identity(self.nt);
        let total: f64 = self
            .grams
            .iter()
            .map(|g| {
                let mut m = g.scaled(rho);
                m.add_assign(&eye);
                m.log2_det_hpd().expect("I + ρHᴴH is positive definite")
            })
            .sum();
        total / self.grams.len() as f64
    }
}

/// White-input capacity of a Nyquist-rate (MIMO) channel with the power
/// split evenly across transmit antennas, bits per Nyquist interval.
pub fn white_input_capacity(h: &ChannelTaps, snr: f64, q: usize) -> Result<f64> {
    Ok(WhiteInputSpectrum::new(h, q)?.capacity(snr))
}
