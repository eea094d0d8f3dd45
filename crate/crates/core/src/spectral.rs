//! Frequency-grid utilities over the normalized band `[-1/2, 1/2)`.
//!
//! Grid point `q` of a `Q`-point grid sits at `f_q = -1/2 + q/Q`
//! (cycles per sample). Capacities are in bits.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Default number of grid points for capacity integrals.
pub const DEFAULT_GRID: usize = 4096;

/// Uniform samples of a frequency-domain quantity on `[-1/2, 1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqGrid<T> {
    values: Vec<T>,
}

impl<T> FreqGrid<T> {
    /// Wraps grid samples; the length must be a power of two, at least 2.
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_grid_size(values.len())?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Frequency of grid point `q`.
    pub fn frequency(&self, q: usize) -> f64 {
        grid_frequency(q, self.values.len())
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> FreqGrid<U> {
        FreqGrid {
            values: self.values.iter().map(f).collect(),
        }
    }
}

impl FreqGrid<f64> {
    /// Grid holding the same value everywhere.
    pub fn constant(q: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; q])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl FreqGrid<Complex64> {
    /// `|X(f)|²` at every grid point.
    pub fn power(&self) -> FreqGrid<f64> {
        self.map(|z| z.norm_sqr())
    }
}

pub fn grid_frequency(q: usize, size: usize) -> f64 {
    -0.5 + q as f64 / size as f64
}

fn check_grid_size(q: usize) -> Result<()> {
    if q < 2 || !q.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "size {q} must be a power of two and at least 2"
        )));
    }
    Ok(())
}

/// `e^{-j2πk/n}`, exact whenever `k/n` is a multiple of a quarter turn.
pub fn twiddle(k: i64, n: usize) -> Complex64 {
    let n_i = n as i64;
    let r = k.rem_euclid(n_i);
    if (4 * r) % n_i == 0 {
        return match 4 * r / n_i {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    Complex64::from_polar(1.0, -2.0 * PI * r as f64 / n as f64)
}

/// DTFT of a finite causal sequence at a single frequency `f`.
pub fn dtft_at(taps: &[Complex64], f: f64) -> Complex64 {
    taps.iter()
        .enumerate()
        .map(|(n, &x)| x * Complex64::from_polar(1.0, -2.0 * PI * f * n as f64))
        .sum()
}

/// Samples `X(e^{j2πf}) = Σ_n x[n]·e^{-j2πfn}` on a `q`-point grid.
pub fn dtft_grid(taps: &[Complex64], q: usize) -> Result<FreqGrid<Complex64>> {
    check_grid_size(q)?;
    if taps.len() > q {
        return Err(Error::TapsTooLong {
            taps: taps.len(),
            q,
        });
    }
    // e^{-j2π(-1/2 + k/q)n} = (-1)^n · e^{-j2πkn/q}
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    for (n, (&x, slot)) in taps.iter().zip(buf.iter_mut()).enumerate() {
        *slot = if n % 2 == 0 { x } else { -x };
    }
    FftPlanner::new().plan_fft_forward(q).process(&mut buf);
    FreqGrid::new(buf)
}

/// Aliasing sum: `out[q] = Σ_{i<l} input[(q + i·Q/l) mod Q]`, `Q/l` points.
pub fn fold_spectrum(grid: &FreqGrid<f64>, l: usize) -> Result<FreqGrid<f64>> {
    let q = grid.len();
    if l == 0 || !q.is_multiple_of(l) {
        return Err(Error::FoldMismatch { q, l });
    }
    let step = q / l;
    let folded = (0..step)
        .map(|k| (0..l).map(|i| grid.values[(k + i * step) % q]).sum())
        .collect();
    FreqGrid::new(folded)
}

/// `(1/Q)·Σ_q log2(1 + snr[q])`, bits per sample.
pub fn integrate_log_capacity(snr_density: &FreqGrid<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for (index, &value) in snr_density.values.iter().enumerate() {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::NegativeDensity { index, value });
        }
        acc += value.ln_1p();
    }
    Ok(acc / (snr_density.len() as f64 * std::f64::consts::LN_2))
}

/// Segment-averaged (Welch, rectangular window, no overlap) periodogram
/// estimates for a pair of sequences.
#[derive(Clone, Debug)]
pub struct CrossSpectrum {
    pub cross: Vec<Complex64>,
    pub auto_a: Vec<f64>,
    pub auto_b: Vec<f64>,
    pub segments: usize,
}

impl CrossSpectrum {
    /// Per-bin standard deviation of the cross estimate under zero coherence,
    /// `sqrt(S_aa·S_bb / K)`.
    pub fn null_std(&self) -> Vec<f64> {
        let k = self.segments as f64;
        self.auto_a
            .iter()
            .zip(&self.auto_b)
            .map(|(a, b)| (a * b / k).sqrt())
            .collect()
    }

    /// RMS cross-spectrum magnitude over RMS null standard deviation. Around
    /// 1 for uncorrelated inputs, about `sqrt(K)` for fully coherent ones.
    pub fn normalized_magnitude(&self) -> f64 {
        let num: f64 = self.cross.iter().map(|z| z.norm_sqr()).sum();
        let den: f64 = self.null_std().iter().map(|s| s * s).sum();
        if den == 0.0 {
            return 0.0;
        }
        (num / den).sqrt()
    }
}

pub fn welch_cross_spectrum(
    a: &[Complex64],
    b: &[Complex64],
    seg_len: usize,
) -> Result<CrossSpectrum> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if seg_len == 0 || a.len() < seg_len {
        return Err(crate::error::invalid(
            "seg_len",
            format!("segment length {seg_len} does not fit {} samples", a.len()),
        ));
    }
    let segments = a.len() / seg_len;
    let fft = FftPlanner::new().plan_fft_forward(seg_len);
    let mut cross = vec![Complex64::new(0.0, 0.0); seg_len];
    let mut auto_a = vec![0.0; seg_len];
    let mut auto_b = vec![0.0; seg_len];
    let mut fa = vec![Complex64::new(0.0, 0.0); seg_len];
    let mut fb = fa.clone();
    let norm = 1.0 / (seg_len as f64 * segments as f64);
    for s in 0..segments {
        fa.copy_from_slice(&a[s * seg_len..(s + 1) * seg_len]);
        fb.copy_from_slice(&b[s * seg_len..(s + 1) * seg_len]);
        fft.process(&mut fa);
        fft.process(&mut fb);
        for k in 0..seg_len {
            cross[k] += fa[k] * fb[k].conj() * norm;
            auto_a[k] += fa[k].norm_sqr() * norm;
            auto_b[k] += fb[k].norm_sqr() * norm;
        }
    }
    Ok(CrossSpectrum {
        cross,
        auto_a,
        auto_b,
        segments,
    })
}
