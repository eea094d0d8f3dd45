//! SISO rateless SNQ link: dithered packets, shift-back combining and
//! accumulated mutual information.
//!
//! Packet `m` carries the same coded stream `s[n]` multiplied by the DFT
//! dither `v_m[n] = e^{-j2πmn/L}`. Dithering moves each packet into its own
//! `1/L`-wide slice of the SNQ band, so after the receiver undoes the
//! dither the packets look like one ISI channel with disjoint sub-bands
//! and their mutual informations add.

use std::ops::Range;

use num_complex::Complex64;

use crate::channel::{channel_capacity_snq, snq_gain_grid, ChannelTaps, LinkParams, Rate};
use crate::error::{invalid, Error, Result};
use crate::spectral::{
    dtft_at, grid_frequency, integrate_log_capacity, twiddle, welch_cross_spectrum, CrossSpectrum,
    FreqGrid, DEFAULT_GRID,
};

/// `v_m[n] = e^{-j2πmn/L}` for `n` in `range`.
pub fn dither_sequence(m: usize, l: usize, range: Range<usize>) -> Vec<Complex64> {
    assert!(l > 0, "oversignaling ratio must be positive");
    let m = (m % l) as u64;
    range
        .map(|n| twiddle(((m * (n as u64 % l as u64)) % l as u64) as i64, l))
        .collect()
}

/// Dithers `s` for packet `m`: `s_m[n] = v_m[n]·s[n]`.
pub fn modulate_packet(s: &[Complex64], m: usize, l: usize) -> Vec<Complex64> {
    s.iter()
        .zip(dither_sequence(m, l, 0..s.len()))
        .map(|(x, v)| x * v)
        .collect()
}

/// Full linear convolution.
pub fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (o, y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

pub(crate) fn check_distinct_dithers(indices: &[usize], l: usize) -> Result<()> {
    let mut owner = vec![None; l];
    for (pos, &m) in indices.iter().enumerate() {
        match owner[m % l] {
            Some(first) => {
                return Err(Error::DuplicateDither {
                    first: indices[first],
                    second: m,
                    dither: m % l,
                    l,
                })
            }
            None => owner[m % l] = Some(pos),
        }
    }
    Ok(())
}

/// Undoes each packet's dither and sums: `ỹ[n] = Σ_{m∈S} y_m[n]·e^{+j2πmn/L}`.
pub fn shift_back_combine(
    received: &[Vec<Complex64>],
    set: &[usize],
    l: usize,
) -> Result<Vec<Complex64>> {
    if l == 0 {
        return Err(invalid("L", "oversignaling ratio must be at least 1"));
    }
    if received.len() != set.len() {
        return Err(Error::LengthMismatch {
            expected: set.len(),
            found: received.len(),
        });
    }
    check_distinct_dithers(set, l)?;
    let Some(len) = received.first().map(Vec::len) else {
        return Ok(Vec::new());
    };
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (y, &m) in received.iter().zip(set) {
        if y.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                found: y.len(),
            });
        }
        for (o, (x, v)) in out
            .iter_mut()
            .zip(y.iter().zip(dither_sequence(m, l, 0..len)))
        {
            *o += x * v.conj();
        }
    }
    Ok(out)
}

/// Pulse-shaped transmit signal of packet `m` with the dither removed again,
/// `x̃_m[n] = e^{+j2πmn/L}·(g ∗ s_m)[n]`.
pub fn shifted_back_transmit(
    s: &[Complex64],
    m: usize,
    l: usize,
    pulse: &[Complex64],
) -> Vec<Complex64> {
    let x = convolve(pulse, &modulate_packet(s, m, l));
    x.iter()
        .zip(dither_sequence(m, l, 0..x.len()))
        .map(|(x, v)| x * v.conj())
        .collect()
}

/// Welch cross-spectrum between the shifted-back transmit signals of two
/// packets sharing the stream `s`.
pub fn packet_cross_spectrum(
    s: &[Complex64],
    (m1, m2): (usize, usize),
    l: usize,
    pulse: &[Complex64],
    seg_len: usize,
) -> Result<CrossSpectrum> {
    let a = shifted_back_transmit(s, m1, l, pulse);
    let b = shifted_back_transmit(s, m2, l, pulse);
    welch_cross_spectrum(&a, &b, seg_len)
}

/// SNQ-rate channels seen by the received packets, keyed by arrival order.
#[derive(Clone, Debug)]
pub struct PacketChannelSet {
    taps: Vec<ChannelTaps>,
    received: Vec<usize>,
    link: LinkParams,
}

impl PacketChannelSet {
    pub fn new(taps: Vec<ChannelTaps>, received: Vec<usize>, link: LinkParams) -> Result<Self> {
        if taps.len() != received.len() {
            return Err(Error::LengthMismatch {
                expected: received.len(),
                found: taps.len(),
            });
        }
        if received.len() > link.packet_budget() {
            return Err(invalid(
                "S",
                format!(
                    "{} packets received but the budget is M = {}",
                    received.len(),
                    link.packet_budget()
                ),
            ));
        }
        for (k, b) in taps.iter().enumerate() {
            if b.rate() != Rate::Snq(link.l()) {
                return Err(invalid(
                    "taps",
                    format!("packet {k} is not at the link's SNQ rate L = {}", link.l()),
                ));
            }
            if !b.is_siso() {
                return Err(Error::DimensionMismatch(format!("packet {k} is not SISO")));
            }
        }
        check_distinct_dithers(&received, link.l())?;
        Ok(Self {
            taps,
            received,
            link,
        })
    }

    pub fn taps(&self) -> &[ChannelTaps] {
        &self.taps
    }

    pub fn received(&self) -> &[usize] {
        &self.received
    }

    pub fn link(&self) -> &LinkParams {
        &self.link
    }

    /// The first `k` received packets.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            taps: self.taps[..k].to_vec(),
            received: self.received[..k].to_vec(),
            link: self.link,
        }
    }

    /// Effective channel after shift-back combining,
    /// `k̃[n] = Σ_{m∈S} b_m[n]·e^{+j2πmn/L}`.
    pub fn combined_effective_channel(&self) -> Result<ChannelTaps> {
        let l = self.link.l();
        let len = self.taps.iter().map(ChannelTaps::len).max().unwrap_or(1);
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for (b, &m) in self.taps.iter().zip(&self.received) {
            let taps = b.scalar_taps()?;
            for (a, (x, v)) in acc
                .iter_mut()
                .zip(taps.iter().zip(dither_sequence(m, l, 0..len)))
            {
                *a += x * v.conj();
            }
        }
        ChannelTaps::siso(acc, Rate::Snq(l))
    }
}

/// Mutual information of one packet in bits per SNQ symbol.
pub fn packet_capacity(b: &ChannelTaps, link: &LinkParams, q: usize) -> Result<f64> {
    channel_capacity_snq(b, link, q)
}

/// `C(S) = Σ_{m∈S} C_m`.
pub fn aggregate_capacity(set: &PacketChannelSet, q: usize) -> Result<f64> {
    set.taps
        .iter()
        .map(|b| packet_capacity(b, &set.link, q))
        .sum()
}

/// Normalized gain `|K̃(f)|²/L` of the combined effective channel.
///
/// When every packet knows its Nyquist source, the exact band-limited
/// responses are shifted by `m/L` and summed pointwise; otherwise the
/// finite combined taps are transformed.
pub fn combined_gain_grid(set: &PacketChannelSet, q: usize) -> Result<FreqGrid<f64>> {
    let l = set.link.l();
    let sources: Option<Vec<Vec<Complex64>>> = set
        .taps
        .iter()
        .map(|b| b.nyquist_source().map(|h| h.scalar_taps()))
        .collect::<Option<Result<_>>>()
        .transpose()?;
    let Some(sources) = sources else {
        let k = set.combined_effective_channel()?;
        return snq_gain_grid(&k, q);
    };
    let half = 0.5 / l as f64;
    let values = (0..q)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (h, &m) in sources.iter().zip(&set.received) {
                // frequency before the +m/L shift, wrapped into [-1/2, 1/2)
                let f = if q.is_multiple_of(l) {
                    grid_frequency((k + q - (m % l) * (q / l)) % q, q)
                } else {
                    let g = grid_frequency(k, q) - (m % l) as f64 / l as f64;
                    g - (g + 0.5).floor()
                };
                if f >= -half && f < half {
                    acc += dtft_at(h, f * l as f64) * l as f64;
                }
            }
            acc.norm_sqr() / l as f64
        })
        .collect();
    FreqGrid::new(values)
}

/// Capacity of the combined effective channel with white noise `N₀`; the
/// per-packet front end rejects noise outside each packet's band, which is
/// lossless because the signal lives inside it.
pub fn combined_capacity(set: &PacketChannelSet, q: usize) -> Result<f64> {
    if set.taps.is_empty() {
        return Ok(0.0);
    }
    let link = &set.link;
    let scale = link.power() / (link.l() as f64 * link.n0());
    integrate_log_capacity(&combined_gain_grid(set, q)?.map(|g| scale * g))
}

/// Aggregate capacity on the default grid.
pub fn aggregate_capacity_default(set: &PacketChannelSet) -> Result<f64> {
    aggregate_capacity(set, DEFAULT_GRID)
}

/// Smallest number of packets, in arrival order, whose accumulated
/// capacity exceeds `rate`; `None` when all of them fall short.
pub fn packets_to_decode(per_packet_caps: &[f64], rate: f64) -> Option<usize> {
    let mut acc = 0.0;
    if acc > rate {
        return Some(0);
    }
    for (k, c) in per_packet_caps.iter().enumerate() {
        acc += c;
        if acc > rate {
            return Some(k + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_gaussian_channel_from, sinc_pulse_snq, upsample_to_snq};
    use crate::spectral::{dtft_at, grid_frequency};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dither_examples() {
        assert!(dither_sequence(0, 4, 0..16)
            .iter()
            .all(|v| *v == c(1.0, 0.0)));
        let alt = dither_sequence(1, 2, 0..6);
        for (n, v) in alt.iter().enumerate() {
            assert_eq!(
                *v,
                if n % 2 == 0 {
                    c(1.0, 0.0)
                } else {
                    c(-1.0, 0.0)
                }
            );
        }
        for l in 1..9 {
            for m1 in 0..l {
                for m2 in 0..l {
                    let a = dither_sequence(m1, l, 0..l);
                    let b = dither_sequence(m2, l, 0..l);
                    let ip: Complex64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
                    let expected = if m1 == m2 { l as f64 } else { 0.0 };
                    assert!((ip - expected).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dither_matches_closed_form_and_period() {
        let l = 6;
        let v = dither_sequence(5, l, 0..40);
        for (n, x) in v.iter().enumerate() {
            let direct =
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (5 * n) as f64 / l as f64);
            assert!((x - direct).norm() < 1e-12);
            assert_eq!(*x, v[n % l]);
        }
    }

    #[test]
    fn modulation_preserves_magnitude() {
        let s: Vec<_> = (0..20).map(|k| c(k as f64 * 0.3, 1.0 - k as f64)).collect();
        assert_eq!(modulate_packet(&s, 0, 4), s);
        for (a, b) in modulate_packet(&s, 3, 4).iter().zip(&s) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn convolve_small() {
        let a = [c(1.0, 0.0), c(2.0, 0.0)];
        let b = [c(0.0, 1.0), c(1.0, 0.0), c(-1.0, 0.0)];
        assert_eq!(
            convolve(&a, &b),
            vec![c(0.0, 1.0), c(1.0, 2.0), c(1.0, 0.0), c(-2.0, 0.0)]
        );
        assert!(convolve(&a, &[]).is_empty());
    }

    #[test]
    fn shift_back_identity_and_commutativity() {
        let y0: Vec<_> = (0..8).map(|k| c(k as f64, -1.0)).collect();
        let y1: Vec<_> = (0..8).map(|k| c(1.0, k as f64 * 0.5)).collect();
        assert_eq!(
            shift_back_combine(std::slice::from_ref(&y0), &[0], 2).unwrap(),
            y0
        );
        let ab = shift_back_combine(&[y0.clone(), y1.clone()], &[0, 1], 2).unwrap();
        let ba = shift_back_combine(&[y1, y0], &[1, 0], 2).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_back_rejects_bad_input() {
        let y = vec![c(1.0, 0.0); 4];
        assert!(matches!(
            shift_back_combine(&[y.clone(), vec![c(0.0, 0.0); 3]], &[0, 1], 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            shift_back_combine(&[y.clone(), y.clone()], &[1, 3], 2),
            Err(Error::DuplicateDither { dither: 1, .. })
        ));
        assert!(shift_back_combine(&[y], &[0, 1], 2).is_err());
    }

    #[test]
    fn shift_back_inverts_modulation_through_channel() {
        // y_m = b ∗ (v_m s); shift-back yields the channel b[l]e^{+j2πml/L}.
        let s: Vec<_> = (0..32)
            .map(|k| c((k as f64).sin(), (k as f64 * 0.7).cos()))
            .collect();
        let b = [c(1.0, 0.0), c(0.5, -0.3), c(0.1, 0.2)];
        let l = 4;
        let m = 3;
        let y = convolve(&b, &modulate_packet(&s, m, l));
        let back = shift_back_combine(&[y], &[m], l).unwrap();
        let k: Vec<_> = b
            .iter()
            .zip(dither_sequence(m, l, 0..b.len()))
            .map(|(x, v)| x * v.conj())
            .collect();
        for (x, y) in back.iter().zip(convolve(&k, &s)) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn combined_unit_channels_fill_both_half_bands() {
        let link = LinkParams::new(1.0, 1.0, 2)
            .unwrap()
            .with_packet_budget(2)
            .unwrap();
        let unit = |_| {
            upsample_to_snq(
                &ChannelTaps::siso(vec![c(1.0, 0.0)], Rate::Nyquist).unwrap(),
                2,
                128,
            )
            .unwrap()
        };
        let set = PacketChannelSet::new((0..2).map(unit).collect(), vec![0, 1], link).unwrap();
        let k = set
            .combined_effective_channel()
            .unwrap()
            .scalar_taps()
            .unwrap();
        // Union of the two bands: |K̃|² ≈ L² everywhere, away from the band edges.
        for q in 0..256 {
            let f = grid_frequency(q, 256);
            let edge = [-0.5, -0.25, 0.25, 0.5]
                .iter()
                .map(|e| (f - e).abs())
                .fold(1.0, f64::min);
            if edge > 0.03 {
                let p = dtft_at(&k, f).norm_sqr();
                assert!((p / 4.0 - 1.0).abs() < 2e-2, "f = {f}: {p}");
            }
        }
        // packet 0 alone occupies only |f| < 1/4
        let k0 = set
            .prefix(1)
            .combined_effective_channel()
            .unwrap()
            .scalar_taps()
            .unwrap();
        assert!(dtft_at(&k0, 0.4).norm_sqr() < 1e-3);
        assert!(dtft_at(&k0, 0.1).norm_sqr() > 3.9);
    }

    #[test]
    fn flat_packet_capacities() {
        for l in [1usize, 2, 4] {
            let snr = 10.0;
            let link = LinkParams::new(snr, 1.0, l)
                .unwrap()
                .with_packet_budget(l)
                .unwrap();
            let flat = ChannelTaps::siso(vec![c(1.0, 0.0)], Rate::Nyquist).unwrap();
            let b = upsample_to_snq(&flat, l, 64 * l).unwrap();
            let expected = (1.0 + snr).log2() / l as f64;
            assert_relative_eq!(
                packet_capacity(&b, &link, 1024).unwrap(),
                expected,
                epsilon = 1e-9
            );
            let set = PacketChannelSet::new(vec![b; l], (0..l).collect(), link).unwrap();
            assert_relative_eq!(
                aggregate_capacity(&set, 1024).unwrap(),
                (1.0 + snr).log2(),
                epsilon = 1e-9
            );
            assert_eq!(aggregate_capacity(&set.prefix(0), 1024).unwrap(), 0.0);
        }
        let link = LinkParams::new(10.0, 1.0, 2).unwrap();
        let zero = ChannelTaps::siso(vec![c(0.0, 0.0)], Rate::Snq(2)).unwrap();
        assert_eq!(packet_capacity(&zero, &link, 256).unwrap(), 0.0);
    }

    #[test]
    fn set_validation() {
        let link = LinkParams::new(1.0, 1.0, 4)
            .unwrap()
            .with_packet_budget(3)
            .unwrap();
        let b = ChannelTaps::siso(vec![c(1.0, 0.0)], Rate::Snq(4)).unwrap();
        assert!(matches!(
            PacketChannelSet::new(vec![b.clone(), b.clone()], vec![1, 5], link),
            Err(Error::DuplicateDither {
                first: 1,
                second: 5,
                dither: 1,
                l: 4
            })
        ));
        assert!(PacketChannelSet::new(vec![b.clone(); 4], vec![0, 1, 2, 3], link).is_err());
        let wrong = ChannelTaps::siso(vec![c(1.0, 0.0)], Rate::Snq(2)).unwrap();
        assert!(PacketChannelSet::new(vec![wrong], vec![0], link).is_err());
        assert!(PacketChannelSet::new(vec![b], vec![0, 1], link).is_err());
    }

    #[test]
    fn sum_and_combined_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = 4;
        let link = LinkParams::new(10.0, 1.0, l)
            .unwrap()
            .with_packet_budget(l)
            .unwrap();
        let packets: Vec<_> = (0..2)
            .map(|_| {
                let h = random_gaussian_channel_from(&mut rng, 1, 1, 3).unwrap();
                upsample_to_snq(&h, l, 64 * l).unwrap()
            })
            .collect();
        let set = PacketChannelSet::new(packets.clone(), vec![0, 2], link).unwrap();
        let sum = aggregate_capacity(&set, DEFAULT_GRID).unwrap();
        let combined = combined_capacity(&set, DEFAULT_GRID).unwrap();
        assert!((sum - combined).abs() < 1e-9, "{sum} vs {combined}");
        // Truncated taps leak across band edges, so the finite route only
        // agrees loosely.
        let finite = PacketChannelSet::new(
            packets.iter().map(ChannelTaps::finite).collect(),
            vec![0, 2],
            link,
        )
        .unwrap();
        let loose = combined_capacity(&finite, DEFAULT_GRID).unwrap();
        assert!((sum - loose).abs() < 5e-2, "{sum} vs {loose}");
    }

    #[test]
    fn combined_path_with_l_not_dividing_grid() {
        let l = 3;
        let link = LinkParams::new(10.0, 1.0, l)
            .unwrap()
            .with_packet_budget(l)
            .unwrap();
        let h = ChannelTaps::siso(vec![c(1.0, 0.0), c(0.4, -0.3)], Rate::Nyquist).unwrap();
        let b = upsample_to_snq(&h, l, 64 * l).unwrap();
        let set = PacketChannelSet::new(vec![b.clone(), b], vec![0, 2], link).unwrap();
        let sum = aggregate_capacity(&set, 4096).unwrap();
        let combined = combined_capacity(&set, 4096).unwrap();
        assert!((sum - combined).abs() < 1e-3, "{sum} vs {combined}");
    }

    #[test]
    fn packets_to_decode_examples() {
        assert_eq!(packets_to_decode(&[0.4; 5], 1.0), Some(3));
        assert_eq!(packets_to_decode(&[1.0, 1.0], 3.0), None);
        assert_eq!(packets_to_decode(&[1.2, 0.3, 0.9], 1.4), Some(2));
        assert_eq!(packets_to_decode(&[], 1.0), None);
    }

    #[test]
    fn cross_spectrum_of_distinct_packets_vanishes() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s: Vec<Complex64> = (0..1 << 14)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let g = sinc_pulse_snq(4, 256).unwrap().scalar_taps().unwrap();
        let distinct = packet_cross_spectrum(&s, (1, 3), 4, &g, 256).unwrap();
        assert!(distinct.normalized_magnitude() < 3.0);
        let same = packet_cross_spectrum(&s, (2, 2), 4, &g, 256).unwrap();
        assert!(same.normalized_magnitude() > 5.0);
    }

    proptest! {
        #[test]
        fn adding_packets_never_decreases_capacity(
            caps in prop::collection::vec(0.0f64..3.0, 0..10),
            rate in 0.01f64..10.0,
        ) {
            let prefix: Vec<f64> = caps.iter().scan(0.0, |a, c| { *a += c; Some(*a) }).collect();
            prop_assert!(prefix.windows(2).all(|w| w[1] >= w[0]));
            match packets_to_decode(&caps, rate) {
                Some(k) => {
                    prop_assert!(prefix[k - 1] > rate);
                    prop_assert!(k == 1 || prefix[k - 2] <= rate);
                }
                None => prop_assert!(prefix.last().is_none_or(|&t| t <= rate)),
            }
        }
    }
}
