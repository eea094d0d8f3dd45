//! Unbiased MMSE-DFE SINRs.
//!
//! Two routes: the closed spectral form for LTI scalar channels and a
//! finite-block chain-rule decomposition that works for any linear model
//! `y = A·s + z`. The block route factors `I + ρ·AᴴA = U·Uᴴ` with `U` upper
//! triangular; `|U_nn|²` is then `1 + SINR_n` for symbol `n` detected from
//! all observations with `s[0..n)` already known.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{BandedHermitian, CMatrix};
use crate::spectral::{integrate_log_capacity, FreqGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `2^{∫log2(1+SNR(f))df} − 1`.
pub fn dfe_sinr_spectral(snr_density: &FreqGrid<f64>) -> Result<f64> {
    Ok(integrate_log_capacity(snr_density)?.exp2() - 1.0)
}

/// Periodically time-varying MIMO convolution observed through several
/// packets. Symbol `n` enters through `taps[m][l]·beams[n mod period]`.
#[derive(Clone, Debug)]
struct ConvolutionStack {
    nr: usize,
    nt: usize,
    /// Per packet, equal-length tap lists of `N_r × N_t` matrices.
    packets: Vec<Vec<CMatrix>>,
    beams: Vec<Vec<Complex64>>,
}

impl ConvolutionStack {
    fn taps_len(&self) -> usize {
        self.packets[0].len()
    }

    /// Observation time slots of the full convolution.
    fn slots(&self, n_symbols: usize) -> usize {
        n_symbols + self.taps_len() - 1
    }

    fn rows_per_slot(&self) -> usize {
        self.packets.len() * self.nr
    }

    fn beam(&self, n: usize) -> &[Complex64] {
        &self.beams[n % self.beams.len()]
    }

    /// `Σ_m Σ_l B_m[l]ᴴ·B_m[l+d]` for `d = 0..len`.
    fn autocorrelation(&self) -> Vec<CMatrix> {
        let len = self.taps_len();
        (0..len)
            .map(|d| {
                let mut acc = CMatrix::zeros(self.nt, self.nt);
                for taps in &self.packets {
                    for l in 0..len - d {
                        acc.add_assign(&(&taps[l].adjoint() * &taps[l + d]));
                    }
                }
                acc
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Observation {
    Dense(CMatrix),
    Stack(ConvolutionStack),
}

/// Linear observation model `y = A·s + z` with i.i.d. symbols of power
/// `symbol_power` and white noise of power `noise_power`.
#[derive(Clone, Debug)]
pub struct BlockLinearModel {
    obs: Observation,
    n_symbols: usize,
    symbol_power: f64,
    noise_power: f64,
}

fn check_powers(symbol_power: f64, noise_power: f64) -> Result<()> {
    if !(symbol_power > 0.0 && symbol_power.is_finite()) {
        return Err(invalid(
            "symbol_power",
            format!("must be positive, got {symbol_power}"),
        ));
    }
    if !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(invalid(
            "noise_power",
            format!("must be positive, got {noise_power}"),
        ));
    }
    Ok(())
}

impl BlockLinearModel {
    /// Explicit `n_obs × n_symbols` observation matrix.
    pub fn dense(a: CMatrix, symbol_power: f64, noise_power: f64) -> Result<Self> {
        check_powers(symbol_power, noise_power)?;
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::DimensionMismatch(
                "observation matrix is empty".into(),
            ));
        }
        if !a.is_finite() {
            return Err(invalid("A", "entries must be finite"));
        }
        Ok(Self {
            n_symbols: a.cols(),
            obs: Observation::Dense(a),
            symbol_power,
            noise_power,
        })
    }

    /// Plain full-convolution model of a scalar channel.
    pub fn siso_convolution(
        taps: &[Complex64],
        n_symbols: usize,
        symbol_power: f64,
        noise_power: f64,
    ) -> Result<Self> {
        let taps = taps.iter().map(|&t| CMatrix::scalar(t)).collect();
        Self::periodic_mimo(
            1,
            1,
            vec![taps],
            vec![vec![Complex64::new(1.0, 0.0)]],
            n_symbols,
            symbol_power,
            noise_power,
        )
    }

    /// Scalar symbols beamformed by a periodic sequence of `N_t`-vectors and
    /// sent through one `N_r × N_t` convolution per packet. Observation rows
    /// are ordered `(slot, packet, receive antenna)`, slot-major.
    pub fn periodic_mimo(
        nr: usize,
        nt: usize,
        packets: Vec<Vec<CMatrix>>,
        beams: Vec<Vec<Complex64>>,
        n_symbols: usize,
        symbol_power: f64,
        noise_power: f64,
    ) -> Result<Self> {
        check_powers(symbol_power, noise_power)?;
        if n_symbols == 0 {
            return Err(invalid("n_symbols", "must be at least 1"));
        }
        if packets.is_empty() || beams.is_empty() {
            return Err(Error::DimensionMismatch(
                "need at least one packet and one beam".into(),
            ));
        }
        if let Some(p) = beams.iter().position(|b| b.len() != nt) {
            return Err(Error::DimensionMismatch(format!(
                "beam {p} has {} entries, expected {nt}",
                beams[p].len()
            )));
        }
        if beams
            .iter()
            .flatten()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(invalid("beams", "entries must be finite"));
        }
        let len = packets.iter().map(Vec::len).max().unwrap_or(0);
        if len == 0 {
            return Err(Error::DimensionMismatch(
                "packets need at least one tap".into(),
            ));
        }
        let mut padded = Vec::with_capacity(packets.len());
        for (m, mut taps) in packets.into_iter().enumerate() {
            if let Some(t) = taps.iter().find(|t| t.rows() != nr || t.cols() != nt) {
                return Err(Error::DimensionMismatch(format!(
                    "packet {m} has a {}x{} tap, expected {nr}x{nt}",
                    t.rows(),
                    t.cols()
                )));
            }
            if !taps.iter().all(CMatrix::is_finite) {
                return Err(invalid("taps", "entries must be finite"));
            }
            taps.resize(len, CMatrix::zeros(nr, nt));
            padded.push(taps);
        }
        Ok(Self {
            obs: Observation::Stack(ConvolutionStack {
                nr,
                nt,
                packets: padded,
                beams,
            }),
            n_symbols,
            symbol_power,
            noise_power,
        })
    }

    /// The same observation map at different powers.
    pub fn with_powers(&self, symbol_power: f64, noise_power: f64) -> Result<Self> {
        check_powers(symbol_power, noise_power)?;
        Ok(Self {
            symbol_power,
            noise_power,
            ..self.clone()
        })
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_obs(&self) -> usize {
        match &self.obs {
            Observation::Dense(a) => a.rows(),
            Observation::Stack(st) => st.slots(self.n_symbols) * st.rows_per_slot(),
        }
    }

    pub fn symbol_power(&self) -> f64 {
        self.symbol_power
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// `P_s / N`.
    pub fn snr(&self) -> f64 {
        self.symbol_power / self.noise_power
    }

    /// The observation matrix `A`.
    pub fn to_dense(&self) -> CMatrix {
        match &self.obs {
            Observation::Dense(a) => a.clone(),
            Observation::Stack(st) => {
                let rps = st.rows_per_slot();
                let mut a = CMatrix::zeros(self.n_obs(), self.n_symbols);
                for n in 0..self.n_symbols {
                    let v = st.beam(n);
                    for (m, taps) in st.packets.iter().enumerate() {
                        for (l, tap) in taps.iter().enumerate() {
                            let col = tap.mul_vec(v);
                            for (r, x) in col.into_iter().enumerate() {
                                a[((n + l) * rps + m * st.nr + r, n)] = x;
                            }
                        }
                    }
                }
                a
            }
        }
    }

    /// Noiseless observations `A·s`.
    pub fn apply(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        if s.len() != self.n_symbols {
            return Err(Error::LengthMismatch {
                expected: self.n_symbols,
                found: s.len(),
            });
        }
        match &self.obs {
            Observation::Dense(a) => Ok(a.mul_vec(s)),
            Observation::Stack(st) => {
                let rps = st.rows_per_slot();
                let mut y = vec![ZERO; self.n_obs()];
                let x: Vec<Vec<Complex64>> = s
                    .iter()
                    .enumerate()
                    .map(|(n, &sn)| st.beam(n).iter().map(|v| v * sn).collect())
                    .collect();
                for (t, slot) in y.chunks_exact_mut(rps).enumerate() {
                    for (m, taps) in st.packets.iter().enumerate() {
                        for (l, tap) in taps.iter().enumerate() {
                            if t < l || t - l >= self.n_symbols {
                                continue;
                            }
                            let contrib = tap.mul_vec(&x[t - l]);
                            for (o, c) in slot[m * st.nr..(m + 1) * st.nr].iter_mut().zip(contrib) {
                                *o += c;
                            }
                        }
                    }
                }
                Ok(y)
            }
        }
    }

    /// `AᴴA`, independent of the powers.
    pub fn gram(&self) -> SymbolGram {
        match &self.obs {
            Observation::Dense(a) => SymbolGram::Dense(&a.adjoint() * a),
            Observation::Stack(st) => {
                let n = self.n_symbols;
                let r = st.autocorrelation();
                let w = (r.len() - 1).min(n - 1);
                let period = st.beams.len();
                // g[p][p'][d] = v_pᴴ·R(d)·v_p'
                let table: Vec<Vec<Vec<Complex64>>> = (0..period)
                    .map(|p| {
                        (0..period)
                            .map(|q| {
                                r[..=w]
                                    .iter()
                                    .map(|rd| {
                                        let rv = rd.mul_vec(&st.beams[q]);
                                        st.beams[p].iter().zip(&rv).map(|(a, b)| a.conj() * b).sum()
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                let mut g = BandedHermitian::zeros(n, w);
                for i in 0..n {
                    for j in i.saturating_sub(w)..=i {
                        // G[i,j] = v[i]ᴴ R(i-j) v[j]
                        g.set(i, j, table[i % period][j % period][i - j]);
                    }
                }
                SymbolGram::Banded(g)
            }
        }
    }
}

/// Symbol-domain Gram matrix `AᴴA`.
#[derive(Clone, Debug)]
pub enum SymbolGram {
    Dense(CMatrix),
    Banded(BandedHermitian),
}

impl SymbolGram {
    pub fn dim(&self) -> usize {
        match self {
            SymbolGram::Dense(g) => g.rows(),
            SymbolGram::Banded(g) => g.dim(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            SymbolGram::Dense(g) => g[(i, j)],
            SymbolGram::Banded(g) => g.entry(i, j),
        }
    }

    /// Chain-rule profile of `I + ρ·G` with past symbols known.
    pub fn profile(&self, rho: f64) -> Result<SinrProfile> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(invalid(
                "rho",
                format!("must be finite and nonnegative, got {rho}"),
            ));
        }
        let n = self.dim();
        let last = n - 1;
        let scale = Complex64::new(rho, 0.0);
        // Factor the index-reversed matrix so the lower factor's diagonal,
        // read backwards, is the upper factor's diagonal of the original.
        let reversed_diag = match self {
            SymbolGram::Dense(g) => {
                let m = CMatrix::from_fn(n, n, |i, j| {
                    let v = g[(last - i, last - j)] * scale;
                    if i == j {
                        v + 1.0
                    } else {
                        v
                    }
                });
                let chol = m.cholesky().map_err(|i| Error::NotPositiveDefinite {
                    index: last - i,
                    pivot: f64::NAN,
                })?;
                (0..n).map(|i| chol[(i, i)].re).collect::<Vec<_>>()
            }
            SymbolGram::Banded(g) => {
                let w = g.bandwidth();
                let mut m = BandedHermitian::zeros(n, w);
                for i in 0..n {
                    for j in i.saturating_sub(w)..=i {
                        let v = g.entry(last - i, last - j) * scale;
                        m.set(i, j, if i == j { v + 1.0 } else { v });
                    }
                }
                m.cholesky_diagonal()
                    .map_err(|(i, pivot)| Error::NotPositiveDefinite {
                        index: last - i,
                        pivot,
                    })?
            }
        };
        let capacity: Vec<f64> = reversed_diag.iter().rev().map(|d| 2.0 * d.log2()).collect();
        let sinr = reversed_diag
            .iter()
            .rev()
            .map(|d| (d * d - 1.0).max(0.0))
            .collect();
        Ok(SinrProfile { sinr, capacity })
    }
}

/// Per-symbol unbiased SINRs and the matching `log2(1 + SINR)` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct SinrProfile {
    sinr: Vec<f64>,
    capacity: Vec<f64>,
}

impl SinrProfile {
    pub fn per_symbol_sinr(&self) -> &[f64] {
        &self.sinr
    }

    pub fn per_symbol_capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    /// Block mutual information `Σ_n log2(1 + SINR_n)`.
    pub fn total(&self) -> f64 {
        self.capacity.iter().sum()
    }
}

/// Chain-rule profile of a block model.
pub fn block_dfe_profile(model: &BlockLinearModel) -> Result<SinrProfile> {
    model.gram().profile(model.snr())
}

/// Mean per-symbol capacity over `[discard, n − discard)`.
pub fn steady_state_capacity(profile: &SinrProfile, discard: usize) -> Result<f64> {
    let n = profile.len();
    if 2 * discard >= n {
        return Err(invalid(
            "discard",
            format!("2·{discard} leaves no steady-state symbols out of {n}"),
        ));
    }
    let kept = &profile.capacity[discard..n - discard];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::dtft_grid;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_taps(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// log2 det(I + ρ AᴴA) through nalgebra's LU.
    fn log2_det_oracle(a: &CMatrix, rho: f64) -> f64 {
        let m = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)]);
        let g = m.adjoint() * &m * c(rho, 0.0) + DMatrix::identity(a.cols(), a.cols());
        g.determinant().re.log2()
    }

    #[test]
    fn spectral_sinr_examples() {
        let flat = FreqGrid::constant(64, 3.5).unwrap();
        assert_relative_eq!(dfe_sinr_spectral(&flat).unwrap(), 3.5, epsilon = 1e-12);
        assert_eq!(
            dfe_sinr_spectral(&FreqGrid::constant(64, 0.0).unwrap()).unwrap(),
            0.0
        );
        // half the band at SNR 63, half at 0: 3 bits
        let mut v = vec![63.0; 32];
        v.extend(vec![0.0; 32]);
        assert_relative_eq!(
            dfe_sinr_spectral(&FreqGrid::new(v).unwrap()).unwrap(),
            7.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_and_zero_models() {
        let model = BlockLinearModel::dense(CMatrix::identity(6), 2.5, 1.0).unwrap();
        let p = block_dfe_profile(&model).unwrap();
        for s in p.per_symbol_sinr() {
            assert_relative_eq!(*s, 2.5, epsilon = 1e-12);
        }
        let zero = BlockLinearModel::dense(CMatrix::zeros(3, 4), 1.0, 1.0).unwrap();
        let p = block_dfe_profile(&zero).unwrap();
        assert!(p.per_symbol_sinr().iter().all(|&s| s == 0.0));
        assert_eq!(p.total(), 0.0);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(BlockLinearModel::dense(CMatrix::identity(2), 0.0, 1.0).is_err());
        assert!(BlockLinearModel::dense(CMatrix::identity(2), 1.0, -1.0).is_err());
        let mut a = CMatrix::identity(2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(BlockLinearModel::dense(a, 1.0, 1.0).is_err());
        assert!(BlockLinearModel::siso_convolution(&[c(1.0, 0.0)], 0, 1.0, 1.0).is_err());
        assert!(BlockLinearModel::periodic_mimo(
            2,
            2,
            vec![vec![CMatrix::identity(2)]],
            vec![vec![c(1.0, 0.0)]],
            4,
            1.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn overflow_reports_pivot() {
        let g = SymbolGram::Dense(CMatrix::identity(3).scaled(c(1e300, 0.0)));
        assert!(matches!(
            g.profile(1e300),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn stack_dense_apply_and_gram_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nt = 2;
        let nr = 3;
        let packets: Vec<Vec<CMatrix>> = vec![
            (0..3).map(|_| random_matrix(&mut rng, nr, nt)).collect(),
            (0..2).map(|_| random_matrix(&mut rng, nr, nt)).collect(),
        ];
        let beams = vec![
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(-1.0, 0.0)],
        ];
        let model =
            BlockLinearModel::periodic_mimo(nr, nt, packets.clone(), beams.clone(), 9, 1.0, 1.0)
                .unwrap();
        let a = model.to_dense();
        assert_eq!(a.rows(), model.n_obs());
        assert_eq!(a.rows(), (9 + 2) * 2 * nr);
        let s = random_taps(&mut rng, 9);
        let direct = a.mul_vec(&s);
        for (x, y) in model.apply(&s).unwrap().iter().zip(&direct) {
            assert!((x - y).norm() < 1e-12);
        }
        // brute force: y_m[t] = Σ_l B_m[l] v[t-l] s[t-l]
        for (m, taps) in packets.iter().enumerate() {
            for t in 0..11 {
                for r in 0..nr {
                    let mut acc = c(0.0, 0.0);
                    for (l, tap) in taps.iter().enumerate() {
                        if t >= l && t - l < 9 {
                            let v = &beams[(t - l) % 2];
                            for i in 0..nt {
                                acc += tap[(r, i)] * v[i] * s[t - l];
                            }
                        }
                    }
                    assert!((direct[t * 2 * nr + m * nr + r] - acc).norm() < 1e-12);
                }
            }
        }
        let dense_gram = &a.adjoint() * &a;
        let g = model.gram();
        for i in 0..9 {
            for j in 0..9 {
                assert!((g.entry(i, j) - dense_gram[(i, j)]).norm() < 1e-12);
            }
        }
        let banded = block_dfe_profile(&model).unwrap();
        let dense = block_dfe_profile(&BlockLinearModel::dense(a, 1.0, 1.0).unwrap()).unwrap();
        for (x, y) in banded
            .per_symbol_capacity()
            .iter()
            .zip(dense.per_symbol_capacity())
        {
            assert_relative_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn past_known_sinr_matches_mmse_formula() {
        // SINR_n = ρ·a_nᴴ (I + ρ Σ_{k>n} a_k a_kᴴ)⁻¹ a_n when s[0..n) is cancelled.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 5, 4);
        let rho = 1.7;
        let p = block_dfe_profile(&BlockLinearModel::dense(a.clone(), rho, 1.0).unwrap()).unwrap();
        for n in 0..4 {
            let mut cov = CMatrix::identity(5);
            for k in n + 1..4 {
                let col = a.column(k);
                let outer = CMatrix::from_fn(5, 5, |i, j| col[i] * col[j].conj() * rho);
                cov.add_assign(&outer);
            }
            let an = a.column(n);
            let x = cov.solve_hpd(&an).unwrap();
            let sinr: f64 = rho
                * an.iter()
                    .zip(&x)
                    .map(|(u, v)| u.conj() * v)
                    .sum::<Complex64>()
                    .re;
            assert_relative_eq!(p.per_symbol_sinr()[n], sinr, max_relative = 1e-10);
        }
    }

    #[test]
    fn losslessness_for_three_tap_channel() {
        let taps = [c(0.8, 0.1), c(-0.4, 0.3), c(0.2, -0.2)];
        let rho = 4.0;
        let model = BlockLinearModel::siso_convolution(&taps, 1024, rho, 1.0).unwrap();
        let profile = block_dfe_profile(&model).unwrap();
        let spectral =
            integrate_log_capacity(&dtft_grid(&taps, 4096).unwrap().power().map(|p| rho * p))
                .unwrap();
        let block = steady_state_capacity(&profile, 64).unwrap();
        assert!((block - spectral).abs() < 1e-3, "{block} vs {spectral}");
        // center symbol alone
        assert!((profile.per_symbol_capacity()[512] - spectral).abs() < 1e-3);
        let wider = steady_state_capacity(&profile, 128).unwrap();
        assert!((block - wider).abs() < 1e-4);
        let sinr =
            dfe_sinr_spectral(&dtft_grid(&taps, 4096).unwrap().power().map(|p| rho * p)).unwrap();
        assert!(((1.0 + sinr).log2() - spectral).abs() < 1e-9);
    }

    #[test]
    fn steady_state_edge_cases() {
        let p = SinrProfile {
            sinr: vec![1.0; 8],
            capacity: vec![1.0; 8],
        };
        assert_eq!(steady_state_capacity(&p, 3).unwrap(), 1.0);
        assert!(steady_state_capacity(&p, 4).is_err());
        let q = SinrProfile {
            sinr: vec![0.0; 4],
            capacity: vec![1.0, 2.0, 3.0, 6.0],
        };
        assert_eq!(steady_state_capacity(&q, 0).unwrap(), 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn chain_rule_holds(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..8, rho in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, rows, cols);
            let p = block_dfe_profile(&BlockLinearModel::dense(a.clone(), rho, 1.0).unwrap()).unwrap();
            let oracle = log2_det_oracle(&a, rho);
            prop_assert!((p.total() - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
            prop_assert!(p.per_symbol_sinr().iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn appending_rows_never_hurts(seed in any::<u64>(), rows in 1usize..6, extra in 1usize..4, cols in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, rows, cols);
            let b = random_matrix(&mut rng, extra, cols);
            let stacked = CMatrix::from_fn(rows + extra, cols, |i, j| if i < rows { a[(i, j)] } else { b[(i - rows, j)] });
            let p = block_dfe_profile(&BlockLinearModel::dense(a, 2.0, 1.0).unwrap()).unwrap();
            let q = block_dfe_profile(&BlockLinearModel::dense(stacked, 2.0, 1.0).unwrap()).unwrap();
            let mut sp = 0.0;
            let mut sq = 0.0;
            for (x, y) in p.per_symbol_capacity().iter().zip(q.per_symbol_capacity()) {
                sp += x;
                sq += y;
                prop_assert!(sq >= sp - 1e-10);
            }
        }

        #[test]
        fn permuting_symbols_preserves_total(seed in any::<u64>(), cols in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 4, cols);
            let mut perm: Vec<usize> = (0..cols).collect();
            perm.rotate_left(1);
            perm.swap(0, cols - 1);
            let permuted = CMatrix::from_fn(4, cols, |i, j| a[(i, perm[j])]);
            let p = block_dfe_profile(&BlockLinearModel::dense(a, 3.0, 1.0).unwrap()).unwrap();
            let q = block_dfe_profile(&BlockLinearModel::dense(permuted, 3.0, 1.0).unwrap()).unwrap();
            prop_assert!((p.total() - q.total()).abs() < 1e-9 * p.total().max(1.0));
        }
    }
}
