//! Small dense complex matrices and a banded Hermitian Cholesky factorization.
//!
//! The dense type covers the per-frequency and per-tap matrices (a few
//! antennas on a side). The banded factorization carries the block
//! decision-feedback computations, whose Gram matrices are banded because
//! the channels are FIR.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn scalar(value: Complex64) -> Self {
        Self::from_row_major(1, 1, vec![value])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &CMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Squared Frobenius norm.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Lower Cholesky factor of a Hermitian positive definite matrix, or the
    /// failing pivot index.
    pub fn cholesky(&self) -> Result<CMatrix, usize> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                if i == j {
                    if !(s.re > 0.0) || !s.re.is_finite() {
                        return Err(i);
                    }
                    l[(i, i)] = Complex64::new(s.re.sqrt(), 0.0);
                } else {
                    l[(i, j)] = s / l[(j, j)].re;
                }
            }
        }
        Ok(l)
    }

    /// `log2 det` of a Hermitian positive definite matrix.
    pub fn log2_det_hpd(&self) -> Result<f64, usize> {
        let l = self.cholesky()?;
        Ok((0..self.rows).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
    }

    /// Solves `self · x = b` for Hermitian positive definite `self`.
    pub fn solve_hpd(&self, b: &[Complex64]) -> Result<Vec<Complex64>, usize> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        Ok(y)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == ZERO {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

/// `Σ a[k]·conj(b[k])` with independent accumulators so the loop pipelines.
#[inline]
pub(crate) fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for lane in 0..4 {
            re[lane] += x[lane].re * y[lane].re + x[lane].im * y[lane].im;
            im[lane] += x[lane].im * y[lane].re - x[lane].re * y[lane].im;
        }
    }
    let mut s = Complex64::new(re[0] + re[1] + re[2] + re[3], im[0] + im[1] + im[2] + im[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y.conj();
    }
    s
}

/// Hermitian matrix stored as its lower band: entry `(i, j)` with
/// `i - w <= j <= i`; everything outside the band is zero.
#[derive(Clone, Debug)]
pub struct BandedHermitian {
    n: usize,
    w: usize,
    data: Vec<Complex64>,
}

impl BandedHermitian {
    pub fn zeros(n: usize, w: usize) -> Self {
        let w = w.min(n.saturating_sub(1));
        Self {
            n,
            w,
            data: vec![ZERO; n * (w + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.w
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.w);
        i * (self.w + 1) + (j + self.w - i)
    }

    /// Lower-triangle entry; `None` outside the band.
    pub fn get(&self, i: usize, j: usize) -> Option<Complex64> {
        (j <= i && i - j <= self.w).then(|| self.data[self.offset(i, j)])
    }

    /// Sets lower-triangle entry `(i, j)`, `j <= i`, inside the band.
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        let o = self.offset(i, j);
        self.data[o] = value;
    }

    /// Full Hermitian entry, zero outside the band.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        if j <= i {
            self.get(i, j).unwrap_or(ZERO)
        } else {
            self.get(j, i).map(|z| z.conj()).unwrap_or(ZERO)
        }
    }

    /// Same matrix with the index order reversed, `(i, j) -> (n-1-i, n-1-j)`.
    pub fn reversed(&self) -> Self {
        let mut out = Self::zeros(self.n, self.w);
        let last = self.n.saturating_sub(1);
        for i in 0..self.n {
            for j in i.saturating_sub(self.w)..=i {
                out.set(i, j, self.entry(last - i, last - j));
            }
        }
        out
    }

    /// Diagonal of the lower Cholesky factor `G = L·Lᴴ`. On failure returns
    /// the pivot index and its (non-positive or non-finite) value.
    pub fn cholesky_diagonal(mut self) -> Result<Vec<f64>, (usize, f64)> {
        let (n, w) = (self.n, self.w);
        let stride = w + 1;
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            for j in lo..=i {
                let jlo = j.saturating_sub(w);
                let k0 = lo.max(jlo);
                // Row i holds columns [i - w, i], row j holds [j - w, j].
                let (head, tail) = self.data.split_at_mut(i * stride);
                let row_i = &mut tail[..stride];
                let s = if j == i {
                    let seg = &row_i[(k0 + w - i)..(j + w - i)];
                    row_i[w] - dot_conj(seg, seg)
                } else {
                    let row_j = &head[j * stride..(j + 1) * stride];
                    let a = &row_i[(k0 + w - i)..(j + w - i)];
                    let b = &row_j[(k0 + w - j)..w];
                    row_i[j + w - i] - dot_conj(a, b)
                };
                if j == i {
                    if !(s.re > 0.0) || !s.re.is_finite() {
                        return Err((i, s.re));
                    }
                    let d = s.re.sqrt();
                    row_i[w] = Complex64::new(d, 0.0);
                    diag.push(d);
                } else {
                    let djj = head[j * stride + w].re;
                    row_i[j + w - i] = s / djj;
                }
            }
        }
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dense_cholesky_reconstructs() {
        let a = CMatrix::from_row_major(
            2,
            2,
            vec![c(4.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(3.0, 0.0)],
        );
        let l = a.cholesky().unwrap();
        let back = &l * &l.adjoint();
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
        // det = 12 - 2 = 10
        assert!((a.log2_det_hpd().unwrap() - 10f64.log2()).abs() < 1e-12);
        let x = a.solve_hpd(&[c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let ax = a.mul_vec(&x);
        assert!((ax[0] - c(1.0, 0.0)).norm() < 1e-12 && (ax[1] - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn dense_cholesky_rejects_indefinite() {
        let a = CMatrix::from_row_major(
            2,
            2,
            vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)],
        );
        assert_eq!(a.cholesky(), Err(1));
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let w = 3;
        let mut dense = CMatrix::identity(n).scaled(c(5.0, 0.0));
        for i in 0..n {
            for j in i.saturating_sub(w)..i {
                let v = c(
                    0.3 * ((i + 2 * j) % 5) as f64 - 0.5,
                    0.2 * ((i * j) % 3) as f64,
                );
                dense[(i, j)] = v;
                dense[(j, i)] = v.conj();
            }
        }
        let mut band = BandedHermitian::zeros(n, w);
        for i in 0..n {
            for j in i.saturating_sub(w)..=i {
                band.set(i, j, dense[(i, j)]);
            }
        }
        let l = dense.cholesky().unwrap();
        let d = band.clone().cholesky_diagonal().unwrap();
        for i in 0..n {
            assert!((l[(i, i)].re - d[i]).abs() < 1e-12);
        }
        let r = band.reversed();
        assert_eq!(r.entry(0, 1), dense[(n - 1, n - 2)]);
        assert_eq!(r.entry(2, 0), dense[(n - 3, n - 1)]);
    }

    #[test]
    fn dot_conj_remainder_lanes() {
        let a: Vec<_> = (0..7).map(|k| c(k as f64, 1.0)).collect();
        let b: Vec<_> = (0..7).map(|k| c(1.0, k as f64)).collect();
        let direct: Complex64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        assert!((dot_conj(&a, &b) - direct).norm() < 1e-12);
    }
}
