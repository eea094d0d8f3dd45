//! V-BLAST benchmark: one independently coded stream per transmit antenna,
//! MMSE nulling with successive interference cancellation.

use itertools::Itertools;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;

/// Largest `N_t` searched exhaustively by [`vblast_best_order`].
pub const MAX_EXHAUSTIVE_STREAMS: usize = 8;

/// Stream capacities for one decoding order.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderingReport {
    stream_capacities: Vec<f64>,
    order: Vec<usize>,
    throughput: f64,
}

impl OrderingReport {
    /// `log2(1 + SINR_k)` of the `k`-th decoded stream.
    pub fn stream_capacities(&self) -> &[f64] {
        &self.stream_capacities
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `N_t · min_k C_k`, the common-rate throughput.
    pub fn throughput(&self) -> f64 {
        self.throughput
    }

    /// `Σ_k C_k`; equals `log2 det(I + snr·HᴴH)` for every order.
    pub fn sum_rate(&self) -> f64 {
        self.stream_capacities.iter().sum()
    }
}

/// MMSE-SIC stream capacities decoding the streams in `order`.
pub fn vblast_stream_capacities(
    h: &CMatrix,
    snr_per_stream: f64,
    order: &[usize],
) -> Result<OrderingReport> {
    let (nr, nt) = (h.rows(), h.cols());
    if nr == 0 || nt == 0 {
        return Err(Error::DimensionMismatch("channel matrix is empty".into()));
    }
    if order.len() != nt || !order.iter().all(|&j| j < nt) || order.iter().unique().count() != nt {
        return Err(Error::DimensionMismatch(format!(
            "order {order:?} is not a permutation of 0..{nt}"
        )));
    }
    if !(snr_per_stream > 0.0) || !snr_per_stream.is_finite() {
        return Err(invalid(
            "snr",
            format!("must be positive, got {snr_per_stream}"),
        ));
    }
    let columns: Vec<Vec<Complex64>> = (0..nt).map(|j| h.column(j)).collect();
    let rho = Complex64::new(snr_per_stream, 0.0);
    let stream_capacities = order
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let mut cov = CMatrix::identity(nr);
            for &u in &order[k + 1..] {
                let col = &columns[u];
                cov.add_assign(&CMatrix::from_fn(nr, nr, |a, b| {
                    col[a] * col[b].conj() * rho
                }));
            }
            let hj = &columns[j];
            let x = cov.solve_hpd(hj).map_err(|i| Error::NotPositiveDefinite {
                index: i,
                pivot: f64::NAN,
            })?;
            let quad: Complex64 = hj.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            Ok((1.0 + snr_per_stream * quad.re.max(0.0)).log2())
        })
        .collect::<Result<Vec<f64>>>()?;
    let min = stream_capacities
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(OrderingReport {
        stream_capacities,
        order: order.to_vec(),
        throughput: nt as f64 * min,
    })
}

/// Order maximizing the minimum stream capacity; ties go to the
/// lexicographically smallest permutation.
pub fn vblast_best_order(h: &CMatrix, snr_per_stream: f64) -> Result<OrderingReport> {
    let nt = h.cols();
    if nt > MAX_EXHAUSTIVE_STREAMS {
        return Err(invalid(
            "Nt",
            format!(
                "exhaustive ordering supports at most {MAX_EXHAUSTIVE_STREAMS} streams, got {nt}"
            ),
        ));
    }
    let mut best: Option<OrderingReport> = None;
    for order in (0..nt).permutations(nt) {
        let report = vblast_stream_capacities(h, snr_per_stream, &order)?;
        if best
            .as_ref()
            .is_none_or(|b| report.throughput > b.throughput)
        {
            best = Some(report);
        }
    }
    best.ok_or_else(|| Error::DimensionMismatch("channel matrix is empty".into()))
}

/// Identity decoding order `0, 1, …, N_t − 1`.
pub fn vblast_fixed_order(h: &CMatrix, snr_per_stream: f64) -> Result<OrderingReport> {
    let order: Vec<usize> = (0..h.cols()).collect();
    vblast_stream_capacities(h, snr_per_stream, &order)
}
