use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cvec::{modulate, translate};
use crate::error::{Error, Result};
use crate::scene_grid::steering_vectors;

use super::SensingOperator;

/// Default limit on the number of entries of a dense operator matrix.
pub const DEFAULT_DENSE_CAP: usize = 1 << 27;

/// Explicit `(N_R N_s) x (N_tau N_f N_beta)` matrix of the operator.
pub fn dense_matrix(op: &SensingOperator) -> Result<DMatrix<Complex64>> {
    dense_matrix_with_cap(op, DEFAULT_DENSE_CAP)
}

/// Builds every column straight from its definition
/// `a_R(beta) kron (M_f T_tau S a_T(beta))`, without the FFT path.
pub fn dense_matrix_with_cap(op: &SensingOperator, cap: usize) -> Result<DMatrix<Complex64>> {
    let grid = op.grid();
    let n_s = op.n_samples();
    let rows = op.n_rx() * n_s;
    let cols = grid.n_cells();
    let entries = rows.saturating_mul(cols);
    if entries > cap {
        return Err(Error::MemoryCap { entries, cap });
    }
    let waveforms = op.waveforms();
    let mut a = DMatrix::<Complex64>::zeros(rows, cols);
    for b in 0..grid.n_azimuth {
        let (a_t, a_r) = steering_vectors(op.geometry(), grid.azimuth_value(b));
        let composite: Vec<Complex64> = (0..n_s)
            .map(|l| {
                (0..a_t.len())
                    .map(|k| waveforms.matrix()[(l, k)] * a_t[k])
                    .sum()
            })
            .collect();
        for f in 0..grid.n_doppler {
            for tau in 0..grid.n_delay {
                let col = modulate(&translate(&composite, tau as i64), f as i64);
                let idx = grid.index(crate::scene_grid::Cell {
                    delay: tau,
                    doppler: f,
                    azimuth: b,
                });
                let mut dst = a.column_mut(idx);
                for (j, w) in a_r.iter().enumerate() {
                    for (l, v) in col.iter().enumerate() {
                        dst[j * n_s + l] = w * v;
                    }
                }
            }
        }
    }
    Ok(a)
}
