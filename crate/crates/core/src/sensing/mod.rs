//! The azimuth-delay-Doppler measurement operator.
//!
//! Column `(tau, f, beta)` of `A` is `a_R(beta) kron (M_f T_tau S a_T(beta))`.
//! Domain vectors are laid out delay-fastest, then Doppler, then azimuth; range
//! vectors are receiver-major (block `j` holds the `N_s` samples of receiver `j`).
//!
//! [`SensingOperator`] applies `A` and `A^*` without forming the matrix: for a
//! fixed azimuth the delay sum is a circular convolution with the composite
//! signal `c_beta = S a_T(beta)`, and a Doppler shift is a cyclic shift of
//! its spectrum, so every azimuth costs `N_f + 1` FFTs of length `N_s`.

mod config;
mod dense;
mod diagnostics;
mod noise;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scene_grid::{steering_vectors, ArrayGeometry, Grid};
use crate::waveforms::WaveformSet;

pub use config::{OperatorConfig, WaveformSpec};
pub use dense::{dense_matrix, dense_matrix_with_cap, DEFAULT_DENSE_CAP};
pub use diagnostics::{
    coherence_dense, coherence_matrix_free, column_norms, operator_norm, operator_norm_dense,
    CoherenceReport, ColumnNorms, OperatorNormEstimate,
};
pub use noise::{
    add_noise, add_noise_with_sigma, noise_sigma_for_snr, read_measurement_csv,
    write_measurement_csv, Measurement,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A linear map between complex vector spaces.
pub trait LinearOperator: Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>>;

    /// Column `index`, by default `A e_index`.
    fn column(&self, index: usize) -> Result<Vec<Complex64>> {
        let mut e = vec![ZERO; self.domain_dim()];
        if index >= e.len() {
            return Err(Error::InvalidParameter(format!(
                "column {index} out of range"
            )));
        }
        e[index] = Complex64::new(1.0, 0.0);
        self.apply(&e)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Matrix-free sensing operator.
#[derive(Clone)]
pub struct SensingOperator {
    waveforms: WaveformSet,
    geometry: ArrayGeometry,
    grid: Grid,
    /// `S a_T(beta)` per azimuth.
    composite: Vec<Vec<Complex64>>,
    /// DFT of each composite signal.
    composite_hat: Vec<Vec<Complex64>>,
    /// `a_R(beta)` per azimuth.
    rx_manifold: Vec<Vec<Complex64>>,
    forward_fft: Arc<dyn Fft<f64>>,
    inverse_fft: Arc<dyn Fft<f64>>,
    parallel: bool,
}

impl std::fmt::Debug for SensingOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SensingOperator")
            .field("n_samples", &self.n_samples())
            .field("n_tx", &self.n_tx())
            .field("n_rx", &self.n_rx())
            .field("grid", &self.grid)
            .field("parallel", &self.parallel)
            .finish()
    }
}

impl SensingOperator {
    pub fn new(waveforms: WaveformSet, geometry: ArrayGeometry, grid: Grid) -> Result<Self> {
        let n_s = waveforms.len();
        if grid.n_delay != n_s {
            return Err(Error::InvalidParameter(format!(
                "delay grid must match the waveform length: N_tau = {} but N_s = {n_s}",
                grid.n_delay
            )));
        }
        if grid.n_doppler > n_s {
            return Err(Error::InvalidParameter(format!(
                "N_f = {} exceeds N_s = {n_s}",
                grid.n_doppler
            )));
        }
        if geometry.n_tx() != waveforms.n_tx() {
            return Err(Error::InvalidParameter(format!(
                "geometry has {} transmitters but the waveform set has {}",
                geometry.n_tx(),
                waveforms.n_tx()
            )));
        }
        let mut planner = FftPlanner::new();
        let forward_fft = planner.plan_fft_forward(n_s);
        let inverse_fft = planner.plan_fft_inverse(n_s);

        let mut composite = Vec::with_capacity(grid.n_azimuth);
        let mut composite_hat = Vec::with_capacity(grid.n_azimuth);
        let mut rx_manifold = Vec::with_capacity(grid.n_azimuth);
        for b in 0..grid.n_azimuth {
            let (a_t, a_r) = steering_vectors(&geometry, grid.azimuth_value(b));
            let mut c = vec![ZERO; n_s];
            for (k, w) in a_t.iter().enumerate() {
                for (ci, s) in c.iter_mut().zip(waveforms.column(k)) {
                    *ci += s * w;
                }
            }
            let mut c_hat = c.clone();
            forward_fft.process(&mut c_hat);
            composite.push(c);
            composite_hat.push(c_hat);
            rx_manifold.push(a_r);
        }
        Ok(Self {
            waveforms,
            geometry,
            grid,
            composite,
            composite_hat,
            rx_manifold,
            forward_fft,
            inverse_fft,
            parallel: true,
        })
    }

    /// Toggle rayon parallelism over azimuth blocks. Results are bitwise
    /// identical either way since the receiver sum runs in azimuth order.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn waveforms(&self) -> &WaveformSet {
        &self.waveforms
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_samples(&self) -> usize {
        self.waveforms.len()
    }

    pub fn n_tx(&self) -> usize {
        self.geometry.n_tx()
    }

    pub fn n_rx(&self) -> usize {
        self.geometry.n_rx()
    }

    /// Composite transmit signal `S a_T(beta)` of azimuth block `b`.
    pub fn composite(&self, b: usize) -> &[Complex64] {
        &self.composite[b]
    }

    pub fn rx_manifold(&self, b: usize) -> &[Complex64] {
        &self.rx_manifold[b]
    }

    /// `z_beta = sum_f M_f (c_beta * x_{beta,f})` for one azimuth block.
    fn forward_block(&self, b: usize, x_block: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.n_samples();
        let c_hat = &self.composite_hat[b];
        let mut acc = vec![ZERO; n];
        let mut buf = vec![ZERO; n];
        let mut scratch = vec![ZERO; self.forward_fft.get_inplace_scratch_len()];
        let mut any = false;
        for (f, xf) in x_block.chunks_exact(n).enumerate() {
            if xf.iter().all(|v| *v == ZERO) {
                continue;
            }
            any = true;
            buf.copy_from_slice(xf);
            self.forward_fft
                .process_with_scratch(&mut buf, &mut scratch);
            for k in 0..n {
                acc[(k + f) % n] += c_hat[k] * buf[k];
            }
        }
        if !any {
            return None;
        }
        let mut scratch = vec![ZERO; self.inverse_fft.get_inplace_scratch_len()];
        self.inverse_fft
            .process_with_scratch(&mut acc, &mut scratch);
        let inv_n = 1.0 / n as f64;
        acc.iter_mut().for_each(|v| *v *= inv_n);
        Some(acc)
    }

    /// `x_{beta,f} = B_beta (M_{-f} Y_beta)` for all Doppler bins of one block.
    fn adjoint_block(&self, b: usize, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_samples();
        let a_r = &self.rx_manifold[b];
        let mut combined = vec![ZERO; n];
        for (yj, w) in y.chunks_exact(n).zip(a_r) {
            let wc = w.conj();
            for (acc, v) in combined.iter_mut().zip(yj) {
                *acc += wc * v;
            }
        }
        let mut scratch = vec![ZERO; self.forward_fft.get_inplace_scratch_len()];
        self.forward_fft
            .process_with_scratch(&mut combined, &mut scratch);
        let c_hat = &self.composite_hat[b];
        let mut scratch = vec![ZERO; self.inverse_fft.get_inplace_scratch_len()];
        let inv_n = 1.0 / n as f64;
        for (f, xf) in out.chunks_exact_mut(n).enumerate() {
            for k in 0..n {
                xf[k] = combined[(k + f) % n] * c_hat[k].conj();
            }
            self.inverse_fft.process_with_scratch(xf, &mut scratch);
            xf.iter_mut().for_each(|v| *v *= inv_n);
        }
    }

    pub fn apply_forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.domain_dim(), x.len())?;
        let block = self.n_samples() * self.grid.n_doppler;
        let blocks: Vec<Option<Vec<Complex64>>> = if self.parallel {
            x.par_chunks_exact(block)
                .enumerate()
                .map(|(b, xb)| self.forward_block(b, xb))
                .collect()
        } else {
            x.chunks_exact(block)
                .enumerate()
                .map(|(b, xb)| self.forward_block(b, xb))
                .collect()
        };
        let n = self.n_samples();
        let mut y = vec![ZERO; self.range_dim()];
        for (b, z) in blocks.iter().enumerate() {
            let Some(z) = z else { continue };
            for (yj, w) in y.chunks_exact_mut(n).zip(&self.rx_manifold[b]) {
                for (acc, v) in yj.iter_mut().zip(z) {
                    *acc += w * v;
                }
            }
        }
        Ok(y)
    }

    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.range_dim(), y.len())?;
        let block = self.n_samples() * self.grid.n_doppler;
        let mut x = vec![ZERO; self.domain_dim()];
        if self.parallel {
            x.par_chunks_exact_mut(block)
                .enumerate()
                .for_each(|(b, xb)| self.adjoint_block(b, y, xb));
        } else {
            x.chunks_exact_mut(block)
                .enumerate()
                .for_each(|(b, xb)| self.adjoint_block(b, y, xb));
        }
        Ok(x)
    }
}

impl LinearOperator for SensingOperator {
    fn domain_dim(&self) -> usize {
        self.grid.n_cells()
    }

    fn range_dim(&self) -> usize {
        self.n_rx() * self.n_samples()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_forward(x)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        SensingOperator::apply_adjoint(self, y)
    }

    fn column(&self, index: usize) -> Result<Vec<Complex64>> {
        if index >= self.domain_dim() {
            return Err(Error::InvalidParameter(format!(
                "column {index} out of range"
            )));
        }
        let cell = self.grid.cell(index);
        let n = self.n_samples() as i64;
        let c = &self.composite[cell.azimuth];
        let shifted: Vec<Complex64> = (0..n)
            .map(|l| {
                c[(l - cell.delay as i64).rem_euclid(n) as usize]
                    * crate::cvec::root_of_unity(cell.doppler as i64 * l, n as usize)
            })
            .collect();
        Ok(self.rx_manifold[cell.azimuth]
            .iter()
            .flat_map(|w| shifted.iter().map(move |s| w * s))
            .collect())
    }
}

/// `A D^{-1}`: the operator with each column divided by a positive weight.
pub struct ColumnScaled<'a, Op: LinearOperator> {
    inner: &'a Op,
    inv_weights: Vec<f64>,
}

impl<'a, Op: LinearOperator> ColumnScaled<'a, Op> {
    pub fn new(inner: &'a Op, weights: &[f64]) -> Result<Self> {
        check_len(inner.domain_dim(), weights.len())?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter(
                "column weights must be positive".into(),
            ));
        }
        Ok(Self {
            inner,
            inv_weights: weights.iter().map(|w| 1.0 / w).collect(),
        })
    }

    pub fn inv_weights(&self) -> &[f64] {
        &self.inv_weights
    }
}

impl<Op: LinearOperator> LinearOperator for ColumnScaled<'_, Op> {
    fn domain_dim(&self) -> usize {
        self.inner.domain_dim()
    }

    fn range_dim(&self) -> usize {
        self.inner.range_dim()
    }

    fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.domain_dim(), x.len())?;
        let scaled: Vec<Complex64> = x
            .iter()
            .zip(&self.inv_weights)
            .map(|(v, w)| v * w)
            .collect();
        self.inner.apply(&scaled)
    }

    fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = self.inner.apply_adjoint(y)?;
        x.iter_mut()
            .zip(&self.inv_weights)
            .for_each(|(v, w)| *v *= w);
        Ok(x)
    }

    fn column(&self, index: usize) -> Result<Vec<Complex64>> {
        let mut c = self.inner.column(index)?;
        let w = self.inv_weights[index];
        c.iter_mut().for_each(|v| *v *= w);
        Ok(c)
    }
}
