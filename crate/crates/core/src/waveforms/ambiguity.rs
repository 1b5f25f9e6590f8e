//! Discrete time-frequency correlation on `Z_n`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::cvec::root_of_unity;
use crate::error::{Error, Result};

/// `<M_f T_l u, v>` with circular delay and integer Doppler.
pub fn timefreq_correlation(u: &[Complex64], v: &[Complex64], f: i64, l: i64) -> Result<Complex64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let n = u.len() as i64;
    if n == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok((0..n)
        .map(|m| {
            let shifted = u[(m - l).rem_euclid(n) as usize];
            shifted * root_of_unity(f * m, n as usize) * v[m as usize].conj()
        })
        .sum())
}

/// All `n^2` values of `<M_f T_l u, v>`, stored delay-major.
#[derive(Debug, Clone)]
pub struct AmbiguitySurface {
    n: usize,
    values: Vec<Complex64>,
}

impl AmbiguitySurface {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Value at Doppler `f`, delay `l` (both taken mod n).
    pub fn get(&self, f: i64, l: i64) -> Complex64 {
        let n = self.n as i64;
        self.values[(l.rem_euclid(n) * n + f.rem_euclid(n)) as usize]
    }

    /// `(f, l, |value|)` for every grid point.
    pub fn magnitudes(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % n, i / n, v.norm()))
    }
}

/// Reusable FFT plan for surfaces of one length.
#[derive(Clone)]
pub struct AmbiguityPlanner {
    n: usize,
    inverse: Arc<dyn Fft<f64>>,
}

impl AmbiguityPlanner {
    pub fn new(n: usize) -> Self {
        let inverse = FftPlanner::new().plan_fft_inverse(n.max(1));
        Self { n, inverse }
    }

    /// For each delay the Doppler axis is one unnormalised inverse DFT of
    /// `u(m - l) conj(v(m))`.
    pub fn surface(&self, u: &[Complex64], v: &[Complex64]) -> Result<AmbiguitySurface> {
        let n = self.n;
        for len in [u.len(), v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for (l, row) in values.chunks_mut(n.max(1)).enumerate() {
            for (m, slot) in row.iter_mut().enumerate() {
                *slot = u[(m + n - l) % n] * v[m].conj();
            }
            self.inverse.process(row);
        }
        Ok(AmbiguitySurface { n, values })
    }
}

/// Convenience wrapper planning a fresh FFT.
pub fn ambiguity_surface(u: &[Complex64], v: &[Complex64]) -> Result<AmbiguitySurface> {
    AmbiguityPlanner::new(u.len()).surface(u, v)
}
