use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|V(tau, f)| = |<y, M_f T_tau s>|` over the full `N_s x N_s` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFilterMap {
    pub n: usize,
    /// Delay-major: entry `tau * n + f`.
    pub values: Vec<f64>,
    pub peak: f64,
    /// `(tau, f)` of the first global maximum.
    pub argmax: (usize, usize),
}

impl MatchedFilterMap {
    pub fn get(&self, tau: usize, f: usize) -> f64 {
        self.values[tau * self.n + f]
    }

    /// Grid points within `tol` of the global peak.
    pub fn peaks_within(&self, tol: f64) -> Vec<(usize, usize)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v >= self.peak - tol)
            .map(|(i, _)| (i / self.n, i % self.n))
            .collect()
    }
}

/// Correlates a single-receiver record against every delay-Doppler shift of
/// `s`: for each delay, one FFT of `y(l) conj(s(l - tau))`.
pub fn matched_filter_map(s: &[Complex64], y: &[Complex64]) -> Result<MatchedFilterMap> {
    let n = s.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("waveform"));
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut values = Vec::with_capacity(n * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for tau in 0..n {
        for (l, b) in buf.iter_mut().enumerate() {
            *b = y[l] * s[(l + n - tau) % n].conj();
        }
        fft.process(&mut buf);
        values.extend(buf.iter().map(|v| v.norm()));
    }
    let (idx, peak) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
    Ok(MatchedFilterMap {
        n,
        values,
        peak,
        argmax: (idx / n, idx % n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::{inner, modulate, translate};
    use crate::waveforms::{alltop_waveforms, kerdock_family, kerdock_waveforms};

    #[test]
    fn matches_direct_correlation() {
        let s = alltop_waveforms(7, 1).unwrap().column(0).to_vec();
        let y: Vec<Complex64> = (0..7)
            .map(|l| Complex64::new(l as f64, 1.0 - l as f64))
            .collect();
        let map = matched_filter_map(&s, &y).unwrap();
        for tau in 0..7 {
            for f in 0..7 {
                let direct = inner(&y, &modulate(&translate(&s, tau), f)).norm();
                assert!((map.get(tau as usize, f as usize) - direct).abs() < 1e-12);
            }
        }
        assert!(matched_filter_map(&s, &y[..3]).is_err());
    }

    #[test]
    fn alltop_single_peak() {
        let s = alltop_waveforms(11, 1).unwrap().column(0).to_vec();
        let y = modulate(&translate(&s, 4), 7);
        let map = matched_filter_map(&s, &y).unwrap();
        assert_eq!(map.argmax, (4, 7));
        assert!((map.peak - 1.0).abs() < 1e-12);
        assert_eq!(map.peaks_within(1e-9), vec![(4, 7)]);
    }

    #[test]
    fn kerdock_ambiguous_peak() {
        let fam = kerdock_family(11).unwrap();
        let s = kerdock_waveforms(&fam, 2, 0).unwrap().column(1).to_vec();
        let y = modulate(&translate(&s, 3), 5);
        let map = matched_filter_map(&s, &y).unwrap();
        assert!((map.peak - 1.0).abs() < 1e-12);
        let peaks = map.peaks_within(1e-9);
        assert!(peaks.len() >= 2);
        assert!(peaks.contains(&(3, 5)));
    }
}
