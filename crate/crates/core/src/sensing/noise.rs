use std::io::{Read, Write};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cvec::norm_sqr;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

const NOISE_STREAM: u64 = 0x6e6f_6973;

/// A noisy receive record `y = A x + w`, receiver-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub y: Vec<Complex64>,
    /// Noise standard deviation per complex entry (`E|w_i|^2 = sigma^2`).
    pub sigma: f64,
    pub seed: u64,
}

/// `sigma` such that `||y_clean||^2 / (len * sigma^2) = 10^(snr_db / 10)`.
/// `len` is `N_R N_s`, the length of the record.
pub fn noise_sigma_for_snr(y_clean: &[Complex64], snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() {
        return Err(Error::InvalidParameter("SNR is NaN".into()));
    }
    if y_clean.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "measurement has non-finite entries".into(),
        ));
    }
    if y_clean.is_empty() {
        return Err(Error::Empty("measurement"));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let energy = norm_sqr(y_clean);
    if energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let snr = 10f64.powf(snr_db / 10.0);
    Ok((energy / (y_clean.len() as f64 * snr)).sqrt())
}

/// Adds circular complex Gaussian noise at the requested output SNR.
pub fn add_noise(y_clean: &[Complex64], snr_db: f64, seed: u64) -> Result<Measurement> {
    let sigma = noise_sigma_for_snr(y_clean, snr_db)?;
    add_noise_with_sigma(y_clean, sigma, seed)
}

/// Adds `CN(0, sigma^2)` noise to every entry.
pub fn add_noise_with_sigma(y_clean: &[Complex64], sigma: f64, seed: u64) -> Result<Measurement> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    let mut y = y_clean.to_vec();
    if sigma > 0.0 {
        let mut rng = stream_rng(seed, NOISE_STREAM);
        let s = sigma / 2f64.sqrt();
        for v in &mut y {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(s * re, s * im);
        }
    }
    Ok(Measurement { y, sigma, seed })
}

#[derive(Serialize, Deserialize)]
struct Row {
    index: usize,
    real: f64,
    imag: f64,
}

/// Writes `index,real,imag` rows.
pub fn write_measurement_csv<W: Write>(y: &[Complex64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (index, v) in y.iter().enumerate() {
        w.serialize(Row {
            index,
            real: v.re,
            imag: v.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurement_csv<R: Read>(reader: R) -> Result<Vec<Complex64>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        if row.index != i {
            return Err(Error::Format(format!(
                "expected index {i}, found {}",
                row.index
            )));
        }
        out.push(Complex64::new(row.real, row.imag));
    }
    Ok(out)
}
