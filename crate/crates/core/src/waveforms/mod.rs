//! Transmit waveform families and their correlation diagnostics.
//!
//! A [`WaveformSet`] holds one unit-norm column per transmit antenna. Sets
//! come from the Kerdock construction ([`kerdock_waveforms`]), from the
//! cubic-chirp family ([`alltop_waveforms`]) or from an external CSV file.

mod ambiguity;
mod io;
mod kerdock;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cvec::root_of_unity;
use crate::error::{Error, Result};

pub use ambiguity::{ambiguity_surface, timefreq_correlation, AmbiguityPlanner, AmbiguitySurface};
pub use io::{read_waveforms_csv, write_waveforms_csv};
pub use kerdock::{
    kerdock_family, kerdock_waveforms, verify_kerdock_properties, KerdockFamily, KerdockReport,
    PropertyCheck,
};

/// Tolerance for the exact algebraic identities of the waveform families.
pub const ALGEBRAIC_TOL: f64 = 1e-10;

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Kerdock,
    Alltop,
    External,
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyTag::Kerdock => "kerdock",
            FamilyTag::Alltop => "alltop",
            FamilyTag::External => "external",
        })
    }
}

impl FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kerdock" => Ok(FamilyTag::Kerdock),
            "alltop" => Ok(FamilyTag::Alltop),
            "external" => Ok(FamilyTag::External),
            other => Err(Error::InvalidParameter(format!(
                "unknown waveform family `{other}`"
            ))),
        }
    }
}

/// `p x n_tx` matrix of unit-norm transmit waveforms.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    columns: DMatrix<Complex64>,
    family_tag: FamilyTag,
    gamma: Option<f64>,
}

impl WaveformSet {
    /// Wrap a matrix of waveforms. Every column must have unit l2 norm.
    pub fn new(columns: DMatrix<Complex64>, family_tag: FamilyTag) -> Result<Self> {
        if columns.nrows() == 0 || columns.ncols() == 0 {
            return Err(Error::Empty("waveform set"));
        }
        for (j, col) in columns.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > ALGEBRAIC_TOL {
                return Err(Error::InvalidParameter(format!(
                    "waveform {j} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self {
            columns,
            family_tag,
            gamma: None,
        })
    }

    /// Sequence length `p` (also the number of samples `N_s`).
    pub fn len(&self) -> usize {
        self.columns.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn n_tx(&self) -> usize {
        self.columns.ncols()
    }

    pub fn family_tag(&self) -> FamilyTag {
        self.family_tag
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    /// Waveform `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[Complex64] {
        let p = self.len();
        &self.columns.as_slice()[j * p..(j + 1) * p]
    }

    /// Peak-to-average power ratio `||s||_inf / ||s||_2` of each waveform.
    pub fn papr(&self) -> Vec<f64> {
        (0..self.n_tx())
            .map(|j| crate::cvec::max_abs(self.column(j)) / crate::cvec::norm(self.column(j)))
            .collect()
    }
}

/// Cubic-phase sequences `s_k(l) = p^{-1/2} exp(2 pi i (k + 1) l^3 / p)`,
/// `k = 0..n_tx`.
///
/// Each sequence has auto-ambiguity at most `1/sqrt(p)` off the origin. Distinct
/// cubic coefficients keep the members from being time-frequency shifts of each
/// other; their cross-ambiguity is a cubic character sum, bounded by
/// `2/sqrt(p)`.
pub fn alltop_waveforms(p: usize, n_tx: usize) -> Result<WaveformSet> {
    if !is_prime(p) || p < 5 {
        return Err(Error::InvalidParameter(format!(
            "alltop sequences need a prime p >= 5, got {p}"
        )));
    }
    if n_tx == 0 || n_tx >= p {
        return Err(Error::InvalidParameter(format!(
            "alltop set supports 1..={} waveforms, got {n_tx}",
            p - 1
        )));
    }
    let scale = 1.0 / (p as f64).sqrt();
    let pp = p as i64;
    let columns = DMatrix::from_fn(p, n_tx, |l, k| {
        let l = l as i64;
        let cube = (l * l % pp) * l % pp;
        root_of_unity((k as i64 + 1) * cube, p) * scale
    });
    WaveformSet::new(columns, FamilyTag::Alltop)
}

/// Outcome of the incoherence check on a waveform set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub gamma: f64,
    /// `gamma / sqrt(p)`.
    pub threshold: f64,
    /// Largest `|<s_j, M_f T_tau s_j>|` over `(f, tau) != (0, 0)`.
    pub max_auto: f64,
    pub max_auto_at: Option<(usize, usize, usize)>,
    /// Largest `|<s_k, M_f T_tau s_j>|` over `k != j` and all shifts.
    pub max_cross: f64,
    pub max_cross_at: Option<(usize, usize, usize, usize)>,
    /// Smallest gamma that would pass.
    pub empirical_gamma: f64,
    pub passed: bool,
}

/// Check both incoherence conditions for every shift on `Z_p x Z_p`.
pub fn verify_incoherence(set: &WaveformSet, gamma: f64) -> IncoherenceReport {
    let p = set.len();
    let planner = AmbiguityPlanner::new(p);
    let mut max_auto = 0.0;
    let mut max_auto_at = None;
    let mut max_cross = 0.0;
    let mut max_cross_at = None;
    for j in 0..set.n_tx() {
        for k in 0..set.n_tx() {
            // |<s_k, M_f T s_j>| = |<M_f T s_j, s_k>|
            let surface = planner
                .surface(set.column(j), set.column(k))
                .expect("columns share one length");
            for (f, l, mag) in surface.magnitudes() {
                if j == k {
                    if (f, l) != (0, 0) && mag > max_auto {
                        max_auto = mag;
                        max_auto_at = Some((j, f, l));
                    }
                } else if mag > max_cross {
                    max_cross = mag;
                    max_cross_at = Some((k, j, f, l));
                }
            }
        }
    }
    let sqrt_p = (p as f64).sqrt();
    let threshold = gamma / sqrt_p;
    let worst = f64::max(max_auto, max_cross);
    IncoherenceReport {
        gamma,
        threshold,
        max_auto,
        max_auto_at,
        max_cross,
        max_cross_at,
        empirical_gamma: worst * sqrt_p,
        passed: worst <= threshold + ALGEBRAIC_TOL,
    }
}
