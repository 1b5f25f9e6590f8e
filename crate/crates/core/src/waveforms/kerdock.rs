//! Kerdock codes over `Z_p` as eigenbases of time-frequency shifts.
//!
//! For `k = 0..p-1` the basis `U_(k)` diagonalises `T_1 M_k` (translate by
//! one after modulating by `k`). Writing `a = k/2 mod p`, the chirps
//! `x(l) = w^{a l^2 + b l}` with `w = exp(2 pi i / p)` satisfy
//! `T_1 M_k x = w^{a - b - k} x`, so every `b in Z_p` gives an eigenvector and
//! the `p` eigenvalues are exactly the `p`-th roots of unity. `U_(p)` is the
//! identity.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{is_prime, AmbiguityPlanner, FamilyTag, WaveformSet, ALGEBRAIC_TOL};
use crate::cvec::{inner, modulate, root_of_unity, translate};
use crate::error::{Error, Result};

pub const MIN_KERDOCK_P: usize = 3;
pub const MAX_KERDOCK_P: usize = 257;

/// The `p + 1` mutually unbiased bases of a `Z_p` Kerdock code.
#[derive(Debug, Clone, PartialEq)]
pub struct KerdockFamily {
    p: usize,
    bases: Vec<DMatrix<Complex64>>,
}

impl KerdockFamily {
    /// Wrap arbitrary bases without checking them. Used to feed perturbed
    /// families to [`verify_kerdock_properties`].
    pub fn from_bases(p: usize, bases: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if bases.len() != p + 1 {
            return Err(Error::DimensionMismatch {
                expected: p + 1,
                got: bases.len(),
            });
        }
        for b in &bases {
            if b.nrows() != p || b.ncols() != p {
                return Err(Error::InvalidParameter(format!(
                    "basis is {}x{}, expected {p}x{p}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(Self { p, bases })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `U_(k)` for `k = 0..=p`.
    pub fn basis(&self, k: usize) -> &DMatrix<Complex64> {
        &self.bases[k]
    }

    pub fn bases(&self) -> &[DMatrix<Complex64>] {
        &self.bases
    }

    /// Column `u_{k,j}`.
    pub fn vector(&self, k: usize, j: usize) -> &[Complex64] {
        let p = self.p;
        &self.bases[k].as_slice()[j * p..(j + 1) * p]
    }

    pub fn into_bases(self) -> Vec<DMatrix<Complex64>> {
        self.bases
    }
}

/// Build the Kerdock family for an odd prime `3 <= p <= 257`.
///
/// Columns of `U_(k)` are ordered by eigenvalue phase ascending in `[0, 2 pi)`
/// and have a real positive first entry.
pub fn kerdock_family(p: usize) -> Result<KerdockFamily> {
    if p.is_multiple_of(2) || !is_prime(p) {
        return Err(Error::NotOddPrime(p));
    }
    if !(MIN_KERDOCK_P..=MAX_KERDOCK_P).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in {MIN_KERDOCK_P}..={MAX_KERDOCK_P}, got {p}"
        )));
    }
    let pi = p as i64;
    let half = (pi + 1) / 2; // inverse of 2 mod p
    let scale = 1.0 / (p as f64).sqrt();
    let mut bases = Vec::with_capacity(p + 1);
    for k in 0..pi {
        let a = (k * half) % pi;
        // eigenvalue w^r with r = a - b - k, so column r uses b = a - k - r
        let basis = DMatrix::from_fn(p, p, |l, r| {
            let l = l as i64;
            let b = (a - k - r as i64).rem_euclid(pi);
            let phase = (a * (l * l % pi) + b * l) % pi;
            root_of_unity(phase, p) * scale
        });
        check_eigenbasis(&basis, k as usize)?;
        bases.push(basis);
    }
    bases.push(DMatrix::identity(p, p));
    Ok(KerdockFamily { p, bases })
}

/// Confirm the columns are eigenvectors of `T_1 M_k` with distinct,
/// phase-ascending eigenvalues.
fn check_eigenbasis(basis: &DMatrix<Complex64>, k: usize) -> Result<()> {
    let p = basis.nrows();
    let step = TAU / p as f64;
    let mut phases = Vec::with_capacity(p);
    for j in 0..p {
        let u = &basis.as_slice()[j * p..(j + 1) * p];
        let image = translate(&modulate(u, k as i64), 1);
        let lambda = inner(&image, u);
        let residual = image
            .iter()
            .zip(u)
            .map(|(a, b)| (a - lambda * b).norm())
            .fold(0.0, f64::max);
        if residual > ALGEBRAIC_TOL || (lambda.norm() - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidParameter(format!(
                "column {j} of basis {k} is not an eigenvector (residual {residual:e})"
            )));
        }
        let mut phase = lambda.arg().rem_euclid(TAU);
        // -0.0 rounding puts a unit eigenvalue just below 2 pi
        if phase > TAU - 0.5 * step {
            phase -= TAU;
        }
        phases.push(phase);
    }
    for w in phases.windows(2) {
        let gap = w[1] - w[0];
        if gap < 0.5 * step {
            return Err(Error::RepeatedEigenvalue { k, gap });
        }
    }
    Ok(())
}

/// One column per basis index: column `k` is `u_{k, j_select}`,
/// `k = 0..n_tx`. The identity basis is never used, so `n_tx < p`.
pub fn kerdock_waveforms(
    family: &KerdockFamily,
    n_tx: usize,
    j_select: usize,
) -> Result<WaveformSet> {
    let p = family.p();
    if n_tx == 0 || n_tx >= p {
        return Err(Error::InvalidParameter(format!(
            "Kerdock waveforms need 1 <= n_tx < p = {p}, got {n_tx}"
        )));
    }
    if j_select >= p {
        return Err(Error::InvalidParameter(format!(
            "column index {j_select} out of range for p = {p}"
        )));
    }
    let columns = DMatrix::from_fn(p, n_tx, |l, k| family.vector(k, j_select)[l]);
    WaveformSet::new(columns, FamilyTag::Kerdock)
}

/// Worst-case deviation for one property.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub max_deviation: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: &str, max_deviation: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            max_deviation,
            passed: max_deviation <= tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KerdockReport {
    pub p: usize,
    pub tolerance: f64,
    /// Mutually unbiased bases.
    pub mub: PropertyCheck,
    /// Unique unit-modulus basis for each nonzero shift.
    pub autocorrelation_unique: PropertyCheck,
    /// Exactly `p` unit-modulus shifts per basis.
    pub autocorrelation_points: PropertyCheck,
    /// Cross-basis time-frequency correlation at most `1/sqrt(p)`.
    pub crosscorrelation: PropertyCheck,
    /// Entries are scaled `p`-th roots of unity in time and frequency.
    pub polyphase: PropertyCheck,
    /// For each basis `k < p`, the `(f, l)` shifts of unit modulus.
    pub ambiguity_points: Vec<Vec<(usize, usize)>>,
}

impl KerdockReport {
    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    pub fn checks(&self) -> [&PropertyCheck; 5] {
        [
            &self.mub,
            &self.autocorrelation_unique,
            &self.autocorrelation_points,
            &self.crosscorrelation,
            &self.polyphase,
        ]
    }
}

/// Exhaustive check of the four structural properties of a Kerdock family.
pub fn verify_kerdock_properties(family: &KerdockFamily) -> KerdockReport {
    let p = family.p();
    let tol = ALGEBRAIC_TOL;
    let nb = p + 1;
    let inv_sqrt_p = 1.0 / (p as f64).sqrt();

    // (i)
    let mut mub_dev: f64 = 0.0;
    for k in 0..nb {
        for k2 in k..nb {
            let gram = family.basis(k).adjoint() * family.basis(k2);
            for (idx, g) in gram.iter().enumerate() {
                let (j, j2) = (idx % p, idx / p);
                let expected = if k != k2 {
                    inv_sqrt_p
                } else if j == j2 {
                    1.0
                } else {
                    0.0
                };
                mub_dev = mub_dev.max((g.norm() - expected).abs());
            }
        }
    }

    // (ii): self-ambiguity magnitudes, shared by (a) and (b)
    let planner = AmbiguityPlanner::new(p);
    // unit[k][f * p + l] is true when every column of U_(k) has modulus ~1 there
    let mut near_binary_dev: f64 = 0.0;
    let mut unit = vec![vec![true; p * p]; nb];
    for (k, flags) in unit.iter_mut().enumerate() {
        for j in 0..p {
            let u = family.vector(k, j);
            let surface = planner.surface(u, u).expect("square basis");
            for (f, l, mag) in surface.magnitudes() {
                let d = mag.min((mag - 1.0).abs());
                near_binary_dev = near_binary_dev.max(d);
                if (mag - 1.0).abs() > 0.5 {
                    flags[f * p + l] = false;
                }
            }
        }
    }
    let mut unique_dev = near_binary_dev;
    for f in 0..p {
        for l in 0..p {
            if (f, l) == (0, 0) {
                continue;
            }
            let hits = (0..nb).filter(|&k| unit[k][f * p + l]).count();
            if hits != 1 {
                unique_dev = unique_dev.max(1.0);
            }
        }
    }
    let mut ambiguity_points = Vec::with_capacity(p);
    let mut points_dev = near_binary_dev;
    for flags in unit.iter().take(p) {
        let pts: Vec<(usize, usize)> = (0..p * p)
            .filter(|&i| flags[i])
            .map(|i| (i / p, i % p))
            .collect();
        if pts.len() != p {
            points_dev = points_dev.max(1.0);
        }
        ambiguity_points.push(pts);
    }

    // (iii)
    let mut cross_dev: f64 = 0.0;
    for k in 0..nb {
        for k2 in 0..nb {
            if k == k2 {
                continue;
            }
            for j in 0..p {
                let surface = planner
                    .surface(family.vector(k, j), family.vector(k2, j))
                    .expect("square basis");
                for (_, _, mag) in surface.magnitudes() {
                    cross_dev = cross_dev.max(mag - inv_sqrt_p);
                }
            }
        }
    }

    // (iv)
    let fft = FftPlanner::new().plan_fft_forward(p);
    let mut poly_dev: f64 = 0.0;
    for k in 0..nb {
        for j in 0..p {
            if k < p {
                poly_dev = poly_dev.max(root_of_unity_deviation(family.vector(k, j)));
            }
            if k >= 1 {
                let mut spectrum = family.vector(k, j).to_vec();
                fft.process(&mut spectrum);
                for v in spectrum.iter_mut() {
                    *v *= inv_sqrt_p;
                }
                poly_dev = poly_dev.max(root_of_unity_deviation(&spectrum));
            }
        }
    }

    KerdockReport {
        p,
        tolerance: tol,
        mub: PropertyCheck::new("mutually unbiased bases", mub_dev, tol),
        autocorrelation_unique: PropertyCheck::new(
            "autocorrelation: unique basis per shift",
            unique_dev,
            tol,
        ),
        autocorrelation_points: PropertyCheck::new(
            "autocorrelation: p ambiguity points",
            points_dev,
            tol,
        ),
        crosscorrelation: PropertyCheck::new(
            "time-frequency crosscorrelation",
            cross_dev.max(0.0),
            tol,
        ),
        polyphase: PropertyCheck::new("polyphase in time and frequency", poly_dev, tol),
        ambiguity_points,
    }
}

/// Distance of `sqrt(p) * v * conj(phase(v_0))` from the nearest `p`-th roots
/// of unity, entrywise max.
fn root_of_unity_deviation(v: &[Complex64]) -> f64 {
    let p = v.len();
    let scale = (p as f64).sqrt();
    let Some(first) = v.iter().find(|x| x.norm() > 0.5 / scale) else {
        return f64::INFINITY;
    };
    let phase = first / first.norm();
    let step = 2.0 * std::f64::consts::PI / p as f64;
    v.iter()
        .map(|x| {
            let z = x * phase.conj() * scale;
            let r = (z.arg().rem_euclid(2.0 * std::f64::consts::PI) / step).round() as i64;
            (z - root_of_unity(r, p)).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft_matrix(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |l, j| {
            root_of_unity(-((l * j) as i64), n) / (n as f64).sqrt()
        })
    }

    #[test]
    fn rejects_bad_p() {
        for p in [0, 1, 2, 4, 9, 15] {
            assert!(
                matches!(kerdock_family(p), Err(Error::NotOddPrime(_))),
                "p={p}"
            );
        }
        assert!(kerdock_family(263).is_err());
    }

    #[test]
    fn p5_cross_pairs_are_unbiased() {
        let fam = kerdock_family(5).unwrap();
        let mut count = 0;
        for k in 0..=5 {
            for k2 in 0..=5 {
                if k == k2 {
                    continue;
                }
                for j in 0..5 {
                    for j2 in 0..5 {
                        let ip = inner(fam.vector(k, j), fam.vector(k2, j2)).norm();
                        assert!((ip - 0.447_213_595_499_958).abs() < 1e-10);
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 750);
        let self_ip = inner(fam.vector(2, 3), fam.vector(2, 3)).norm();
        assert!((self_ip - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_basis_is_the_dft_up_to_column_phase() {
        let fam = kerdock_family(7).unwrap();
        let f = dft_matrix(7);
        let u0 = fam.basis(0);
        for j in 0..7 {
            // match each Kerdock column with some DFT column up to phase
            let best = (0..7)
                .map(|c| {
                    let col_u: Vec<_> = u0.column(j).iter().copied().collect();
                    let col_f: Vec<_> = f.column(c).iter().copied().collect();
                    let ph = inner(&col_u, &col_f);
                    let ph = ph / ph.norm();
                    col_u
                        .iter()
                        .zip(&col_f)
                        .map(|(a, b)| (a - ph * b).norm())
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-10, "column {j}: {best}");
        }
        assert_eq!(fam.basis(7), &DMatrix::identity(7, 7));
    }

    #[test]
    fn unitary_and_deterministic() {
        let a = kerdock_family(11).unwrap();
        let b = kerdock_family(11).unwrap();
        assert_eq!(a, b);
        for u in a.bases() {
            let dev = (u.adjoint() * u - DMatrix::identity(11, 11))
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            assert!(dev <= 1e-10);
        }
        // real positive first entries
        for k in 0..11 {
            for j in 0..11 {
                let v = a.vector(k, j)[0];
                assert!(v.re > 0.0 && v.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eigenvector_property_holds() {
        let fam = kerdock_family(13).unwrap();
        for k in 0..13 {
            for j in 0..13 {
                let u = fam.vector(k, j);
                let image = translate(&modulate(u, k as i64), 1);
                let lambda = inner(&image, u);
                assert!((lambda.norm() - 1.0).abs() < 1e-10);
                let expected = root_of_unity(j as i64, 13);
                assert!(
                    (lambda - expected).norm() < 1e-10,
                    "phase order k={k} j={j}"
                );
            }
        }
    }

    #[test]
    fn unique_unit_basis_per_shift_p5() {
        let fam = kerdock_family(5).unwrap();
        for f in 0..5i64 {
            for l in 0..5i64 {
                if (f, l) == (0, 0) {
                    continue;
                }
                let mut unit_bases = 0;
                for k in 0..5 {
                    let mags: Vec<f64> = (0..5)
                        .map(|j| {
                            super::super::timefreq_correlation(
                                fam.vector(k, j),
                                fam.vector(k, j),
                                f,
                                l,
                            )
                            .unwrap()
                            .norm()
                        })
                        .collect();
                    if mags.iter().all(|m| (m - 1.0).abs() < 1e-10) {
                        unit_bases += 1;
                    } else {
                        assert!(mags.iter().all(|m| m.abs() < 1e-10));
                    }
                }
                // shifts with l = 0 are resolved by the identity basis
                assert_eq!(unit_bases, usize::from(l != 0), "(f,l)=({f},{l})");
            }
        }
    }

    #[test]
    fn cross_basis_correlation_bounded_p5() {
        let fam = kerdock_family(5).unwrap();
        for k in 0..5 {
            for k2 in 0..5 {
                if k == k2 {
                    continue;
                }
                for f in 0..5 {
                    for l in 0..5 {
                        let c = super::super::timefreq_correlation(
                            fam.vector(k, 0),
                            fam.vector(k2, 0),
                            f,
                            l,
                        )
                        .unwrap();
                        assert!(c.norm() <= 1.0 / 5f64.sqrt() + 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn report_passes_for_small_primes() {
        for p in [3, 5, 7] {
            let report = verify_kerdock_properties(&kerdock_family(p).unwrap());
            assert!(report.all_passed(), "p={p}: {report:#?}");
            assert_eq!(report.ambiguity_points.len(), p);
            for pts in &report.ambiguity_points {
                assert_eq!(pts.len(), p);
                assert!(pts.contains(&(0, 0)));
            }
        }
    }

    #[test]
    fn perturbed_family_fails_mub() {
        use rand::Rng;
        let fam = kerdock_family(5).unwrap();
        let mut bases = fam.into_bases();
        let mut rng = crate::rng::seeded_rng(99);
        let mut v: Vec<Complex64> = (0..5)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = crate::cvec::norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        for (l, x) in v.iter().enumerate() {
            bases[2][(l, 1)] = *x;
        }
        let report = verify_kerdock_properties(&KerdockFamily::from_bases(5, bases).unwrap());
        assert!(!report.mub.passed);
        assert!(!report.all_passed());
    }

    #[test]
    fn waveform_selection() {
        let fam = kerdock_family(5).unwrap();
        let one = kerdock_waveforms(&fam, 1, 0).unwrap();
        assert_eq!(one.n_tx(), 1);
        let dft = dft_matrix(5);
        let col = one.column(0);
        let matches = (0..5).any(|c| {
            let d: Vec<_> = dft.column(c).iter().copied().collect();
            (inner(col, &d).norm() - 1.0).abs() < 1e-10
        });
        assert!(matches);
        assert!(kerdock_waveforms(&fam, 5, 0).is_err());
        assert!(kerdock_waveforms(&fam, 0, 0).is_err());
        assert!(kerdock_waveforms(&fam, 2, 5).is_err());

        let fam37 = kerdock_family(37).unwrap();
        let set = kerdock_waveforms(&fam37, 6, 0).unwrap();
        assert_eq!((set.len(), set.n_tx()), (37, 6));
        for v in set.matrix().iter() {
            assert!((v.norm() - 1.0 / 37f64.sqrt()).abs() < 1e-12);
        }
        for j in 0..6 {
            assert_eq!(set.column(j), fam37.vector(j, 0));
        }
    }
}
