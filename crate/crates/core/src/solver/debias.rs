use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cvec::{inner, norm, norm_sqr};
use crate::error::{Error, Result};
use crate::sensing::LinearOperator;

/// Supports larger than this are solved by conjugate gradient instead of QR.
pub const QR_LIMIT: usize = 10_000;
const RANK_TOL: f64 = 1e-8;
const CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Debiased {
    /// Domain vector, zero off the support.
    pub x: Vec<Complex64>,
    /// Amplitudes in support order.
    pub amplitudes: Vec<Complex64>,
    pub residual_norm: f64,
    /// `sigma_min(A_I) < 1e-8 sigma_max(A_I)`, or CG failed to converge.
    pub rank_deficient: bool,
    /// `sigma_max / sigma_min` of `A_I` when computed (QR path).
    pub condition: Option<f64>,
}

/// Least squares `min ||A_I x_I - y||` restricted to the columns in `support`.
pub fn debias<Op: LinearOperator>(op: &Op, y: &[Complex64], support: &[usize]) -> Result<Debiased> {
    debias_with_qr_limit(op, y, support, QR_LIMIT)
}

pub fn debias_with_qr_limit<Op: LinearOperator>(
    op: &Op,
    y: &[Complex64],
    support: &[usize],
    qr_limit: usize,
) -> Result<Debiased> {
    let m = op.range_dim();
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if support.len() > m {
        return Err(Error::InvalidParameter(format!(
            "support of size {} exceeds the {m} measurements",
            support.len()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= op.domain_dim()) {
        return Err(Error::InvalidParameter(format!(
            "support index {bad} out of range"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    if support.is_empty() {
        return Ok(Debiased {
            x: vec![zero; op.domain_dim()],
            amplitudes: Vec::new(),
            residual_norm: norm(y),
            rank_deficient: false,
            condition: None,
        });
    }
    let (amplitudes, rank_deficient, condition) = if support.len() <= qr_limit {
        solve_qr(op, y, support)?
    } else {
        let (a, ok) = solve_cgnr(op, y, support)?;
        (a, !ok, None)
    };
    let mut x = vec![zero; op.domain_dim()];
    for (&i, a) in support.iter().zip(&amplitudes) {
        x[i] = *a;
    }
    let fit = op.apply(&x)?;
    let r: Vec<Complex64> = fit.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(Debiased {
        x,
        amplitudes,
        residual_norm: norm(&r),
        rank_deficient,
        condition,
    })
}

fn solve_qr<Op: LinearOperator>(
    op: &Op,
    y: &[Complex64],
    support: &[usize],
) -> Result<(Vec<Complex64>, bool, Option<f64>)> {
    let m = op.range_dim();
    let mut a = DMatrix::<Complex64>::zeros(m, support.len());
    for (j, &c) in support.iter().enumerate() {
        a.set_column(j, &DVector::from_vec(op.column(c)?));
    }
    let sv = a.singular_values();
    let s_max = sv.iter().copied().fold(0.0, f64::max);
    let s_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let rank_deficient = !(s_min >= RANK_TOL * s_max) || s_max == 0.0;
    let condition = if s_min > 0.0 {
        Some(s_max / s_min)
    } else {
        None
    };

    let qr = a.clone().qr();
    let qty = qr.q().adjoint() * DVector::from_column_slice(y);
    let amplitudes = match qr.r().solve_upper_triangular(&qty) {
        Some(v) if !rank_deficient && v.iter().all(|z| z.is_finite()) => {
            v.iter().copied().collect()
        }
        // Numerically singular: minimum-norm solution instead.
        _ => a
            .svd(true, true)
            .solve(&DVector::from_column_slice(y), RANK_TOL * s_max)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .iter()
            .copied()
            .collect(),
    };
    Ok((amplitudes, rank_deficient, condition))
}

/// Conjugate gradient on `A_I^* A_I x = A_I^* y`. Returns the solution and
/// whether the relative normal-equation residual reached `1e-10`.
fn solve_cgnr<Op: LinearOperator>(
    op: &Op,
    y: &[Complex64],
    support: &[usize],
) -> Result<(Vec<Complex64>, bool)> {
    let zero = Complex64::new(0.0, 0.0);
    let n = op.domain_dim();
    let scatter = |v: &[Complex64]| {
        let mut full = vec![zero; n];
        for (&i, a) in support.iter().zip(v) {
            full[i] = *a;
        }
        full
    };
    let normal = |v: &[Complex64]| -> Result<Vec<Complex64>> {
        let g = op.apply_adjoint(&op.apply(&scatter(v))?)?;
        Ok(support.iter().map(|&i| g[i]).collect())
    };
    let aty_full = op.apply_adjoint(y)?;
    let b: Vec<Complex64> = support.iter().map(|&i| aty_full[i]).collect();
    let b_norm = norm(&b);
    let mut x = vec![zero; support.len()];
    if b_norm == 0.0 {
        return Ok((x, true));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = norm_sqr(&r);
    for _ in 0..(10 * support.len()).max(100) {
        if rr.sqrt() <= CG_TOL * b_norm {
            return Ok((x, true));
        }
        let ap = normal(&p)?;
        let alpha = rr / inner(&ap, &p).re;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += pi * alpha);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= ai * alpha);
        let rr_new = norm_sqr(&r);
        let beta = rr_new / rr;
        p = r.iter().zip(&p).map(|(ri, pi)| ri + pi * beta).collect();
        rr = rr_new;
    }
    let ok = rr.sqrt() <= CG_TOL * b_norm;
    Ok((x, ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::scene_grid::{sample_geometry, Grid};
    use crate::sensing::SensingOperator;
    use crate::waveforms::{kerdock_family, kerdock_waveforms};
    use rand_distr::{Distribution, StandardNormal};

    fn op() -> SensingOperator {
        let set = kerdock_waveforms(&kerdock_family(7).unwrap(), 2, 1).unwrap();
        SensingOperator::new(
            set,
            sample_geometry(2, 3, 8).unwrap(),
            Grid::new(7, 7, 2, 3).unwrap(),
        )
        .unwrap()
    }

    fn noise(n: usize, seed: u64, scale: f64) -> Vec<Complex64> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ) * scale
            })
            .collect()
    }

    #[test]
    fn noiseless_exact_recovery() {
        let op = op();
        let support = vec![3, 60, 111, 250];
        let mut x0 = vec![Complex64::new(0.0, 0.0); op.domain_dim()];
        for (i, &c) in support.iter().enumerate() {
            x0[c] = Complex64::from_polar(1.0 + i as f64, 0.7 * i as f64);
        }
        let y = op.apply_forward(&x0).unwrap();
        let d = debias(&op, &y, &support).unwrap();
        assert!(!d.rank_deficient);
        for (a, b) in d.x.iter().zip(&x0) {
            assert!((a - b).norm() < 1e-8);
        }
        assert!(d.residual_norm < 1e-8);
    }

    #[test]
    fn empty_support() {
        let op = op();
        let y = noise(op.range_dim(), 1, 1.0);
        let d = debias(&op, &y, &[]).unwrap();
        assert!(d.x.iter().all(|v| v.norm() == 0.0));
        assert!((d.residual_norm - norm(&y)).abs() < 1e-12);
    }

    #[test]
    fn residual_orthogonal_to_support_columns() {
        let op = op();
        let y = noise(op.range_dim(), 2, 1.0);
        let support = vec![0, 9, 40, 41, 200, 293];
        let d = debias(&op, &y, &support).unwrap();
        let fit = op.apply_forward(&d.x).unwrap();
        let r: Vec<Complex64> = fit.iter().zip(&y).map(|(a, b)| a - b).collect();
        for &c in &support {
            let col = op.column(c).unwrap();
            assert!(inner(&r, &col).norm() <= 1e-8 * norm(&r) * norm(&col));
        }
    }

    #[test]
    fn cg_path_matches_qr() {
        let op = op();
        let y = noise(op.range_dim(), 3, 1.0);
        let support = vec![1, 17, 90, 133, 170];
        let qr = debias(&op, &y, &support).unwrap();
        let cg = debias_with_qr_limit(&op, &y, &support, 0).unwrap();
        assert!(!cg.rank_deficient);
        for (a, b) in qr.amplitudes.iter().zip(&cg.amplitudes) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_flagged() {
        // Kerdock ambiguity makes some delay-Doppler columns parallel at N_T = 1.
        let set = kerdock_waveforms(&kerdock_family(5).unwrap(), 1, 0).unwrap();
        let op = SensingOperator::new(
            set,
            sample_geometry(1, 2, 3).unwrap(),
            Grid::new(5, 5, 1, 2).unwrap(),
        )
        .unwrap();
        let mut pair = None;
        'outer: for a in 0..op.grid().n_cells() {
            let ca = op.column(a).unwrap();
            for b in a + 1..op.grid().n_cells() {
                let cb = op.column(b).unwrap();
                if (inner(&ca, &cb).norm() - norm(&ca) * norm(&cb)).abs() < 1e-9 {
                    pair = Some((a, b));
                    break 'outer;
                }
            }
        }
        let (a, b) = pair.expect("parallel columns");
        let y = noise(op.range_dim(), 4, 1.0);
        let d = debias(&op, &y, &[a, b]).unwrap();
        assert!(d.rank_deficient);
        assert!(d.amplitudes.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let op = op();
        let y = noise(op.range_dim(), 5, 1.0);
        assert!(debias(&op, &y[..4], &[0]).is_err());
        assert!(debias(&op, &y, &[op.domain_dim()]).is_err());
        let too_many: Vec<usize> = (0..op.range_dim() + 1).collect();
        assert!(debias(&op, &y, &too_many).is_err());
    }
}
