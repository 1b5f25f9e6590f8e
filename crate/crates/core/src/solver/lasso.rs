use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cvec::{max_abs, norm_sqr};
use crate::error::{Error, Result};
use crate::sensing::{column_norms, operator_norm, ColumnScaled, LinearOperator, SensingOperator};

use super::{LassoConfig, KKT_EPS};

/// Safety margin on the power-iteration estimate, which approaches `||A||^2`
/// from below.
const LIPSCHITZ_MARGIN: f64 = 1.01;
const BACKTRACK_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    /// Minimizer in the original (unnormalized) coordinates.
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Accepted objective values, one per iteration.
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub kkt_ok: bool,
    /// Final step constant `L` (after any backtracking).
    pub lipschitz: f64,
    pub restarts: usize,
}

/// Complex soft threshold `x max(0, 1 - tau / |x|)`.
pub fn soft_threshold(x: Complex64, tau: f64) -> Complex64 {
    let a = x.norm();
    if a <= tau {
        Complex64::new(0.0, 0.0)
    } else {
        x * (1.0 - tau / a)
    }
}

/// Solves `min 1/2 ||A x - y||^2 + lambda ||x||_1`, by default on the
/// column-normalized operator (see [`LassoConfig::normalize`]).
pub fn lasso_solve(
    op: &SensingOperator,
    y: &[Complex64],
    cfg: &LassoConfig,
) -> Result<LassoSolution> {
    if !cfg.normalize {
        return lasso_solve_operator(op, y, cfg);
    }
    let norms = column_norms(op).norms;
    let scaled = ColumnScaled::new(op, &norms)?;
    let mut sol = lasso_solve_operator(&scaled, y, cfg)?;
    sol.x.iter_mut().zip(&norms).for_each(|(v, d)| *v /= d);
    Ok(sol)
}

fn objective(residual: &[Complex64], x: &[Complex64], lambda: f64) -> f64 {
    0.5 * norm_sqr(residual) + lambda * x.iter().map(|v| v.norm()).sum::<f64>()
}

fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// FISTA with objective-based restart on a generic operator.
///
/// Accepted iterates never increase the objective: when the momentum step
/// would, it is discarded and the next step starts from the last accepted
/// point with the momentum reset.
pub fn lasso_solve_operator<Op: LinearOperator>(
    op: &Op,
    y: &[Complex64],
    cfg: &LassoConfig,
) -> Result<LassoSolution> {
    cfg.validate()?;
    if y.len() != op.range_dim() {
        return Err(Error::DimensionMismatch {
            expected: op.range_dim(),
            got: y.len(),
        });
    }
    let n = op.domain_dim();
    let lambda = cfg.lambda;
    let zero = Complex64::new(0.0, 0.0);

    let mut lip = match cfg.lipschitz {
        Some(l) if l > 0.0 => l,
        Some(l) => {
            return Err(Error::InvalidParameter(format!(
                "lipschitz must be positive, got {l}"
            )))
        }
        None => {
            let est = operator_norm(op, cfg.power_tol, 500, cfg.power_seed)?;
            (est.norm * est.norm * LIPSCHITZ_MARGIN).max(f64::MIN_POSITIVE)
        }
    };

    let mut x = vec![zero; n];
    let mut ax = vec![zero; y.len()];
    let mut f_x = objective(&sub(&ax, y), &x, lambda);
    let mut z = x.clone();
    let mut az = ax.clone();
    let mut t = 1.0f64;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut restarts = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let r_z = sub(&az, y);
        let grad = op.apply_adjoint(&r_z)?;
        let f_z = 0.5 * norm_sqr(&r_z);

        // Proximal step with backtracking on the quadratic upper bound.
        let (x_new, ax_new) = loop {
            let step = 1.0 / lip;
            let x_new: Vec<Complex64> = z
                .iter()
                .zip(&grad)
                .map(|(zi, gi)| soft_threshold(zi - gi * step, lambda * step))
                .collect();
            let ax_new = op.apply(&x_new)?;
            let d = sub(&x_new, &z);
            let bound = f_z
                + d.iter()
                    .zip(&grad)
                    .map(|(di, gi)| (gi.conj() * di).re)
                    .sum::<f64>()
                + 0.5 * lip * norm_sqr(&d);
            let f_new = 0.5 * norm_sqr(&sub(&ax_new, y));
            if f_new <= bound + 1e-12 * bound.abs().max(1.0) {
                break (x_new, ax_new);
            }
            lip *= BACKTRACK_FACTOR;
        };

        let f_new = objective(&sub(&ax_new, y), &x_new, lambda);
        if f_new > f_x && t > 1.0 {
            // Momentum overshoot: restart from the accepted point.
            restarts += 1;
            t = 1.0;
            z.clone_from(&x);
            az.clone_from(&ax);
            trace.push(f_x);
            continue;
        }

        let decrease = f_x - f_new;
        let step_sq: f64 = x_new.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum();
        let x_sq = norm_sqr(&x_new);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        z = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (a - b) * mom)
            .collect();
        az = ax_new
            .iter()
            .zip(&ax)
            .map(|(a, b)| a + (a - b) * mom)
            .collect();
        t = t_next;
        x = x_new;
        ax = ax_new;
        f_x = f_new;
        trace.push(f_x);
        // Small objective decrease alone can stall early on flat stretches,
        // so the iterate must also have settled.
        if decrease.abs() <= cfg.rel_tol * f_x.max(f64::MIN_POSITIVE)
            && step_sq <= cfg.rel_tol * x_sq
        {
            converged = true;
            break;
        }
    }

    let kkt_residual = max_abs(&op.apply_adjoint(&sub(&ax, y))?);
    let kkt_ok = kkt_residual <= lambda * (1.0 + KKT_EPS) + 1e-12 * norm_sqr(y).sqrt();
    Ok(LassoSolution {
        x,
        iterations,
        objective: f_x,
        converged,
        objective_trace: trace,
        kkt_residual,
        kkt_ok,
        lipschitz: lip,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cvec::{inner, norm};
    use crate::rng::seeded_rng;
    use crate::scene_grid::{sample_geometry, Cell, Grid};
    use crate::waveforms::alltop_waveforms;
    use rand_distr::{Distribution, StandardNormal};

    fn alltop_op() -> SensingOperator {
        let set = alltop_waveforms(7, 2).unwrap();
        SensingOperator::new(
            set,
            sample_geometry(2, 3, 21).unwrap(),
            Grid::new(7, 7, 2, 3).unwrap(),
        )
        .unwrap()
    }

    fn raw(lambda: f64) -> LassoConfig {
        LassoConfig {
            normalize: false,
            rel_tol: 1e-15,
            max_iters: 20_000,
            ..LassoConfig::with_lambda(lambda)
        }
    }

    struct Diag(Vec<f64>, usize);

    impl LinearOperator for Diag {
        fn domain_dim(&self) -> usize {
            self.0.len()
        }
        fn range_dim(&self) -> usize {
            self.1
        }
        fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
            let mut y = vec![Complex64::new(0.0, 0.0); self.1];
            for (i, (d, v)) in self.0.iter().zip(x).enumerate() {
                y[i] = v * d;
            }
            Ok(y)
        }
        fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
            Ok(self.0.iter().zip(y).map(|(d, v)| v * d).collect())
        }
    }

    #[test]
    fn soft_threshold_rules() {
        let x = Complex64::new(3.0, 4.0);
        assert_eq!(soft_threshold(x, 0.0), x);
        assert!((soft_threshold(x, 2.0) - Complex64::new(1.8, 2.4)).norm() < 1e-15);
        assert_eq!(soft_threshold(x, 5.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_measurement_gives_zero() {
        let op = alltop_op();
        let y = vec![Complex64::new(0.0, 0.0); op.range_dim()];
        for normalize in [false, true] {
            let cfg = LassoConfig {
                normalize,
                ..LassoConfig::with_lambda(0.3)
            };
            let sol = lasso_solve(&op, &y, &cfg).unwrap();
            assert!(sol.x.iter().all(|v| v.norm() == 0.0));
            assert!(sol.converged);
        }
    }

    #[test]
    fn large_lambda_kills_everything() {
        let op = alltop_op();
        let mut rng = seeded_rng(2);
        let y: Vec<Complex64> = (0..op.range_dim())
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let lam = max_abs(&op.apply_adjoint(&y).unwrap());
        let sol = lasso_solve(&op, &y, &raw(lam)).unwrap();
        assert!(sol.x.iter().all(|v| v.norm() == 0.0));
        assert!(sol.kkt_ok);
        let below = lasso_solve(&op, &y, &raw(0.9 * lam)).unwrap();
        assert!(below.x.iter().any(|v| v.norm() > 0.0));
    }

    #[test]
    fn single_column_matches_closed_form() {
        let op = alltop_op();
        // Largest-norm azimuth, so the 1-sparse candidate satisfies the
        // optimality conditions of the full problem.
        let norms = crate::sensing::column_norms(&op);
        let b = (0..6)
            .max_by(|&i, &j| norms.per_azimuth_sq[i].total_cmp(&norms.per_azimuth_sq[j]))
            .unwrap();
        let c = op.grid().index(Cell {
            delay: 3,
            doppler: 2,
            azimuth: b,
        });
        let amp = Complex64::new(0.6, -0.8) * 2.0;
        let mut x0 = vec![Complex64::new(0.0, 0.0); op.domain_dim()];
        x0[c] = amp;
        let y = op.apply_forward(&x0).unwrap();
        let col = LinearOperator::column(&op, c).unwrap();
        let nc2 = norm_sqr(&col);
        let lam = 0.05;
        // One-column lasso: soft(<A_c, y> / ||A_c||^2, lambda / ||A_c||^2).
        let expect = soft_threshold(inner(&y, &col) / nc2, lam / nc2);
        let sol = lasso_solve(&op, &y, &raw(lam)).unwrap();
        assert!(sol.kkt_ok, "kkt {}", sol.kkt_residual);
        assert!(
            (sol.x[c] - expect).norm() < 1e-6,
            "{} vs {expect}",
            sol.x[c]
        );
        assert!(sol.x[c].norm() < amp.norm());
        assert!(((amp.norm() - sol.x[c].norm()) - lam / nc2).abs() < 1e-6);
        let off = sol
            .x
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != c)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-6 * amp.norm());
        assert_eq!(super::super::detect_support(&sol.x, 1e-3), vec![c]);
    }

    #[test]
    fn objective_non_increasing_and_kkt() {
        let op = alltop_op();
        let mut x0 = vec![Complex64::new(0.0, 0.0); op.domain_dim()];
        for (i, c) in [5usize, 77, 150, 260].iter().enumerate() {
            x0[*c] = Complex64::from_polar(1.0 + i as f64, i as f64);
        }
        let mut y = op.apply_forward(&x0).unwrap();
        let mut rng = seeded_rng(4);
        for v in &mut y {
            *v += Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            ) * 0.05;
        }
        for normalize in [false, true] {
            let cfg = LassoConfig {
                normalize,
                ..LassoConfig::with_lambda(0.4)
            };
            let sol = lasso_solve(&op, &y, &cfg).unwrap();
            assert!(sol.converged);
            assert!(
                sol.kkt_ok,
                "kkt {} (normalize {normalize})",
                sol.kkt_residual
            );
            for w in sol.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let op = alltop_op();
        let mut x0 = vec![Complex64::new(0.0, 0.0); op.domain_dim()];
        x0[12] = Complex64::new(1.0, 1.0);
        x0[200] = Complex64::new(-0.5, 2.0);
        let y = op.apply_forward(&x0).unwrap();
        for normalize in [false, true] {
            let cfg = LassoConfig {
                normalize,
                rel_tol: 1e-13,
                max_iters: 50_000,
                ..LassoConfig::with_lambda(0.2)
            };
            let a = lasso_solve(&op, &y, &cfg).unwrap();
            let y2: Vec<Complex64> = y.iter().map(|v| v * 2.0).collect();
            let b = lasso_solve(&op, &y2, &LassoConfig { lambda: 0.4, ..cfg }).unwrap();
            let diff: Vec<Complex64> = a.x.iter().zip(&b.x).map(|(u, v)| u * 2.0 - v).collect();
            assert!(
                norm(&diff) <= 1e-6 * norm(&b.x),
                "rel {}",
                norm(&diff) / norm(&b.x)
            );
        }
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        // Overdetermined diagonal system: prox with lambda = 0 is plain gradient
        // descent, which converges to the least-squares solution d_i^{-1} y_i.
        let d = vec![1.0, 2.0, 1.2, 1.5];
        let op = Diag(d.clone(), 6);
        let y: Vec<Complex64> = (0..6)
            .map(|i| Complex64::new(i as f64 + 1.0, -(i as f64)))
            .collect();
        let sol = lasso_solve_operator(&op, &y, &raw(0.0)).unwrap();
        for i in 0..4 {
            assert!(
                (sol.x[i] - y[i] / d[i]).norm() < 1e-6,
                "{:?} {} {}",
                sol.x,
                sol.iterations,
                sol.converged
            );
        }
    }

    #[test]
    fn backtracking_recovers_from_bad_lipschitz() {
        let op = Diag(vec![1.0, 4.0, 2.0], 3);
        let y = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(8.0, 0.0),
            Complex64::new(0.0, 2.0),
        ];
        let cfg = LassoConfig {
            lipschitz: Some(0.5),
            ..raw(0.1)
        };
        let sol = lasso_solve_operator(&op, &y, &cfg).unwrap();
        assert!(sol.lipschitz >= 16.0);
        assert!(sol.converged && sol.kkt_ok);
        // Separable closed form: soft(y_i d_i, lambda) / d_i^2.
        let want = [
            soft_threshold(y[0], 0.1),
            soft_threshold(y[1] * 4.0, 0.1) / 16.0,
            soft_threshold(y[2] * 2.0, 0.1) / 4.0,
        ];
        for (x, w) in sol.x.iter().zip(want) {
            assert!((x - w).norm() < 1e-6);
        }
        assert!(lasso_solve_operator(&op, &y[..2], &raw(0.1)).is_err());
    }
}
