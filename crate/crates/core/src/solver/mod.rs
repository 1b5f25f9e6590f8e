//! Sparse recovery: lasso by accelerated proximal gradient, support
//! detection, least-squares debiasing and the matched-filter baseline.

mod debias;
mod lasso;
mod matched;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene_grid::Grid;

pub use debias::{debias, debias_with_qr_limit, Debiased, QR_LIMIT};
pub use lasso::{lasso_solve, lasso_solve_operator, soft_threshold, LassoSolution};
pub use matched::{matched_filter_map, MatchedFilterMap};

use crate::sensing::SensingOperator;
use num_complex::Complex64;

/// Relative tolerance of the optimality check `||A^*(Ax - y)||_inf <= lambda (1 + eps)`.
pub const KKT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub rel_tol: f64,
    /// Entries above `support_threshold * max|x|` count as detected.
    pub support_threshold: f64,
    /// Solve on the column-normalized operator `A D^{-1}` and map back.
    pub normalize: bool,
    /// Known `||A||^2` (of the operator actually solved on). Estimated by power
    /// iteration when absent.
    pub lipschitz: Option<f64>,
    pub power_tol: f64,
    pub power_seed: u64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iters: 2000,
            rel_tol: 1e-8,
            support_threshold: 1e-3,
            normalize: true,
            lipschitz: None,
            power_tol: 1e-6,
            power_seed: 0,
        }
    }
}

impl LassoConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rel_tol > 0.0) || !(self.power_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.support_threshold) {
            return Err(Error::InvalidParameter(format!(
                "support threshold must lie in [0, 1), got {}",
                self.support_threshold
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// `lambda = 2 sigma sqrt(2 ln(N_tau N_f N_beta))`.
pub fn default_lambda(sigma: f64, grid: &Grid) -> f64 {
    2.0 * sigma * (2.0 * grid.log_cells()).sqrt()
}

/// Indices with `|x_k| > threshold * max|x|`, ascending. Empty for `x = 0`.
pub fn detect_support(x: &[Complex64], threshold: f64) -> Vec<usize> {
    let peak = crate::cvec::max_abs(x);
    if peak == 0.0 {
        return Vec::new();
    }
    let cut = threshold * peak;
    x.iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > cut)
        .map(|(i, _)| i)
        .collect()
}

/// Lasso estimate, detected support and debiased amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_lasso: Vec<Complex64>,
    pub support: Vec<usize>,
    /// Least-squares amplitudes on `support`, zero elsewhere.
    pub x_debiased: Vec<Complex64>,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub lambda: f64,
    /// `||A^*(A x - y)||_inf` of the problem actually solved.
    pub kkt_residual: f64,
    pub kkt_ok: bool,
    pub rank_deficient: bool,
    pub residual_norm: f64,
}

/// Lasso, thresholded support, then least squares on that support.
pub fn recover(op: &SensingOperator, y: &[Complex64], cfg: &LassoConfig) -> Result<RecoveryResult> {
    let sol = lasso_solve(op, y, cfg)?;
    let support = detect_support(&sol.x, cfg.support_threshold);
    let deb = debias(op, y, &support)?;
    Ok(RecoveryResult {
        x_lasso: sol.x,
        support,
        x_debiased: deb.x,
        iterations: sol.iterations,
        objective: sol.objective,
        converged: sol.converged,
        lambda: cfg.lambda,
        kkt_residual: sol.kkt_residual,
        kkt_ok: sol.kkt_ok,
        rank_deficient: deb.rank_deficient,
        residual_norm: deb.residual_norm,
    })
}
