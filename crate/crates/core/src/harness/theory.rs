use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sensing::{
    coherence_dense, coherence_matrix_free, column_norms, dense_matrix, operator_norm,
};

use super::{TrialConfig, POWER_LABEL};

/// Confidence of the one-sided binomial allowance on violation counts.
const CONFIDENCE: f64 = 0.95;
const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 500;

/// Sample-size conditions under which the operator bounds are proved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    /// `max(N_R N_T, 32 N_T^3 ln(N_tau N_f N_beta)) <= N_s`.
    pub sample_condition: bool,
    pub sample_condition_lhs: f64,
    /// `ln^2(N_tau N_f N_beta) <= N_T <= N_R`.
    pub antenna_condition: bool,
    pub antenna_condition_lhs: f64,
    pub n_s: usize,
}

pub fn check_hypotheses(cfg: &TrialConfig) -> Result<HypothesisCheck> {
    let grid = cfg.grid()?;
    let log_n = grid.log_cells();
    let nt = cfg.n_tx as f64;
    let lhs1 = ((cfg.n_rx * cfg.n_tx) as f64).max(32.0 * nt.powi(3) * log_n);
    let lhs2 = log_n * log_n;
    Ok(HypothesisCheck {
        sample_condition: lhs1 <= cfg.p as f64,
        sample_condition_lhs: lhs1,
        antenna_condition: lhs2 <= nt && cfg.n_tx <= cfg.n_rx,
        antenna_condition_lhs: lhs2,
        n_s: cfg.p,
    })
}

/// Outcome of a statistical check of one bound over random geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub bound_name: String,
    /// The bound as written, e.g. `||A||^2 <= 2 N_f N_R^2 N_T^2`.
    pub formula: String,
    pub bound_value: f64,
    /// Lower end for two-sided bands.
    pub bound_lower: Option<f64>,
    pub empirical_max: Option<f64>,
    pub empirical_min: Option<f64>,
    pub violations: usize,
    pub trials: usize,
    pub claimed_failure_probability: Option<f64>,
    /// Largest violation count compatible with the claimed failure
    /// probability at 95% (one-sided binomial).
    pub allowed_violations: Option<usize>,
    pub passed: bool,
    pub hypothesis: Option<HypothesisCheck>,
    pub forced: bool,
    pub diagnostics: BTreeMap<String, f64>,
    pub per_trial: Vec<Option<f64>>,
}

impl TheoryReport {
    pub fn violation_rate(&self) -> f64 {
        self.violations as f64 / self.trials as f64
    }

    pub fn within_count(&self) -> usize {
        self.trials - self.violations
    }
}

/// Smallest `k` with `P(Binomial(trials, p) <= k) >= 0.95`.
pub fn binomial_allowance(trials: usize, p: f64) -> usize {
    let p = p.clamp(0.0, 1.0);
    let Ok(dist) = Binomial::new(p, trials as u64) else {
        return trials;
    };
    (0..=trials)
        .find(|&k| dist.cdf(k as u64) >= CONFIDENCE)
        .unwrap_or(trials)
}

/// `8 N_tau^{-2} N_R^{-1}`, shared by the operator-norm and column-norm bounds.
pub fn norm_failure_probability(n_tau: usize, n_rx: usize) -> f64 {
    8.0 / ((n_tau * n_tau) as f64 * n_rx as f64)
}

pub fn coherence_failure_probability(n_tau: usize, n_f: usize, n_rx: usize, n_tx: usize) -> f64 {
    let (t, f, r, x) = (n_tau as f64, n_f as f64, n_rx as f64, n_tx as f64);
    8.0 / (t * t * f * f)
        + 4.0 * x / (t * t * f * f)
        + 4.0 / (t * f)
        + 4.0 / (t.powi(3) * f.powi(3) * r * r * x)
        + 8.0 / (x * x * (t * f * r).powi(3))
}

fn guard(cfg: &TrialConfig, needs_antenna: bool, force: bool) -> Result<HypothesisCheck> {
    cfg.validate_geometry()?;
    let h = check_hypotheses(cfg)?;
    let ok = h.sample_condition && (!needs_antenna || h.antenna_condition);
    if !ok && !force {
        return Err(Error::HypothesisViolated(format!(
            "max(N_R N_T, 32 N_T^3 ln N) = {:.1} vs N_s = {}{}",
            h.sample_condition_lhs,
            h.n_s,
            if needs_antenna {
                format!(
                    ", ln^2 N = {:.2} vs N_T = {} <= N_R = {}",
                    h.antenna_condition_lhs, cfg.n_tx, cfg.n_rx
                )
            } else {
                String::new()
            }
        )));
    }
    Ok(h)
}

#[allow(clippy::too_many_arguments)]
fn report(
    name: &str,
    formula: String,
    bound: f64,
    bound_lower: Option<f64>,
    values: Vec<Option<f64>>,
    violations: usize,
    claimed: Option<f64>,
    hypothesis: HypothesisCheck,
    forced: bool,
    diagnostics: BTreeMap<String, f64>,
) -> TheoryReport {
    let trials = values.len();
    let present = values.iter().flatten().copied();
    let empirical_max = present.clone().reduce(f64::max);
    let empirical_min = present.reduce(f64::min);
    let allowed = claimed.map(|p| binomial_allowance(trials, p));
    TheoryReport {
        bound_name: name.into(),
        formula,
        bound_value: bound,
        bound_lower,
        empirical_max,
        empirical_min,
        violations,
        trials,
        claimed_failure_probability: claimed,
        allowed_violations: allowed,
        passed: violations <= allowed.unwrap_or(0),
        hypothesis: Some(hypothesis),
        forced,
        diagnostics,
        per_trial: values,
    }
}

/// `||A||_op^2 <= 2 N_f N_R^2 N_T^2` over `cfg.trials` random geometries.
pub fn verify_operator_norm_bound(cfg: &TrialConfig, force: bool) -> Result<TheoryReport> {
    let h = guard(cfg, false, force)?;
    let waveforms = cfg.build_waveforms()?;
    let bound = 2.0 * (cfg.n_doppler() * cfg.n_rx * cfg.n_rx * cfg.n_tx * cfg.n_tx) as f64;
    let results: Vec<(f64, bool)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, bool)> {
            let op = cfg.operator(&waveforms, t)?;
            let est = operator_norm(
                &op,
                POWER_TOL,
                POWER_MAX_ITERS,
                derive_seed(cfg.trial_seed(t), POWER_LABEL),
            )?;
            Ok((est.norm * est.norm, est.converged))
        })
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|r| r.0 > bound).count();
    let mut diag = BTreeMap::new();
    diag.insert(
        "power_iteration_unconverged".into(),
        results.iter().filter(|r| !r.1).count() as f64,
    );
    Ok(report(
        "operator_norm",
        format!("||A||_op^2 <= 2 N_f N_R^2 N_T^2 = {bound}"),
        bound,
        None,
        results.iter().map(|r| Some(r.0)).collect(),
        violations,
        Some(norm_failure_probability(cfg.p, cfg.n_rx)),
        h,
        force,
        diag,
    ))
}

/// `max |<A_k, A_l>| <= 16 N_R ln(N_tau N_f N_R N_T)` over random geometries.
/// Uses the dense Gram matrix when `dense` is set, otherwise the matrix-free
/// path. The normalized coherence is reported alongside.
pub fn verify_coherence_bound(cfg: &TrialConfig, dense: bool, force: bool) -> Result<TheoryReport> {
    let h = guard(cfg, true, force)?;
    let waveforms = cfg.build_waveforms()?;
    let n = (cfg.p * cfg.n_doppler() * cfg.n_rx * cfg.n_tx) as f64;
    let bound = 16.0 * cfg.n_rx as f64 * n.ln();
    let results: Vec<(Option<f64>, Option<f64>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let op = cfg.operator(&waveforms, t)?;
            let r = if dense {
                coherence_dense(&dense_matrix(&op)?)
            } else {
                coherence_matrix_free(&op)?
            };
            Ok((r.max_inner, r.mu))
        })
        .collect::<Result<_>>()?;
    let violations = results
        .iter()
        .filter(|r| r.0.is_some_and(|v| v > bound))
        .count();
    let mut diag = BTreeMap::new();
    if let Some(mu) = results.iter().filter_map(|r| r.1).reduce(f64::max) {
        diag.insert("normalized_coherence_max".into(), mu);
    }
    if let Some(mu) = results.iter().filter_map(|r| r.1).reduce(f64::min) {
        diag.insert("normalized_coherence_min".into(), mu);
    }
    Ok(report(
        "coherence",
        format!("max |<A_k, A_l>| <= 16 N_R log N_tau N_f N_R N_T = {bound}"),
        bound,
        None,
        results.iter().map(|r| r.0).collect(),
        violations,
        Some(coherence_failure_probability(
            cfg.p,
            cfg.n_doppler(),
            cfg.n_rx,
            cfg.n_tx,
        )),
        h,
        force,
        diag,
    ))
}

/// `N_R N_T / 3 <= ||A_c||^2 <= 5 N_R N_T / 3` for every column. A trial is a
/// violation when any column leaves the band; `per_trial` holds each trial's
/// largest squared norm.
pub fn verify_column_norms(cfg: &TrialConfig, force: bool) -> Result<TheoryReport> {
    let h = guard(cfg, false, force)?;
    let waveforms = cfg.build_waveforms()?;
    let nrt = (cfg.n_rx * cfg.n_tx) as f64;
    let (lo, hi) = (nrt / 3.0, 5.0 * nrt / 3.0);
    let results: Vec<(f64, f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let norms = column_norms(&cfg.operator(&waveforms, t)?);
            Ok((norms.min_sq, norms.max_sq, norms.kappa))
        })
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|r| r.0 < lo || r.1 > hi).count();
    let mut diag = BTreeMap::new();
    diag.insert(
        "min_norm_sq".into(),
        results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
    );
    diag.insert(
        "max_norm_sq".into(),
        results.iter().map(|r| r.1).fold(0.0, f64::max),
    );
    let kappa_max = results.iter().map(|r| r.2).fold(0.0, f64::max);
    diag.insert("kappa_max".into(), kappa_max);
    diag.insert(
        "kappa_le_sqrt5_trials".into(),
        results.iter().filter(|r| r.2 <= 5f64.sqrt()).count() as f64,
    );
    diag.insert(
        "kappa_le_5_trials".into(),
        results.iter().filter(|r| r.2 <= 5.0).count() as f64,
    );
    let mut r = report(
        "column_norms",
        format!("N_R N_T / 3 = {lo} <= ||A_c||^2 <= 5 N_R N_T / 3 = {hi}"),
        hi,
        Some(lo),
        results.iter().map(|r| Some(r.1)).collect(),
        violations,
        Some(norm_failure_probability(cfg.p, cfg.n_rx)),
        h,
        force,
        diag,
    );
    r.empirical_min = results.iter().map(|r| r.0).reduce(f64::min);
    Ok(r)
}
