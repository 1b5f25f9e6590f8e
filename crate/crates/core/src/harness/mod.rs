//! Monte-Carlo campaigns: recovery trials, ROC curves and statistical checks
//! of the probabilistic operator bounds.

mod bernstein;
mod io;
mod roc;
mod theory;

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvec::norm;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::scene_grid::{
    min_amplitude, sample_geometry, sample_scene, Grid, MagnitudeModel, SparseScene,
};
use crate::sensing::{
    add_noise_with_sigma, noise_sigma_for_snr, ColumnScaled, LinearOperator, SensingOperator,
};
use crate::solver::{default_lambda, recover, LassoConfig};
use crate::waveforms::{
    alltop_waveforms, is_prime, kerdock_family, kerdock_waveforms, read_waveforms_csv, FamilyTag,
    WaveformSet,
};

pub use bernstein::{bernstein_mc, bernstein_parameters, BernsteinCase, BernsteinParameters};
pub use io::{
    read_magnitudes_csv, read_records_csv, write_magnitudes_csv, write_records_csv, write_roc_csv,
    write_roc_trials_csv,
};
pub use roc::{default_thresholds, roc, roc_per_trial, RocCurve, ROC_POINTS};
pub use theory::{
    binomial_allowance, check_hypotheses, coherence_failure_probability, norm_failure_probability,
    verify_coherence_bound, verify_column_norms, verify_operator_norm_bound, HypothesisCheck,
    TheoryReport,
};

const GEOMETRY_LABEL: u64 = 1;
const SCENE_LABEL: u64 = 2;
const NOISE_LABEL: u64 = 3;
const POWER_LABEL: u64 = 4;

/// Fraction of `||A^* y||_inf` used as lambda when the noise level is zero
/// and the default rule would give `lambda = 0`.
pub const NOISELESS_LAMBDA_FRACTION: f64 = 1e-2;

/// Scatterer magnitudes of a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Amplitude {
    Constant {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// All magnitudes equal to `factor` times the detection floor
    /// `8 sqrt(3) sigma sqrt(2 ln N) / sqrt(N_R N_T)`. The noise level is
    /// calibrated from `snr_db` on the unit-magnitude scene first.
    FloorMultiple {
        factor: f64,
    },
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Constant { value: 1.0 }
    }
}

/// Optional solver settings; unset fields use [`LassoConfig`] defaults and
/// the default lambda rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOverrides {
    pub lambda: Option<f64>,
    pub normalize: Option<bool>,
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub support_threshold: Option<f64>,
}

fn default_trials() -> usize {
    50
}

/// One Monte-Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub family: FamilyTag,
    /// Waveform length `p = N_s = N_tau`.
    pub p: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Doppler bins `N_f`; `p` when absent.
    #[serde(default)]
    pub n_doppler: Option<usize>,
    /// Kerdock vector index within each basis.
    #[serde(default)]
    pub j_select: usize,
    /// Waveform CSV, required for the external family.
    #[serde(default)]
    pub waveform_file: Option<PathBuf>,
    pub sparsity: usize,
    /// Output SNR in dB; absent means noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub amplitude: Amplitude,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOverrides,
}

impl TrialConfig {
    pub fn new(family: FamilyTag, p: usize, n_tx: usize, n_rx: usize, sparsity: usize) -> Self {
        Self {
            family,
            p,
            n_tx,
            n_rx,
            n_doppler: None,
            j_select: 0,
            waveform_file: None,
            sparsity,
            snr_db: None,
            amplitude: Amplitude::default(),
            trials: default_trials(),
            seed: 0,
            solver: SolverOverrides::default(),
        }
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler.unwrap_or(self.p)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.p, self.n_doppler(), self.n_tx, self.n_rx)
    }

    /// Checks everything except the scene settings.
    pub fn validate_geometry(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter(
                "trial count must be at least 1".into(),
            ));
        }
        if self.family != FamilyTag::External && (self.p < 3 || !is_prime(self.p)) {
            return Err(Error::NotOddPrime(self.p));
        }
        if self.family != FamilyTag::External && (self.n_tx == 0 || self.n_tx >= self.p) {
            return Err(Error::InvalidParameter(format!(
                "n_tx must lie in 1..{}, got {}",
                self.p, self.n_tx
            )));
        }
        if self.n_doppler() == 0 || self.n_doppler() > self.p {
            return Err(Error::InvalidParameter(format!(
                "n_doppler must lie in 1..={}, got {}",
                self.p,
                self.n_doppler()
            )));
        }
        self.grid()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_geometry()?;
        let grid = self.grid()?;
        if self.sparsity == 0 || self.sparsity > grid.n_cells() {
            return Err(Error::InvalidParameter(format!(
                "sparsity must lie in 1..={}, got {}",
                grid.n_cells(),
                self.sparsity
            )));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidParameter(
                    "snr_db must be finite (omit it for noiseless)".into(),
                ));
            }
        }
        if let Amplitude::FloorMultiple { factor } = self.amplitude {
            if self.snr_db.is_none() || !(factor > 0.0) {
                return Err(Error::InvalidParameter(
                    "floor_multiple amplitudes need a positive factor and a finite snr_db".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build_waveforms(&self) -> Result<WaveformSet> {
        let set = match self.family {
            FamilyTag::Kerdock => {
                kerdock_waveforms(&kerdock_family(self.p)?, self.n_tx, self.j_select)?
            }
            FamilyTag::Alltop => alltop_waveforms(self.p, self.n_tx)?,
            FamilyTag::External => {
                let path = self.waveform_file.as_ref().ok_or_else(|| {
                    Error::InvalidParameter("external family needs waveform_file".into())
                })?;
                read_waveforms_csv(std::io::BufReader::new(std::fs::File::open(path)?))?
            }
        };
        if set.len() != self.p || set.n_tx() != self.n_tx {
            return Err(Error::InvalidParameter(format!(
                "waveform set is {} x {}, config asks for {} x {}",
                set.len(),
                set.n_tx(),
                self.p,
                self.n_tx
            )));
        }
        Ok(set)
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.seed, trial as u64)
    }

    /// Operator of trial `trial`: fixed waveforms, fresh random geometry.
    pub fn operator(&self, waveforms: &WaveformSet, trial: usize) -> Result<SensingOperator> {
        let geom = sample_geometry(
            self.n_tx,
            self.n_rx,
            derive_seed(self.trial_seed(trial), GEOMETRY_LABEL),
        )?;
        SensingOperator::new(waveforms.clone(), geom, self.grid()?)
    }

    fn magnitude_model(&self) -> MagnitudeModel {
        match self.amplitude {
            Amplitude::Constant { value } => MagnitudeModel::Constant { value },
            Amplitude::Uniform { low, high } => MagnitudeModel::Uniform { low, high },
            Amplitude::LogNormal { mu, sigma } => MagnitudeModel::LogNormal { mu, sigma },
            Amplitude::FloorMultiple { .. } => MagnitudeModel::Constant { value: 1.0 },
        }
    }
}

/// Per-trial summary, one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub lambda: f64,
    pub amplitude: f64,
    pub sparsity: usize,
    pub n_cells: usize,
    pub detected: usize,
    pub support_exact: bool,
    pub rel_error: f64,
    /// `5 sigma sqrt(3 N_R N_s) / ||y||`.
    pub error_bound: f64,
    pub y_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_ok: bool,
    pub rank_deficient: bool,
    /// Set when the trial failed; the numeric fields are then NaN or zero.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn error_bound_ok(&self) -> bool {
        self.rel_error <= self.error_bound
    }

    fn failed(trial: usize, seed: u64, sparsity: usize, n_cells: usize, msg: String) -> Self {
        Self {
            trial,
            seed,
            sigma: f64::NAN,
            lambda: f64::NAN,
            amplitude: f64::NAN,
            sparsity,
            n_cells,
            detected: 0,
            support_exact: false,
            rel_error: f64::NAN,
            error_bound: f64::NAN,
            y_norm: f64::NAN,
            iterations: 0,
            converged: false,
            kkt_ok: false,
            rank_deficient: false,
            error: Some(msg),
        }
    }
}

/// A trial's record plus what the ROC needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub true_support: Vec<usize>,
    /// `(index, |x_lasso|)` for every nonzero lasso entry.
    pub magnitudes: Vec<(usize, f64)>,
}

/// Runs every trial (in parallel, results in trial order). A failing trial is
/// recorded with its error message and never aborts the campaign.
pub fn run_trials(cfg: &TrialConfig) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let waveforms = cfg.build_waveforms()?;
    let n_cells = cfg.grid()?.n_cells();
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(cfg, &waveforms, t).unwrap_or_else(|e| TrialOutcome {
                record: TrialRecord::failed(
                    t,
                    cfg.trial_seed(t),
                    cfg.sparsity,
                    n_cells,
                    e.to_string(),
                ),
                true_support: Vec::new(),
                magnitudes: Vec::new(),
            })
        })
        .collect())
}

/// Scene, measurement and noise level of one trial.
pub fn trial_scene(
    cfg: &TrialConfig,
    op: &SensingOperator,
    trial: usize,
) -> Result<(SparseScene, Vec<Complex64>, f64)> {
    let seed = cfg.trial_seed(trial);
    let grid = *op.grid();
    let mut scene = sample_scene(
        &grid,
        cfg.sparsity,
        cfg.magnitude_model(),
        derive_seed(seed, SCENE_LABEL),
    )?;
    let clean = op.apply_forward(&scene.to_vector())?;
    let sigma = match cfg.snr_db {
        Some(snr) => noise_sigma_for_snr(&clean, snr)?,
        None => 0.0,
    };
    let mut clean = clean;
    if let Amplitude::FloorMultiple { factor } = cfg.amplitude {
        // The unit-magnitude scene fixes sigma; magnitudes then scale to the floor.
        let mag = factor * min_amplitude(sigma, cfg.n_rx, cfg.n_tx, &grid);
        scene = scene.with_magnitude(mag);
        clean.iter_mut().for_each(|v| *v *= mag);
    }
    let m = add_noise_with_sigma(&clean, sigma, derive_seed(seed, NOISE_LABEL))?;
    Ok((scene, m.y, sigma))
}

/// Solver settings of one trial.
pub fn trial_lasso_config(
    cfg: &TrialConfig,
    op: &SensingOperator,
    y: &[Complex64],
    sigma: f64,
    trial: usize,
) -> Result<LassoConfig> {
    let mut lc = LassoConfig {
        power_seed: derive_seed(cfg.trial_seed(trial), POWER_LABEL),
        ..LassoConfig::default()
    };
    let o = &cfg.solver;
    if let Some(v) = o.normalize {
        lc.normalize = v;
    }
    if let Some(v) = o.max_iters {
        lc.max_iters = v;
    }
    if let Some(v) = o.rel_tol {
        lc.rel_tol = v;
    }
    if let Some(v) = o.support_threshold {
        lc.support_threshold = v;
    }
    lc.lambda = match o.lambda {
        Some(l) => l,
        None if sigma > 0.0 => default_lambda(sigma, op.grid()),
        None => {
            let g = if lc.normalize {
                let norms = crate::sensing::column_norms(op).norms;
                ColumnScaled::new(op, &norms)?.apply_adjoint(y)?
            } else {
                LinearOperator::apply_adjoint(op, y)?
            };
            NOISELESS_LAMBDA_FRACTION * crate::cvec::max_abs(&g)
        }
    };
    lc.validate()?;
    Ok(lc)
}

fn run_trial(cfg: &TrialConfig, waveforms: &WaveformSet, trial: usize) -> Result<TrialOutcome> {
    let op = cfg.operator(waveforms, trial)?;
    let (scene, y, sigma) = trial_scene(cfg, &op, trial)?;
    let lc = trial_lasso_config(cfg, &op, &y, sigma, trial)?;
    let rec = recover(&op, &y, &lc)?;
    let x = scene.to_vector();
    let true_support = scene.support_indices();
    let diff: Vec<Complex64> = rec.x_debiased.iter().zip(&x).map(|(a, b)| a - b).collect();
    let y_norm = norm(&y);
    let record = TrialRecord {
        trial,
        seed: cfg.trial_seed(trial),
        sigma,
        lambda: lc.lambda,
        amplitude: scene
            .amplitudes
            .iter()
            .map(|a| a.norm())
            .fold(f64::INFINITY, f64::min),
        sparsity: cfg.sparsity,
        n_cells: op.grid().n_cells(),
        detected: rec.support.len(),
        support_exact: rec.support == true_support,
        rel_error: norm(&diff) / norm(&x),
        error_bound: 5.0 * sigma * ((3 * cfg.n_rx * cfg.p) as f64).sqrt() / y_norm,
        y_norm,
        iterations: rec.iterations,
        converged: rec.converged,
        kkt_ok: rec.kkt_ok,
        rank_deficient: rec.rank_deficient,
        error: None,
    };
    let magnitudes = rec
        .x_lasso
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(i, v)| (i, v.norm()))
        .collect();
    Ok(TrialOutcome {
        record,
        true_support,
        magnitudes,
    })
}

/// Fraction of successful trials with exactly recovered support.
pub fn success_rate(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.record.support_exact).count() as f64 / outcomes.len() as f64
}
