use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TrialOutcome;

/// Number of thresholds of the default grid.
pub const ROC_POINTS: usize = 200;
/// Lowest default threshold relative to the largest magnitude.
const ROC_FLOOR: f64 = 1e-6;

/// Detection and false-alarm probabilities over a descending threshold list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub pd: Vec<f64>,
    pub pfa: Vec<f64>,
}

impl RocCurve {
    /// Best detection probability among thresholds with `P_fa <= target`.
    pub fn pd_at_pfa(&self, target: f64) -> f64 {
        self.pd
            .iter()
            .zip(&self.pfa)
            .filter(|(_, fa)| **fa <= target)
            .map(|(d, _)| *d)
            .fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// `ROC_POINTS` log-spaced thresholds from the largest recovered magnitude
/// down to `1e-6` of it.
pub fn default_thresholds(outcomes: &[TrialOutcome]) -> Result<Vec<f64>> {
    let top = outcomes
        .iter()
        .flat_map(|o| o.magnitudes.iter().map(|m| m.1))
        .fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Empty("recovered magnitudes"));
    }
    let (hi, lo) = (top.ln(), (top * ROC_FLOOR).ln());
    Ok((0..ROC_POINTS)
        .map(|i| (hi + (lo - hi) * i as f64 / (ROC_POINTS - 1) as f64).exp())
        .collect())
}

struct TrialCounts {
    /// Magnitudes of true-support cells, ascending (zero when not recovered).
    on: Vec<f64>,
    /// Nonzero magnitudes off the true support, ascending.
    off: Vec<f64>,
    n_on: usize,
    n_off: usize,
}

impl TrialCounts {
    fn new(o: &TrialOutcome) -> Self {
        let mut support = o.true_support.clone();
        support.sort_unstable();
        let mut on = vec![0.0; support.len()];
        let mut off = Vec::new();
        for &(i, m) in &o.magnitudes {
            match support.binary_search(&i) {
                Ok(k) => on[k] = m,
                Err(_) => off.push(m),
            }
        }
        on.sort_by(f64::total_cmp);
        off.sort_by(f64::total_cmp);
        Self {
            on,
            off,
            n_on: o.true_support.len(),
            n_off: o.record.n_cells - o.true_support.len(),
        }
    }

    fn above(sorted: &[f64], t: f64) -> usize {
        sorted.len() - sorted.partition_point(|v| *v <= t)
    }

    fn rates(&self, t: f64) -> (f64, f64) {
        let pd = if self.n_on == 0 {
            0.0
        } else {
            Self::above(&self.on, t) as f64 / self.n_on as f64
        };
        let pfa = if self.n_off == 0 {
            0.0
        } else {
            Self::above(&self.off, t) as f64 / self.n_off as f64
        };
        (pd, pfa)
    }
}

fn usable(outcomes: &[TrialOutcome]) -> Result<Vec<&TrialOutcome>> {
    let ok: Vec<&TrialOutcome> = outcomes
        .iter()
        .filter(|o| o.record.error.is_none())
        .collect();
    if ok.is_empty() {
        return Err(Error::Empty("trial records"));
    }
    Ok(ok)
}

fn sorted_desc(thresholds: &[f64]) -> Result<Vec<f64>> {
    if thresholds.is_empty() || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidParameter(
            "thresholds must be a non-empty list of numbers".into(),
        ));
    }
    let mut t = thresholds.to_vec();
    t.sort_by(|a, b| b.total_cmp(a));
    Ok(t)
}

/// Per-threshold `P_d` (detected true scatterers / S) and `P_fa` (false alarms
/// / (N - S)), averaged over the trials. A cell counts when its magnitude is
/// strictly above the threshold. Failed trials are skipped.
pub fn roc(outcomes: &[TrialOutcome], thresholds: &[f64]) -> Result<RocCurve> {
    let per = roc_per_trial(outcomes, thresholds)?;
    let thresholds = sorted_desc(thresholds)?;
    let k = per.len() as f64;
    let mut pd = vec![0.0; thresholds.len()];
    let mut pfa = vec![0.0; thresholds.len()];
    for (_, c) in &per {
        for i in 0..thresholds.len() {
            pd[i] += c.pd[i] / k;
            pfa[i] += c.pfa[i] / k;
        }
    }
    Ok(RocCurve {
        thresholds,
        pd,
        pfa,
    })
}

/// One curve per successful trial, keyed by trial index.
pub fn roc_per_trial(
    outcomes: &[TrialOutcome],
    thresholds: &[f64],
) -> Result<Vec<(usize, RocCurve)>> {
    let thresholds = sorted_desc(thresholds)?;
    Ok(usable(outcomes)?
        .into_iter()
        .map(|o| {
            let c = TrialCounts::new(o);
            let (pd, pfa) = thresholds.iter().map(|&t| c.rates(t)).unzip();
            (
                o.record.trial,
                RocCurve {
                    thresholds: thresholds.clone(),
                    pd,
                    pfa,
                },
            )
        })
        .collect())
}
