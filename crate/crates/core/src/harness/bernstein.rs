use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

use super::theory::{binomial_allowance, TheoryReport};

const MATRIX_STREAM: u64 = 0x6d61_7472;
const DRAW_STREAM: u64 = 0x6472_6177;

/// Test matrix of the quadratic-form tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BernsteinCase {
    /// Every entry has modulus exactly `1/sqrt(n)`, random phases.
    BoundedEntries,
    /// Unit diagonal, off-diagonal entries of modulus `1/sqrt(n)`.
    UnitDiagonal,
    /// `M = I` (a unit-diagonal instance with zero off-diagonal).
    Identity,
}

/// `t` and `s` for which each tail bound equals a target probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernsteinParameters {
    /// `4m exp(-t^2 n / (4m)) = target`.
    pub t_ab: f64,
    /// `8m exp(-t^2 n / (2m)) = target`.
    pub t_aa: f64,
    /// Bilinear unit-diagonal bound with the budget split evenly:
    /// `4 exp(-s^2/(4m)) = 4m exp(-t^2 n/(4m)) = target / 2`.
    pub s_ab2: f64,
    pub t_ab2: f64,
}

pub fn bernstein_parameters(m: usize, n: usize, target: f64) -> Result<BernsteinParameters> {
    if m == 0 || n == 0 || !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(
            "need m, n >= 1 and a target in (0, 1)".into(),
        ));
    }
    let (mf, nf) = (m as f64, n as f64);
    let t_for =
        |scale: f64, prefactor: f64, goal: f64| (scale * (prefactor / goal).ln().max(0.0)).sqrt();
    Ok(BernsteinParameters {
        t_ab: t_for(4.0 * mf / nf, 4.0 * mf, target),
        t_aa: t_for(2.0 * mf / nf, 8.0 * mf, target),
        s_ab2: t_for(4.0 * mf, 4.0, target / 2.0),
        t_ab2: t_for(4.0 * mf / nf, 4.0 * mf, target / 2.0),
    })
}

fn random_phase<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

fn test_matrix(m: usize, n: usize, case: BernsteinCase, seed: u64) -> DMatrix<Complex64> {
    let mut rng = stream_rng(seed, MATRIX_STREAM);
    let off = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(m, m, |i, j| match case {
        BernsteinCase::Identity => Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0),
        BernsteinCase::UnitDiagonal if i == j => Complex64::new(1.0, 0.0),
        _ => random_phase(&mut rng) * off,
    })
}

struct Line {
    name: &'static str,
    formula: String,
    bound: f64,
    lower: Option<f64>,
    violated: Box<dyn Fn(f64, f64) -> bool>,
}

/// Monte-Carlo frequency of the tail events of the quadratic-form bounds for a
/// fixed random `M` and `trials` draws of independent uniform-phase vectors
/// `alpha`, `beta`. Bounded-entry matrices get the two case-1 inequalities;
/// unit-diagonal matrices (and the identity) get the two case-2 inequalities.
/// The bilinear case-2 bound is tested at `(s, t)` with `t` shared.
pub fn bernstein_mc(
    m: usize,
    n: usize,
    case: BernsteinCase,
    t: f64,
    s: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TheoryReport>> {
    if m == 0 || n == 0 || trials == 0 {
        return Err(Error::InvalidParameter(
            "m, n and trials must be positive".into(),
        ));
    }
    if t < 0.0 || s < 0.0 {
        return Err(Error::InvalidParameter(
            "t and s must be non-negative".into(),
        ));
    }
    let (mf, nf) = (m as f64, n as f64);
    let tail_ab = 4.0 * mf * (-t * t / (4.0 * mf / nf)).exp();
    let tail_aa = 8.0 * mf * (-t * t / (2.0 * mf / nf)).exp();
    let lines: Vec<Line> = match case {
        BernsteinCase::BoundedEntries => vec![
            Line {
                name: "bilinear_bounded_entries",
                formula: format!("P(|<M a, b>| > m t = {}) <= 4m exp(-t^2 n / 4m)", mf * t),
                bound: tail_ab,
                lower: None,
                violated: Box::new(move |ab, _| ab > mf * t),
            },
            Line {
                name: "quadratic_bounded_entries",
                formula: format!("P(|<M a, a>| > 2 m t = {}) <= 8m exp(-t^2 n / 2m)", 2.0 * mf * t),
                bound: tail_aa,
                lower: None,
                violated: Box::new(move |_, aa| aa > 2.0 * mf * t),
            },
        ],
        BernsteinCase::UnitDiagonal | BernsteinCase::Identity => vec![
            Line {
                name: "bilinear_unit_diagonal",
                formula: format!(
                    "P(|<M a, b>| > s + m t = {}) <= 4 exp(-s^2 / 4m) + 4m exp(-t^2 n / 4m)",
                    s + mf * t
                ),
                bound: 4.0 * (-s * s / (4.0 * mf)).exp() + tail_ab,
                lower: None,
                violated: Box::new(move |ab, _| ab > s + mf * t),
            },
            Line {
                name: "quadratic_unit_diagonal",
                formula: format!(
                    "P(|<M a, a>| outside [m(1 - 2t), m(1 + 2t)] = [{}, {}]) <= 8m exp(-t^2 n / 2m)",
                    mf * (1.0 - 2.0 * t),
                    mf * (1.0 + 2.0 * t)
                ),
                bound: tail_aa,
                lower: Some(mf * (1.0 - 2.0 * t)),
                violated: Box::new(move |_, aa| aa < mf * (1.0 - 2.0 * t) || aa > mf * (1.0 + 2.0 * t)),
            },
        ],
    };

    let mat = test_matrix(m, m, case, seed);
    let mut rng = stream_rng(seed, DRAW_STREAM);
    let mut counts = vec![0usize; lines.len()];
    let mut max_ab = 0.0f64;
    let mut max_aa = 0.0f64;
    let mut min_aa = f64::INFINITY;
    let mut alpha = nalgebra::DVector::<Complex64>::zeros(m);
    let mut beta = nalgebra::DVector::<Complex64>::zeros(m);
    for _ in 0..trials {
        alpha.iter_mut().for_each(|a| *a = random_phase(&mut rng));
        beta.iter_mut().for_each(|b| *b = random_phase(&mut rng));
        let ma = &mat * &alpha;
        // <M alpha, beta> = sum_k (M alpha)_k conj(beta_k)
        let ab = beta.dotc(&ma).norm();
        let aa = alpha.dotc(&ma).norm();
        max_ab = max_ab.max(ab);
        max_aa = max_aa.max(aa);
        min_aa = min_aa.min(aa);
        for (c, line) in counts.iter_mut().zip(&lines) {
            if (line.violated)(ab, aa) {
                *c += 1;
            }
        }
    }

    Ok(lines
        .into_iter()
        .zip(counts)
        .map(|(line, violations)| {
            let allowed = binomial_allowance(trials, line.bound);
            let mut diagnostics = BTreeMap::new();
            diagnostics.insert("t".into(), t);
            diagnostics.insert("s".into(), s);
            diagnostics.insert("max_bilinear".into(), max_ab);
            diagnostics.insert("max_quadratic".into(), max_aa);
            diagnostics.insert("min_quadratic".into(), min_aa);
            diagnostics.insert("empirical_rate".into(), violations as f64 / trials as f64);
            TheoryReport {
                bound_name: line.name.into(),
                formula: line.formula,
                bound_value: line.bound,
                bound_lower: line.lower,
                empirical_max: Some(violations as f64 / trials as f64),
                empirical_min: None,
                violations,
                trials,
                claimed_failure_probability: Some(line.bound.min(1.0)),
                allowed_violations: Some(allowed),
                passed: violations <= allowed,
                hypothesis: None,
                forced: false,
                diagnostics,
                per_trial: Vec::new(),
            }
        })
        .collect())
}
