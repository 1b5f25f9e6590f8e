use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cvec::{norm, norm_sqr};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

use super::{LinearOperator, SensingOperator};

const POWER_STREAM: u64 = 0x706f_7765;

/// Exact column norms of the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnNorms {
    /// `||A_c||_2` for every domain index `c`.
    pub norms: Vec<f64>,
    /// `||A_{tau,f,beta}||_2^2` per azimuth; it does not depend on `tau` or `f`.
    pub per_azimuth_sq: Vec<f64>,
    pub min_sq: f64,
    pub max_sq: f64,
    /// Condition number of `D = diag(||A_c||)`.
    pub kappa: f64,
}

pub fn column_norms(op: &SensingOperator) -> ColumnNorms {
    let grid = op.grid();
    let per_azimuth_sq: Vec<f64> = (0..grid.n_azimuth)
        .map(|b| norm_sqr(op.rx_manifold(b)) * norm_sqr(op.composite(b)))
        .collect();
    let block = grid.n_delay * grid.n_doppler;
    let norms = per_azimuth_sq
        .iter()
        .flat_map(|sq| std::iter::repeat_n(sq.sqrt(), block))
        .collect();
    let min_sq = per_azimuth_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let max_sq = per_azimuth_sq.iter().copied().fold(0.0, f64::max);
    ColumnNorms {
        norms,
        per_azimuth_sq,
        min_sq,
        max_sq,
        kappa: (max_sq / min_sq).sqrt(),
    }
}

/// Largest off-diagonal Gram entries. Every field is `None` when the matrix
/// has fewer than two columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `max_{k != l} |<A_k, A_l>| / (||A_k|| ||A_l||)`.
    pub mu: Option<f64>,
    pub mu_pair: Option<(usize, usize)>,
    /// `max_{k != l} |<A_k, A_l>|`.
    pub max_inner: Option<f64>,
    pub max_inner_pair: Option<(usize, usize)>,
}

#[derive(Clone, Copy)]
struct PairMax {
    mu: f64,
    mu_pair: (usize, usize),
    inner: f64,
    inner_pair: (usize, usize),
}

impl PairMax {
    fn empty() -> Self {
        Self {
            mu: -1.0,
            mu_pair: (0, 0),
            inner: -1.0,
            inner_pair: (0, 0),
        }
    }

    fn offer(&mut self, k: usize, l: usize, g: Complex64, nk: f64, nl: f64) {
        let a = g.norm();
        if a > self.inner {
            self.inner = a;
            self.inner_pair = (k, l);
        }
        let m = if nk > 0.0 && nl > 0.0 {
            a / (nk * nl)
        } else {
            0.0
        };
        if m > self.mu {
            self.mu = m;
            self.mu_pair = (k, l);
        }
    }

    // First-seen wins on ties, so merging in column order is deterministic.
    fn merge(mut self, other: Self) -> Self {
        if other.mu > self.mu {
            self.mu = other.mu;
            self.mu_pair = other.mu_pair;
        }
        if other.inner > self.inner {
            self.inner = other.inner;
            self.inner_pair = other.inner_pair;
        }
        self
    }

    fn into_report(self) -> CoherenceReport {
        if self.inner < 0.0 {
            return CoherenceReport {
                mu: None,
                mu_pair: None,
                max_inner: None,
                max_inner_pair: None,
            };
        }
        CoherenceReport {
            mu: Some(self.mu),
            mu_pair: Some(self.mu_pair),
            max_inner: Some(self.inner),
            max_inner_pair: Some(self.inner_pair),
        }
    }
}

/// Coherence from an explicit matrix via its Gram matrix.
pub fn coherence_dense(a: &DMatrix<Complex64>) -> CoherenceReport {
    let gram = a.adjoint() * a;
    let n = gram.ncols();
    let norms: Vec<f64> = (0..n).map(|k| gram[(k, k)].re.max(0.0).sqrt()).collect();
    let mut best = PairMax::empty();
    for l in 0..n {
        for k in 0..l {
            best.offer(k, l, gram[(k, l)], norms[k], norms[l]);
        }
    }
    best.into_report()
}

/// Coherence without forming the matrix: row `k` of the Gram matrix is
/// `A^* A_k`, one adjoint application per column.
pub fn coherence_matrix_free<Op: LinearOperator>(op: &Op) -> Result<CoherenceReport> {
    let n = op.domain_dim();
    let columns: Vec<Vec<Complex64>> = (0..n).map(|k| op.column(k)).collect::<Result<_>>()?;
    let norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    let rows: Vec<PairMax> = (0..n)
        .into_par_iter()
        .map(|k| -> Result<PairMax> {
            let g = op.apply_adjoint(&columns[k])?;
            let mut best = PairMax::empty();
            for l in k + 1..n {
                best.offer(k, l, g[l].conj(), norms[k], norms[l]);
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(rows
        .into_iter()
        .fold(PairMax::empty(), PairMax::merge)
        .into_report())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormEstimate {
    /// Estimate of the largest singular value.
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `A^* A` from a seeded Gaussian start. Stops once the
/// relative change of the eigenvalue estimate drops below `tol`.
pub fn operator_norm<Op: LinearOperator>(
    op: &Op,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<OperatorNormEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = op.domain_dim();
    if n == 0 {
        return Err(Error::Empty("operator domain"));
    }
    let mut rng = stream_rng(seed, POWER_STREAM);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| {
            Complex64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = 0.0;
    for it in 1..=max_iters {
        let w = op.apply_adjoint(&op.apply(&v)?)?;
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(OperatorNormEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            });
        }
        let done = (nw - lambda).abs() <= tol * nw;
        lambda = nw;
        if done {
            return Ok(OperatorNormEstimate {
                norm: lambda.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(OperatorNormEstimate {
        norm: lambda.sqrt(),
        iterations: max_iters,
        converged: false,
    })
}

/// Largest singular value from a full SVD.
pub fn operator_norm_dense(a: &DMatrix<Complex64>) -> f64 {
    a.singular_values().iter().copied().fold(0.0, f64::max)
}
