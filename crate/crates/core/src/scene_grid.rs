//! Random array geometry, the azimuth-delay-Doppler grid and sparse scenes.
//!
//! Units are normalised: one delay step is one sample and one Doppler step is
//! one DFT bin of the `N_s`-sample record. Azimuth points are
//! `beta_n = n * delta_beta` for `n = 1..=N_beta`, `delta_beta = 2 / (N_R N_T)`.

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

const GEOMETRY_STREAM: u64 = 0x6765_6f6d;
const SCENE_STREAM: u64 = 0x7363_656e;

/// Antenna positions `p_j` (transmit) and `q_j` (receive), in units of half
/// wavelengths, drawn i.i.d. uniform on `[0, N_R N_T / 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub tx_positions: Vec<f64>,
    pub rx_positions: Vec<f64>,
    pub seed: u64,
}

impl ArrayGeometry {
    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_positions.len()
    }

    /// Upper end of the placement interval.
    pub fn aperture(&self) -> f64 {
        (self.n_tx() * self.n_rx()) as f64 / 2.0
    }
}

pub fn sample_geometry(n_tx: usize, n_rx: usize, seed: u64) -> Result<ArrayGeometry> {
    if n_tx == 0 || n_rx == 0 {
        return Err(Error::InvalidParameter(format!(
            "antenna counts must be positive, got n_tx={n_tx}, n_rx={n_rx}"
        )));
    }
    let aperture = (n_tx * n_rx) as f64 / 2.0;
    let mut rng = stream_rng(seed, GEOMETRY_STREAM);
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(0.0..=aperture)).collect() };
    let tx_positions = draw(n_tx);
    let rx_positions = draw(n_rx);
    Ok(ArrayGeometry {
        tx_positions,
        rx_positions,
        seed,
    })
}

fn manifold(positions: &[f64], beta: f64) -> Vec<Complex64> {
    positions
        .iter()
        .map(|&x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * x * beta))
        .collect()
}

/// Transmit and receive array manifolds `a_T(beta)`, `a_R(beta)`.
pub fn steering_vectors(geom: &ArrayGeometry, beta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    (
        manifold(&geom.tx_positions, beta),
        manifold(&geom.rx_positions, beta),
    )
}

/// Discretisation of the azimuth-delay-Doppler domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_delay: usize,
    pub n_doppler: usize,
    pub n_azimuth: usize,
    pub delta_beta: f64,
}

/// One grid cell; `azimuth` is the 0-based position of `beta_{azimuth+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub delay: usize,
    pub doppler: usize,
    pub azimuth: usize,
}

impl Grid {
    /// Grid with `N_beta = N_R N_T` azimuth points.
    pub fn new(n_delay: usize, n_doppler: usize, n_tx: usize, n_rx: usize) -> Result<Self> {
        if n_delay == 0 || n_doppler == 0 || n_tx == 0 || n_rx == 0 {
            return Err(Error::InvalidParameter(
                "grid dimensions and antenna counts must be positive".into(),
            ));
        }
        let n_azimuth = n_tx * n_rx;
        Ok(Self {
            n_delay,
            n_doppler,
            n_azimuth,
            delta_beta: 2.0 / n_azimuth as f64,
        })
    }

    /// Total number of cells `N = N_tau N_f N_beta`.
    pub fn n_cells(&self) -> usize {
        self.n_delay * self.n_doppler * self.n_azimuth
    }

    /// `beta_n = n * delta_beta` for 1-based `n`.
    pub fn beta(&self, n: usize) -> f64 {
        n as f64 * self.delta_beta
    }

    /// Azimuth value of the 0-based azimuth index used by [`Cell`].
    pub fn azimuth_value(&self, azimuth: usize) -> f64 {
        self.beta(azimuth + 1)
    }

    /// Linear index: delay fastest, then Doppler, then azimuth.
    pub fn index(&self, cell: Cell) -> usize {
        cell.delay + self.n_delay * (cell.doppler + self.n_doppler * cell.azimuth)
    }

    pub fn cell(&self, index: usize) -> Cell {
        let delay = index % self.n_delay;
        let rest = index / self.n_delay;
        Cell {
            delay,
            doppler: rest % self.n_doppler,
            azimuth: rest / self.n_doppler,
        }
    }

    /// `ln(N_tau N_f N_beta)`, the log factor of the recovery bounds.
    pub fn log_cells(&self) -> f64 {
        (self.n_cells() as f64).ln()
    }
}

/// Distribution of scatterer magnitudes. Phases are always uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MagnitudeModel {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Default for MagnitudeModel {
    fn default() -> Self {
        MagnitudeModel::Constant { value: 1.0 }
    }
}

impl MagnitudeModel {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MagnitudeModel::Constant { value } => value.is_finite() && value >= 0.0,
            MagnitudeModel::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && 0.0 <= low && low <= high
            }
            MagnitudeModel::LogNormal { mu, sigma } => {
                mu.is_finite() && sigma.is_finite() && sigma >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad magnitude model {self:?}"
            )))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            MagnitudeModel::Constant { value } => value,
            MagnitudeModel::Uniform { low, high } => {
                if low == high {
                    low
                } else {
                    rng.random_range(low..high)
                }
            }
            MagnitudeModel::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated parameters")
                .sample(rng),
        }
    }
}

/// An `S`-sparse scene on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseScene {
    pub grid: Grid,
    /// Occupied cells, sorted by linear index.
    pub support: Vec<Cell>,
    pub amplitudes: Vec<Complex64>,
    pub seed: u64,
}

impl SparseScene {
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn support_indices(&self) -> Vec<usize> {
        self.support.iter().map(|&c| self.grid.index(c)).collect()
    }

    /// Dense domain vector `x`.
    pub fn to_vector(&self) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.grid.n_cells()];
        for (&c, &a) in self.support.iter().zip(&self.amplitudes) {
            x[self.grid.index(c)] = a;
        }
        x
    }

    /// Same support and phases with every magnitude set to `magnitude`.
    pub fn with_magnitude(&self, magnitude: f64) -> Self {
        let mut out = self.clone();
        for a in out.amplitudes.iter_mut() {
            let n = a.norm();
            *a = if n > 0.0 {
                *a * (magnitude / n)
            } else {
                Complex64::new(magnitude, 0.0)
            };
        }
        out
    }
}

/// Uniform support without replacement, uniform phases, magnitudes from `model`.
pub fn sample_scene(
    grid: &Grid,
    s: usize,
    model: MagnitudeModel,
    seed: u64,
) -> Result<SparseScene> {
    let n = grid.n_cells();
    if s == 0 || s > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity must lie in 1..={n}, got {s}"
        )));
    }
    model.validate()?;
    let mut rng = stream_rng(seed, SCENE_STREAM);
    let mut idx = index::sample(&mut rng, n, s).into_vec();
    idx.sort_unstable();
    let amplitudes = idx
        .iter()
        .map(|_| {
            let mag = model.sample(&mut rng);
            let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
            Complex64::from_polar(mag, phase)
        })
        .collect();
    Ok(SparseScene {
        grid: *grid,
        support: idx.into_iter().map(|i| grid.cell(i)).collect(),
        amplitudes,
        seed,
    })
}

/// Smallest scatterer magnitude for guaranteed detection:
/// `8 sqrt(3) sigma / sqrt(N_R N_T) * sqrt(2 ln(N_tau N_f N_beta))`.
pub fn min_amplitude(sigma: f64, n_rx: usize, n_tx: usize, grid: &Grid) -> f64 {
    8.0 * 3f64.sqrt() * sigma / ((n_rx * n_tx) as f64).sqrt() * (2.0 * grid.log_cells()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn geometry_range_and_determinism() {
        let g = sample_geometry(6, 6, 1).unwrap();
        assert_eq!((g.n_tx(), g.n_rx()), (6, 6));
        assert!(g
            .tx_positions
            .iter()
            .chain(&g.rx_positions)
            .all(|&x| (0.0..=18.0).contains(&x)));
        assert_eq!(g, sample_geometry(6, 6, 1).unwrap());
        assert_ne!(g, sample_geometry(6, 6, 2).unwrap());

        let tiny = sample_geometry(1, 1, 3).unwrap();
        assert!(tiny.tx_positions[0] <= 0.5 && tiny.rx_positions[0] <= 0.5);
        assert!(sample_geometry(0, 3, 1).is_err());
        assert!(sample_geometry(3, 0, 1).is_err());
    }

    #[test]
    fn steering_vector_identities() {
        let g = sample_geometry(4, 5, 11).unwrap();
        let (tx, rx) = steering_vectors(&g, 0.0);
        assert!(tx
            .iter()
            .chain(&rx)
            .all(|v| (v - Complex64::new(1.0, 0.0)).norm() == 0.0));
        for beta in [0.1, 0.37, 1.9, -0.8] {
            let (tx, rx) = steering_vectors(&g, beta);
            let (tx_n, rx_n) = steering_vectors(&g, -beta);
            assert!((crate::cvec::norm_sqr(&tx) - 4.0).abs() < 1e-12);
            assert!((crate::cvec::norm_sqr(&rx) - 5.0).abs() < 1e-12);
            for (a, b) in tx.iter().zip(&tx_n).chain(rx.iter().zip(&rx_n)) {
                assert!((a.norm() - 1.0).abs() < 1e-14);
                assert!((a.conj() - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_indexing() {
        let grid = Grid::new(37, 37, 6, 6).unwrap();
        assert_eq!(grid.n_azimuth, 36);
        assert_eq!(grid.n_cells(), 49_284);
        assert!((grid.delta_beta - 2.0 / 36.0).abs() < 1e-15);
        // azimuth points start at n = 1
        assert!((grid.azimuth_value(0) - grid.delta_beta).abs() < 1e-15);
        assert!((grid.azimuth_value(35) - 2.0).abs() < 1e-12);
        for i in [0, 1, 36, 37, 1368, 1369, 49_283] {
            assert_eq!(grid.index(grid.cell(i)), i);
        }
        assert_eq!(grid.cell(1).delay, 1);
        assert_eq!(grid.cell(37).doppler, 1);
        assert_eq!(grid.cell(1369).azimuth, 1);
    }

    #[test]
    fn scene_sampling() {
        let grid = Grid::new(37, 37, 6, 6).unwrap();
        let scene = sample_scene(&grid, 10, MagnitudeModel::default(), 5).unwrap();
        let idx = scene.support_indices();
        assert_eq!(idx.len(), 10);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert!(idx.iter().all(|&i| i < 49_284));
        assert!(scene
            .amplitudes
            .iter()
            .all(|a| (a.norm() - 1.0).abs() < 1e-12));
        assert_eq!(
            scene,
            sample_scene(&grid, 10, MagnitudeModel::default(), 5).unwrap()
        );

        let small = Grid::new(2, 2, 1, 2).unwrap();
        let full = sample_scene(&small, small.n_cells(), MagnitudeModel::default(), 1).unwrap();
        assert_eq!(full.support_indices(), (0..8).collect::<Vec<_>>());
        assert!(sample_scene(&small, 9, MagnitudeModel::default(), 1).is_err());
        assert!(sample_scene(&small, 0, MagnitudeModel::default(), 1).is_err());
    }

    #[test]
    fn magnitude_models() {
        let grid = Grid::new(5, 5, 2, 2).unwrap();
        let s = sample_scene(
            &grid,
            20,
            MagnitudeModel::Uniform {
                low: 2.0,
                high: 3.0,
            },
            3,
        )
        .unwrap();
        assert!(s.amplitudes.iter().all(|a| (2.0..3.0).contains(&a.norm())));
        let s = sample_scene(
            &grid,
            20,
            MagnitudeModel::LogNormal {
                mu: 0.0,
                sigma: 0.5,
            },
            3,
        )
        .unwrap();
        assert!(s.amplitudes.iter().all(|a| a.norm() > 0.0));
        assert!(sample_scene(
            &grid,
            2,
            MagnitudeModel::Uniform {
                low: 3.0,
                high: 2.0
            },
            3
        )
        .is_err());
        let scaled = s.with_magnitude(4.0);
        for (a, b) in s.amplitudes.iter().zip(&scaled.amplitudes) {
            assert!((b.norm() - 4.0).abs() < 1e-12);
            assert!((a.arg() - b.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn support_histogram_is_uniform() {
        let grid = Grid::new(3, 2, 1, 2).unwrap(); // 12 cells
        let n = grid.n_cells();
        let draws = 10_000;
        let s = 3;
        let mut counts = vec![0f64; n];
        for seed in 0..draws {
            let scene = sample_scene(&grid, s, MagnitudeModel::default(), seed).unwrap();
            for i in scene.support_indices() {
                counts[i] += 1.0;
            }
        }
        let expected = (draws as f64) * s as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        let p_value = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 1e-3, "chi2={chi2}, p={p_value}");
    }

    #[test]
    fn detectability_floor() {
        let grid = Grid::new(37, 37, 6, 6).unwrap();
        assert_eq!(min_amplitude(0.0, 6, 6, &grid), 0.0);
        let v = min_amplitude(1.0, 6, 6, &grid);
        // (8 sqrt 3 / 6) * sqrt(2 ln 49284) = 10.7359...
        let frozen = 8.0 * 3f64.sqrt() / 6.0 * (2.0 * 49_284f64.ln()).sqrt();
        assert!((v - frozen).abs() < 1e-12);
        assert!((v - 10.74).abs() < 5e-3);
        assert!((min_amplitude(2.0, 6, 6, &grid) - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let g = sample_geometry(2, 3, 9).unwrap();
        let back: ArrayGeometry =
            serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        let grid = Grid::new(5, 5, 2, 3).unwrap();
        let scene = sample_scene(&grid, 4, MagnitudeModel::default(), 2).unwrap();
        let json = serde_json::to_string(&scene).unwrap();
        assert!(json.contains("\"support\"") && json.contains("\"amplitudes\""));
        let back: SparseScene = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scene);
    }
}
