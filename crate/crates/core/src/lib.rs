//! Compressive-sensing MIMO radar with randomly placed antennas.
//!
//! The crate builds the azimuth-range-Doppler sensing operator of a
//! co-located MIMO radar whose antennas sit at random positions and whose
//! transmitters send Kerdock (or other low-correlation) waveforms, recovers
//! sparse scenes with a debiased lasso, and runs Monte-Carlo campaigns that
//! check the coherence, norm and recovery guarantees of the model.
//!
//! Modules:
//! - [`waveforms`]: Kerdock and cubic-chirp families, correlation checks.
//! - [`scene_grid`]: random array geometry, grid, sparse scenes.
//! - [`sensing`]: matrix-free operator, dense oracle, diagnostics, noise.
//! - [`solver`]: accelerated lasso, support detection, debiasing, matched filter.
//! - [`harness`]: recovery campaigns, ROC curves, statistical bound checks.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cvec;
pub mod error;
pub mod harness;
pub mod rng;
pub mod scene_grid;
pub mod sensing;
pub mod solver;
pub mod waveforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
