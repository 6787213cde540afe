//! Numerical laboratory for autoregressive processes of order one taking
//! values in a separable Banach space, realized on a finite weighted
//! coordinate model.
//!
//! The crate simulates stationary Banach-valued AR(1) trajectories,
//! estimates the autocorrelation operator component-wise from the empirical
//! covariance spectrum, forms one-step plug-in predictions, and audits the
//! spectral-gap inequalities and convergence rates that back the estimator.
//!
//! - [`gelfand`]: the weighted inner product, the five-norm embedding chain,
//!   Riesz duality, and reproducing-kernel norms.
//! - [`wavelet`]: periodized multiresolution transforms on [0, 1), Besov
//!   norms, dyadic weight sequences, and the induced covariance kernel.
//! - [`process`]: model construction and trajectory simulation.
//! - [`estimator`]: empirical moments, weighted spectral decomposition,
//!   truncation selection, the component-wise operator estimator, and the
//!   plug-in predictor.
//! - [`diagnostics`]: spectral constants, operator norms, inequality audits,
//!   and Monte Carlo rate and tail experiments.

pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod gelfand;
pub mod linalg;
pub mod process;
pub mod wavelet;

pub use error::{Error, Result};
pub use gelfand::{Element, Space, SpectralModel, Weights};
pub use linalg::Mat;
