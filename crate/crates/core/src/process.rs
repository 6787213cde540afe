//! Construction of stationary Banach-valued AR(1) models and trajectory
//! simulation.
//!
//! A model is specified by a target covariance spectrum, per-mode
//! autocorrelation coefficients with supremum strictly below one, and an
//! optional band coupling. Innovations are symmetric uniform per mode:
//! bounded noise keeps every trajectory almost surely bounded in the sup
//! norm, with the exact per-mode bound a_j / (1 - |rho_j|), which Gaussian
//! coefficients would violate. Innovation variances are derived from the
//! stationarity identity sigma_j^2 = C_j (1 - rho_j^2), so the theoretical
//! covariance is consistent with the dynamics by construction.

use crate::error::{Error, Result};
use crate::gelfand::{Element, SpectralModel, Weights};
use crate::linalg::{spectral_norm, weighted_eigh, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LYAPUNOV_MAX_ITER: usize = 20_000;
const CONTRACTION_MAX_POWER: usize = 64;

/// Parameters accepted by [`build_model`].
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub weights: Weights,
    /// Target covariance eigenvalues, strictly decreasing and positive.
    pub eigenvalues: Vec<f64>,
    /// Per-mode autocorrelation coefficients.
    pub rho_diag: Vec<f64>,
    /// Optional couplings: entry j feeds mode j+1 into mode j.
    pub rho_band: Option<Vec<f64>>,
    /// Validation cap for sup_j |rho_j|; must itself be below one.
    pub rho_max: f64,
    /// Eigenvector frame; defaults to the weighted coordinate directions.
    pub frame: Option<Mat>,
}

impl ModelConfig {
    /// Diagonal model with a constant autocorrelation coefficient.
    pub fn diagonal(weights: Weights, eigenvalues: Vec<f64>, rho: f64) -> Self {
        let m = weights.dim();
        ModelConfig {
            weights,
            eigenvalues,
            rho_diag: vec![rho; m],
            rho_band: None,
            rho_max: 0.95,
            frame: None,
        }
    }
}

/// A validated stationary AR(1) model on the weighted coordinate space.
#[derive(Clone, Debug)]
pub struct ArbModel {
    weights: Weights,
    spectral: SpectralModel,
    frame: Mat,
    rho_mode: Mat,
    rho_diag: Vec<f64>,
    diagonal_rho: bool,
    half_widths: Vec<f64>,
    cov_mode: Mat,
    j0: usize,
    sigma_eps2: f64,
}

impl ArbModel {
    #[inline]
    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    #[inline]
    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    /// Spectrum and eigenvector frame of the theoretical covariance operator.
    #[inline]
    pub fn spectral(&self) -> &SpectralModel {
        &self.spectral
    }

    #[inline]
    pub fn rho_diag(&self) -> &[f64] {
        &self.rho_diag
    }

    pub fn innovation_half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    /// Smallest power of the autocorrelation operator with weighted operator
    /// norm below one.
    #[inline]
    pub fn contraction_power(&self) -> usize {
        self.j0
    }

    /// Total innovation variance in the weighted norm.
    #[inline]
    pub fn innovation_variance(&self) -> f64 {
        self.sigma_eps2
    }

    pub fn sup_rho(&self) -> f64 {
        self.rho_diag.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()))
    }

    /// Coefficient matrix of the autocorrelation operator acting on
    /// coordinate vectors.
    pub fn rho_matrix(&self) -> Mat {
        let m = self.dim();
        let inner = self.frame.matmul(&self.rho_mode).matmul(&self.frame.transpose());
        inner.conjugate_by_diags(&vec![1.0; m], self.weights.t())
    }
}

fn weighted_operator_norm(op: &Mat, w: &Weights) -> f64 {
    let sqrt_t: Vec<f64> = w.t().iter().map(|t| t.sqrt()).collect();
    let inv_sqrt_t: Vec<f64> = sqrt_t.iter().map(|s| 1.0 / s).collect();
    spectral_norm(&op.conjugate_by_diags(&sqrt_t, &inv_sqrt_t))
}

/// Build a stationary model from target spectrum and autocorrelation.
pub fn build_model(cfg: ModelConfig) -> Result<ArbModel> {
    let m = cfg.weights.dim();
    if cfg.eigenvalues.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: cfg.eigenvalues.len(),
        });
    }
    if cfg.rho_diag.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: cfg.rho_diag.len(),
        });
    }
    if !(cfg.rho_max < 1.0 && cfg.rho_max > 0.0) {
        return Err(Error::NonStationary(format!(
            "autocorrelation cap must lie in (0, 1), got {}",
            cfg.rho_max
        )));
    }
    let sup_rho = cfg.rho_diag.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    if sup_rho > cfg.rho_max {
        return Err(Error::NonStationary(format!(
            "sup |rho_j| = {sup_rho} exceeds the cap {} required for a unique stationary solution",
            cfg.rho_max
        )));
    }

    let frame = match cfg.frame.clone() {
        Some(f) => f,
        None => Mat::from_fn(m, m, |i, j| {
            if i == j {
                1.0 / cfg.weights.t()[i].sqrt()
            } else {
                0.0
            }
        }),
    };
    // Validates both the strictly decreasing target spectrum and the frame's
    // orthonormality in the weighted inner product.
    let target = SpectralModel::new(cfg.eigenvalues.clone(), frame.clone(), &cfg.weights)?;

    let sigma2: Vec<f64> = cfg
        .eigenvalues
        .iter()
        .zip(&cfg.rho_diag)
        .map(|(c, r)| c * (1.0 - r * r))
        .collect();
    let half_widths: Vec<f64> = sigma2.iter().map(|s| (3.0 * s).sqrt()).collect();
    let sigma_eps2 = sigma2.iter().sum();

    let mut rho_mode = Mat::diag(&cfg.rho_diag);
    let mut banded = false;
    if let Some(band) = &cfg.rho_band {
        if band.len() != m - 1 {
            return Err(Error::DimensionMismatch {
                expected: m - 1,
                got: band.len(),
            });
        }
        if band.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("band couplings".into()));
        }
        if band.iter().any(|v| *v != 0.0) {
            banded = true;
            for (j, b) in band.iter().enumerate() {
                rho_mode.set(j, j + 1, *b);
            }
        }
    }

    // Mode-frame and coordinate-frame operators are similar via an
    // orthonormal frame, so the contraction check can run in the mode frame.
    let mut j0 = 0usize;
    let mut power = rho_mode.clone();
    for j in 1..=CONTRACTION_MAX_POWER {
        if spectral_norm(&power) < 1.0 {
            j0 = j;
            break;
        }
        power = power.matmul(&rho_mode);
    }
    if j0 == 0 {
        return Err(Error::NonStationary(format!(
            "no power up to {CONTRACTION_MAX_POWER} of the autocorrelation operator is a contraction"
        )));
    }

    let (cov_mode, spectral) = if banded {
        let q = Mat::diag(&sigma2);
        let mut cov = q.clone();
        let mut converged = false;
        for _ in 0..LYAPUNOV_MAX_ITER {
            let next = rho_mode.matmul(&cov).matmul(&rho_mode.transpose()).add(&q);
            let delta = next.sub(&cov).max_abs();
            cov = next;
            if delta <= 1e-15 * cov.max_abs().max(1e-300) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonStationary(
                "stationary covariance iteration did not converge".into(),
            ));
        }
        let cov_f = frame.matmul(&cov).matmul(&frame.transpose());
        let c_op = cov_f.conjugate_by_diags(&vec![1.0; m], cfg.weights.t());
        let (values, vectors) = weighted_eigh(&c_op, cfg.weights.t())?;
        let spectral = SpectralModel::new(values, vectors, &cfg.weights)?;
        (cov, spectral)
    } else {
        (Mat::diag(&cfg.eigenvalues), target)
    };

    Ok(ArbModel {
        weights: cfg.weights,
        spectral,
        frame,
        rho_mode,
        rho_diag: cfg.rho_diag,
        diagonal_rho: !banded,
        half_widths,
        cov_mode,
        j0,
        sigma_eps2,
    })
}

/// Simulated sample path in coordinate representation, one row per time
/// index.
#[derive(Clone, Debug)]
pub struct Trajectory {
    data: Mat,
    seed: u64,
    burn_in: usize,
}

impl Trajectory {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64, burn_in: usize) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a trajectory needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let data = Mat::from_rows(rows)?;
        if !data.is_finite() {
            return Err(Error::NonFinite("trajectory rows".into()));
        }
        Ok(Trajectory {
            data,
            seed,
            burn_in,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.data.row(i)
    }

    pub fn element(&self, i: usize) -> Element {
        Element::new(self.row(i).to_vec()).expect("trajectory rows are finite")
    }

    pub fn last_element(&self) -> Element {
        self.element(self.len() - 1)
    }
}

/// Default burn-in from the geometric forgetting rate: ten characteristic
/// times of the slowest mode, rounded up.
pub fn default_burn_in(model: &ArbModel) -> usize {
    let rho = model.sup_rho();
    (10.0 / (1.0 - rho)).ceil() as usize
}

/// Deterministic seed splitting: two keyed rounds of splitmix64 absorb the
/// stream index and the replicate index, so concurrent replicates draw from
/// disjoint, reproducible streams.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut s = master;
    let a = splitmix(&mut s);
    let mut s2 = a ^ stream.wrapping_mul(0xD134_2543_DE82_EF95);
    let b = splitmix(&mut s2);
    let mut s3 = b ^ index.wrapping_mul(0x2545_F491_4F6C_DD1D);
    splitmix(&mut s3)
}

/// Iterate the state equation from zero, discard `burn_in` steps, and record
/// `n` states. Bit-reproducible for a fixed `(seed, n, burn_in)` regardless
/// of caller parallelism: each trajectory consumes one private RNG stream in
/// a fixed order.
pub fn simulate(model: &ArbModel, n: usize, burn_in: usize, seed: u64) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "trajectory length must be at least 2, got {n}"
        )));
    }
    let m = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = vec![0.0f64; m];
    let mut next = vec![0.0f64; m];

    let bounds: Vec<f64> = model
        .half_widths
        .iter()
        .zip(&model.rho_diag)
        .map(|(a, r)| a / (1.0 - r.abs()))
        .collect();

    let mut rows = Vec::with_capacity(n);
    for step in 0..(burn_in + n) {
        for (j, nj) in next.iter_mut().enumerate() {
            let row = model.rho_mode.row(j);
            let drift: f64 = row.iter().zip(&state).map(|(a, b)| a * b).sum();
            let u: f64 = rng.random();
            *nj = drift + model.half_widths[j] * (2.0 * u - 1.0);
        }
        std::mem::swap(&mut state, &mut next);
        if model.diagonal_rho {
            for (j, s) in state.iter().enumerate() {
                debug_assert!(
                    s.abs() <= bounds[j] + 1e-9,
                    "mode {j} exceeded its almost sure bound"
                );
            }
        }
        if step >= burn_in {
            rows.push(model.frame.apply(&state)?);
        }
    }
    Trajectory::from_rows(&rows, seed, burn_in)
}

/// Theoretical covariance and lag-one cross-covariance operators as
/// coefficient matrices acting on coordinate vectors.
pub fn theoretical_moments(model: &ArbModel) -> (Mat, Mat) {
    let m = model.dim();
    let ones = vec![1.0; m];
    let cov_f = model
        .frame
        .matmul(&model.cov_mode)
        .matmul(&model.frame.transpose());
    let c_op = cov_f.conjugate_by_diags(&ones, model.weights.t());
    let cross_f = model
        .frame
        .matmul(&model.rho_mode.matmul(&model.cov_mode))
        .matmul(&model.frame.transpose());
    let d_op = cross_f.conjugate_by_diags(&ones, model.weights.t());
    (c_op, d_op)
}

/// Weighted operator norm of the model's autocorrelation operator; equals
/// sup_j |rho_j| for the diagonal construction.
pub fn rho_operator_norm(model: &ArbModel) -> f64 {
    weighted_operator_norm(&model.rho_matrix(), model.weights())
}
