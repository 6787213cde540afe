//! Empirical moment operators, their weighted spectral decomposition, and
//! the truncated component-wise estimator of the autocorrelation operator
//! with its one-step plug-in predictor.
//!
//! The covariance estimate from `n` observations and the cross-covariance
//! estimate from the `n - 1` consecutive pairs are kept as coefficient
//! matrices acting on coordinate vectors. The estimator inverts the
//! covariance only on the retained spectral block: with empirical eigenpairs
//! (C_{n,j}, phi_{n,j}) and truncation level k,
//!
//! ```text
//! rho_est(x) = sum_{j <= k} (1 / C_{n,j}) <x, phi_{n,j}> P_k D_n(phi_{n,j})
//! ```
//!
//! where P_k projects onto the retained empirical eigenvectors.

use crate::error::{Error, Result};
use crate::gelfand::{inner_h_tilde, Element, SpectralModel, Weights};
use crate::linalg::{weighted_eigh, Mat};
use crate::process::Trajectory;

/// Relative threshold below which empirical eigenvalues are treated as zero.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Absolute gap under which two adjacent eigenvalues count as tied.
const TIE_TOL: f64 = 1e-14;

/// Empirical covariance and lag-one cross-covariance operators.
#[derive(Clone, Debug)]
pub struct EmpiricalMoments {
    pub c_n: Mat,
    pub d_n: Mat,
    pub n: usize,
}

/// Second-moment estimates from a trajectory: the covariance uses all rows,
/// the cross-covariance the consecutive pairs.
pub fn empirical_moments(traj: &Trajectory, w: &Weights) -> Result<EmpiricalMoments> {
    let n = traj.len();
    let m = traj.dim();
    if m != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: m,
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    let mut cov = Mat::zeros(m, m);
    let mut cross = Mat::zeros(m, m);
    for i in 0..n {
        let x = traj.row(i);
        for a in 0..m {
            for b in 0..m {
                let v = x[a] * x[b];
                cov.set(a, b, cov.get(a, b) + v);
            }
        }
        if i + 1 < n {
            let y = traj.row(i + 1);
            for a in 0..m {
                for b in 0..m {
                    cross.set(a, b, cross.get(a, b) + y[a] * x[b]);
                }
            }
        }
    }
    let ones = vec![1.0; m];
    let c_n = cov
        .scale(1.0 / n as f64)
        .conjugate_by_diags(&ones, w.t());
    let d_n = cross
        .scale(1.0 / (n - 1) as f64)
        .conjugate_by_diags(&ones, w.t());
    Ok(EmpiricalMoments { c_n, d_n, n })
}

/// Sorted empirical spectrum with eigenvectors orthonormal in the weighted
/// inner product, plus optional sign-aligned companions.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    values: Vec<f64>,
    vectors: Mat,
    aligned: Option<Mat>,
    /// Set when two adjacent eigenvalues are numerically tied; the
    /// one-dimensional-eigenspace premise is then violated in spirit.
    pub tie_warning: bool,
}

impl Eigensystem {
    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn eigenvector(&self, j: usize) -> Element {
        Element::new(self.vectors.column(j)).expect("eigenvectors are finite")
    }

    pub fn aligned(&self) -> Option<&Mat> {
        self.aligned.as_ref()
    }

    pub fn aligned_vector(&self, j: usize) -> Option<Element> {
        self.aligned
            .as_ref()
            .map(|a| Element::new(a.column(j)).expect("aligned vectors are finite"))
    }

    /// Number of eigenvalues above the rank threshold.
    pub fn rank(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    /// Fill the sign-aligned companions against a reference spectrum: the
    /// companion of eigenvector j is the reference eigenvector j carrying the
    /// sign of their weighted inner product (ties resolve to +1).
    pub fn align_to(&mut self, truth: &SpectralModel, w: &Weights) -> Result<()> {
        if truth.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: truth.dim(),
            });
        }
        let m = self.dim();
        let mut aligned = Mat::zeros(m, m);
        for j in 0..m {
            let emp = self.eigenvector(j);
            let tru = truth.eigenvector(j);
            let companion = sign_align(&emp, &tru, w)?;
            for i in 0..m {
                aligned.set(i, j, companion.coeffs()[i]);
            }
        }
        self.aligned = Some(aligned);
        Ok(())
    }
}

/// Weighted spectral decomposition of a self-adjoint nonnegative operator
/// matrix. Eigenvalues are sorted in descending order and values below the
/// relative rank threshold are set to exactly zero.
pub fn spectral_decomposition(op: &Mat, w: &Weights) -> Result<Eigensystem> {
    let (mut values, vectors) = weighted_eigh(op, w.t())?;
    let top = values.first().copied().unwrap_or(0.0);
    let threshold = RANK_REL_TOL * top.max(0.0);
    let mut tie_warning = false;
    for pair in values.windows(2) {
        if (pair[0] - pair[1]).abs() <= TIE_TOL {
            tie_warning = true;
        }
    }
    for v in values.iter_mut() {
        if *v <= threshold {
            *v = 0.0;
        }
    }
    Ok(Eigensystem {
        values,
        vectors,
        aligned: None,
        tie_warning,
    })
}

/// Sign-aligned companion of an empirical eigenvector: the reference vector
/// times the sign of the weighted inner product, with sign(0) = +1.
pub fn sign_align(emp: &Element, truth: &Element, w: &Weights) -> Result<Element> {
    let ip = inner_h_tilde(emp, truth, w)?;
    let sign = if ip >= 0.0 { 1.0 } else { -1.0 };
    Ok(truth.scale(sign))
}

/// Truncation level selection rules. Both grow without bound in `n` but are
/// clipped to the numerical rank of the empirical spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruncationRule {
    /// k = max(1, floor(c1 ln n + c0)); suits geometric eigenvalue decay.
    Log { c1: f64, c0: f64 },
    /// k = max(1, floor(n^theta)); suits polynomial eigenvalue decay.
    Power { theta: f64 },
}

impl TruncationRule {
    pub fn describe(&self) -> String {
        match self {
            TruncationRule::Log { c1, c0 } => format!("log(c1={c1},c0={c0})"),
            TruncationRule::Power { theta } => format!("power(theta={theta})"),
        }
    }

    /// Rule value before rank clipping, floored at one.
    pub fn evaluate(&self, n: usize) -> usize {
        let raw = match self {
            TruncationRule::Log { c1, c0 } => (c1 * (n as f64).ln() + c0).floor(),
            TruncationRule::Power { theta } => (n as f64).powf(*theta).floor(),
        };
        if raw < 1.0 {
            1
        } else {
            raw as usize
        }
    }
}

/// Truncation level for `n` observations: the rule value, floored at one and
/// clipped to the largest index with a strictly positive empirical
/// eigenvalue.
pub fn select_truncation(eigs: &Eigensystem, n: usize, rule: TruncationRule) -> Result<usize> {
    let rank = eigs.rank();
    if rank == 0 {
        return Err(Error::NoValidTruncation(
            "all empirical eigenvalues are zero".into(),
        ));
    }
    Ok(rule.evaluate(n).min(rank).max(1))
}

/// Truncated component-wise estimate of the autocorrelation operator.
#[derive(Clone, Debug)]
pub struct RhoEstimate {
    pub matrix: Mat,
    pub k_n: usize,
    /// Provenance: sample count, trajectory seed, rule description.
    pub n: usize,
    pub seed: u64,
    pub rule: String,
}

/// Assemble the truncated estimator from moment operators: project, apply
/// the cross-covariance, and invert the covariance on the retained spectral
/// block only.
pub fn rho_from_moments(c_op: &Mat, d_op: &Mat, w: &Weights, k: usize) -> Result<Mat> {
    let eigs = spectral_decomposition(c_op, w)?;
    rho_from_eigensystem(&eigs, d_op, w, k)
}

pub fn rho_from_eigensystem(
    eigs: &Eigensystem,
    d_op: &Mat,
    w: &Weights,
    k: usize,
) -> Result<Mat> {
    let m = eigs.dim();
    if k > eigs.rank() {
        return Err(Error::TruncationBeyondRank {
            k,
            rank: eigs.rank(),
        });
    }
    let mut proj = Mat::zeros(m, m);
    let mut block_inv = Mat::zeros(m, m);
    for j in 0..k {
        let phi = eigs.vectors().column(j);
        let value = eigs.values()[j];
        for a in 0..m {
            for b in 0..m {
                let outer = phi[a] * phi[b] * w.t()[b];
                proj.set(a, b, proj.get(a, b) + outer);
                block_inv.set(a, b, block_inv.get(a, b) + outer / value);
            }
        }
    }
    Ok(proj.matmul(d_op).matmul(&block_inv))
}

/// Full pipeline: empirical moments, decomposition, truncation rule,
/// estimator assembly.
pub fn estimate_rho(traj: &Trajectory, w: &Weights, rule: TruncationRule) -> Result<RhoEstimate> {
    let moments = empirical_moments(traj, w)?;
    let eigs = spectral_decomposition(&moments.c_n, w)?;
    let k_n = select_truncation(&eigs, moments.n, rule)?;
    let matrix = rho_from_eigensystem(&eigs, &moments.d_n, w, k_n)?;
    Ok(RhoEstimate {
        matrix,
        k_n,
        n: moments.n,
        seed: traj.seed(),
        rule: rule.describe(),
    })
}

/// One-step plug-in prediction: apply the estimated operator to the last
/// observation.
pub fn predict(est: &RhoEstimate, x: &Element) -> Result<Element> {
    Element::new(est.matrix.apply(x.coeffs())?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionVariant {
    /// Projection onto the empirical eigenvectors.
    Empirical,
    /// Projection onto the sign-aligned companions.
    Aligned,
}

/// Orthogonal projection (in the weighted inner product) onto the first `k`
/// retained eigenvectors.
pub fn project(
    x: &Element,
    eigs: &Eigensystem,
    k: usize,
    variant: ProjectionVariant,
    w: &Weights,
) -> Result<Element> {
    if k > eigs.dim() {
        return Err(Error::TruncationBeyondRank {
            k,
            rank: eigs.dim(),
        });
    }
    let mut out = Element::zero(x.len());
    for j in 0..k {
        let basis = match variant {
            ProjectionVariant::Empirical => eigs.eigenvector(j),
            ProjectionVariant::Aligned => {
                eigs.aligned_vector(j).ok_or(Error::AlignmentMissing)?
            }
        };
        let coeff = inner_h_tilde(x, &basis, w)?;
        out = out.add(&basis.scale(coeff))?;
    }
    Ok(out)
}
