//! Weighted coordinate model of a separable Banach space embedded in a
//! Hilbert scale.
//!
//! A point is represented by its first `M` coordinate-functional values. The
//! weighted inner product `<x, y> = sum_m t_m x_m y_m`, with positive weights
//! summing to one, generates the weakest norm of the chain; raising or
//! lowering the weight powers produces the five norms
//!
//! ```text
//! ||x||_ht   = sqrt(sum t_m x_m^2)     (weighted Hilbert space)
//! ||x||_b    = sup_m |x_m|             (Banach sup norm)
//! ||x||_h    = sqrt(sum x_m^2)         (unweighted Hilbert space)
//! ||x||_bs   = sum_m |x_m|             (dual of the sup norm)
//! ||x||_hts  = sqrt(sum x_m^2 / t_m)   (dual weighted space)
//! ```
//!
//! which embed continuously in that order. The truncation at `M` coordinates
//! replaces the countable coordinate system; every downstream quantity is a
//! function of finitely many coefficients at this scale.

use crate::error::{Error, Result};
use crate::linalg::Mat;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-10;

/// Positive coordinate weights summing to one.
///
/// Raw weight sequences (for example the dyadic wavelet weights) are
/// renormalized at construction: rescaling only rescales the weighted inner
/// product uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    t: Vec<f64>,
}

impl Weights {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::InvalidWeights(format!(
                "need at least 2 weights, got {}",
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidWeights(
                "all weights must be finite and strictly positive".into(),
            ));
        }
        let mass: f64 = raw.iter().sum();
        let t: Vec<f64> = raw.iter().map(|v| v / mass).collect();
        let sum: f64 = t.iter().sum();
        debug_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
        Ok(Weights { t })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Weights::new(vec![1.0; m.max(1)])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.t.len()
    }

    #[inline]
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn min_weight(&self) -> f64 {
        self.t.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.t.len() {
            return Err(Error::DimensionMismatch {
                expected: self.t.len(),
                got: len,
            });
        }
        Ok(())
    }
}

/// A point of the coordinate model: the vector of coordinate-functional
/// values.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    coeffs: Vec<f64>,
}

impl Element {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("element coefficients".into()));
        }
        Ok(Element { coeffs })
    }

    pub fn zero(m: usize) -> Self {
        Element {
            coeffs: vec![0.0; m],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn add(&self, other: &Element) -> Result<Element> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Element::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Element) -> Result<Element> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Element::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Element {
        Element {
            coeffs: self.coeffs.iter().map(|v| v * factor).collect(),
        }
    }
}

/// The five norms of the embedding chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// Sup norm.
    B,
    /// Weighted Hilbert norm.
    HTilde,
    /// Unweighted Hilbert norm.
    H,
    /// Sum norm (dual of B).
    BStar,
    /// Inverse-weighted Hilbert norm (dual of HTilde).
    HTildeStar,
}

/// Norm of an element in one of the chain spaces.
pub fn norm(x: &Element, w: &Weights, space: Space) -> Result<f64> {
    w.check_dim(x.len())?;
    let c = x.coeffs();
    let value = match space {
        Space::B => c.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
        Space::HTilde => c
            .iter()
            .zip(w.t())
            .map(|(v, t)| t * v * v)
            .sum::<f64>()
            .sqrt(),
        Space::H => c.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Space::BStar => c.iter().map(|v| v.abs()).sum(),
        Space::HTildeStar => c
            .iter()
            .zip(w.t())
            .map(|(v, t)| v * v / t)
            .sum::<f64>()
            .sqrt(),
    };
    Ok(value)
}

/// Weighted inner product `sum_m t_m x_m y_m`.
pub fn inner_h_tilde(x: &Element, y: &Element, w: &Weights) -> Result<f64> {
    w.check_dim(x.len())?;
    w.check_dim(y.len())?;
    Ok(x.coeffs()
        .iter()
        .zip(y.coeffs())
        .zip(w.t())
        .map(|((a, b), t)| t * a * b)
        .sum())
}

/// Dual inner product `sum_m x_m y_m / t_m`.
pub fn inner_h_tilde_star(x: &Element, y: &Element, w: &Weights) -> Result<f64> {
    w.check_dim(x.len())?;
    w.check_dim(y.len())?;
    Ok(x.coeffs()
        .iter()
        .zip(y.coeffs())
        .zip(w.t())
        .map(|((a, b), t)| a * b / t)
        .sum())
}

/// Riesz duality map in coordinates: the dual representer of `f` has
/// coordinates `t_m f_m`, so that dual pairings of images reproduce the
/// weighted inner product of the sources.
pub fn riesz_map(f: &Element, w: &Weights) -> Result<Element> {
    w.check_dim(f.len())?;
    Element::new(
        f.coeffs()
            .iter()
            .zip(w.t())
            .map(|(v, t)| t * v)
            .collect(),
    )
}

/// Strictly decreasing positive spectrum together with an orthonormal
/// eigenvector frame for the weighted inner product.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors in coordinate representation.
    vectors: Mat,
}

impl SpectralModel {
    pub fn new(eigenvalues: Vec<f64>, vectors: Mat, w: &Weights) -> Result<Self> {
        let m = w.dim();
        if eigenvalues.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: eigenvalues.len(),
            });
        }
        if vectors.rows() != m || vectors.cols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: vectors.rows().max(vectors.cols()),
            });
        }
        for (j, pair) in eigenvalues.windows(2).enumerate() {
            if !(pair[0] > pair[1]) {
                return Err(Error::EigenvaluesNotDistinct(format!(
                    "values at positions {} and {} are {} and {}",
                    j + 1,
                    j + 2,
                    pair[0],
                    pair[1]
                )));
            }
        }
        if eigenvalues.last().copied().unwrap_or(0.0) <= 0.0 {
            return Err(Error::EigenvaluesNotDistinct(
                "smallest eigenvalue must be strictly positive".into(),
            ));
        }
        // Gram matrix in the weighted inner product must be the identity.
        let mut max_err = 0.0_f64;
        for a in 0..m {
            for b in 0..m {
                let mut g = 0.0;
                for i in 0..m {
                    g += w.t()[i] * vectors.get(i, a) * vectors.get(i, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                max_err = max_err.max((g - target).abs());
            }
        }
        if max_err > GRAM_TOL {
            return Err(Error::InvalidParameter(format!(
                "eigenvector frame is not orthonormal in the weighted inner product (error {max_err:.3e})"
            )));
        }
        Ok(SpectralModel {
            eigenvalues,
            vectors,
        })
    }

    /// The diagonal realization: eigenvector `j` is the `j`-th coordinate
    /// direction normalized in the weighted inner product.
    pub fn diagonal(eigenvalues: Vec<f64>, w: &Weights) -> Result<Self> {
        let m = w.dim();
        let vectors = Mat::from_fn(m, m, |i, j| {
            if i == j {
                1.0 / w.t()[i].sqrt()
            } else {
                0.0
            }
        });
        SpectralModel::new(eigenvalues, vectors, w)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    #[inline]
    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn eigenvector(&self, j: usize) -> Element {
        Element {
            coeffs: self.vectors.column(j),
        }
    }
}

/// Norm in the reproducing kernel space generated by the spectrum: the
/// squared norm is the sum of squared weighted projections divided by the
/// eigenvalues. Returns infinity if mass falls on a non-positive eigenvalue
/// direction (impossible for a validated model).
pub fn rkhs_norm(f: &Element, model: &SpectralModel, w: &Weights) -> Result<f64> {
    w.check_dim(f.len())?;
    if model.dim() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            got: model.dim(),
        });
    }
    let mut total = 0.0;
    for j in 0..model.dim() {
        let phi = model.eigenvector(j);
        let proj = inner_h_tilde(f, &phi, w)?;
        let c_j = model.eigenvalues()[j];
        if c_j <= 0.0 {
            if proj.abs() > 1e-12 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        total += proj * proj / c_j;
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_weights() -> Weights {
        Weights::new(vec![0.5, 0.3, 0.2]).unwrap()
    }

    fn example_element() -> Element {
        Element::new(vec![0.5, -1.0, 0.25]).unwrap()
    }

    #[test]
    fn norm_examples() {
        let w = example_weights();
        let x = example_element();
        assert_eq!(norm(&x, &w, Space::B).unwrap(), 1.0);
        // sum t_m x_m^2 = 0.5*0.25 + 0.3*1 + 0.2*0.0625 = 0.4375
        let expected_ht = 0.4375_f64.sqrt();
        assert!((norm(&x, &w, Space::HTilde).unwrap() - expected_ht).abs() < 1e-15);
        assert!((expected_ht - 0.661438).abs() < 1e-6);
        // sum x_m^2 / t_m = 0.25/0.5 + 1/0.3 + 0.0625/0.2
        let expected_hts = (0.25 / 0.5 + 1.0 / 0.3 + 0.0625 / 0.2_f64).sqrt();
        assert!((norm(&x, &w, Space::HTildeStar).unwrap() - expected_hts).abs() < 1e-15);
        assert!((expected_hts - 2.036131).abs() < 1e-6);
    }

    #[test]
    fn norm_rejects_dimension_mismatch() {
        let w = example_weights();
        let x = Element::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            norm(&x, &w, Space::B),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn riesz_examples() {
        let w = example_weights();
        let f = Element::new(vec![1.0, 0.0, 0.0]).unwrap();
        let fs = riesz_map(&f, &w).unwrap();
        assert_eq!(fs.coeffs(), &[0.5, 0.0, 0.0]);
        let ns2 = norm(&fs, &w, Space::HTildeStar).unwrap().powi(2);
        let n2 = norm(&f, &w, Space::HTilde).unwrap().powi(2);
        assert!((ns2 - 0.5).abs() < 1e-15);
        assert!((ns2 - n2).abs() < 1e-15);

        let zero = Element::zero(3);
        assert_eq!(riesz_map(&zero, &w).unwrap(), zero);
    }

    #[test]
    fn rkhs_norm_examples() {
        let w = example_weights();
        let model = SpectralModel::diagonal(vec![0.5, 0.25, 0.125], &w).unwrap();
        let f = Element::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!((rkhs_norm(&f, &model, &w).unwrap() - 1.0).abs() < 1e-12);

        let phi1 = model.eigenvector(0);
        let expected = 1.0 / 0.5_f64.sqrt();
        assert!((rkhs_norm(&phi1, &model, &w).unwrap() - expected).abs() < 1e-12);

        assert_eq!(rkhs_norm(&Element::zero(3), &model, &w).unwrap(), 0.0);
    }

    #[test]
    fn spectral_model_rejects_repeated_eigenvalues() {
        let w = example_weights();
        assert!(matches!(
            SpectralModel::diagonal(vec![0.5, 0.5, 0.2], &w),
            Err(Error::EigenvaluesNotDistinct(_))
        ));
    }

    #[test]
    fn weights_renormalize_and_validate() {
        let w = Weights::new(vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(w.t(), &[0.5, 0.25, 0.25]);
        assert!(Weights::new(vec![1.0]).is_err());
        assert!(Weights::new(vec![1.0, -0.5]).is_err());
        assert!(Weights::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn element_rejects_non_finite() {
        assert!(Element::new(vec![1.0, f64::INFINITY]).is_err());
    }

    fn arb_weights(m: usize) -> impl Strategy<Value = Weights> {
        proptest::collection::vec(1e-3..1.0_f64, m).prop_map(|raw| Weights::new(raw).unwrap())
    }

    fn arb_element(m: usize) -> impl Strategy<Value = Element> {
        proptest::collection::vec(-10.0..10.0_f64, m).prop_map(|c| Element::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn embedding_chain_holds((w, x) in (2usize..12).prop_flat_map(|m| (arb_weights(m), arb_element(m)))) {
            let n_ht = norm(&x, &w, Space::HTilde).unwrap();
            let n_b = norm(&x, &w, Space::B).unwrap();
            let n_h = norm(&x, &w, Space::H).unwrap();
            let n_bs = norm(&x, &w, Space::BStar).unwrap();
            let n_hts = norm(&x, &w, Space::HTildeStar).unwrap();
            let slack = |rhs: f64| rhs + 1e-12 * rhs.max(1.0);
            prop_assert!(n_ht <= slack(n_b));
            prop_assert!(n_b <= slack(n_h));
            prop_assert!(n_h <= slack(n_bs));
            prop_assert!(n_bs <= slack(n_hts));
        }

        #[test]
        fn riesz_map_is_isometry((w, f, g) in (2usize..10).prop_flat_map(|m| (arb_weights(m), arb_element(m), arb_element(m)))) {
            let fs = riesz_map(&f, &w).unwrap();
            let gs = riesz_map(&g, &w).unwrap();
            let lhs = inner_h_tilde_star(&fs, &gs, &w).unwrap();
            let rhs = inner_h_tilde(&f, &g, &w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn weighted_norm_dominated_by_sup((w, x) in (2usize..10).prop_flat_map(|m| (arb_weights(m), arb_element(m)))) {
            let n_ht = norm(&x, &w, Space::HTilde).unwrap();
            let n_b = norm(&x, &w, Space::B).unwrap();
            prop_assert!(n_ht * n_ht <= n_b * n_b + 1e-12 * (n_b * n_b).max(1.0));
        }
    }
}
