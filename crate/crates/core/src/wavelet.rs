//! Periodized multiresolution analysis on the dyadic grid of [0, 1).
//!
//! The transform is the orthonormal-convention pyramid: a signal of length
//! 2^(J_max+1) decomposes into 2^J coarse scaling coefficients and one detail
//! block of length 2^j per level j = J..=J_max. Periodization replaces
//! boundary-corrected filter constructions; on dyadic grids the coefficient
//! combinatorics and every norm below are identical, and the filter bank
//! stays exactly orthonormal under wrap-around.
//!
//! On top of the transform this module provides the smoothness-zero Besov
//! norms (sup and sum of coefficient magnitudes), the dyadic weight sequence
//! that turns the coefficient model into a weighted coordinate space, the
//! associated covariance kernel in closed form for the Haar family, and a
//! Bessel-potential-style eigenvalue profile for building covariance spectra.

use crate::error::{Error, Result};
use crate::gelfand::{SpectralModel, Weights};
use crate::linalg::Mat;

/// Tie-breaking perturbation applied to the eigenvalue profile so that the
/// generated spectrum is strictly decreasing.
const EIGEN_TIE_EPS: f64 = 1e-6;

// Lowpass analysis filters. The highpass is the quadrature mirror
// g_i = (-1)^i h_{L-1-i}.
const HAAR: [f64; 2] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
];

const DB4: [f64; 4] = [
    0.482_962_913_144_690_25,
    0.836_516_303_737_807_9,
    0.224_143_868_041_857_35,
    -0.129_409_522_550_921_45,
];

const DB8: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Orthonormal wavelet family with periodized boundary handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    /// Daubechies with 4 filter taps (2 vanishing moments).
    Daubechies4,
    /// Daubechies with 8 filter taps (4 vanishing moments).
    Daubechies8,
}

impl WaveletFamily {
    pub fn lowpass(&self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR,
            WaveletFamily::Daubechies4 => &DB4,
            WaveletFamily::Daubechies8 => &DB8,
        }
    }

    pub fn filter_len(&self) -> usize {
        self.lowpass().len()
    }

    pub fn highpass(&self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|i| if i % 2 == 0 { h[l - 1 - i] } else { -h[l - 1 - i] })
            .collect()
    }
}

/// Dyadic multiresolution layout: coarsest level, finest level, and the
/// implied sample grid of size 2^(J_max + 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WaveletBasis {
    family: WaveletFamily,
    j_coarse: u32,
    j_max: u32,
}

impl WaveletBasis {
    pub fn new(family: WaveletFamily, j_coarse: u32, j_max: u32) -> Result<Self> {
        if j_max < j_coarse {
            return Err(Error::InvalidParameter(format!(
                "finest level {j_max} must be at least the coarsest level {j_coarse}"
            )));
        }
        if j_max > 24 {
            return Err(Error::InvalidParameter(format!(
                "finest level {j_max} exceeds the supported range"
            )));
        }
        // The shortest signal reached by the pyramid must cover the filter.
        if (1usize << (j_coarse + 1)) < family.filter_len() {
            return Err(Error::InvalidParameter(format!(
                "coarsest level {} too low for a {}-tap filter",
                j_coarse,
                family.filter_len()
            )));
        }
        Ok(WaveletBasis {
            family,
            j_coarse,
            j_max,
        })
    }

    #[inline]
    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    #[inline]
    pub fn j_coarse(&self) -> u32 {
        self.j_coarse
    }

    #[inline]
    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    #[inline]
    pub fn grid_size(&self) -> usize {
        1usize << (self.j_max + 1)
    }

    /// Number of detail levels (j = J ..= J_max).
    pub fn level_count(&self) -> usize {
        (self.j_max - self.j_coarse + 1) as usize
    }
}

/// Coefficients of one expansion: 2^J scaling coefficients followed by one
/// detail block per level.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffArray {
    j_coarse: u32,
    alpha: Vec<f64>,
    /// details[l] holds level j_coarse + l and has length 2^(j_coarse + l).
    details: Vec<Vec<f64>>,
}

impl CoeffArray {
    pub fn new(j_coarse: u32, alpha: Vec<f64>, details: Vec<Vec<f64>>) -> Result<Self> {
        if alpha.len() != 1usize << j_coarse {
            return Err(Error::DimensionMismatch {
                expected: 1usize << j_coarse,
                got: alpha.len(),
            });
        }
        for (l, d) in details.iter().enumerate() {
            let expected = 1usize << (j_coarse + l as u32);
            if d.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: d.len(),
                });
            }
        }
        let arr = CoeffArray {
            j_coarse,
            alpha,
            details,
        };
        if !arr.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("wavelet coefficients".into()));
        }
        Ok(arr)
    }

    #[inline]
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Detail block of level `j`.
    pub fn detail(&self, j: u32) -> Option<&[f64]> {
        let l = j.checked_sub(self.j_coarse)? as usize;
        self.details.get(l).map(|d| d.as_slice())
    }

    pub fn details(&self) -> &[Vec<f64>] {
        &self.details
    }

    pub fn total_len(&self) -> usize {
        self.alpha.len() + self.details.iter().map(|d| d.len()).sum::<usize>()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.alpha
            .iter()
            .copied()
            .chain(self.details.iter().flatten().copied())
    }

    /// Flat layout: scaling coefficients first, then detail levels in
    /// ascending level order. This ordering matches the weight sequence of
    /// [`besov_weights`].
    pub fn flatten(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn from_flat(basis: &WaveletBasis, flat: &[f64]) -> Result<Self> {
        if flat.len() != basis.grid_size() {
            return Err(Error::DimensionMismatch {
                expected: basis.grid_size(),
                got: flat.len(),
            });
        }
        let n_alpha = 1usize << basis.j_coarse();
        let alpha = flat[..n_alpha].to_vec();
        let mut details = Vec::with_capacity(basis.level_count());
        let mut offset = n_alpha;
        for j in basis.j_coarse()..=basis.j_max() {
            let len = 1usize << j;
            details.push(flat[offset..offset + len].to_vec());
            offset += len;
        }
        CoeffArray::new(basis.j_coarse(), alpha, details)
    }

    /// Two-line CSV: a header naming each cell by level and shift
    /// (`s{J}_{k}` for scaling, `d{j}_{k}` for detail coefficients) and one
    /// row of values. Values use the shortest lossless float notation.
    pub fn to_csv(&self) -> String {
        let mut header = Vec::with_capacity(self.total_len());
        for k in 0..self.alpha.len() {
            header.push(format!("s{}_{k}", self.j_coarse));
        }
        for (l, d) in self.details.iter().enumerate() {
            let j = self.j_coarse + l as u32;
            for k in 0..d.len() {
                header.push(format!("d{j}_{k}"));
            }
        }
        let values: Vec<String> = self.iter().map(|v| format!("{v:?}")).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }

    pub fn from_csv(basis: &WaveletBasis, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("empty coefficient CSV".into()))?;
        let row = lines
            .next()
            .ok_or_else(|| Error::InvalidParameter("coefficient CSV has no value row".into()))?;
        let expected = CoeffArray::from_flat(basis, &vec![0.0; basis.grid_size()])?.to_csv();
        let expected_header = expected.lines().next().unwrap();
        if header != expected_header {
            return Err(Error::InvalidParameter(format!(
                "coefficient CSV header does not match the {}-cell layout",
                basis.grid_size()
            )));
        }
        let flat = row
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("bad value `{v}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        CoeffArray::from_flat(basis, &flat)
    }
}

/// Grid samples in the same two-line CSV shape, cells named by grid index.
pub fn samples_to_csv(samples: &[f64]) -> String {
    let header: Vec<String> = (0..samples.len()).map(|i| format!("g{i}")).collect();
    let values: Vec<String> = samples.iter().map(|v| format!("{v:?}")).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

pub fn samples_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    let _header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty sample CSV".into()))?;
    let row = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("sample CSV has no value row".into()))?;
    row.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad value `{v}`: {e}")))
        })
        .collect()
}

fn analyze_step(v: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (i, (&hi, &gi)) in h.iter().zip(g).enumerate() {
            let x = v[(2 * k + i) % n];
            a += hi * x;
            d += gi * x;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

fn synthesize_step(approx: &[f64], detail: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let mut out = vec![0.0; n];
    for k in 0..half {
        let a = approx[k];
        let d = detail[k];
        for (i, (&hi, &gi)) in h.iter().zip(g).enumerate() {
            out[(2 * k + i) % n] += hi * a + gi * d;
        }
    }
    out
}

/// Forward transform of a sample vector on the dyadic grid.
pub fn dwt(samples: &[f64], basis: &WaveletBasis) -> Result<CoeffArray> {
    if samples.len() != basis.grid_size() {
        return Err(Error::DimensionMismatch {
            expected: basis.grid_size(),
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input samples".into()));
    }
    let h = basis.family().lowpass();
    let g = basis.family().highpass();
    let mut v = samples.to_vec();
    let mut details_rev = Vec::with_capacity(basis.level_count());
    for _j in (basis.j_coarse()..=basis.j_max()).rev() {
        let (approx, detail) = analyze_step(&v, h, &g);
        details_rev.push(detail);
        v = approx;
    }
    details_rev.reverse();
    CoeffArray::new(basis.j_coarse(), v, details_rev)
}

/// Inverse transform, the synthesis adjoint of [`dwt`].
pub fn idwt(coeffs: &CoeffArray, basis: &WaveletBasis) -> Result<Vec<f64>> {
    if coeffs.j_coarse != basis.j_coarse()
        || coeffs.details.len() != basis.level_count()
        || coeffs.total_len() != basis.grid_size()
    {
        return Err(Error::DimensionMismatch {
            expected: basis.grid_size(),
            got: coeffs.total_len(),
        });
    }
    let h = basis.family().lowpass();
    let g = basis.family().highpass();
    let mut v = coeffs.alpha.clone();
    for d in &coeffs.details {
        v = synthesize_step(&v, d, h, &g);
    }
    Ok(v)
}

/// Level weight applied to every detail coefficient at level j, for the
/// dyadic weight sequence with decay exponent `beta_exp`.
fn detail_weight(j: u32, j_coarse: u32, beta_exp: f64) -> f64 {
    let k = (2f64.powf(2.0 * beta_exp) - 1.0)
        / 2f64.powf(2.0 * beta_exp * (1.0 - j_coarse as f64));
    k * 2f64.powf(-2.0 * beta_exp * j as f64)
}

/// Raw dyadic weight sequence for the coefficient layout of `CoeffArray`:
/// 2^-J on each scaling index and a 2^(-2 j beta) decay across detail levels.
///
/// Returns the raw sequence together with its mass-one normalization (the
/// raw sequence has total mass above one, so the normalized version is what
/// feeds the weighted inner product).
pub fn besov_weights(j_coarse: u32, j_max: u32, beta_exp: f64) -> Result<(Vec<f64>, Weights)> {
    if !(beta_exp > 0.5) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must exceed 1/2 for a summable sequence, got {beta_exp}"
        )));
    }
    if j_max < j_coarse {
        return Err(Error::InvalidParameter(
            "finest level below coarsest level".into(),
        ));
    }
    let mut raw = vec![2f64.powi(-(j_coarse as i32)); 1usize << j_coarse];
    for j in j_coarse..=j_max {
        let w = detail_weight(j, j_coarse, beta_exp);
        raw.extend(std::iter::repeat(w).take(1usize << j));
    }
    let weights = Weights::new(raw.clone())?;
    Ok((raw, weights))
}

/// Mass of the raw weight sequence discarded by truncating the detail levels
/// at `j_max`.
pub fn besov_weight_tail_mass(j_coarse: u32, j_max: u32, beta_exp: f64) -> Result<f64> {
    if !(beta_exp > 0.5) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must exceed 1/2, got {beta_exp}"
        )));
    }
    // sum_{j > j_max} 2^j * K * 2^(-2 j beta), a geometric tail with ratio
    // 2^(1 - 2 beta) < 1.
    let k = (2f64.powf(2.0 * beta_exp) - 1.0)
        / 2f64.powf(2.0 * beta_exp * (1.0 - j_coarse as f64));
    let ratio = 2f64.powf(1.0 - 2.0 * beta_exp);
    let first = 2f64.powf((j_max as f64 + 1.0) * (1.0 - 2.0 * beta_exp));
    Ok(k * first / (1.0 - ratio))
}

/// Smoothness-zero Besov norms defined directly on the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesovSpace {
    /// Sup of all coefficient magnitudes (p = q = infinity).
    InfInf0,
    /// Sum of all coefficient magnitudes (p = q = 1).
    OneOne0,
}

pub fn besov_norm(coeffs: &CoeffArray, space: BesovSpace) -> f64 {
    match space {
        BesovSpace::InfInf0 => coeffs.iter().fold(0.0, |acc, v| acc.max(v.abs())),
        BesovSpace::OneOne0 => coeffs.iter().map(|v| v.abs()).sum(),
    }
}

fn haar_scaling(j: u32, k: usize, s: f64) -> f64 {
    let scale = 2f64.powi(j as i32);
    let x = s * scale - k as f64;
    if (0.0..1.0).contains(&x) {
        scale.sqrt()
    } else {
        0.0
    }
}

fn haar_wavelet(j: u32, k: usize, s: f64) -> f64 {
    let scale = 2f64.powi(j as i32);
    let x = s * scale - k as f64;
    if (0.0..0.5).contains(&x) {
        scale.sqrt()
    } else if (0.5..1.0).contains(&x) {
        -scale.sqrt()
    } else {
        0.0
    }
}

/// Pointwise evaluation of the covariance kernel induced by the raw weight
/// sequence, truncated at the basis' finest level:
///
/// ```text
/// t(s, u) = 2^-J sum_k phi_{J,k}(s) phi_{J,k}(u)
///         + K sum_{j=J}^{J_max} 2^(-2 j beta) sum_k psi_{j,k}(s) psi_{j,k}(u)
/// ```
///
/// Closed-form evaluation is implemented for the Haar family only.
pub fn kernel_eval(s: f64, t_pt: f64, basis: &WaveletBasis, beta_exp: f64) -> Result<f64> {
    if basis.family() != WaveletFamily::Haar {
        return Err(Error::Unsupported(
            "pointwise kernel evaluation needs the Haar family".into(),
        ));
    }
    if !(0.0..1.0).contains(&s) || !(0.0..1.0).contains(&t_pt) {
        return Err(Error::InvalidParameter(format!(
            "kernel arguments must lie in [0, 1), got ({s}, {t_pt})"
        )));
    }
    if !(beta_exp > 0.5) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must exceed 1/2, got {beta_exp}"
        )));
    }
    let j0 = basis.j_coarse();
    let mut total = 0.0;
    let scaling_weight = 2f64.powi(-(j0 as i32));
    for k in 0..(1usize << j0) {
        total += scaling_weight * haar_scaling(j0, k, s) * haar_scaling(j0, k, t_pt);
    }
    for j in j0..=basis.j_max() {
        let w = detail_weight(j, j0, beta_exp);
        for k in 0..(1usize << j) {
            total += w * haar_wavelet(j, k, s) * haar_wavelet(j, k, t_pt);
        }
    }
    Ok(total)
}

/// Eigenvalue profile mimicking a negative fractional power of the
/// Laplacian-plus-identity: every index at level j receives c0 * 2^(-2 gamma j),
/// a strictly decreasing tie-break of relative size `EIGEN_TIE_EPS` per
/// coefficient index separates equal level values, and the result is sorted
/// in descending order.
pub fn bessel_eigen_profile(gamma: f64, basis: &WaveletBasis, c0: f64) -> Result<Vec<f64>> {
    Ok(bessel_profile_indexed(gamma, basis, c0)?
        .into_iter()
        .map(|(_, v)| v)
        .collect())
}

/// Same profile keeping the coefficient index each eigenvalue belongs to.
fn bessel_profile_indexed(
    gamma: f64,
    basis: &WaveletBasis,
    c0: f64,
) -> Result<Vec<(usize, f64)>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "profile exponent must be positive, got {gamma}"
        )));
    }
    if !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "profile scale must be positive, got {c0}"
        )));
    }
    let j0 = basis.j_coarse();
    let mut values = Vec::with_capacity(basis.grid_size());
    let mut m = 0usize;
    for _ in 0..(1usize << j0) {
        let base = c0 * 2f64.powf(-2.0 * gamma * j0 as f64);
        values.push((m, base * (1.0 + m as f64 * EIGEN_TIE_EPS)));
        m += 1;
    }
    for j in j0..=basis.j_max() {
        let base = c0 * 2f64.powf(-2.0 * gamma * j as f64);
        for _ in 0..(1usize << j) {
            values.push((m, base * (1.0 + m as f64 * EIGEN_TIE_EPS)));
            m += 1;
        }
    }
    values.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    for pair in values.windows(2) {
        if !(pair[0].1 > pair[1].1) {
            return Err(Error::EigenvaluesNotDistinct(format!(
                "profile produced a tie at value {}",
                pair[0].1
            )));
        }
    }
    Ok(values)
}

/// Wavelet-weighted covariance model: the normalized dyadic weights together
/// with the diagonal spectral model whose eigenvalues follow the
/// Bessel-potential profile. Choosing `gamma` at least twice `beta_exp` (with
/// a moderate scale) makes the reproducing-kernel norm dominate the dual
/// weighted norm on the span of the frame.
pub fn besov_spectral_model(
    basis: &WaveletBasis,
    beta_exp: f64,
    gamma: f64,
    c0: f64,
) -> Result<(Weights, SpectralModel)> {
    let (_, weights) = besov_weights(basis.j_coarse(), basis.j_max(), beta_exp)?;
    let indexed = bessel_profile_indexed(gamma, basis, c0)?;
    let m = weights.dim();
    let eigenvalues: Vec<f64> = indexed.iter().map(|(_, v)| *v).collect();
    let mut vectors = Mat::zeros(m, m);
    for (col, (coord, _)) in indexed.iter().enumerate() {
        vectors.set(*coord, col, 1.0 / weights.t()[*coord].sqrt());
    }
    let model = SpectralModel::new(eigenvalues, vectors, &weights)?;
    Ok((weights, model))
}
