//! Cross-module invariants tying the wavelet coefficient model to the norm
//! chain and the reproducing-kernel norm.

use banach_ar::gelfand::{norm, rkhs_norm, Element, Space};
use banach_ar::wavelet::{
    besov_norm, besov_spectral_model, besov_weight_tail_mass, besov_weights, BesovSpace,
    CoeffArray, WaveletBasis, WaveletFamily,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn besov_norms_match_chain_norms_on_coefficients() {
    let basis = WaveletBasis::new(WaveletFamily::Haar, 1, 3).unwrap();
    let (_, weights) = besov_weights(1, 3, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let flat: Vec<f64> = (0..basis.grid_size())
            .map(|_| rng.random::<f64>() * 6.0 - 3.0)
            .collect();
        let coeffs = CoeffArray::from_flat(&basis, &flat).unwrap();
        let x = Element::new(flat).unwrap();
        let sup = besov_norm(&coeffs, BesovSpace::InfInf0);
        let sum = besov_norm(&coeffs, BesovSpace::OneOne0);
        assert!((sup - norm(&x, &weights, Space::B).unwrap()).abs() < 1e-12);
        assert!((sum - norm(&x, &weights, Space::BStar).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn rkhs_norm_dominates_dual_norm_on_wavelet_model() {
    // Eigenvalue decay fast enough relative to the weight decay makes the
    // reproducing-kernel norm the strongest norm of the chain.
    let basis = WaveletBasis::new(WaveletFamily::Haar, 1, 2).unwrap();
    let (weights, model) = besov_spectral_model(&basis, 1.0, 3.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let f = Element::new(
            (0..weights.dim())
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect(),
        )
        .unwrap();
        let lhs = rkhs_norm(&f, &model, &weights).unwrap();
        let rhs = norm(&f, &weights, Space::HTildeStar).unwrap();
        assert!(
            lhs >= rhs - 1e-10 * rhs.max(1.0),
            "dominance violated: {lhs} < {rhs}"
        );
    }
}

#[test]
fn weight_tail_mass_matches_direct_summation() {
    let beta = 1.1;
    let j0 = 1u32;
    let j_max = 3u32;
    let closed = besov_weight_tail_mass(j0, j_max, beta).unwrap();
    // Direct evaluation over enough levels for the geometric tail to die.
    let k = (2f64.powf(2.0 * beta) - 1.0) / 2f64.powf(2.0 * beta * (1.0 - j0 as f64));
    let mut direct = 0.0;
    for j in (j_max + 1)..60 {
        direct += 2f64.powi(j as i32) * k * 2f64.powf(-2.0 * beta * j as f64);
    }
    assert!((closed - direct).abs() < 1e-12, "{closed} vs {direct}");
}
