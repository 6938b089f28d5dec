use proptest::prelude::*;

use pansharp::simulate::{
    coregister_lowres, default_translations, procedural_scene, simulate_lowres, synthesize_pan, MixingWeights, SimulationSpec,
};
use pansharp::{Band, Grid, MultispectralImage};

fn scene(seed: u64) -> MultispectralImage {
    procedural_scene(32, 32, 3, seed).unwrap()
}

fn combine(a: &MultispectralImage, b: &MultispectralImage, wa: f64, wb: f64) -> MultispectralImage {
    let bands = a.bands().iter().zip(b.bands()).map(|(x, y)| x.zip_map(y, |p, q| wa * p + wb * q).unwrap()).collect();
    MultispectralImage::from_bands(bands).unwrap()
}

fn max_diff(a: &MultispectralImage, b: &MultispectralImage) -> f64 {
    a.to_samples().iter().zip(b.to_samples()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn bands_are_degraded_independently() {
    let spec = SimulationSpec::new(1.3, 4, MixingWeights::equal(3));
    let a = scene(1);
    let mut bands = a.bands().to_vec();
    bands[2] = Band::filled(a.grid(), 0.0);
    let b = MultispectralImage::from_bands(bands).unwrap();
    let (la, lb) = (simulate_lowres(&a, &spec, 0).unwrap(), simulate_lowres(&b, &spec, 0).unwrap());
    assert_eq!(la.band(0), lb.band(0));
    assert_eq!(la.band(1), lb.band(1));
    assert_ne!(la.band(2), lb.band(2));
}

#[test]
fn noise_has_the_requested_spread() {
    let truth = MultispectralImage::from(Band::filled(Grid::new(256, 256).unwrap(), 100.0));
    let spec = SimulationSpec::new(1.3, 4, MixingWeights::equal(1)).with_noise(2.0);
    let low = simulate_lowres(&truth, &spec, 11).unwrap();
    let d = low.band(0).data();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    assert!((mean - 100.0).abs() < 0.2, "mean {mean}");
    assert!((std - 2.0).abs() < 0.15, "std {std}");
}

#[test]
fn coregistration_inverts_the_shift_on_smooth_content() {
    let grid = Grid::new(64, 64).unwrap();
    let smooth = MultispectralImage::from_bands(
        (0..2).map(|k| Band::from_fn(grid, |r, c| 100.0 + 20.0 * ((r as f64 + k as f64) * 0.05).sin() * (c as f64 * 0.04).cos())).collect(),
    )
    .unwrap();
    let shifted = SimulationSpec::new(1.3, 4, MixingWeights::equal(2)).with_translations(vec![(0.0, 0.0), (2.0, -2.0)]);
    let low = simulate_lowres(&smooth, &shifted, 0).unwrap();
    let direct = simulate_lowres(&smooth, &shifted.clone().registered(), 0).unwrap();
    let coreg = coregister_lowres(&low, &shifted).unwrap();
    for r in 3..13 {
        for c in 3..13 {
            assert!((coreg.sample(r, c, 1) - direct.sample(r, c, 1)).abs() < 0.05);
        }
    }
}

#[test]
fn default_shifts_grow_with_band_index() {
    assert_eq!(default_translations(3), vec![(0.0, 0.0), (0.6, -0.4), (1.2, -0.8)]);
}

#[test]
fn mismatched_weights_are_rejected() {
    let truth = scene(0);
    assert!(synthesize_pan(&truth, &MixingWeights::equal(2)).is_err());
    assert!(simulate_lowres(&truth, &SimulationSpec::new(1.3, 4, MixingWeights::equal(4)), 0).is_err());
    assert!(simulate_lowres(&truth, &SimulationSpec::new(1.3, 5, MixingWeights::equal(3)), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noise_free_simulation_is_linear(s1 in 0u64..50, s2 in 50u64..100, wa in -2.0f64..2.0, wb in -2.0f64..2.0, sigma in 0.8f64..2.0) {
        let (a, b) = (scene(s1), scene(s2));
        let spec = SimulationSpec::new(sigma, 4, MixingWeights::equal(3));
        let lhs = simulate_lowres(&combine(&a, &b, wa, wb), &spec, 0).unwrap();
        let rhs = combine(&simulate_lowres(&a, &spec, 0).unwrap(), &simulate_lowres(&b, &spec, 0).unwrap(), wa, wb);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn panchromatic_is_the_mixture(seed in 0u64..100, a0 in 0.0f64..1.0, a1 in 0.0f64..1.0) {
        let truth = scene(seed);
        let alphas = MixingWeights::new(vec![a0, a1, 0.3]).unwrap();
        let pan = synthesize_pan(&truth, &alphas).unwrap();
        for p in (0..pan.data().len()).step_by(37) {
            let expected: f64 = (0..3).map(|k| alphas.as_slice()[k] * truth.band(k).data()[p]).sum();
            prop_assert!((pan.data()[p] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn scenes_are_deterministic_and_in_range(seed in 0u64..1000) {
        let (a, b) = (procedural_scene(24, 24, 2, seed).unwrap(), procedural_scene(24, 24, 2, seed).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert!(a.to_samples().iter().all(|v| (0.0..=255.0).contains(v)));
    }
}
