use proptest::prelude::*;

use pansharp::baselines::{fuse_baseline, Baseline, BaselineConfig};
use pansharp::metrics::rmse;
use pansharp::simulate::{procedural_scene, simulate_lowres, synthesize_pan, MixingWeights, SimulationSpec};
use pansharp::solver::{
    lipschitz_bound, nlv_energy, nlvd_energy_terms, pansharpen_nlvd, pansharpen_nlvd_misregistered, solve_nlv, solve_nlvd_band,
    BandProblem, NlvConfig, NlvProblem, SolverConfig, StepSize,
};
use pansharp::weights::compute_weights;
use pansharp::{Band, Error, MultispectralImage, PanImage};

fn instance(seed: u64) -> (MultispectralImage, PanImage, MultispectralImage) {
    let truth = procedural_scene(32, 32, 3, seed).unwrap();
    let alphas = MixingWeights::equal(3);
    let pan = synthesize_pan(&truth, &alphas).unwrap();
    let lowres = simulate_lowres(&truth, &SimulationSpec::new(1.3, 4, alphas).registered(), 0).unwrap();
    (truth, pan, lowres)
}

fn mean_rmse(a: &MultispectralImage, b: &MultispectralImage) -> f64 {
    a.bands().iter().zip(b.bands()).map(|(x, y)| rmse(x, y).unwrap()).sum::<f64>() / a.num_bands() as f64
}

#[test]
fn fusion_beats_interpolation() {
    let (truth, pan, lowres) = instance(2);
    let (fused, _) = pansharpen_nlvd(std::slice::from_ref(&pan), &lowres, &SolverConfig::default()).unwrap();
    let bicubic = fuse_baseline(Baseline::Bicubic, &[pan], &lowres, &BaselineConfig::default()).unwrap();
    assert!(mean_rmse(&truth, &fused) < 0.8 * mean_rmse(&truth, &bicubic));
}

#[test]
fn bands_are_solved_independently() {
    let (_, pan, lowres) = instance(3);
    let cfg = SolverConfig { max_iter: 40, ..SolverConfig::default() };
    let (all, _) = pansharpen_nlvd(std::slice::from_ref(&pan), &lowres, &cfg).unwrap();
    let single = MultispectralImage::from(lowres.band(1).clone());
    let (one, _) = pansharpen_nlvd(&[pan], &single, &cfg).unwrap();
    assert_eq!(all.band(1), one.band(0));
}

#[test]
fn zero_shifts_reduce_to_the_registered_chain() {
    let (_, pan, lowres) = instance(4);
    let cfg = SolverConfig { max_iter: 25, ..SolverConfig::default() };
    let (a, _) = pansharpen_nlvd(std::slice::from_ref(&pan), &lowres, &cfg).unwrap();
    let (b, _) = pansharpen_nlvd_misregistered(&pan, &lowres, &[(0.0, 0.0); 3], &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_fixed_step_is_reported_not_fatal() {
    let (_, pan, lowres) = instance(5);
    let cfg = SolverConfig { tau: StepSize::Fixed(1.0), max_iter: 10, ..SolverConfig::default() };
    let (_, reports) = pansharpen_nlvd(&[pan], &lowres, &cfg).unwrap();
    assert!(reports.iter().all(|r| !r.converged && r.energy_trace.last() > r.energy_trace.first()));
}

#[test]
fn zero_panchromatic_is_degenerate() {
    let (_, pan, lowres) = instance(0);
    let zero = Band::zeros(pan.grid());
    assert!(matches!(pansharpen_nlvd(&[zero], &lowres, &SolverConfig::default()), Err(Error::Degenerate(_))));
}

#[test]
fn joint_model_decreases_its_energy() {
    let (_, pan, lowres) = instance(6);
    let alphas = MixingWeights::equal(3);
    let cfg = NlvConfig { max_iter: 60, ..NlvConfig::default() };
    let (_, report) = solve_nlv(&pan, &lowres, &alphas, &cfg).unwrap();
    assert!(report.energy_trace.windows(2).all(|w| w[1] <= w[0]));

    let prob = NlvProblem::new(&pan, &lowres, &alphas, &cfg.blur, &cfg.sampling).unwrap();
    let w = compute_weights(&pan, &cfg.nonlocal).unwrap();
    let start = nlv_energy(&prob.initial_guess(&cfg.sampling), &prob, &cfg, &w).unwrap();
    assert_eq!(start, report.energy_trace[0]);
    assert!(solve_nlv(&pan, &lowres, &MixingWeights::new(vec![0.5, 0.5, 0.5]).unwrap(), &cfg).is_err());
}

#[test]
fn each_term_is_nonnegative_and_the_bound_is_finite() {
    let (_, pan, lowres) = instance(7);
    let cfg = SolverConfig::default();
    let prob = BandProblem::new(&pan, lowres.band(0), &cfg.blur, &cfg.sampling).unwrap();
    let w = compute_weights(&pan, &cfg.nonlocal).unwrap();
    let terms = nlvd_energy_terms(prob.u_tilde(), &prob, &cfg, &w).unwrap();
    assert!(terms.nonlocal >= 0.0 && terms.data >= 0.0 && terms.radiometric >= 0.0);
    let l = lipschitz_bound(&prob, &cfg, &w);
    assert!(l.is_finite() && l >= 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The minimizer is linear in the spectral data, and so is every iterate
    /// started from the bicubic upsampling.
    #[test]
    fn iterates_scale_with_the_data(gain in 0.25f64..4.0, seed in 0u64..20) {
        let (_, pan, lowres) = instance(seed);
        let cfg = SolverConfig { max_iter: 15, tol: f64::MIN_POSITIVE, ..SolverConfig::default() };
        let w = compute_weights(&pan, &cfg.nonlocal).unwrap();
        let low = lowres.band(0);
        let scaled = low.map(|v| v * gain);
        let p1 = BandProblem::new(&pan, low, &cfg.blur, &cfg.sampling).unwrap();
        let p2 = BandProblem::new(&pan, &scaled, &cfg.blur, &cfg.sampling).unwrap();
        let (u1, _) = solve_nlvd_band(&p1, &cfg, &w, p1.u_tilde()).unwrap();
        let (u2, _) = solve_nlvd_band(&p2, &cfg, &w, p2.u_tilde()).unwrap();
        for (a, b) in u1.data().iter().zip(u2.data()) {
            prop_assert!((a * gain - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn auto_step_never_raises_the_energy(seed in 0u64..50, mu in 0.0f64..200.0, delta in 0.0f64..100.0) {
        let (_, pan, lowres) = instance(seed);
        let cfg = SolverConfig { mu, delta, max_iter: 30, ..SolverConfig::default() };
        let (_, reports) = pansharpen_nlvd(&[pan], &lowres, &cfg).unwrap();
        for r in reports {
            prop_assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
