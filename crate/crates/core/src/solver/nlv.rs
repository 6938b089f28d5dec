//! Coupled nonlocal variational fusion of all bands at once.
//!
//! ```text
//! J(u) = 1/2 sum_k sum_{p,q} (u_k(q) - u_k(p))^2 w(p, q)
//!      + (lambda / 2) |sum_k alpha_k u_k - P|^2
//!      + (mu / 2) sum_k |D K u_k - lowres_k|^2
//! ```
//!
//! The weights come from the single panchromatic `P`; the bands are coupled
//! through the spectral mixing term. Bands must be co-registered with `P`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{descend, DescentState, SolveReport, StepSize};
use crate::error::{invalid, Result};
use crate::raster::{Band, MultispectralImage, PanImage};
use crate::sampling::{bicubic_upsample_phased, BlurDecimate, BlurSpec, SamplingSpec};
use crate::simulate::MixingWeights;
use crate::weights::{apply_nonlocal_operator, compute_weights, nonlocal_energy, NonlocalConfig, WeightField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlvConfig {
    pub lambda: f64,
    pub mu: f64,
    pub nonlocal: NonlocalConfig,
    pub blur: BlurSpec,
    pub sampling: SamplingSpec,
    pub tau: StepSize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NlvConfig {
    fn default() -> Self {
        NlvConfig {
            lambda: 1.0,
            mu: 50.0,
            nonlocal: NonlocalConfig::default(),
            blur: BlurSpec { sigma: 1.3, radius: 4 },
            sampling: SamplingSpec { factor: 4, phase: (0, 0) },
            tau: StepSize::Auto,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

impl NlvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("lambda and mu must be non-negative, got {} and {}", self.lambda, self.mu)));
        }
        if let StepSize::Fixed(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("step size must be positive, got {t}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        self.nonlocal.validate()?;
        self.sampling.validate()?;
        BlurSpec::with_radius(self.blur.sigma, self.blur.radius)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NlvProblem {
    pan: PanImage,
    lowres: MultispectralImage,
    alphas: Vec<f64>,
    operator: BlurDecimate,
}

impl NlvProblem {
    pub fn new(pan: &PanImage, lowres: &MultispectralImage, alphas: &MixingWeights, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Self> {
        sampling.validate()?;
        alphas.require_simplex()?;
        if alphas.len() != lowres.num_bands() {
            return Err(invalid(format!("{} mixing weights for {} bands", alphas.len(), lowres.num_bands())));
        }
        let expected = lowres.grid().upscaled(sampling.factor);
        if pan.grid() != expected {
            return Err(invalid(format!("panchromatic is {} but the bands need {expected}", pan.grid())));
        }
        Ok(NlvProblem {
            pan: pan.clone(),
            lowres: lowres.clone(),
            alphas: alphas.as_slice().to_vec(),
            operator: BlurDecimate::new(pan.grid(), blur, sampling)?,
        })
    }

    /// Bicubic upsampling of every band, the starting point of the descent.
    pub fn initial_guess(&self, sampling: &SamplingSpec) -> MultispectralImage {
        let bands = self.lowres.bands().iter().map(|b| bicubic_upsample_phased(b, sampling)).collect();
        MultispectralImage::from_bands(bands).expect("bands share a grid")
    }

    fn check(&self, u: &MultispectralImage) -> Result<()> {
        if u.grid() != self.pan.grid() || u.num_bands() != self.alphas.len() {
            return Err(invalid(format!(
                "expected {} bands on {}, got {} on {}",
                self.alphas.len(),
                self.pan.grid(),
                u.num_bands(),
                u.grid()
            )));
        }
        Ok(())
    }

    fn mixing_residual(&self, bands: &[Band]) -> Vec<f64> {
        let mut r: Vec<f64> = self.pan.data().iter().map(|p| -p).collect();
        for (band, &a) in bands.iter().zip(&self.alphas) {
            r.iter_mut().zip(band.data()).for_each(|(r, v)| *r += a * v);
        }
        r
    }
}

fn energy_and_gradient(bands: &[Band], prob: &NlvProblem, cfg: &NlvConfig, w: &WeightField) -> (f64, Vec<Band>) {
    let mix = prob.mixing_residual(bands);
    let mix_energy = 0.5 * cfg.lambda * mix.iter().map(|r| r * r).sum::<f64>();
    let per_band: Vec<(f64, Band)> = bands
        .par_iter()
        .zip(prob.lowres.bands().par_iter())
        .zip(prob.alphas.par_iter())
        .map(|((u, low), &a)| {
            let mut res = prob.operator.forward(u);
            res.data_mut().iter_mut().zip(low.data()).for_each(|(r, l)| *r -= l);
            let data = 0.5 * cfg.mu * res.data().iter().map(|r| r * r).sum::<f64>();
            let back = prob.operator.adjoint(&res);
            let mut g = apply_nonlocal_operator(w, u).expect("grid checked");
            g.data_mut()
                .iter_mut()
                .zip(back.data())
                .zip(&mix)
                .for_each(|((g, &b), &m)| *g += cfg.mu * b + cfg.lambda * a * m);
            (nonlocal_energy(w, u).expect("grid checked") + data, g)
        })
        .collect();
    let mut energy = mix_energy;
    let mut grads = Vec::with_capacity(per_band.len());
    for (e, g) in per_band {
        energy += e;
        grads.push(g);
    }
    (energy, grads)
}

pub fn nlv_energy(u: &MultispectralImage, prob: &NlvProblem, cfg: &NlvConfig, w: &WeightField) -> Result<f64> {
    prob.check(u)?;
    Ok(energy_and_gradient(u.bands(), prob, cfg, w).0)
}

pub fn nlv_gradient(u: &MultispectralImage, prob: &NlvProblem, cfg: &NlvConfig, w: &WeightField) -> Result<MultispectralImage> {
    prob.check(u)?;
    MultispectralImage::from_bands(energy_and_gradient(u.bands(), prob, cfg, w).1)
}

/// `1 / (max(4, G) + lambda |alpha|^2 + mu B)` with `B` from
/// [`BlurDecimate::norm_sq_bound`].
pub fn nlv_step_size(prob: &NlvProblem, cfg: &NlvConfig, w: &WeightField) -> f64 {
    let alpha_sq: f64 = prob.alphas.iter().map(|a| a * a).sum();
    1.0 / (w.laplacian_bound().max(4.0) + cfg.lambda * alpha_sq + cfg.mu * prob.operator.norm_sq_bound())
}

impl DescentState for Vec<Band> {
    fn step(&mut self, grad: &Self, tau: f64) -> f64 {
        let mut sq = 0.0;
        let mut count = 0;
        for (band, g) in self.iter_mut().zip(grad) {
            sq += band.step(g, tau).powi(2) * g.data().len() as f64;
            count += g.data().len();
        }
        (sq / count as f64).sqrt()
    }
}

/// Joint descent from the bicubic upsampling, with weights from `pan`.
pub fn solve_nlv(
    pan: &PanImage,
    lowres: &MultispectralImage,
    alphas: &MixingWeights,
    cfg: &NlvConfig,
) -> Result<(MultispectralImage, SolveReport)> {
    cfg.validate()?;
    let w = compute_weights(pan, &cfg.nonlocal)?;
    solve_nlv_with_weights(pan, lowres, alphas, cfg, &w)
}

pub fn solve_nlv_with_weights(
    pan: &PanImage,
    lowres: &MultispectralImage,
    alphas: &MixingWeights,
    cfg: &NlvConfig,
    w: &WeightField,
) -> Result<(MultispectralImage, SolveReport)> {
    cfg.validate()?;
    if w.grid() != pan.grid() {
        return Err(invalid("weight field and panchromatic grids differ"));
    }
    let prob = NlvProblem::new(pan, lowres, alphas, &cfg.blur, &cfg.sampling)?;
    let (tau, auto) = match cfg.tau {
        StepSize::Auto => (nlv_step_size(&prob, cfg, w), true),
        StepSize::Fixed(t) => (t, false),
    };
    let init = prob.initial_guess(&cfg.sampling).into_bands();
    let (bands, report) = descend(init, tau, auto, cfg.max_iter, cfg.tol, |u| energy_and_gradient(u, &prob, cfg, w))?;
    Ok((MultispectralImage::from_bands(bands)?, report))
}
