//! Band-decoupled nonlocal variational pansharpening.
//!
//! For a band `u` on the high-resolution grid the solver minimizes
//!
//! ```text
//! F(u) = 1/2 sum_{p,q} (u(q) - u(p))^2 w(p, q)
//!      + (mu s^2 / 2) sum_p Pi_S(p) ((K u)(p) - u_omega(p))^2
//!      + (delta / (2 |P|^2)) sum_p (u(p) Pt(p) - ut(p) P(p))^2
//! ```
//!
//! where `w` are patch weights of the band-aligned panchromatic `P`, `K` is
//! the sensor blur, `Pi_S` the sampling lattice, `u_omega` the replicated
//! low-resolution band, `ut` its bicubic upsampling and `Pt` the panchromatic
//! pushed through the same blur/decimation and upsampled back. `|P|` is the
//! root mean square of `P`. The last term asks for `u / P = ut / Pt`, the
//! high-pass modulation relation.
//!
//! `F` is a strictly convex quadratic; it is minimized by explicit gradient
//! descent with a fixed step.

mod nlv;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{Band, MultispectralImage, PanImage};
use crate::sampling::{bicubic_translate, bicubic_upsample_phased, decimate, replicate_upsample, BlurDecimate, BlurSpec, SamplingSpec};
use crate::weights::{apply_nonlocal_operator, compute_weights, nonlocal_energy, NonlocalConfig, WeightField};

pub use nlv::{nlv_energy, nlv_gradient, nlv_step_size, solve_nlv, solve_nlv_with_weights, NlvConfig, NlvProblem};

/// Gradient step: a fixed value, or `1/L` from a certified Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepSize {
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mu: f64,
    pub delta: f64,
    pub nonlocal: NonlocalConfig,
    pub blur: BlurSpec,
    pub sampling: SamplingSpec,
    pub tau: StepSize,
    pub max_iter: usize,
    /// Threshold on the RMS change between consecutive iterates.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: 50.0,
            delta: 6.21,
            nonlocal: NonlocalConfig::default(),
            blur: BlurSpec { sigma: 1.3, radius: 4 },
            sampling: SamplingSpec { factor: 4, phase: (0, 0) },
            tau: StepSize::Auto,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) || !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("mu and delta must be non-negative, got {} and {}", self.mu, self.delta)));
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

/// Per-band data of the energy, all on the high-resolution grid.
#[derive(Debug, Clone)]
pub struct BandProblem {
    pan: PanImage,
    lowres: Band,
    pan_tilde: Band,
    u_tilde: Band,
    u_omega: Band,
    pan_norm: f64,
    factor: usize,
    sampling: SamplingSpec,
    operator: BlurDecimate,
}

impl BandProblem {
    /// Derives `Pt`, `ut`, `u_omega` and `|P|` from a band-aligned
    /// panchromatic and the low-resolution band.
    pub fn new(pan: &PanImage, lowres: &Band, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Self> {
        sampling.validate()?;
        let expected = lowres.grid().upscaled(sampling.factor);
        if pan.grid() != expected {
            return Err(invalid(format!(
                "panchromatic is {} but a {} band at factor {} needs {expected}",
                pan.grid(),
                lowres.grid(),
                sampling.factor
            )));
        }
        let pan_norm = pan.rms();
        if pan_norm <= 0.0 {
            return Err(Error::Degenerate("panchromatic image is identically zero".into()));
        }
        let operator = BlurDecimate::new(pan.grid(), blur, sampling)?;
        let pan_tilde = bicubic_upsample_phased(&operator.forward(pan), sampling);
        Ok(BandProblem {
            pan: pan.clone(),
            lowres: lowres.clone(),
            pan_tilde,
            u_tilde: bicubic_upsample_phased(lowres, sampling),
            u_omega: replicate_upsample(lowres, sampling.factor)?,
            pan_norm,
            factor: sampling.factor,
            sampling: *sampling,
            operator,
        })
    }

    pub fn pan(&self) -> &PanImage {
        &self.pan
    }

    pub fn lowres(&self) -> &Band {
        &self.lowres
    }

    /// Upsampled low-resolution panchromatic `Pt`.
    pub fn pan_tilde(&self) -> &Band {
        &self.pan_tilde
    }

    /// Bicubic upsampling of the low-resolution band, `ut`.
    pub fn u_tilde(&self) -> &Band {
        &self.u_tilde
    }

    /// Replicated low-resolution band, `u_omega`.
    pub fn u_omega(&self) -> &Band {
        &self.u_omega
    }

    /// Root mean square of the panchromatic.
    pub fn pan_norm(&self) -> f64 {
        self.pan_norm
    }

    pub fn operator(&self) -> &BlurDecimate {
        &self.operator
    }

    /// `Pi_S (K u - u_omega)` restricted to the lattice.
    fn data_residual(&self, u: &Band) -> Band {
        let target = decimate(&self.u_omega, &self.sampling).expect("validated sampling");
        let mut r = self.operator.forward(u);
        r.data_mut().iter_mut().zip(target.data()).for_each(|(a, b)| *a -= b);
        r
    }

    fn radiometric_residual(&self, u: &Band) -> Vec<f64> {
        u.data()
            .iter()
            .zip(self.pan_tilde.data())
            .zip(self.u_tilde.data().iter().zip(self.pan.data()))
            .map(|((&u, &pt), (&ut, &p))| u * pt - ut * p)
            .collect()
    }

    /// RMS of `(u Pt - ut P) / |P|`, the violation of the ratio constraint.
    pub fn radiometric_violation(&self, u: &Band) -> f64 {
        let r = self.radiometric_residual(u);
        (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt() / self.pan_norm
    }
}

/// The three terms of the energy and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    pub nonlocal: f64,
    pub data: f64,
    pub radiometric: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.nonlocal + self.data + self.radiometric
    }
}

pub fn nlvd_energy_terms(u: &Band, prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> Result<EnergyTerms> {
    check_band(u, prob)?;
    let s2 = (prob.factor * prob.factor) as f64;
    let data: f64 = prob.data_residual(u).data().iter().map(|r| r * r).sum();
    let radio: f64 = prob.radiometric_residual(u).iter().map(|r| r * r).sum();
    Ok(EnergyTerms {
        nonlocal: nonlocal_energy(w, u)?,
        data: 0.5 * cfg.mu * s2 * data,
        radiometric: 0.5 * cfg.delta / (prob.pan_norm * prob.pan_norm) * radio,
    })
}

pub fn nlvd_energy(u: &Band, prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> Result<f64> {
    Ok(nlvd_energy_terms(u, prob, cfg, w)?.total())
}

pub fn nlvd_gradient(u: &Band, prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> Result<Band> {
    check_band(u, prob)?;
    Ok(energy_and_gradient(u, prob, cfg, w).1)
}

fn check_band(u: &Band, prob: &BandProblem) -> Result<()> {
    if u.grid() != prob.pan.grid() {
        return Err(invalid(format!("band is {} but the problem lives on {}", u.grid(), prob.pan.grid())));
    }
    Ok(())
}

/// Energy and gradient sharing the forward-operator evaluation.
fn energy_and_gradient(u: &Band, prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> (f64, Band) {
    let s2 = (prob.factor * prob.factor) as f64;
    let radio_scale = cfg.delta / (prob.pan_norm * prob.pan_norm);

    let residual = prob.data_residual(u);
    let data = 0.5 * cfg.mu * s2 * residual.data().iter().map(|r| r * r).sum::<f64>();
    let back = prob.operator.adjoint(&residual);
    let radio_res = prob.radiometric_residual(u);
    let radio = 0.5 * radio_scale * radio_res.iter().map(|r| r * r).sum::<f64>();
    let nonlocal = nonlocal_energy(w, u).expect("grid checked");

    let mut grad = apply_nonlocal_operator(w, u).expect("grid checked");
    grad.data_mut()
        .iter_mut()
        .zip(back.data())
        .zip(radio_res.iter().zip(prob.pan_tilde.data()))
        .for_each(|((g, &b), (&r, &pt))| *g += cfg.mu * s2 * b + radio_scale * pt * r);
    (nonlocal + data + radio, grad)
}

/// `tau = 1 / L` with `L` an upper bound on the largest eigenvalue of the
/// Hessian:
///
/// * nonlocal term: `max(4, G)` where `G` is the Gershgorin bound of the
///   symmetrized weight Laplacian (`G <= 4` for doubly stochastic weights);
/// * data term: `mu s^2` times [`BlurDecimate::norm_sq_bound`];
/// * radiometric term: `delta / |P|^2 * max Pt^2`.
pub fn auto_step_size(prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> f64 {
    1.0 / lipschitz_bound(prob, cfg, w)
}

pub fn lipschitz_bound(prob: &BandProblem, cfg: &SolverConfig, w: &WeightField) -> f64 {
    let s2 = (prob.factor * prob.factor) as f64;
    let nonlocal = w.laplacian_bound().max(4.0);
    let data = cfg.mu * s2 * prob.operator.norm_sq_bound();
    let max_pt2 = prob.pan_tilde.data().iter().map(|v| v * v).fold(0.0, f64::max);
    let radio = cfg.delta / (prob.pan_norm * prob.pan_norm) * max_pt2;
    nonlocal + data + radio
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// RMS change of the last update.
    pub final_relative_change: f64,
    pub converged: bool,
    pub tau: f64,
    /// Energy of the initial guess followed by the energy after each update.
    pub energy_trace: Vec<f64>,
}

/// Shared descent loop: `eval` returns the energy and gradient at a point.
pub(crate) fn descend<S, E>(
    init: S,
    tau: f64,
    auto: bool,
    max_iter: usize,
    tol: f64,
    mut eval: E,
) -> Result<(S, SolveReport)>
where
    S: DescentState,
    E: FnMut(&S) -> (f64, S),
{
    let mut u = init;
    let mut trace = Vec::with_capacity(max_iter + 1);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut rising = 0;
    let (mut energy, mut grad) = eval(&u);
    trace.push(energy);

    while iterations < max_iter {
        change = u.step(&grad, tau);
        iterations += 1;
        let (next_energy, next_grad) = eval(&u);
        trace.push(next_energy);
        if next_energy > energy + 64.0 * f64::EPSILON * energy.abs() {
            rising += 1;
            if auto && rising >= 2 {
                return Err(Error::StepSize { iteration: iterations, previous: energy, current: next_energy, tau });
            }
        } else {
            rising = 0;
        }
        energy = next_energy;
        grad = next_grad;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok((u, SolveReport { iterations, final_relative_change: change, converged, tau, energy_trace: trace }))
}

/// A point of the descent: updated in place, reporting the RMS change.
pub(crate) trait DescentState {
    fn step(&mut self, grad: &Self, tau: f64) -> f64;
}

impl DescentState for Band {
    fn step(&mut self, grad: &Band, tau: f64) -> f64 {
        let mut sq = 0.0;
        for (u, g) in self.data_mut().iter_mut().zip(grad.data()) {
            let next = *u - tau * g;
            let d = next - *u;
            sq += d * d;
            *u = next;
        }
        (sq / grad.data().len() as f64).sqrt()
    }
}

/// Explicit gradient descent `u <- u - tau grad F(u)` from `init`.
///
/// Stops once the RMS change between iterates falls below `cfg.tol` or after
/// `cfg.max_iter` updates. With the automatic step the energy cannot rise;
/// two consecutive rises are reported as [`Error::StepSize`].
pub fn solve_nlvd_band(prob: &BandProblem, cfg: &SolverConfig, w: &WeightField, init: &Band) -> Result<(Band, SolveReport)> {
    cfg.validate()?;
    check_band(init, prob)?;
    if w.grid() != init.grid() {
        return Err(invalid("weight field and band grids differ"));
    }
    let (tau, auto) = match cfg.tau {
        StepSize::Auto => (auto_step_size(prob, cfg, w), true),
        StepSize::Fixed(t) => (t, false),
    };
    descend(init.clone(), tau, auto, cfg.max_iter, cfg.tol, |u| energy_and_gradient(u, prob, cfg, w))
}

/// Fuses every band independently.
///
/// `pans` holds either one panchromatic per band, already warped into that
/// band's geometry, or a single panchromatic shared by co-registered bands.
/// Each band starts from its bicubic upsampling.
pub fn pansharpen_nlvd(
    pans: &[PanImage],
    lowres: &MultispectralImage,
    cfg: &SolverConfig,
) -> Result<(MultispectralImage, Vec<SolveReport>)> {
    cfg.validate()?;
    if pans.len() != 1 && pans.len() != lowres.num_bands() {
        return Err(invalid(format!(
            "expected 1 or {} panchromatic images, got {}",
            lowres.num_bands(),
            pans.len()
        )));
    }
    let shared = if pans.len() == 1 { Some(compute_weights(&pans[0], &cfg.nonlocal)?) } else { None };
    let results = (0..lowres.num_bands())
        .into_par_iter()
        .map(|k| {
            let pan = if pans.len() == 1 { &pans[0] } else { &pans[k] };
            let prob = BandProblem::new(pan, lowres.band(k), &cfg.blur, &cfg.sampling)?;
            let owned;
            let w = match &shared {
                Some(w) => w,
                None => {
                    owned = compute_weights(pan, &cfg.nonlocal)?;
                    &owned
                }
            };
            solve_nlvd_band(&prob, cfg, w, prob.u_tilde())
        })
        .collect::<Result<Vec<_>>>()?;
    let (bands, reports): (Vec<Band>, Vec<SolveReport>) = results.into_iter().unzip();
    Ok((MultispectralImage::from_bands(bands)?, reports))
}

/// The complete procedure for misregistered bands: warp the panchromatic onto
/// each band's geometry (`shifts[k] = (dx, dy)` in high-resolution pixels),
/// fuse each band there, then translate the results back onto the
/// panchromatic's geometry so they can be superimposed.
pub fn pansharpen_nlvd_misregistered(
    pan: &PanImage,
    lowres: &MultispectralImage,
    shifts: &[(f64, f64)],
    cfg: &SolverConfig,
) -> Result<(MultispectralImage, Vec<SolveReport>)> {
    if shifts.len() != lowres.num_bands() {
        return Err(invalid(format!("{} shifts for {} bands", shifts.len(), lowres.num_bands())));
    }
    let pans = shifts
        .iter()
        .map(|&(dx, dy)| bicubic_translate(pan, dx, dy))
        .collect::<Result<Vec<_>>>()?;
    let (fused, reports) = pansharpen_nlvd(&pans, lowres, cfg)?;
    let bands = fused
        .bands()
        .iter()
        .zip(shifts)
        .map(|(b, &(dx, dy))| bicubic_translate(b, -dx, -dy))
        .collect::<Result<Vec<_>>>()?;
    Ok((MultispectralImage::from_bands(bands)?, reports))
}
