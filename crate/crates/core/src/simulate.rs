//! Reduced-resolution test problems.
//!
//! A reference multispectral image plays the role of ground truth. The
//! panchromatic is a linear mix of its bands; the low-resolution bands are
//! made by translating each band by its own sub-pixel shift, blurring with a
//! Gaussian, decimating and optionally adding seeded Gaussian noise. A narrow
//! Gaussian (small `sigma`) leaves more energy above the low-resolution
//! Nyquist frequency and so produces more aliasing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{Band, Grid, MultispectralImage, PanImage};
use crate::sampling::{bicubic_translate, blur_downsample, convolve, BlurSpec, SamplingSpec};

/// Non-negative per-band coefficients of the panchromatic mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixingWeights(Vec<f64>);

impl MixingWeights {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(invalid("at least one mixing weight is required"));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(invalid(format!("mixing weights must be finite and non-negative, got {a}")));
        }
        Ok(MixingWeights(alphas))
    }

    /// `1/C` for each of `C` bands.
    pub fn equal(bands: usize) -> Self {
        MixingWeights(vec![1.0 / bands.max(1) as f64; bands.max(1)])
    }

    /// Blue, green, red, near-infrared weights `(0.1, 0.4, 0.25, 0.25)`.
    pub fn bgrn() -> Self {
        MixingWeights(vec![0.1, 0.4, 0.25, 0.25])
    }

    /// Blue-free variant `(0, 0.4, 0.35, 0.25)`.
    pub fn bgrn_without_blue() -> Self {
        MixingWeights(vec![0.0, 0.4, 0.35, 0.25])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Errors unless the weights sum to one within `1e-12`.
    pub fn require_simplex(&self) -> Result<()> {
        if (self.sum() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixing weights must sum to 1, got {}", self.sum())));
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for MixingWeights {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixingWeights::new(v)
    }
}

impl From<MixingWeights> for Vec<f64> {
    fn from(w: MixingWeights) -> Vec<f64> {
        w.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub sigma: f64,
    pub factor: usize,
    /// Per-band `(dx, dy)` in high-resolution pixels.
    pub translations: Vec<(f64, f64)>,
    pub alphas: MixingWeights,
    pub noise_sigma: f64,
}

impl SimulationSpec {
    /// Noise-free spec with the default shifts `(0.6 k, -0.4 k)` for band `k`.
    pub fn new(sigma: f64, factor: usize, alphas: MixingWeights) -> Self {
        let translations = default_translations(alphas.len());
        SimulationSpec { sigma, factor, translations, alphas, noise_sigma: 0.0 }
    }

    pub fn with_translations(mut self, translations: Vec<(f64, f64)>) -> Self {
        self.translations = translations;
        self
    }

    pub fn registered(self) -> Self {
        let n = self.alphas.len();
        self.with_translations(vec![(0.0, 0.0); n])
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn blur(&self) -> Result<BlurSpec> {
        BlurSpec::gaussian(self.sigma)
    }

    pub fn sampling(&self) -> Result<SamplingSpec> {
        SamplingSpec::new(self.factor)
    }

    pub fn validate(&self, bands: usize) -> Result<()> {
        self.blur()?;
        self.sampling()?;
        if self.translations.len() != bands || self.alphas.len() != bands {
            return Err(invalid(format!(
                "{} translations and {} mixing weights for {bands} bands",
                self.translations.len(),
                self.alphas.len()
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!("noise level must be non-negative, got {}", self.noise_sigma)));
        }
        if self.translations.iter().any(|(dx, dy)| !dx.is_finite() || !dy.is_finite()) {
            return Err(invalid("translations must be finite"));
        }
        Ok(())
    }
}

pub fn default_translations(bands: usize) -> Vec<(f64, f64)> {
    (0..bands).map(|k| (0.6 * k as f64, -0.4 * k as f64)).collect()
}

/// `P = sum_k alpha_k u_k`.
pub fn synthesize_pan(reference: &MultispectralImage, alphas: &MixingWeights) -> Result<PanImage> {
    if alphas.len() != reference.num_bands() {
        return Err(invalid(format!("{} mixing weights for {} bands", alphas.len(), reference.num_bands())));
    }
    let mut data = vec![0.0; reference.grid().len()];
    for (band, &a) in reference.bands().iter().zip(alphas.as_slice()) {
        data.iter_mut().zip(band.data()).for_each(|(p, v)| *p += a * v);
    }
    Band::new(reference.grid(), data)
}

/// Translates, blurs, decimates and adds noise to every band. Band `k` draws
/// its noise from stream `k` of a ChaCha generator seeded with `seed`, so
/// results do not depend on scheduling.
pub fn simulate_lowres(reference: &MultispectralImage, spec: &SimulationSpec, seed: u64) -> Result<MultispectralImage> {
    spec.validate(reference.num_bands())?;
    let blur = spec.blur()?;
    let sampling = spec.sampling()?;
    reference.grid().downscaled(spec.factor)?;
    let bands = reference
        .bands()
        .par_iter()
        .zip(spec.translations.par_iter())
        .enumerate()
        .map(|(k, (band, &(dx, dy)))| {
            let mut low = blur_downsample(&bicubic_translate(band, dx, dy)?, &blur, &sampling)?;
            if spec.noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| invalid(e.to_string()))?;
                low.data_mut().iter_mut().for_each(|v| *v += normal.sample(&mut rng));
            }
            Ok(low)
        })
        .collect::<Result<Vec<_>>>()?;
    MultispectralImage::from_bands(bands)
}

/// Undoes the per-band translations at low resolution (shift divided by the
/// sampling factor), bringing all bands onto the panchromatic geometry.
pub fn coregister_lowres(lowres: &MultispectralImage, spec: &SimulationSpec) -> Result<MultispectralImage> {
    if spec.translations.len() != lowres.num_bands() {
        return Err(invalid(format!("{} translations for {} bands", spec.translations.len(), lowres.num_bands())));
    }
    let s = spec.factor as f64;
    let bands = lowres
        .bands()
        .iter()
        .zip(&spec.translations)
        .map(|(b, &(dx, dy))| bicubic_translate(b, -dx / s, -dy / s))
        .collect::<Result<Vec<_>>>()?;
    MultispectralImage::from_bands(bands)
}

/// Superimposes the panchromatic on the geometry of a band shifted by
/// `(dx, dy)`.
pub fn warp_pan_to_band(pan: &PanImage, shift: (f64, f64)) -> Result<PanImage> {
    bicubic_translate(pan, shift.0, shift.1)
}

/// `amplitude * cos(pi r^2 / (2 R))` around the image center, with `R` the
/// distance to the nearest edge: the local frequency rises linearly from 0
/// at the center to half a cycle per pixel at `R`.
pub fn zone_plate(grid: Grid, amplitude: f64) -> Band {
    let (cx, cy) = ((grid.width as f64 - 1.0) / 2.0, (grid.height as f64 - 1.0) / 2.0);
    let radius = (grid.width.min(grid.height) as f64 / 2.0).max(1.0);
    Band::from_fn(grid, |r, c| {
        let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
        amplitude * (PI * d2 / (2.0 * radius)).cos()
    })
}

struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    levels: Vec<f64>,
}

impl Rect {
    /// Area fraction of pixel `(r, c)` covered, from 4x4 supersampling.
    fn coverage(&self, r: usize, c: usize) -> f64 {
        let mut hits = 0;
        for i in 0..4 {
            for j in 0..4 {
                let y = r as f64 + (i as f64 + 0.5) / 4.0;
                let x = c as f64 + (j as f64 + 0.5) / 4.0;
                if x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1 {
                    hits += 1;
                }
            }
        }
        hits as f64 / 16.0
    }
}

/// Standard deviation, in pixels, of the optics filter applied to procedural
/// scenes. Reference imagery is itself an acquisition and carries little
/// energy near its own Nyquist frequency.
pub const SCENE_OPTICS_SIGMA: f64 = 0.8;

/// Synthetic ground truth: per-band linear gradients, antialiased rectangles
/// with band-dependent levels and a shared zone plate patch, rendered in
/// `[20, 230]` and then filtered by a Gaussian of [`SCENE_OPTICS_SIGMA`].
pub fn procedural_scene(width: usize, height: usize, bands: usize, seed: u64) -> Result<MultispectralImage> {
    let grid = Grid::new(width, height)?;
    if bands == 0 {
        return Err(invalid("a scene needs at least one band"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let rects: Vec<Rect> = (0..8)
        .map(|_| {
            let (rw, rh) = (rng.random_range(0.15..0.45) * w, rng.random_range(0.15..0.45) * h);
            let x0 = rng.random_range(0.0..w - rw);
            let y0 = rng.random_range(0.0..h - rh);
            let base = rng.random_range(-45.0..45.0);
            let levels = (0..bands).map(|_| base + rng.random_range(-20.0..20.0)).collect();
            Rect { x0, y0, x1: x0 + rw, y1: y0 + rh, levels }
        })
        .collect();
    let gradients: Vec<(f64, f64, f64)> = (0..bands)
        .map(|_| (rng.random_range(90.0..140.0), rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)))
        .collect();

    let side = (width.min(height) / 3).max(1);
    let plate = zone_plate(Grid { width: side, height: side }, 30.0);
    let (pr, pc) = ((height - side) / 2, (width - side) / 2);

    let optics = BlurSpec::gaussian(SCENE_OPTICS_SIGMA)?.kernel()?;
    let out = (0..bands)
        .map(|k| {
            let (base, gx, gy) = gradients[k];
            Band::from_fn(grid, |r, c| {
                let mut v = base + gx * (c as f64 / w - 0.5) + gy * (r as f64 / h - 0.5);
                for rect in &rects {
                    v += rect.levels[k] * rect.coverage(r, c);
                }
                if (pr..pr + side).contains(&r) && (pc..pc + side).contains(&c) {
                    v += plate.get(r - pr, c - pc);
                }
                v.clamp(20.0, 230.0)
            })
        })
        .map(|band| convolve(&band, &optics))
        .collect();
    MultispectralImage::from_bands(out)
}
