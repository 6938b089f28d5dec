//! Classical fusion methods, used as reference points for the variational
//! solvers. All of them start from the bicubic upsampling `ut` of each band
//! and inject detail from the panchromatic `P`.
//!
//! | method  | fused band                                   |
//! |---------|----------------------------------------------|
//! | bicubic | `ut`                                         |
//! | HPF     | `ut + P - box(P)`                            |
//! | SFIM    | `ut * P / box(P)`                            |
//! | LBF     | `ut * P / Pt`, `Pt` the sensor-degraded pan  |
//! | LMVM    | `(P - mean(P)) * std(ut) / std(P) + mean(ut)` over a sliding window |
//!
//! Ratios guard their denominator with `eps * mean(P)`; LMVM clamps `std(P)`
//! at `eps`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{Band, MultispectralImage, PanImage};
use crate::sampling::{bicubic_translate, bicubic_upsample_phased, blur_downsample, box_blur, BlurSpec, SamplingSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Side of the box filter used by HPF and SFIM.
    pub hpf_box: usize,
    /// Side of the LMVM statistics window.
    pub lmvm_window: usize,
    pub ratio_epsilon: f64,
    pub blur: BlurSpec,
    pub sampling: SamplingSpec,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            hpf_box: 5,
            lmvm_window: 9,
            ratio_epsilon: 1e-6,
            blur: BlurSpec { sigma: 1.3, radius: 4 },
            sampling: SamplingSpec { factor: 4, phase: (0, 0) },
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, side) in [("box", self.hpf_box), ("LMVM window", self.lmvm_window)] {
            if side == 0 || side % 2 == 0 {
                return Err(invalid(format!("{name} side must be odd and positive, got {side}")));
            }
        }
        if !(self.ratio_epsilon > 0.0) {
            return Err(invalid(format!("ratio epsilon must be positive, got {}", self.ratio_epsilon)));
        }
        self.sampling.validate()?;
        BlurSpec::with_radius(self.blur.sigma, self.blur.radius)?;
        Ok(())
    }
}

/// Classical method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Bicubic,
    Hpf,
    Sfim,
    Lbf,
    Lmvm,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [Baseline::Bicubic, Baseline::Hpf, Baseline::Sfim, Baseline::Lmvm, Baseline::Lbf];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Bicubic => "bicubic",
            Baseline::Hpf => "hpf",
            Baseline::Sfim => "sfim",
            Baseline::Lbf => "lbf",
            Baseline::Lmvm => "lmvm",
        }
    }

    pub fn fuse_band(self, pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
        match self {
            Baseline::Bicubic => fuse_bicubic(pan, lowres, cfg),
            Baseline::Hpf => fuse_hpf(pan, lowres, cfg),
            Baseline::Sfim => fuse_sfim(pan, lowres, cfg),
            Baseline::Lbf => fuse_lbf(pan, lowres, cfg),
            Baseline::Lmvm => fuse_lmvm(pan, lowres, cfg),
        }
    }
}

/// Fuses every band; `pans` holds one shared panchromatic or one per band.
pub fn fuse_baseline(method: Baseline, pans: &[PanImage], lowres: &MultispectralImage, cfg: &BaselineConfig) -> Result<MultispectralImage> {
    if pans.len() != 1 && pans.len() != lowres.num_bands() {
        return Err(invalid(format!("expected 1 or {} panchromatic images, got {}", lowres.num_bands(), pans.len())));
    }
    let bands = (0..lowres.num_bands())
        .into_par_iter()
        .map(|k| method.fuse_band(&pans[k.min(pans.len() - 1)], lowres.band(k), cfg))
        .collect::<Result<Vec<_>>>()?;
    MultispectralImage::from_bands(bands)
}

/// Fuses misregistered bands: the panchromatic is warped onto each band's
/// geometry (`shifts[k] = (dx, dy)`), each band is fused there and the results
/// are translated back onto the panchromatic geometry.
pub fn fuse_baseline_misregistered(
    method: Baseline,
    pan: &PanImage,
    lowres: &MultispectralImage,
    shifts: &[(f64, f64)],
    cfg: &BaselineConfig,
) -> Result<MultispectralImage> {
    if shifts.len() != lowres.num_bands() {
        return Err(invalid(format!("{} shifts for {} bands", shifts.len(), lowres.num_bands())));
    }
    let pans = shifts.iter().map(|&(dx, dy)| bicubic_translate(pan, dx, dy)).collect::<Result<Vec<_>>>()?;
    let fused = fuse_baseline(method, &pans, lowres, cfg)?;
    let bands = fused
        .bands()
        .iter()
        .zip(shifts)
        .map(|(b, &(dx, dy))| bicubic_translate(b, -dx, -dy))
        .collect::<Result<Vec<_>>>()?;
    MultispectralImage::from_bands(bands)
}

/// Bicubic upsampling of the band after checking the grids agree.
fn upsampled(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    cfg.validate()?;
    let expected = lowres.grid().upscaled(cfg.sampling.factor);
    if pan.grid() != expected {
        return Err(invalid(format!(
            "panchromatic is {} but a {} band at factor {} needs {expected}",
            pan.grid(),
            lowres.grid(),
            cfg.sampling.factor
        )));
    }
    Ok(bicubic_upsample_phased(lowres, &cfg.sampling))
}

fn ratio_floor(pan: &PanImage, cfg: &BaselineConfig) -> f64 {
    (cfg.ratio_epsilon * pan.mean().abs()).max(f64::MIN_POSITIVE)
}

fn ratio_fusion(ut: &Band, pan: &Band, denom: &Band, floor: f64) -> Band {
    let data = ut
        .data()
        .iter()
        .zip(pan.data())
        .zip(denom.data())
        .map(|((&u, &p), &d)| u * p / d.max(floor))
        .collect();
    Band::new(ut.grid(), data).expect("finite ratio")
}

pub fn fuse_bicubic(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    upsampled(pan, lowres, cfg)
}

pub fn fuse_hpf(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    let ut = upsampled(pan, lowres, cfg)?;
    let smooth = box_blur(pan, cfg.hpf_box);
    let data = ut
        .data()
        .iter()
        .zip(pan.data().iter().zip(smooth.data()))
        .map(|(u, (p, s))| u + (p - s))
        .collect();
    Band::new(ut.grid(), data)
}

pub fn fuse_sfim(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    let ut = upsampled(pan, lowres, cfg)?;
    Ok(ratio_fusion(&ut, pan, &box_blur(pan, cfg.hpf_box), ratio_floor(pan, cfg)))
}

pub fn fuse_lbf(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    let ut = upsampled(pan, lowres, cfg)?;
    let pan_tilde = bicubic_upsample_phased(&blur_downsample(pan, &cfg.blur, &cfg.sampling)?, &cfg.sampling);
    Ok(ratio_fusion(&ut, pan, &pan_tilde, ratio_floor(pan, cfg)))
}

/// Local mean and population standard deviation over a `side x side` window.
pub fn local_stats(band: &Band, side: usize) -> (Band, Band) {
    let mean = box_blur(band, side);
    let mean_sq = box_blur(&band.map(|v| v * v), side);
    let std = mean_sq.zip_map(&mean, |m2, m| (m2 - m * m).max(0.0).sqrt()).expect("same grid");
    (mean, std)
}

pub fn fuse_lmvm(pan: &PanImage, lowres: &Band, cfg: &BaselineConfig) -> Result<Band> {
    let u = upsampled(pan, lowres, cfg)?;
    let (pan_mean, pan_std) = local_stats(pan, cfg.lmvm_window);
    let (u_mean, u_std) = local_stats(&u, cfg.lmvm_window);
    let data = (0..u.data().len())
        .map(|i| {
            (pan.data()[i] - pan_mean.data()[i]) * u_std.data()[i] / pan_std.data()[i].max(cfg.ratio_epsilon) + u_mean.data()[i]
        })
        .collect();
    Band::new(u.grid(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;

    fn inputs(pan_value: f64) -> (PanImage, MultispectralImage) {
        let pan = Band::filled(Grid::new(16, 16).unwrap(), pan_value);
        let low = MultispectralImage::new(Grid::new(4, 4).unwrap(), 2, (0..32).map(|i| ((i * 7) % 11) as f64 + 5.0).collect()).unwrap();
        (pan, low)
    }

    #[test]
    fn constant_pan_reduces_ratio_methods_to_bicubic() {
        let (pan, low) = inputs(70.0);
        let cfg = BaselineConfig::default();
        let reference = fuse_baseline(Baseline::Bicubic, std::slice::from_ref(&pan), &low, &cfg).unwrap();
        for method in [Baseline::Hpf, Baseline::Sfim, Baseline::Lbf] {
            let out = fuse_baseline(method, std::slice::from_ref(&pan), &low, &cfg).unwrap();
            for (a, b) in out.bands().iter().zip(reference.bands()) {
                assert!(a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() < 1e-9), "{}", method.name());
            }
        }
    }

    #[test]
    fn constant_pan_gives_local_mean_for_lmvm() {
        let (pan, low) = inputs(70.0);
        let cfg = BaselineConfig::default();
        let ut = fuse_bicubic(&pan, low.band(0), &cfg).unwrap();
        let out = fuse_lmvm(&pan, low.band(0), &cfg).unwrap();
        let mean = box_blur(&ut, 9);
        assert!(out.data().iter().zip(mean.data()).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn zero_pan_does_not_divide_by_zero() {
        let (pan, low) = inputs(0.0);
        let cfg = BaselineConfig::default();
        for method in Baseline::ALL {
            let out = fuse_baseline(method, std::slice::from_ref(&pan), &low, &cfg).unwrap();
            assert!(out.bands().iter().all(|b| b.data().iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn even_windows_are_rejected() {
        let (pan, low) = inputs(1.0);
        let cfg = BaselineConfig { hpf_box: 4, ..Default::default() };
        assert!(fuse_hpf(&pan, low.band(0), &cfg).is_err());
    }
}
