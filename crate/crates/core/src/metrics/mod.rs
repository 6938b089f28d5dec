//! Quality indices for fused images.
//!
//! Full-reference indices compare a fused product with ground truth: RMSE,
//! ERGAS, SAM, the universal quality index (here called SSIM) and its
//! hypercomplex multiband extension Q2n. The no-reference QNR suite compares
//! similarity structure between the fused product, the upsampled bands and
//! the panchromatic.
//!
//! Similarity indices are averaged over non-overlapping 8x8 blocks; trailing
//! partial blocks are dropped and blocks whose denominator vanishes are left
//! out of the average.

mod q2n;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{Band, MultispectralImage, PanImage};
use crate::sampling::{bicubic_upsample_phased, blur_downsample, BlurSpec, SamplingSpec};

pub use q2n::{q2n, Hypercomplex};

/// Side of the blocks used by the similarity indices.
pub const BLOCK: usize = 8;

pub fn rmse(reference: &Band, test: &Band) -> Result<f64> {
    reference.check_same_grid(test)?;
    let sum: f64 = reference.data().iter().zip(test.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / reference.data().len() as f64).sqrt())
}

/// `(100 / s) * sqrt(mean_k (RMSE_k / mean_k)^2)` with `mean_k` the mean of
/// the reference band.
pub fn ergas(reference: &MultispectralImage, test: &MultispectralImage, factor: usize) -> Result<f64> {
    reference.check_same_shape(test)?;
    if factor == 0 {
        return Err(invalid("ERGAS needs a positive resolution ratio"));
    }
    let mut acc = 0.0;
    for (k, (r, t)) in reference.bands().iter().zip(test.bands()).enumerate() {
        let mean = r.mean();
        if mean == 0.0 {
            return Err(Error::Degenerate(format!("reference band {k} has zero mean")));
        }
        acc += (rmse(r, t)? / mean).powi(2);
    }
    Ok(100.0 / factor as f64 * (acc / reference.num_bands() as f64).sqrt())
}

/// Mean spectral angle and the number of pixels skipped because one of the
/// two spectral vectors is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralAngle {
    pub degrees: f64,
    pub skipped: usize,
}

pub fn sam(reference: &MultispectralImage, test: &MultispectralImage) -> Result<SpectralAngle> {
    reference.check_same_shape(test)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    for p in 0..reference.grid().len() {
        let (mut nr, mut nt) = (0.0f64, 0.0f64);
        for (r, t) in reference.bands().iter().zip(test.bands()) {
            nr += r.data()[p].powi(2);
            nt += t.data()[p].powi(2);
        }
        if nr > 0.0 && nt > 0.0 {
            // 2 atan2(|a' - b'|, |a' + b'|) on the unit vectors: exact zero for
            // parallel inputs, accurate near 0 and pi unlike arccos.
            let (nr, nt) = (nr.sqrt(), nt.sqrt());
            let (mut diff, mut sum) = (0.0, 0.0);
            for (r, t) in reference.bands().iter().zip(test.bands()) {
                let (a, b) = (r.data()[p] / nr, t.data()[p] / nt);
                diff += (a - b) * (a - b);
                sum += (a + b) * (a + b);
            }
            total += 2.0 * diff.sqrt().atan2(sum.sqrt());
            counted += 1;
        }
    }
    let degrees = if counted == 0 { 0.0 } else { (total / counted as f64).to_degrees() };
    Ok(SpectralAngle { degrees, skipped: reference.grid().len() - counted })
}

/// Origins `(row, col)` of the complete blocks of a grid.
pub(crate) fn blocks(band: &Band) -> Result<Vec<(usize, usize)>> {
    if band.width() < BLOCK || band.height() < BLOCK {
        return Err(invalid(format!("similarity indices need at least {BLOCK}x{BLOCK} pixels, got {}", band.grid())));
    }
    Ok((0..band.height() / BLOCK)
        .flat_map(|br| (0..band.width() / BLOCK).map(move |bc| (br * BLOCK, bc * BLOCK)))
        .collect())
}

/// Universal quality index of one block, `None` when undefined.
fn block_index(x: &Band, y: &Band, (r0, c0): (usize, usize)) -> Option<f64> {
    let n = (BLOCK * BLOCK) as f64;
    let cells = || (r0..r0 + BLOCK).flat_map(move |r| (c0..c0 + BLOCK).map(move |c| (r, c)));
    let (mut sx, mut sy) = (0.0, 0.0);
    for (r, c) in cells() {
        sx += x.get(r, c);
        sy += y.get(r, c);
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (r, c) in cells() {
        let (dx, dy) = (x.get(r, c) - mx, y.get(r, c) - my);
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    let denom = (vx + vy) * (mx * mx + my * my);
    (denom != 0.0).then(|| 4.0 * cxy * mx * my / denom)
}

/// Blockwise universal quality index, in `[-1, 1]`.
pub fn ssim_band(reference: &Band, test: &Band) -> Result<f64> {
    reference.check_same_grid(test)?;
    let scores: Vec<f64> = blocks(reference)?.into_iter().filter_map(|b| block_index(reference, test, b)).collect();
    if scores.is_empty() {
        return Err(Error::Degenerate("no block has a defined similarity index".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Spectral distortion: mean over ordered band pairs `k != l` of
/// `|SSIM(ut_k, ut_l) - SSIM(u_k, u_l)|`.
pub fn d_lambda(fused: &MultispectralImage, upsampled: &MultispectralImage) -> Result<f64> {
    fused.check_same_shape(upsampled)?;
    let c = fused.num_bands();
    if c < 2 {
        return Err(invalid("spectral distortion needs at least two bands"));
    }
    let mut acc = 0.0;
    for k in 0..c {
        for l in k + 1..c {
            let before = ssim_band(upsampled.band(k), upsampled.band(l))?;
            let after = ssim_band(fused.band(k), fused.band(l))?;
            acc += 2.0 * (before - after).abs();
        }
    }
    Ok(acc / (c * (c - 1)) as f64)
}

/// Spatial distortion: mean over bands of `|SSIM(P, u_k) - SSIM(Pt_k, ut_k)|`.
/// `pan_tilde` holds one upsampled low-resolution panchromatic, shared, or
/// one per band.
pub fn d_s(fused: &MultispectralImage, upsampled: &MultispectralImage, pan: &PanImage, pan_tilde: &[Band]) -> Result<f64> {
    fused.check_same_shape(upsampled)?;
    if pan_tilde.len() != 1 && pan_tilde.len() != fused.num_bands() {
        return Err(invalid(format!("expected 1 or {} low-pass panchromatics, got {}", fused.num_bands(), pan_tilde.len())));
    }
    let mut acc = 0.0;
    for k in 0..fused.num_bands() {
        let pt = &pan_tilde[k.min(pan_tilde.len() - 1)];
        acc += (ssim_band(pan, fused.band(k))? - ssim_band(pt, upsampled.band(k))?).abs();
    }
    Ok(acc / fused.num_bands() as f64)
}

pub fn qnr(d_lambda: f64, d_s: f64) -> f64 {
    (1.0 - d_lambda) * (1.0 - d_s)
}

/// The panchromatic pushed through the sensor model and upsampled back.
pub fn low_pass_pan(pan: &PanImage, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Band> {
    Ok(bicubic_upsample_phased(&blur_downsample(pan, blur, sampling)?, sampling))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse_per_band: Vec<f64>,
    pub rmse: f64,
    pub ergas: f64,
    pub sam_degrees: f64,
    pub sam_skipped: usize,
    pub ssim_per_band: Vec<f64>,
    pub ssim: f64,
    pub q2n: f64,
}

impl MetricReport {
    pub fn compute(reference: &MultispectralImage, test: &MultispectralImage, factor: usize) -> Result<Self> {
        reference.check_same_shape(test)?;
        let rmse_per_band = reference.bands().iter().zip(test.bands()).map(|(r, t)| rmse(r, t)).collect::<Result<Vec<_>>>()?;
        let ssim_per_band = reference.bands().iter().zip(test.bands()).map(|(r, t)| ssim_band(r, t)).collect::<Result<Vec<_>>>()?;
        let angle = sam(reference, test)?;
        let c = reference.num_bands() as f64;
        Ok(MetricReport {
            rmse: rmse_per_band.iter().sum::<f64>() / c,
            ssim: ssim_per_band.iter().sum::<f64>() / c,
            rmse_per_band,
            ssim_per_band,
            ergas: ergas(reference, test, factor)?,
            sam_degrees: angle.degrees,
            sam_skipped: angle.skipped,
            q2n: q2n(reference, test)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoReferenceReport {
    pub d_lambda: f64,
    pub d_s: f64,
    pub qnr: f64,
}

impl NoReferenceReport {
    /// Scores `fused` against the inputs it was made from.
    pub fn compute(
        fused: &MultispectralImage,
        pan: &PanImage,
        lowres: &MultispectralImage,
        blur: &BlurSpec,
        sampling: &SamplingSpec,
    ) -> Result<Self> {
        let upsampled = lowres.map_bands(|b| Ok(bicubic_upsample_phased(b, sampling)))?;
        let pt = low_pass_pan(pan, blur, sampling)?;
        let d_lambda = d_lambda(fused, &upsampled)?;
        let d_s = d_s(fused, &upsampled, pan, std::slice::from_ref(&pt))?;
        Ok(NoReferenceReport { d_lambda, d_s, qnr: qnr(d_lambda, d_s) })
    }
}
