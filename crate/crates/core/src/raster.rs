//! Raster data model.
//!
//! Samples are `f64`, stored row-major: pixel `(row, col)` of a band lives at
//! offset `row * width + col`. Multiband images are band-sequential.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dimensions of a rectangular pixel grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!("grid must be non-empty, got {width}x{height}")));
        }
        Ok(Grid { width, height })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Grid obtained by shrinking both dimensions by `factor`.
    pub fn downscaled(&self, factor: usize) -> Result<Grid> {
        if factor == 0 || !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(invalid(format!(
                "grid {}x{} is not divisible by factor {factor}",
                self.width, self.height
            )));
        }
        Grid::new(self.width / factor, self.height / factor)
    }

    pub fn upscaled(&self, factor: usize) -> Grid {
        Grid { width: self.width * factor, height: self.height * factor }
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// A single-band raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    grid: Grid,
    data: Vec<f64>,
}

/// The panchromatic image is an ordinary single-band raster.
pub type PanImage = Band;

impl Band {
    /// Builds a band, rejecting size mismatches and non-finite samples.
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(invalid(format!(
                "grid {grid} needs {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("sample {pos} is not finite")));
        }
        Ok(Band { grid, data })
    }

    /// Internal constructor for results of operations on finite inputs.
    pub(crate) fn from_raw(grid: Grid, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Band { grid, data }
    }

    pub fn filled(grid: Grid, value: f64) -> Self {
        Band { grid, data: vec![value; grid.len()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Band::filled(grid, 0.0)
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for row in 0..grid.height {
            for col in 0..grid.width {
                data.push(f(row, col));
            }
        }
        Band { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.grid.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.grid.index(row, col);
        self.data[i] = value;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.grid.width;
        &self.data[row * w..(row + 1) * w]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Band {
        Band { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two bands on the same grid.
    pub fn zip_map(&self, other: &Band, f: impl Fn(f64, f64) -> f64) -> Result<Band> {
        self.check_same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Band { grid: self.grid, data })
    }

    pub fn check_same_grid(&self, other: &Band) -> Result<()> {
        if self.grid != other.grid {
            return Err(invalid(format!("grid mismatch: {} vs {}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Root mean square of the samples.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Euclidean inner product of two bands on the same grid.
    pub fn dot(&self, other: &Band) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// A `C`-band raster with all bands on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultispectralImage {
    grid: Grid,
    bands: Vec<Band>,
}

impl MultispectralImage {
    /// Builds an image from band-sequential, row-major samples.
    pub fn new(grid: Grid, num_bands: usize, samples: Vec<f64>) -> Result<Self> {
        if num_bands == 0 {
            return Err(invalid("an image needs at least one band"));
        }
        if samples.len() != grid.len() * num_bands {
            return Err(invalid(format!(
                "{num_bands} bands on {grid} need {} samples, got {}",
                grid.len() * num_bands,
                samples.len()
            )));
        }
        let bands = samples
            .chunks_exact(grid.len())
            .map(|chunk| Band::new(grid, chunk.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultispectralImage { grid, bands })
    }

    pub fn from_bands(bands: Vec<Band>) -> Result<Self> {
        let first = bands.first().ok_or_else(|| invalid("an image needs at least one band"))?;
        let grid = first.grid();
        for (k, band) in bands.iter().enumerate() {
            if band.grid() != grid {
                return Err(invalid(format!("band {k} is {} but band 0 is {grid}", band.grid())));
            }
        }
        Ok(MultispectralImage { grid, bands })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.grid.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, k: usize) -> &Band {
        &self.bands[k]
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn into_bands(self) -> Vec<Band> {
        self.bands
    }

    #[inline]
    pub fn sample(&self, row: usize, col: usize, band: usize) -> f64 {
        self.bands[band].get(row, col)
    }

    /// Band-sequential copy of all samples.
    pub fn to_samples(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len() * self.bands.len());
        for band in &self.bands {
            out.extend_from_slice(band.data());
        }
        out
    }

    /// Applies a per-band operation and reassembles the result.
    pub fn map_bands<F>(&self, f: F) -> Result<MultispectralImage>
    where
        F: Fn(&Band) -> Result<Band>,
    {
        let bands = self.bands.iter().map(f).collect::<Result<Vec<_>>>()?;
        MultispectralImage::from_bands(bands)
    }

    pub fn check_same_shape(&self, other: &MultispectralImage) -> Result<()> {
        if self.grid != other.grid || self.num_bands() != other.num_bands() {
            return Err(invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.grid,
                self.num_bands(),
                other.grid,
                other.num_bands()
            )));
        }
        Ok(())
    }
}

impl From<Band> for MultispectralImage {
    fn from(band: Band) -> Self {
        MultispectralImage { grid: band.grid(), bands: vec![band] }
    }
}

/// Half-width of the difference range mapped onto the 8-bit scale.
pub const DIFFERENCE_RANGE: f64 = 20.0;

/// Maps `a - b` linearly from `[-20, 20]` onto `[0, 255]`, saturating outside.
///
/// Values are kept as reals (a zero difference maps to exactly `127.5`);
/// rounding happens only when the result is written to an 8-bit file.
pub fn difference_visualization(
    a: &MultispectralImage,
    b: &MultispectralImage,
) -> Result<MultispectralImage> {
    a.check_same_shape(b)?;
    let scale = 255.0 / (2.0 * DIFFERENCE_RANGE);
    let bands = a
        .bands()
        .iter()
        .zip(b.bands())
        .map(|(x, y)| x.zip_map(y, |p, q| ((p - q + DIFFERENCE_RANGE) * scale).clamp(0.0, 255.0)))
        .collect::<Result<Vec<_>>>()?;
    MultispectralImage::from_bands(bands)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(values: &[f64]) -> MultispectralImage {
        let grid = Grid::new(values.len(), 1).unwrap();
        Band::new(grid, values.to_vec()).unwrap().into()
    }

    #[test]
    fn rejects_empty_grid_and_non_finite_samples() {
        assert!(Grid::new(0, 3).is_err());
        let grid = Grid::new(2, 1).unwrap();
        assert!(Band::new(grid, vec![1.0, f64::NAN]).is_err());
        assert!(Band::new(grid, vec![1.0]).is_err());
    }

    #[test]
    fn band_sequential_layout() {
        let grid = Grid::new(3, 2).unwrap();
        let samples: Vec<f64> = (0..12).map(f64::from).collect();
        let img = MultispectralImage::new(grid, 2, samples.clone()).unwrap();
        for k in 0..2 {
            for r in 0..2 {
                for c in 0..3 {
                    assert_eq!(img.sample(r, c, k), samples[k * 6 + r * 3 + c]);
                }
            }
        }
        assert_eq!(img.to_samples(), samples);
    }

    #[test]
    fn difference_of_equal_images_is_midpoint() {
        let a = single(&[3.0, -7.5, 100.0]);
        let d = difference_visualization(&a, &a).unwrap();
        assert!(d.band(0).data().iter().all(|&v| v == 127.5));
    }

    #[test]
    fn difference_endpoints_and_saturation() {
        let a = single(&[20.0, -20.0, 50.0, -50.0]);
        let b = single(&[0.0; 4]);
        let d = difference_visualization(&a, &b).unwrap();
        assert_eq!(d.band(0).data(), &[255.0, 0.0, 255.0, 0.0]);
    }

    #[test]
    fn difference_rejects_shape_mismatch() {
        assert!(difference_visualization(&single(&[1.0]), &single(&[1.0, 2.0])).is_err());
    }
}
