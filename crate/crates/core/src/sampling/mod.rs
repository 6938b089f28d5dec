//! Linear operators of the acquisition model.
//!
//! A low-resolution band is modelled as `u^S = decimate(blur(u))`. This module
//! provides that forward operator, its exact adjoint, pixel replication,
//! Keys bicubic upsampling and subpixel translation. Every operator uses
//! half-sample mirror extension at the image border.

mod line;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{Band, Grid};

pub use line::{reflect, LineOperator, Separable};

/// Gaussian point-spread function of a spectral sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub sigma: f64,
    /// Support half-width in pixels; at least `ceil(3 sigma)`.
    pub radius: usize,
}

impl BlurSpec {
    /// Gaussian truncated at `ceil(3 sigma)`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("blur sigma must be positive, got {sigma}")));
        }
        Ok(BlurSpec { sigma, radius: min_radius(sigma) })
    }

    pub fn with_radius(sigma: f64, radius: usize) -> Result<Self> {
        let spec = BlurSpec::gaussian(sigma)?;
        if radius < spec.radius {
            return Err(invalid(format!(
                "radius {radius} is below ceil(3 sigma) = {}",
                spec.radius
            )));
        }
        Ok(BlurSpec { sigma, radius })
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        gaussian_kernel(self)
    }
}

fn min_radius(sigma: f64) -> usize {
    ((3.0 * sigma).ceil() as usize).max(1)
}

/// Separable, normalized, truncated Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    /// One-dimensional taps for offsets `-radius..=radius`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Value of the 2D kernel at offset `(dy, dx)`.
    pub fn value(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius() as isize;
        if dy.abs() > r || dx.abs() > r {
            return 0.0;
        }
        self.taps[(dy + r) as usize] * self.taps[(dx + r) as usize]
    }
}

pub fn gaussian_kernel(spec: &BlurSpec) -> Result<GaussianKernel> {
    if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
        return Err(invalid(format!("blur sigma must be positive, got {}", spec.sigma)));
    }
    let r = spec.radius as isize;
    let two_var = 2.0 * spec.sigma * spec.sigma;
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / two_var).exp()).collect();
    let z: f64 = raw.iter().sum();
    Ok(GaussianKernel { taps: raw.into_iter().map(|v| v / z).collect() })
}

/// Subsampling lattice: factor `s` and the position of the kept sample inside
/// each `s x s` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub factor: usize,
    /// `(row, col)` offset of the lattice, each in `0..factor`.
    pub phase: (usize, usize),
}

impl SamplingSpec {
    pub fn new(factor: usize) -> Result<Self> {
        SamplingSpec::with_phase(factor, (0, 0))
    }

    pub fn with_phase(factor: usize, phase: (usize, usize)) -> Result<Self> {
        if factor < 2 {
            return Err(invalid(format!("sampling factor must be at least 2, got {factor}")));
        }
        if phase.0 >= factor || phase.1 >= factor {
            return Err(invalid(format!("phase {phase:?} outside 0..{factor}")));
        }
        Ok(SamplingSpec { factor, phase })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        SamplingSpec::with_phase(self.factor, self.phase).map(|_| ())
    }
}

/// 2D convolution with mirror extension.
pub fn convolve(band: &Band, kernel: &GaussianKernel) -> Band {
    convolution_operator(band.grid(), kernel.taps()).apply(band)
}

/// Separable convolution operator with arbitrary symmetric odd-length taps.
pub fn convolution_operator(grid: Grid, taps: &[f64]) -> Separable {
    Separable {
        rows: LineOperator::convolution(grid.width, taps),
        cols: LineOperator::convolution(grid.height, taps),
    }
}

/// Normalized `size x size` box filter with mirror extension.
pub fn box_blur(band: &Band, size: usize) -> Band {
    let taps = vec![1.0 / size as f64; size];
    convolution_operator(band.grid(), &taps).apply(band)
}

fn decimation_operator(grid: Grid, spec: &SamplingSpec) -> Result<Separable> {
    spec.validate()?;
    grid.downscaled(spec.factor)?;
    Ok(Separable {
        rows: LineOperator::decimation(grid.width, spec.factor, spec.phase.1),
        cols: LineOperator::decimation(grid.height, spec.factor, spec.phase.0),
    })
}

/// `out(i, j) = in(s*i + phase_row, s*j + phase_col)`.
pub fn decimate(band: &Band, spec: &SamplingSpec) -> Result<Band> {
    Ok(decimation_operator(band.grid(), spec)?.apply(band))
}

/// Copies each pixel into an `s x s` block.
pub fn replicate_upsample(band: &Band, factor: usize) -> Result<Band> {
    if factor == 0 {
        return Err(invalid("upsampling factor must be positive"));
    }
    let grid = band.grid().upscaled(factor);
    Ok(Band::from_fn(grid, |r, c| band.get(r / factor, c / factor)))
}

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn keys_cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

fn bicubic_line(in_len: usize, positions: impl Iterator<Item = f64>) -> LineOperator {
    LineOperator::resampling(in_len, positions, 2, keys_cubic)
}

/// Bicubic upsampling operator whose nodes sit on the decimation lattice of
/// `spec`: high-resolution pixel `p` reads low-resolution coordinate
/// `(p - phase) / s`.
pub fn bicubic_upsample_operator(low: Grid, spec: &SamplingSpec) -> Separable {
    let s = spec.factor as f64;
    let (pr, pc) = spec.phase;
    Separable {
        rows: bicubic_line(low.width, (0..low.width * spec.factor).map(|p| (p as f64 - pc as f64) / s)),
        cols: bicubic_line(low.height, (0..low.height * spec.factor).map(|p| (p as f64 - pr as f64) / s)),
    }
}

/// Keys bicubic upsampling by `factor`; output pixels at multiples of
/// `factor` reproduce the input samples exactly.
pub fn bicubic_upsample(band: &Band, factor: usize) -> Result<Band> {
    let spec = SamplingSpec::new(factor)?;
    Ok(bicubic_upsample_operator(band.grid(), &spec).apply(band))
}

pub(crate) fn bicubic_upsample_phased(band: &Band, spec: &SamplingSpec) -> Band {
    bicubic_upsample_operator(band.grid(), spec).apply(band)
}

/// Translates the content by `(dx, dy)` pixels:
/// `out(row, col) = in(row - dy, col - dx)` sampled bicubically.
pub fn bicubic_translate(band: &Band, dx: f64, dy: f64) -> Result<Band> {
    let limit = band.width().min(band.height()) as f64 / 4.0;
    if !(dx.is_finite() && dy.is_finite()) || (band.width().min(band.height()) >= 4 && (dx.abs() >= limit || dy.abs() >= limit)) {
        return Err(invalid(format!(
            "translation ({dx}, {dy}) exceeds a quarter of the {} image",
            band.grid()
        )));
    }
    if dx == 0.0 && dy == 0.0 {
        return Ok(band.clone());
    }
    let op = Separable {
        rows: bicubic_line(band.width(), (0..band.width()).map(|c| c as f64 - dx)),
        cols: bicubic_line(band.height(), (0..band.height()).map(|r| r as f64 - dy)),
    };
    Ok(op.apply(band))
}

/// The forward operator of the data term, `decimate(convolve(u))`, and its
/// adjoint, precomputed for one high-resolution grid.
#[derive(Debug, Clone)]
pub struct BlurDecimate {
    blur: Separable,
    blur_t: Separable,
    decimation: Separable,
    decimation_t: Separable,
}

impl BlurDecimate {
    pub fn new(grid: Grid, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Self> {
        let kernel = gaussian_kernel(blur)?;
        let blur = convolution_operator(grid, kernel.taps());
        let decimation = decimation_operator(grid, sampling)?;
        Ok(BlurDecimate {
            blur_t: blur.transpose(),
            decimation_t: decimation.transpose(),
            blur,
            decimation,
        })
    }

    pub fn high_grid(&self) -> Grid {
        Grid { width: self.blur.rows.in_len(), height: self.blur.cols.in_len() }
    }

    pub fn low_grid(&self) -> Grid {
        self.decimation.output_grid()
    }

    pub fn blur(&self, band: &Band) -> Band {
        self.blur.apply(band)
    }

    pub fn forward(&self, band: &Band) -> Band {
        self.decimation.apply(&self.blur.apply(band))
    }

    /// Zero-fills onto the sampling lattice, then applies the transposed blur.
    pub fn adjoint(&self, low: &Band) -> Band {
        self.blur_t.apply(&self.decimation_t.apply(low))
    }

    /// Certified bound on the squared spectral norm of the forward operator:
    /// per axis, the largest absolute row sum of `A A^T` with `A = D K`. The
    /// 2D Gram matrix is the Kronecker product of the axis ones, so the bounds
    /// multiply.
    pub fn norm_sq_bound(&self) -> f64 {
        let axis = |d: &LineOperator, k: &LineOperator| {
            let a = compose(d, k);
            compose(&a, &a.transpose()).norm_inf()
        };
        axis(&self.decimation.rows, &self.blur.rows) * axis(&self.decimation.cols, &self.blur.cols)
    }
}

/// Matrix product `a * b` of two line operators.
fn compose(a: &LineOperator, b: &LineOperator) -> LineOperator {
    let rows = a
        .rows()
        .iter()
        .map(|row| {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for &(k, wa) in row {
                for &(j, wb) in &b.rows()[k] {
                    match acc.iter_mut().find(|(idx, _)| *idx == j) {
                        Some(entry) => entry.1 += wa * wb,
                        None => acc.push((j, wa * wb)),
                    }
                }
            }
            acc
        })
        .collect();
    LineOperator::from_rows(b.in_len(), rows)
}

/// `decimate(convolve(band, blur), sampling)`.
pub fn blur_downsample(band: &Band, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Band> {
    Ok(BlurDecimate::new(band.grid(), blur, sampling)?.forward(band))
}

/// Exact adjoint of [`blur_downsample`] onto a high-resolution grid.
pub fn adjoint_upsample_blur(low: &Band, blur: &BlurSpec, sampling: &SamplingSpec) -> Result<Band> {
    let high = low.grid().upscaled(sampling.factor);
    Ok(BlurDecimate::new(high, blur, sampling)?.adjoint(low))
}
