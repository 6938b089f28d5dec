//! Q2n: the universal quality index on hypercomplex pixels.
//!
//! A pixel with `C` bands is read as an element of the `2^n`-dimensional
//! Cayley-Dickson algebra (`2^n >= C`, missing components zero): reals,
//! complex numbers, quaternions, octonions and so on. Products follow
//! `(a, b)(c, d) = (ac - d* b, da + b c*)` with `(a, b)* = (a*, -b)`.

use std::ops::{Add, Mul, Sub};

use super::{blocks, ssim_band, BLOCK};
use crate::error::{invalid, Error, Result};
use crate::raster::MultispectralImage;

#[derive(Debug, Clone, PartialEq)]
pub struct Hypercomplex(Vec<f64>);

impl Hypercomplex {
    /// Zero-pads `components` to the next power of two.
    pub fn new(components: &[f64]) -> Self {
        let mut v = components.to_vec();
        v.resize(components.len().max(1).next_power_of_two(), 0.0);
        Hypercomplex(v)
    }

    pub fn zero(dim: usize) -> Self {
        Hypercomplex(vec![0.0; dim.max(1).next_power_of_two()])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn conj(&self) -> Self {
        let mut v = self.0.clone();
        v.iter_mut().skip(1).for_each(|x| *x = -*x);
        Hypercomplex(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Hypercomplex(self.0.iter().map(|x| x * k).collect())
    }
}

/// Cayley-Dickson product of two slices of equal power-of-two length.
fn product(x: &[f64], y: &[f64], out: &mut [f64]) {
    let n = x.len();
    if n == 1 {
        out[0] = x[0] * y[0];
        return;
    }
    let h = n / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let conj = |v: &[f64]| -> Vec<f64> {
        let mut v = v.to_vec();
        v.iter_mut().skip(1).for_each(|x| *x = -*x);
        v
    };
    let mut t1 = vec![0.0; h];
    let mut t2 = vec![0.0; h];
    product(a, c, &mut t1);
    product(&conj(d), b, &mut t2);
    for i in 0..h {
        out[i] = t1[i] - t2[i];
    }
    product(d, a, &mut t1);
    product(b, &conj(c), &mut t2);
    for i in 0..h {
        out[h + i] = t1[i] + t2[i];
    }
}

impl Mul for &Hypercomplex {
    type Output = Hypercomplex;

    fn mul(self, rhs: &Hypercomplex) -> Hypercomplex {
        assert_eq!(self.0.len(), rhs.0.len(), "hypercomplex dimensions differ");
        let mut out = vec![0.0; self.0.len()];
        product(&self.0, &rhs.0, &mut out);
        Hypercomplex(out)
    }
}

impl Add for &Hypercomplex {
    type Output = Hypercomplex;

    fn add(self, rhs: &Hypercomplex) -> Hypercomplex {
        Hypercomplex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Hypercomplex {
    type Output = Hypercomplex;

    fn sub(self, rhs: &Hypercomplex) -> Hypercomplex {
        Hypercomplex(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

fn pixel(image: &MultispectralImage, r: usize, c: usize) -> Hypercomplex {
    let v: Vec<f64> = image.bands().iter().map(|b| b.get(r, c)).collect();
    Hypercomplex::new(&v)
}

fn block_q2n(x: &MultispectralImage, y: &MultispectralImage, (r0, c0): (usize, usize)) -> Option<f64> {
    let n = (BLOCK * BLOCK) as f64;
    let dim = x.num_bands().next_power_of_two();
    let cells: Vec<(Hypercomplex, Hypercomplex)> = (r0..r0 + BLOCK)
        .flat_map(|r| (c0..c0 + BLOCK).map(move |c| (r, c)))
        .map(|(r, c)| (pixel(x, r, c), pixel(y, r, c)))
        .collect();
    let mut mx = Hypercomplex::zero(dim);
    let mut my = Hypercomplex::zero(dim);
    for (a, b) in &cells {
        mx = &mx + a;
        my = &my + b;
    }
    let (mx, my) = (mx.scale(1.0 / n), my.scale(1.0 / n));
    let (mut vx, mut vy) = (0.0, 0.0);
    let mut cxy = Hypercomplex::zero(dim);
    for (a, b) in &cells {
        let (da, db) = (a - &mx, b - &my);
        vx += da.norm().powi(2);
        vy += db.norm().powi(2);
        cxy = &cxy + &(&da * &db.conj());
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy.scale(1.0 / n));
    let (nx, ny) = (mx.norm(), my.norm());
    let denom = (vx + vy) * (nx * nx + ny * ny);
    (denom != 0.0).then(|| 4.0 * cxy.norm() * nx * ny / denom)
}

/// Blockwise hypercomplex quality index.
///
/// For a single band the sign of the covariance is kept, so the result is
/// the ordinary universal quality index.
pub fn q2n(reference: &MultispectralImage, test: &MultispectralImage) -> Result<f64> {
    reference.check_same_shape(test)?;
    if reference.num_bands() == 1 {
        return ssim_band(reference.band(0), test.band(0));
    }
    if reference.num_bands() == 0 {
        return Err(invalid("Q2n needs at least one band"));
    }
    let scores: Vec<f64> = blocks(reference.band(0))?
        .into_iter()
        .filter_map(|b| block_q2n(reference, test, b))
        .collect();
    if scores.is_empty() {
        return Err(Error::Degenerate("no block has a defined Q2n index".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
