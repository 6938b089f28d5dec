//! Patch-similarity weights computed on a panchromatic image.
//!
//! For every pixel `p` and every offset `o` in the `(2 nu_r + 1)^2` search
//! window, the unnormalized weight is
//!
//! ```text
//! w(p, p+o) = exp(-(1/h^2) * sum_{|t|_inf <= nu_c} |P(p+t) - P(p+o+t)|^2)
//! ```
//!
//! The self weight `w(p, p)` is replaced by the largest weight of the other
//! window entries and the row is normalized to sum to one. Windows and
//! patches that leave the image read the mirror-extended panchromatic, so a
//! window entry refers to the pixel `reflect(p + o)`; near the border several
//! entries of one window can therefore refer to the same pixel.
//!
//! The resulting matrix is row-stochastic but not symmetric. The induced
//! regularizer `1/2 sum_p sum_q (u(q) - u(p))^2 w(p, q)` has gradient
//! `sum_q (u(p) - u(q)) (w(p, q) + w(q, p))`, which needs both the stored
//! rows and their transpose; both are kept.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{Band, Grid, PanImage};
use crate::sampling::reflect;

/// How the self weight interacts with normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfWeightRule {
    /// Substitute the maximum before normalizing; rows sum to one.
    #[default]
    MaxThenNormalize,
    /// Normalize with `exp(0)` as self term, then substitute the maximum of
    /// the normalized weights. Rows no longer sum to one.
    NormalizeThenMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlocalConfig {
    /// Search window half-width `nu_r`.
    pub search_radius: usize,
    /// Comparison patch half-width `nu_c`.
    pub patch_radius: usize,
    /// Filtering parameter `h`.
    pub h: f64,
    #[serde(default)]
    pub self_weight: SelfWeightRule,
}

impl Default for NonlocalConfig {
    /// 7x7 search window, 3x3 patches, `h = 1.25`.
    fn default() -> Self {
        NonlocalConfig {
            search_radius: 3,
            patch_radius: 1,
            h: 1.25,
            self_weight: SelfWeightRule::MaxThenNormalize,
        }
    }
}

impl NonlocalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.search_radius < 1 {
            return Err(invalid("search radius must be at least 1"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("filtering parameter h must be positive, got {}", self.h)));
        }
        Ok(())
    }

    pub fn window_side(&self) -> usize {
        2 * self.search_radius + 1
    }
}

/// Dense per-pixel window of weights plus the transposed (incoming) lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    grid: Grid,
    radius: usize,
    /// `grid.len() * side^2` weights, window offsets row-major from `(-r, -r)`.
    weights: Vec<f64>,
    /// Linear index of the pixel each window entry refers to.
    neighbors: Vec<u32>,
    /// CSR transpose: entries `(p, w(p, q))` of every row pointing at `q`.
    incoming_start: Vec<usize>,
    incoming: Vec<(u32, f64)>,
}

impl WeightField {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn search_radius(&self) -> usize {
        self.radius
    }

    pub fn window_len(&self) -> usize {
        let side = 2 * self.radius + 1;
        side * side
    }

    /// Window entries of pixel `(row, col)` as `((dx, dy), weight)`.
    pub fn window(&self, row: usize, col: usize) -> Vec<((isize, isize), f64)> {
        let side = 2 * self.radius + 1;
        let r = self.radius as isize;
        let base = self.grid.index(row, col) * self.window_len();
        (0..self.window_len())
            .map(|e| {
                let dy = (e / side) as isize - r;
                let dx = (e % side) as isize - r;
                ((dx, dy), self.weights[base + e])
            })
            .collect()
    }

    /// Row of pixel `p` as `(neighbor index, weight)` pairs.
    pub fn row(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let n = self.window_len();
        self.neighbors[p * n..(p + 1) * n]
            .iter()
            .zip(&self.weights[p * n..(p + 1) * n])
            .map(|(&q, &w)| (q as usize, w))
    }

    /// Entries `(p, w(p, q))` of all rows that refer to `q`.
    pub fn incoming(&self, q: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.incoming[self.incoming_start[q]..self.incoming_start[q + 1]]
            .iter()
            .map(|&(p, w)| (p as usize, w))
    }

    pub fn row_sum(&self, p: usize) -> f64 {
        self.row(p).map(|(_, w)| w).sum()
    }

    /// Gershgorin bound on the largest eigenvalue of the symmetrized graph
    /// Laplacian: `2 max_p sum_{q != p} (w(p, q) + w(q, p))`.
    pub fn laplacian_bound(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| {
                let out: f64 = self.row(p).filter(|&(q, _)| q != p).map(|(_, w)| w).sum();
                let inc: f64 = self.incoming(p).filter(|&(q, _)| q != p).map(|(_, w)| w).sum();
                2.0 * (out + inc)
            })
            .fold(0.0, f64::max)
    }

    /// CSV dump `offset_x,offset_y,weight` of one pixel's window.
    pub fn window_csv(&self, row: usize, col: usize) -> Result<String> {
        if row >= self.grid.height || col >= self.grid.width {
            return Err(invalid(format!("pixel ({row}, {col}) outside {}", self.grid)));
        }
        let mut out = String::from("offset_x,offset_y,weight\n");
        for ((dx, dy), w) in self.window(row, col) {
            let _ = writeln!(out, "{dx},{dy},{w:e}");
        }
        Ok(out)
    }
}

/// Computes the windowed weight field of `pan`.
pub fn compute_weights(pan: &PanImage, cfg: &NonlocalConfig) -> Result<WeightField> {
    cfg.validate()?;
    let grid = pan.grid();
    let r = cfg.search_radius as isize;
    let c = cfg.patch_radius as isize;
    let side = cfg.window_side();
    let n = side * side;
    let center = n / 2;
    let inv_h2 = 1.0 / (cfg.h * cfg.h);

    // Mirror-padded copy so that every patch of every window is addressable.
    let pad = (r + c) as usize;
    let pw = grid.width + 2 * pad;
    let ph = grid.height + 2 * pad;
    let padded: Vec<f64> = (0..ph)
        .flat_map(|y| {
            let sy = reflect(y as isize - pad as isize, grid.height);
            (0..pw).map(move |x| pan.get(sy, reflect(x as isize - pad as isize, grid.width)))
        })
        .collect();
    let at = |y: isize, x: isize| padded[(y + pad as isize) as usize * pw + (x + pad as isize) as usize];

    let mut weights = vec![0.0; grid.len() * n];
    let mut neighbors = vec![0u32; grid.len() * n];
    weights
        .par_chunks_mut(n)
        .zip(neighbors.par_chunks_mut(n))
        .enumerate()
        .for_each(|(p, (row_w, row_q))| {
            let py = (p / grid.width) as isize;
            let px = (p % grid.width) as isize;
            let mut dist = vec![0.0; n];
            for e in 0..n {
                let oy = (e / side) as isize - r;
                let ox = (e % side) as isize - r;
                let qy = reflect(py + oy, grid.height);
                let qx = reflect(px + ox, grid.width);
                row_q[e] = (qy * grid.width + qx) as u32;
                let mut d = 0.0;
                for ty in -c..=c {
                    for tx in -c..=c {
                        let diff = at(py + ty, px + tx) - at(py + oy + ty, px + ox + tx);
                        d += diff * diff;
                    }
                }
                dist[e] = d;
            }
            match cfg.self_weight {
                SelfWeightRule::MaxThenNormalize => {
                    // The self weight equals the best other weight, so shifting
                    // every distance by the smallest non-self distance leaves the
                    // normalized row unchanged and keeps the largest terms at 1.
                    let dmin = dist
                        .iter()
                        .enumerate()
                        .filter(|&(e, _)| e != center)
                        .map(|(_, &d)| d)
                        .fold(f64::INFINITY, f64::min);
                    for e in 0..n {
                        row_w[e] = if e == center { 1.0 } else { (-(dist[e] - dmin) * inv_h2).exp() };
                    }
                    let z: f64 = row_w.iter().sum();
                    row_w.iter_mut().for_each(|w| *w /= z);
                }
                SelfWeightRule::NormalizeThenMax => {
                    for e in 0..n {
                        row_w[e] = (-dist[e] * inv_h2).exp();
                    }
                    let z: f64 = row_w.iter().sum();
                    row_w.iter_mut().for_each(|w| *w /= z);
                    let best = row_w
                        .iter()
                        .enumerate()
                        .filter(|&(e, _)| e != center)
                        .map(|(_, &w)| w)
                        .fold(0.0, f64::max);
                    row_w[center] = best;
                }
            }
        });

    let (incoming_start, incoming) = transpose(grid.len(), n, &neighbors, &weights);
    Ok(WeightField { grid, radius: cfg.search_radius, weights, neighbors, incoming_start, incoming })
}

fn transpose(len: usize, n: usize, neighbors: &[u32], weights: &[f64]) -> (Vec<usize>, Vec<(u32, f64)>) {
    let mut start = vec![0usize; len + 1];
    for &q in neighbors {
        start[q as usize + 1] += 1;
    }
    for i in 0..len {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut incoming = vec![(0u32, 0.0); neighbors.len()];
    for p in 0..len {
        for e in 0..n {
            let q = neighbors[p * n + e] as usize;
            incoming[fill[q]] = (p as u32, weights[p * n + e]);
            fill[q] += 1;
        }
    }
    (start, incoming)
}

/// `out(p) = sum_q (u(p) - u(q)) (w(p, q) + w(q, p))`, the gradient of
/// [`nonlocal_energy`].
pub fn apply_nonlocal_operator(w: &WeightField, band: &Band) -> Result<Band> {
    if band.grid() != w.grid() {
        return Err(invalid(format!("band is {} but weights are {}", band.grid(), w.grid())));
    }
    let u = band.data();
    let mut out = vec![0.0; u.len()];
    out.par_iter_mut().enumerate().for_each(|(p, o)| {
        let up = u[p];
        let mut acc = 0.0;
        for (q, wt) in w.row(p) {
            acc += (up - u[q]) * wt;
        }
        for (q, wt) in w.incoming(p) {
            acc += (up - u[q]) * wt;
        }
        *o = acc;
    });
    Ok(Band::from_raw(band.grid(), out))
}

/// `1/2 sum_p sum_q (u(q) - u(p))^2 w(p, q)`.
pub fn nonlocal_energy(w: &WeightField, band: &Band) -> Result<f64> {
    if band.grid() != w.grid() {
        return Err(invalid(format!("band is {} but weights are {}", band.grid(), w.grid())));
    }
    let u = band.data();
    let mut total = 0.0;
    for (p, &up) in u.iter().enumerate() {
        for (q, wt) in w.row(p) {
            let d = u[q] - up;
            total += d * d * wt;
        }
    }
    Ok(0.5 * total)
}
