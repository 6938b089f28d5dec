//! One-dimensional linear operators applied along rows or columns.
//!
//! Every separable operator in the crate (blur, box filter, bicubic
//! resampling, decimation) is expressed as a sparse matrix acting on one
//! axis. Each output sample is an ordered list of `(input index, weight)`
//! taps; evaluation always walks the taps in that order, so results do not
//! depend on how many threads process the lines.

use rayon::prelude::*;

use crate::raster::{Band, Grid};

/// Index of `i` after half-sample symmetric extension of `0..n`
/// (`... 1 0 | 0 1 ... n-1 | n-1 n-2 ...`).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let r = i.rem_euclid(period);
    if r < n {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineOperator {
    in_len: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl LineOperator {
    pub fn from_rows(in_len: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows.iter().flatten().all(|&(i, _)| i < in_len));
        LineOperator { in_len, rows }
    }

    /// Convolution with a centered, odd-length kernel under mirror extension:
    /// `out[i] = sum_t taps[t] * x[reflect(i - (t - r))]`.
    pub fn convolution(len: usize, taps: &[f64]) -> Self {
        let radius = (taps.len() / 2) as isize;
        let rows = (0..len as isize)
            .map(|i| {
                taps.iter()
                    .enumerate()
                    .map(|(t, &w)| (reflect(i - (t as isize - radius), len), w))
                    .collect()
            })
            .collect();
        LineOperator { in_len: len, rows }
    }

    /// Keeps every `factor`-th sample starting at `phase`.
    pub fn decimation(in_len: usize, factor: usize, phase: usize) -> Self {
        let rows = (0..in_len / factor).map(|i| vec![(i * factor + phase, 1.0)]).collect();
        LineOperator { in_len, rows }
    }

    /// Samples the input at arbitrary real positions with an interpolation
    /// kernel of half-support `support` (mirror extension at both ends).
    pub fn resampling(in_len: usize, positions: impl Iterator<Item = f64>, support: usize, kernel: impl Fn(f64) -> f64) -> Self {
        let s = support as isize;
        let rows = positions
            .map(|x| {
                let base = x.floor() as isize;
                (base - s + 1..=base + s)
                    .map(|m| (reflect(m, in_len), kernel(x - m as f64)))
                    .collect()
            })
            .collect();
        LineOperator { in_len, rows }
    }

    #[inline]
    pub fn in_len(&self) -> usize {
        self.in_len
    }

    #[inline]
    pub fn out_len(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Exact matrix transpose, preserving the order in which taps were emitted.
    pub fn transpose(&self) -> LineOperator {
        let mut rows = vec![Vec::new(); self.in_len];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                rows[j].push((i, w));
            }
        }
        LineOperator { in_len: self.rows.len(), rows }
    }

    /// Largest absolute column sum (the induced 1-norm).
    pub fn norm_one(&self) -> f64 {
        let mut cols = vec![0.0; self.in_len];
        for row in &self.rows {
            for &(j, w) in row {
                cols[j] += w.abs();
            }
        }
        cols.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute row sum (the induced infinity-norm).
    pub fn norm_inf(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, w)| w.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply_1d(&self, input: &[f64], output: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_len);
        for (out, row) in output.iter_mut().zip(&self.rows) {
            let mut acc = 0.0;
            for &(j, w) in row {
                acc += w * input[j];
            }
            *out = acc;
        }
    }

    /// Applies the operator along every row (horizontal axis).
    pub fn apply_rows(&self, band: &Band) -> Band {
        assert_eq!(band.width(), self.in_len, "row operator width mismatch");
        let grid = Grid { width: self.out_len(), height: band.height() };
        let mut out = vec![0.0; grid.len()];
        if grid.is_empty() {
            return Band::from_raw(grid, out);
        }
        out.par_chunks_mut(grid.width)
            .enumerate()
            .for_each(|(r, line)| self.apply_1d(band.row(r), line));
        Band::from_raw(grid, out)
    }

    /// Applies the operator along every column (vertical axis).
    pub fn apply_cols(&self, band: &Band) -> Band {
        assert_eq!(band.height(), self.in_len, "column operator height mismatch");
        let width = band.width();
        let grid = Grid { width, height: self.out_len() };
        let mut out = vec![0.0; grid.len()];
        if grid.is_empty() {
            return Band::from_raw(grid, out);
        }
        out.par_chunks_mut(width).enumerate().for_each(|(r, line)| {
            for &(src, w) in &self.rows[r] {
                for (o, &v) in line.iter_mut().zip(band.row(src)) {
                    *o += w * v;
                }
            }
        });
        Band::from_raw(grid, out)
    }
}

/// A separable 2D operator: `cols` acts on the vertical axis, `rows` on the
/// horizontal one. The two commute, so the application order is immaterial
/// up to rounding; it is fixed (rows first) for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable {
    pub rows: LineOperator,
    pub cols: LineOperator,
}

impl Separable {
    pub fn apply(&self, band: &Band) -> Band {
        self.cols.apply_cols(&self.rows.apply_rows(band))
    }

    pub fn transpose(&self) -> Separable {
        Separable { rows: self.rows.transpose(), cols: self.cols.transpose() }
    }

    /// `||A||_1 * ||A||_inf`, an upper bound on the squared spectral norm.
    pub fn spectral_norm_sq_bound(&self) -> f64 {
        self.rows.norm_one() * self.rows.norm_inf() * self.cols.norm_one() * self.cols.norm_inf()
    }

    pub fn output_grid(&self) -> Grid {
        Grid { width: self.rows.out_len(), height: self.cols.out_len() }
    }
}
