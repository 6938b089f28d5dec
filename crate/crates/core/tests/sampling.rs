use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use pansharp::sampling::{
    adjoint_upsample_blur, bicubic_translate, bicubic_upsample, blur_downsample, box_blur, convolve, decimate, gaussian_kernel,
    BlurDecimate, BlurSpec, SamplingSpec,
};
use pansharp::simulate::zone_plate;
use pansharp::{Band, Grid};

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i - 1 } else { 2 * n - 1 - i };
    }
    i as usize
}

/// Direct 2D sum over the full kernel support, no separability.
fn brute_convolve(band: &Band, sigma: f64, radius: usize) -> Band {
    let r = radius as isize;
    let g = |t: isize| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp();
    let z: f64 = (-r..=r).flat_map(|a| (-r..=r).map(move |b| g(a) * g(b))).sum();
    Band::from_fn(band.grid(), |y, x| {
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                acc += g(dy) * g(dx) / z * band.get(mirror(y as isize - dy, band.height()), mirror(x as isize - dx, band.width()));
            }
        }
        acc
    })
}

fn band_strategy(max_side: usize) -> impl Strategy<Value = Band> {
    (4..=max_side, 4..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(-100.0f64..100.0, w * h).prop_map(move |v| Band::new(Grid::new(w, h).unwrap(), v).unwrap())
    })
}

fn max_abs_diff(a: &Band, b: &Band) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn convolution_matches_direct_summation() {
    let band = Band::from_fn(Grid::new(13, 9).unwrap(), |r, c| ((r * 31 + c * 17) % 23) as f64 - 7.0);
    for sigma in [0.6, 1.3, 1.7] {
        let spec = BlurSpec::gaussian(sigma).unwrap();
        let ours = convolve(&band, &gaussian_kernel(&spec).unwrap());
        assert!(max_abs_diff(&ours, &brute_convolve(&band, sigma, spec.radius)) < 1e-12, "sigma {sigma}");
    }
}

#[test]
fn blur_downsample_is_convolution_then_lattice_pick() {
    let band = Band::from_fn(Grid::new(16, 12).unwrap(), |r, c| (r as f64 * 0.7).sin() * 40.0 + c as f64);
    let blur = BlurSpec::gaussian(1.3).unwrap();
    let sampling = SamplingSpec::with_phase(4, (1, 2)).unwrap();
    let full = brute_convolve(&band, 1.3, blur.radius);
    let low = blur_downsample(&band, &blur, &sampling).unwrap();
    assert_eq!(low.grid(), Grid::new(4, 3).unwrap());
    for i in 0..3 {
        for j in 0..4 {
            assert!((low.get(i, j) - full.get(4 * i + 1, 4 * j + 2)).abs() < 1e-12);
        }
    }
}

#[test]
fn box_blur_of_constant_is_constant() {
    let band = Band::filled(Grid::new(7, 5).unwrap(), 3.25);
    assert!(box_blur(&band, 5).data().iter().all(|v| (v - 3.25).abs() < 1e-14));
}

#[test]
fn integer_translation_moves_samples() {
    let band = Band::from_fn(Grid::new(16, 16).unwrap(), |r, c| (r * 16 + c) as f64);
    let moved = bicubic_translate(&band, 2.0, -1.0).unwrap();
    // out(r, c) = in(r + 1, c - 2) away from the borders.
    for r in 2..13 {
        for c in 4..14 {
            assert!((moved.get(r, c) - band.get(r + 1, c - 2)).abs() < 1e-12);
        }
    }
    assert!(bicubic_translate(&band, 4.0, 0.0).is_err());
}

#[test]
fn forward_norm_bound_dominates_power_iteration() {
    let grid = Grid::new(32, 24).unwrap();
    for sigma in [0.8, 1.3, 2.0] {
        let op = BlurDecimate::new(grid, &BlurSpec::gaussian(sigma).unwrap(), &SamplingSpec::new(4).unwrap()).unwrap();
        let mut x = Band::from_fn(grid, |r, c| 1.0 + ((r * 7 + c * 3) % 5) as f64);
        let mut lambda = 0.0;
        for _ in 0..200 {
            let y = op.adjoint(&op.forward(&x));
            lambda = y.dot(&x) / x.dot(&x);
            let n = y.dot(&y).sqrt();
            x = y.map(|v| v / n);
        }
        let bound = op.norm_sq_bound();
        assert!(lambda <= bound * (1.0 + 1e-12), "sigma {sigma}: {lambda} > {bound}");
        assert!(bound < 1.5 * lambda + 1e-3, "sigma {sigma}: bound {bound} is loose against {lambda}");
    }
}

/// Share of spectral energy beyond the low-resolution Nyquist frequency
/// `1 / (2 s)` after blurring. Decimating folds this share back as aliasing.
fn aliased_fraction(band: &Band, factor: usize) -> f64 {
    let (w, h) = (band.width(), band.height());
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = (planner.plan_fft_forward(w), planner.plan_fft_forward(h));
    let mut data: Vec<Complex<f64>> = band.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for c in 0..w {
        for r in 0..h {
            column[r] = data[r * w + c];
        }
        col_fft.process(&mut column);
        for r in 0..h {
            data[r * w + c] = column[r];
        }
    }
    let freq = |k: usize, n: usize| (if k <= n / 2 { k as f64 } else { k as f64 - n as f64 }) / n as f64;
    let nyquist = 0.5 / factor as f64;
    let (mut above, mut total) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if r == 0 && c == 0 {
                continue;
            }
            let e = data[r * w + c].norm_sqr();
            total += e;
            if freq(r, h).abs().max(freq(c, w).abs()) > nyquist {
                above += e;
            }
        }
    }
    above / total
}

#[test]
fn sharper_sensor_blur_leaves_more_aliasing() {
    let plate = zone_plate(Grid::new(128, 128).unwrap(), 100.0);
    let fraction = |sigma: f64| aliased_fraction(&convolve(&plate, &BlurSpec::gaussian(sigma).unwrap().kernel().unwrap()), 4);
    let (sharp, soft) = (fraction(1.3), fraction(1.7));
    assert!(sharp > 2.0 * soft, "sigma 1.3 keeps {sharp:.4}, sigma 1.7 keeps {soft:.4}");
    assert!(sharp > 0.01, "sigma 1.3 should alias visibly, kept {sharp:.4}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity(x in band_strategy(24), sigma in 0.4f64..2.5, factor in 2usize..=4, seed in 0u64..1000) {
        let (lw, lh) = (x.width() / factor, x.height() / factor);
        prop_assume!(lw > 0 && lh > 0);
        let x = Band::from_fn(Grid::new(lw * factor, lh * factor).unwrap(), |r, c| x.get(r, c));
        let y = Band::from_fn(Grid::new(lw, lh).unwrap(), |r, c| ((r * 13 + c * 29 + seed as usize) % 17) as f64 - 8.0);
        let blur = BlurSpec::gaussian(sigma).unwrap();
        let sampling = SamplingSpec::with_phase(factor, ((seed as usize) % factor, (seed as usize / 7) % factor)).unwrap();
        let lhs = blur_downsample(&x, &blur, &sampling).unwrap().dot(&y);
        let rhs = x.dot(&adjoint_upsample_blur(&y, &blur, &sampling).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn bicubic_upsampling_interpolates_the_lattice(low in band_strategy(10), factor in 2usize..=4) {
        let up = bicubic_upsample(&low, factor).unwrap();
        let back = decimate(&up, &SamplingSpec::new(factor).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&back, &low) < 1e-12);
    }

    #[test]
    fn gaussian_blur_preserves_the_mean_of_constants(value in -1e3f64..1e3, sigma in 0.3f64..3.0) {
        let band = Band::filled(Grid::new(9, 11).unwrap(), value);
        let out = convolve(&band, &BlurSpec::gaussian(sigma).unwrap().kernel().unwrap());
        prop_assert!(out.data().iter().all(|v| (v - value).abs() <= 1e-12 * value.abs().max(1.0)));
    }

    #[test]
    fn translation_round_trip_is_close_for_smooth_content(dx in -1.5f64..1.5, dy in -1.5f64..1.5) {
        let band = Band::from_fn(Grid::new(32, 32).unwrap(), |r, c| (r as f64 * 0.2).sin() * 10.0 + (c as f64 * 0.15).cos() * 10.0);
        let back = bicubic_translate(&bicubic_translate(&band, dx, dy).unwrap(), -dx, -dy).unwrap();
        for r in 6..26 {
            for c in 6..26 {
                prop_assert!((back.get(r, c) - band.get(r, c)).abs() < 0.05);
            }
        }
    }
}
