//! Independent reference implementations built from plain loops and dense
//! matrices, plus seeded random instances.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rldeconv::penaliser::{rf, DataPenaliser, SmoothnessPenaliser};
use rldeconv::{Image, PointSpreadFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize, lo: f64, hi: f64) -> Image {
    let data = (0..w * h * c).map(|_| rng.random_range(lo..hi)).collect();
    Image::new(w, h, c, data).unwrap()
}

pub fn random_psf(rng: &mut ChaCha8Rng, w: usize, h: usize) -> PointSpreadFunction {
    let weights = (0..w * h).map(|_| rng.random_range(0.0..1.0)).collect();
    PointSpreadFunction::new(w, h, weights).unwrap()
}

/// Source index for a possibly out-of-range coordinate.
pub fn source_index(mut i: isize, n: usize, cyclic: bool) -> usize {
    let n = n as isize;
    if cyclic {
        return i.rem_euclid(n) as usize;
    }
    while i < 0 || i >= n {
        i = if i < 0 { -i - 1 } else { 2 * n - 1 - i };
    }
    i as usize
}

/// Dense matrix of the blur on one `w x h` plane, row = output pixel.
pub fn blur_matrix(psf: &PointSpreadFunction, w: usize, h: usize, cyclic: bool) -> Vec<Vec<f64>> {
    let (rx, ry) = (psf.radius_x() as isize, psf.radius_y() as isize);
    let mut a = vec![vec![0.0; w * h]; w * h];
    for y in 0..h {
        for x in 0..w {
            for ky in 0..psf.height() {
                for kx in 0..psf.width() {
                    let sx = source_index(x as isize - (kx as isize - rx), w, cyclic);
                    let sy = source_index(y as isize - (ky as isize - ry), h, cyclic);
                    a[y * w + x][sy * w + sx] += psf.weight(kx, ky);
                }
            }
        }
    }
    a
}

/// Quadruple loop `sum_z h(z) g(x - z)`.
pub fn direct_convolve(g: &Image, psf: &PointSpreadFunction, cyclic: bool) -> Image {
    let (w, h) = (g.width(), g.height());
    let (rx, ry) = (psf.radius_x() as isize, psf.radius_y() as isize);
    Image::from_fn(w, h, g.channels(), |x, y, c| {
        let mut sum = 0.0;
        for ky in 0..psf.height() {
            for kx in 0..psf.width() {
                let sx = source_index(x as isize - (kx as isize - rx), w, cyclic);
                let sy = source_index(y as isize - (ky as isize - ry), h, cyclic);
                sum += psf.weight(kx, ky) * g.get(sx, sy, c);
            }
        }
        sum
    })
}

/// Transpose of [`blur_matrix`] applied plane by plane.
pub fn direct_adjoint(v: &Image, psf: &PointSpreadFunction, cyclic: bool) -> Image {
    let (w, h) = (v.width(), v.height());
    let a = blur_matrix(psf, w, h, cyclic);
    Image::from_fn(w, h, v.channels(), |x, y, c| {
        let col = y * w + x;
        (0..w * h).map(|row| a[row][col] * v.get(row % w, row / w, c)).sum()
    })
}

/// Squared gradient of one channel: mean of squared forward and backward
/// differences on each axis, zero across the border.
pub fn stencil_s2(u: &Image, c: usize) -> Vec<f64> {
    let (w, h) = (u.width(), u.height());
    let at = |x: isize, y: isize| -> Option<f64> {
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h).then(|| u.get(x as usize, y as usize, c))
    };
    let mut s2 = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let centre = at(x, y).unwrap();
            let mut sum = 0.0;
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if let Some(v) = at(x + dx, y + dy) {
                    sum += (v - centre) * (v - centre);
                }
            }
            s2[y as usize * w + x as usize] = sum / 2.0;
        }
    }
    s2
}

/// Divergence assembled from explicit half-point fluxes.
pub fn stencil_divergence(u: &Image, p: &SmoothnessPenaliser, coupled: bool) -> Image {
    let (w, h, ch) = (u.width(), u.height(), u.channels());
    let shared: Vec<f64> = (0..ch)
        .map(|c| stencil_s2(u, c))
        .fold(vec![0.0; w * h], |acc, s| acc.iter().zip(&s).map(|(a, b)| a + b).collect());
    let mut out = Image::filled(w, h, ch, 0.0);
    for c in 0..ch {
        let s2 = if coupled { shared.clone() } else { stencil_s2(u, c) };
        let g: Vec<f64> = s2.iter().map(|&s| p.derivative(s)).collect();
        // flux_x[y][x] lives at (x + 1/2, y), flux_y[y][x] at (x, y + 1/2).
        let mut flux_x = vec![0.0; w * h];
        let mut flux_y = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    flux_x[y * w + x] = (g[y * w + x] + g[y * w + x + 1]) / 2.0 * (u.get(x + 1, y, c) - u.get(x, y, c));
                }
                if y + 1 < h {
                    flux_y[y * w + x] = (g[y * w + x] + g[(y + 1) * w + x]) / 2.0 * (u.get(x, y + 1, c) - u.get(x, y, c));
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let west = if x > 0 { flux_x[y * w + x - 1] } else { 0.0 };
                let north = if y > 0 { flux_y[(y - 1) * w + x] } else { 0.0 };
                out.set(x, y, c, flux_x[y * w + x] - west + flux_y[y * w + x] - north);
            }
        }
    }
    out
}

pub fn zip_map(a: &Image, b: &Image, f: impl Fn(f64, f64) -> f64) -> Image {
    Image::from_fn(a.width(), a.height(), a.channels(), |x, y, c| f(a.get(x, y, c), b.get(x, y, c)))
}

/// Robust and regularised RL step written out from its definition. With
/// `phi = None` the data weight is 1 and the denominator's adjoint term is
/// the constant 1 (regularised RL); `alpha = 0` drops the regulariser.
pub fn oracle_step(
    u: &Image,
    f: &Image,
    psf: &PointSpreadFunction,
    cyclic: bool,
    phi: Option<DataPenaliser>,
    psi: &SmoothnessPenaliser,
    alpha: f64,
    coupled: bool,
) -> Image {
    let (w, h, ch) = (u.width(), u.height(), u.channels());
    let hu = direct_convolve(u, psf, cyclic);
    let weights = match phi {
        Some(p) => {
            let mut r = Image::filled(w, h, ch, 0.0);
            for y in 0..h {
                for x in 0..w {
                    if coupled {
                        let sum: f64 = (0..ch).map(|c| rf(hu.get(x, y, c), f.get(x, y, c)).unwrap()).sum();
                        for c in 0..ch {
                            r.set(x, y, c, p.derivative(sum));
                        }
                    } else {
                        for c in 0..ch {
                            r.set(x, y, c, p.derivative(rf(hu.get(x, y, c), f.get(x, y, c)).unwrap()));
                        }
                    }
                }
            }
            r
        }
        None => Image::filled(w, h, ch, 1.0),
    };
    let numerator = direct_adjoint(&zip_map(&zip_map(f, &hu, |a, b| a / b), &weights, |a, b| a * b), psf, cyclic);
    let denominator = match phi {
        Some(_) => direct_adjoint(&weights, psf, cyclic),
        None => Image::filled(w, h, ch, 1.0),
    };
    let div = if alpha > 0.0 {
        stencil_divergence(u, psi, coupled)
    } else {
        Image::filled(w, h, ch, 0.0)
    };
    Image::from_fn(w, h, ch, |x, y, c| {
        let d = alpha * div.get(x, y, c);
        let (pos, neg) = ((d + d.abs()) / 2.0, (d - d.abs()) / 2.0);
        (numerator.get(x, y, c) + pos) / (denominator.get(x, y, c) - neg) * u.get(x, y, c)
    })
}

/// `sum Phi(sum_c r_f) + alpha / 2 sum Psi(sum_c s2)` by direct summation.
pub fn oracle_energy(
    u: &Image,
    f: &Image,
    psf: &PointSpreadFunction,
    phi: &DataPenaliser,
    psi: &SmoothnessPenaliser,
    alpha: f64,
) -> f64 {
    let (w, h, ch) = (u.width(), u.height(), u.channels());
    let hu = direct_convolve(u, psf, false);
    let s2: Vec<Vec<f64>> = (0..ch).map(|c| stencil_s2(u, c)).collect();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let r: f64 = (0..ch).map(|c| rf(hu.get(x, y, c), f.get(x, y, c)).unwrap()).sum();
            let g: f64 = (0..ch).map(|c| s2[c][y * w + x]).sum();
            total += phi.value(r) + alpha / 2.0 * psi.value(g);
        }
    }
    total
}

pub fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest absolute difference over pixels at least `band` away from every border.
pub fn interior_max_diff(a: &Image, b: &Image, band: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..a.channels() {
        for y in band..a.height().saturating_sub(band) {
            for x in band..a.width().saturating_sub(band) {
                worst = worst.max((a.get(x, y, c) - b.get(x, y, c)).abs());
            }
        }
    }
    worst
}

pub fn dot(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}
