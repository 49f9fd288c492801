//! Discrete `div(Psi'(|grad u|^2) grad u)` with no-flux (mirror) boundaries.
//!
//! Stencil, on a unit grid:
//!
//! * `s2` at a pixel is the mean of the squared one-sided differences on each
//!   axis, `((u[x+1]-u[x])^2 + (u[x]-u[x-1])^2) / 2` plus the same along `y`;
//!   differences across the border are zero.
//! * the diffusivity at a half-point is the arithmetic mean of `Psi'(s2)` at
//!   the two adjacent pixels;
//! * the divergence is the difference of the fluxes through the four
//!   half-points, with zero flux through the border.
//!
//! With this choice the field is exactly the negative gradient of the
//! discrete energy `1/2 sum Psi(s2)` (see [`regulariser_energy`]), and the
//! per-channel sum of the field telescopes to zero.
//!
//! In coupled mode the diffusivity is evaluated on `G = sum_c s2_c` and shared
//! by all channels.

use crate::image::Image;
use crate::penaliser::SmoothnessPenaliser;
use crate::scratch;

/// Signed per-pixel, per-channel divergence values, same shape as the source.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceField(Image);

impl DivergenceField {
    pub fn values(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }
}

/// Squared gradient magnitude of one plane, accumulated into `acc`.
pub(crate) fn accumulate_s2(u: &[f64], width: usize, height: usize, acc: &mut [f64]) {
    let mut half = vec![0.0; width];
    for y in 0..height {
        let row = &u[y * width..(y + 1) * width];
        let out = &mut acc[y * width..(y + 1) * width];
        for ((q, &a), &b) in half.iter_mut().zip(row).zip(&row[1..]) {
            let d = b - a;
            *q = 0.5 * d * d;
        }
        let m = width - 1;
        for (o, &q) in out[..m].iter_mut().zip(&half[..m]) {
            *o += q;
        }
        for (o, &q) in out[1..].iter_mut().zip(&half[..m]) {
            *o += q;
        }
    }
    for y in 1..height {
        let (above, below) = u.split_at(y * width);
        let (up, row) = (&above[(y - 1) * width..], &below[..width]);
        for ((q, &a), &b) in half.iter_mut().zip(up).zip(row) {
            let d = b - a;
            *q = 0.5 * d * d;
        }
        let (acc_up, acc_row) = acc.split_at_mut(y * width);
        for ((o_up, o_row), &q) in acc_up[(y - 1) * width..].iter_mut().zip(&mut acc_row[..width]).zip(&half) {
            *o_up += q;
            *o_row += q;
        }
    }
}

/// `s2` per channel (uncoupled) or a single shared plane `G` (coupled).
pub fn squared_gradient(u: &Image, coupled: bool) -> Vec<Vec<f64>> {
    let n = u.plane_len();
    if coupled {
        let mut g = scratch::zeroed(n);
        for plane in u.planes() {
            accumulate_s2(plane, u.width(), u.height(), &mut g);
        }
        vec![g]
    } else {
        u.planes()
            .map(|plane| {
                let mut s2 = scratch::zeroed(n);
                accumulate_s2(plane, u.width(), u.height(), &mut s2);
                s2
            })
            .collect()
    }
}

/// Flux-difference divergence of one plane for a given diffusivity plane.
pub(crate) fn divergence_plane(
    u: &[f64],
    diffusivity: &[f64],
    width: usize,
    height: usize,
    out: &mut [f64],
) {
    // One sweep over the rows: `below` holds the flux into the next row,
    // `above` the flux from the previous one.
    let mut across = vec![0.0; width];
    let mut above = vec![0.0; width];
    let mut below = vec![0.0; width];
    let m = width - 1;
    for y in 0..height {
        let span = y * width..(y + 1) * width;
        let (row, g) = (&u[span.clone()], &diffusivity[span.clone()]);
        let pairs = g.iter().zip(&g[1..]).zip(row.iter().zip(&row[1..]));
        for (q, ((&g0, &g1), (&u0, &u1))) in across[..m].iter_mut().zip(pairs) {
            *q = 0.5 * (g0 + g1) * (u1 - u0);
        }
        if y + 1 < height {
            let next = (y + 1) * width..(y + 2) * width;
            let pairs = g.iter().zip(&diffusivity[next.clone()]).zip(row.iter().zip(&u[next]));
            for (q, ((&g0, &g1), (&u0, &u1))) in below.iter_mut().zip(pairs) {
                *q = 0.5 * (g0 + g1) * (u1 - u0);
            }
        } else {
            below.fill(0.0);
        }
        let out = &mut out[span];
        for ((o, &b), &a) in out.iter_mut().zip(&below).zip(&above) {
            *o = b - a;
        }
        for (o, &q) in out[..m].iter_mut().zip(&across[..m]) {
            *o += q;
        }
        for (o, &q) in out[1..].iter_mut().zip(&across[..m]) {
            *o -= q;
        }
        std::mem::swap(&mut above, &mut below);
    }
}

/// Diffusivity planes `Psi'(s2)`, one per entry of `s2_planes`.
pub(crate) fn diffusivities(s2_planes: &[Vec<f64>], p: &SmoothnessPenaliser) -> Vec<Vec<f64>> {
    s2_planes
        .iter()
        .map(|s2| {
            let mut d = scratch::zeroed(s2.len());
            for (d, &s) in d.iter_mut().zip(s2) {
                *d = p.derivative(s);
            }
            d
        })
        .collect()
}

pub(crate) fn divergence_from_diffusivity(u: &Image, diff: &[Vec<f64>]) -> Vec<f64> {
    let n = u.plane_len();
    let mut out = scratch::zeroed(u.data().len());
    for (c, plane) in u.planes().enumerate() {
        let g = if diff.len() == 1 { &diff[0] } else { &diff[c] };
        divergence_plane(plane, g, u.width(), u.height(), &mut out[c * n..(c + 1) * n]);
    }
    out
}

/// `div(Psi'(|grad u|^2) grad u)` for every channel of `u`.
pub fn divergence_term(u: &Image, p: &SmoothnessPenaliser, coupled: bool) -> DivergenceField {
    let s2 = squared_gradient(u, coupled);
    let diff = diffusivities(&s2, p);
    DivergenceField(u.with_data(divergence_from_diffusivity(u, &diff)))
}

/// `1/2 sum_pixels Psi(s2)`, summed over channels when uncoupled. Its
/// gradient with respect to `u` is the negated [`divergence_term`].
pub fn regulariser_energy(u: &Image, p: &SmoothnessPenaliser, coupled: bool) -> f64 {
    squared_gradient(u, coupled)
        .iter()
        .flat_map(|plane| plane.iter())
        .map(|&s| 0.5 * p.value(s))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Image {
        Image::from_fn(5, 4, 1, |x, y, _| 10.0 + 3.0 * x as f64 + (x * y) as f64)
    }

    #[test]
    fn constant_image_has_zero_field() {
        let u = Image::filled(6, 5, 3, 80.0);
        for p in [
            SmoothnessPenaliser::WhittakerTikhonov,
            SmoothnessPenaliser::TotalVariation { eps: 1e-3 },
            SmoothnessPenaliser::PeronaMalik { lambda: 13.0 },
        ] {
            for coupled in [false, true] {
                let d = divergence_term(&u, &p, coupled);
                assert!(d.values().data().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn tikhonov_is_five_point_laplacian() {
        let u = ramp();
        let d = divergence_term(&u, &SmoothnessPenaliser::WhittakerTikhonov, false);
        let (w, h) = (u.width() as isize, u.height() as isize);
        let at = |x: isize, y: isize| {
            u.get(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize, 0)
        };
        for y in 0..h {
            for x in 0..w {
                let lap = at(x + 1, y) + at(x - 1, y) + at(x, y + 1) + at(x, y - 1) - 4.0 * at(x, y);
                assert!((d.values().get(x as usize, y as usize, 0) - lap).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_channel_coupling_is_exact() {
        let u = ramp();
        let p = SmoothnessPenaliser::PeronaMalik { lambda: 4.0 };
        assert_eq!(divergence_term(&u, &p, true), divergence_term(&u, &p, false));
    }

    #[test]
    fn flux_sums_to_zero() {
        let u = Image::from_fn(7, 6, 2, |x, y, c| ((x * 31 + y * 17 + c * 5) % 23) as f64 + 1.0);
        let p = SmoothnessPenaliser::TotalVariation { eps: 1e-3 };
        let d = divergence_term(&u, &p, true);
        for plane in d.values().planes() {
            let l1: f64 = plane.iter().map(|v| v.abs()).sum();
            assert!(plane.iter().sum::<f64>().abs() <= 1e-8 * l1);
        }
    }
}
