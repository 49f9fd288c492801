//! Forward blur `H` and its adjoint `H*`.
//!
//! Both boundary modes are implemented the same way: the image is extended
//! by the kernel radius through an index map (periodic wrap or half-sample
//! mirror), then a "valid" convolution is taken. The adjoint is the exact
//! transpose of that composition: a zero-padded "full" correlation followed by
//! folding the border of the padded grid back through the same index map. This
//! keeps `<H u, v> = <u, H* v>` exact up to rounding in both modes.
//!
//! With the mirror map `H* 1` equals 1 except within one kernel radius of the
//! border (and everywhere for kernels that are symmetric along both axes).

use rayon::prelude::*;

use crate::image::{Image, PointSpreadFunction};
use crate::scratch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    /// Periodic image domain. Used only to synthesise degraded data.
    Cyclic,
    /// Half-sample mirror extension (`... b a | a b c ...`). Used by solvers.
    Reflect,
}

impl BoundaryMode {
    /// Maps an extended coordinate `i` onto `0..n`.
    #[inline]
    pub fn map_index(self, i: isize, n: usize) -> usize {
        let n = n as isize;
        match self {
            BoundaryMode::Cyclic => i.rem_euclid(n) as usize,
            BoundaryMode::Reflect => {
                let m = i.rem_euclid(2 * n);
                (if m < n { m } else { 2 * n - 1 - m }) as usize
            }
        }
    }
}

/// An image-to-image linear blur operator together with its adjoint.
///
/// Only the space-invariant backend exists; a space-variant `H(x, y)` would
/// implement the same two plane kernels.
pub trait BlurOperator: Send + Sync {
    fn forward_plane(&self, src: &[f64], dst: &mut [f64], width: usize, height: usize);

    fn adjoint_plane(&self, src: &[f64], dst: &mut [f64], width: usize, height: usize);

    /// Two adjoints sharing one pass over the kernel.
    fn adjoint_plane_pair(
        &self,
        src: [&[f64]; 2],
        dst: [&mut [f64]; 2],
        width: usize,
        height: usize,
    ) {
        let [a, b] = src;
        let [da, db] = dst;
        self.adjoint_plane(a, da, width, height);
        self.adjoint_plane(b, db, width, height);
    }

    /// Width of the band along the border where `H* 1 = 1` may fail.
    fn boundary_band(&self) -> usize;

    fn apply(&self, img: &Image) -> Image {
        let mut out = scratch::zeroed(img.data().len());
        for (src, dst) in img.planes().zip(out.chunks_exact_mut(img.plane_len())) {
            self.forward_plane(src, dst, img.width(), img.height());
        }
        img.with_data(out)
    }

    fn adjoint(&self, img: &Image) -> Image {
        let mut out = scratch::zeroed(img.data().len());
        for (src, dst) in img.planes().zip(out.chunks_exact_mut(img.plane_len())) {
            self.adjoint_plane(src, dst, img.width(), img.height());
        }
        img.with_data(out)
    }
}

/// Convolution with a fixed kernel under a chosen boundary rule.
#[derive(Debug, Clone)]
pub struct SpaceInvariantBlur {
    psf: PointSpreadFunction,
    mode: BoundaryMode,
    taps: Vec<(isize, isize, f64)>,
}

impl SpaceInvariantBlur {
    pub fn new(psf: PointSpreadFunction, mode: BoundaryMode) -> Self {
        let taps = psf.taps();
        Self { psf, mode, taps }
    }

    /// The solver-side operator (mirror boundaries).
    pub fn spatial(psf: PointSpreadFunction) -> Self {
        Self::new(psf, BoundaryMode::Reflect)
    }

    /// The synthesis-side operator (periodic domain).
    pub fn periodic(psf: PointSpreadFunction) -> Self {
        Self::new(psf, BoundaryMode::Cyclic)
    }

    pub fn psf(&self) -> &PointSpreadFunction {
        &self.psf
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    /// Transpose of "extend through the index map, then valid convolution",
    /// for `K` planes at once.
    fn adjoint_planes<const K: usize>(
        &self,
        src: [&[f64]; K],
        dst: [&mut [f64]; K],
        width: usize,
        height: usize,
    ) {
        let (rx, ry) = (self.psf.radius_x(), self.psf.radius_y());
        let pw = width + 2 * rx;
        let ph = height + 2 * ry;
        // Zero-padded inputs with a two-radius margin so the full correlation
        // below never leaves the buffer.
        let zw = width + 4 * rx;
        let zh = height + 4 * ry;
        let zero_padded: Vec<Vec<f64>> = src
            .iter()
            .map(|plane| {
                let mut z = scratch::zeroed(zw * zh);
                for y in 0..height {
                    let row = (y + 2 * ry) * zw + 2 * rx;
                    z[row..row + width].copy_from_slice(&plane[y * width..(y + 1) * width]);
                }
                z
            })
            .collect();

        // Spread back onto the padded grid. Rows are padded to a multiple of
        // eight values to keep the accumulation aligned.
        let stride = pw.next_multiple_of(8);
        let mut spread = scratch::zeroed(K * stride * ph);
        spread
            .par_chunks_mut(K * stride)
            .enumerate()
            .for_each(|(py, rows)| {
                for (z, row) in zero_padded.iter().zip(rows.chunks_exact_mut(stride)) {
                    let out = &mut row[..pw];
                    for &(dx, dy, w) in &self.taps {
                        let zy = (py as isize + ry as isize + dy) as usize;
                        let zx = (rx as isize + dx) as usize;
                        let zrow = &z[zy * zw + zx..zy * zw + zx + pw];
                        for (o, &v) in out.iter_mut().zip(zrow) {
                            *o += w * v;
                        }
                    }
                }
            });

        // Fold the padded grid through the index map.
        let xmap: Vec<usize> = (0..pw)
            .map(|px| self.mode.map_index(px as isize - rx as isize, width))
            .collect();
        for (k, out) in dst.into_iter().enumerate() {
            let row_of = |py: usize| &spread[(py * K + k) * stride..(py * K + k) * stride + pw];
            for y in 0..height {
                out[y * width..(y + 1) * width].copy_from_slice(&row_of(y + ry)[rx..rx + width]);
            }
            for py in 0..ph {
                let ty = self.mode.map_index(py as isize - ry as isize, height);
                let target = &mut out[ty * width..(ty + 1) * width];
                let row = row_of(py);
                if py >= ry && py < ry + height {
                    for px in (0..rx).chain(rx + width..pw) {
                        target[xmap[px]] += row[px];
                    }
                } else {
                    for (&tx, &v) in xmap.iter().zip(row) {
                        target[tx] += v;
                    }
                }
            }
        }
        zero_padded.into_iter().for_each(scratch::recycle);
        scratch::recycle(spread);
    }
}

impl BlurOperator for SpaceInvariantBlur {
    fn forward_plane(&self, src: &[f64], dst: &mut [f64], width: usize, height: usize) {
        let (rx, ry) = (self.psf.radius_x(), self.psf.radius_y());
        let pw = width + 2 * rx;
        let ph = height + 2 * ry;
        let xmap: Vec<usize> = (0..pw)
            .map(|px| self.mode.map_index(px as isize - rx as isize, width))
            .collect();
        let mut padded = scratch::zeroed(pw * ph);
        padded
            .par_chunks_mut(pw)
            .enumerate()
            .for_each(|(py, row)| {
                let sy = self.mode.map_index(py as isize - ry as isize, height);
                let srow = &src[sy * width..(sy + 1) * width];
                for (v, &sx) in row.iter_mut().zip(&xmap) {
                    *v = srow[sx];
                }
            });

        dst.par_chunks_mut(width).enumerate().for_each(|(y, out)| {
            out.fill(0.0);
            for &(dx, dy, w) in &self.taps {
                let py = (y as isize + ry as isize - dy) as usize;
                let px = (rx as isize - dx) as usize;
                let prow = &padded[py * pw + px..py * pw + px + width];
                for (o, &p) in out.iter_mut().zip(prow) {
                    *o += w * p;
                }
            }
        });
        scratch::recycle(padded);
    }

    fn adjoint_plane(&self, src: &[f64], dst: &mut [f64], width: usize, height: usize) {
        self.adjoint_planes([src], [dst], width, height);
    }

    fn adjoint_plane_pair(
        &self,
        src: [&[f64]; 2],
        dst: [&mut [f64]; 2],
        width: usize,
        height: usize,
    ) {
        self.adjoint_planes(src, dst, width, height);
    }

    fn boundary_band(&self) -> usize {
        self.psf.radius()
    }
}

/// `H * img`, each channel independently.
pub fn convolve(img: &Image, psf: &PointSpreadFunction, mode: BoundaryMode) -> Image {
    SpaceInvariantBlur::new(psf.clone(), mode).apply(img)
}

/// `H* * img`, the exact transpose of [`convolve`] under the same mode.
pub fn adjoint_convolve(img: &Image, psf: &PointSpreadFunction, mode: BoundaryMode) -> Image {
    SpaceInvariantBlur::new(psf.clone(), mode).adjoint(img)
}

/// `H* * 1` on a `width x height` grid. All ones for periodic boundaries;
/// deviates near the border for mirror boundaries and asymmetric kernels.
pub fn conservation_defect(
    psf: &PointSpreadFunction,
    width: usize,
    height: usize,
    mode: BoundaryMode,
) -> Image {
    adjoint_convolve(&Image::filled(width, height, 1, 1.0), psf, mode)
}
