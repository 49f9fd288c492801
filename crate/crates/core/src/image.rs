//! Image and kernel containers.
//!
//! Intensities live on the 8-bit grey-value scale `[0, 255]` but are stored
//! as `f64` and never rescaled. Channels are stored planar (one contiguous
//! `width * height` plane per channel) so the per-channel kernels in
//! [`crate::blur`] and [`crate::diffusion`] can work on plain slices.

use crate::error::{Error, Result};

/// Grey-value floor applied to zero (or negative) intensities before
/// deconvolution. The divergence `r_f` contains `ln(w / f)`, so every
/// observed value must be strictly positive.
pub const INTENSITY_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from planar data (`data[(c * height + y) * width + x]`).
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} values for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite intensity at index {i}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from channel-interleaved samples, the order used by
    /// PPM payloads.
    pub fn from_interleaved(
        width: usize,
        height: usize,
        channels: usize,
        samples: &[f64],
    ) -> Result<Self> {
        if samples.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        let n = width * height;
        let mut data = vec![0.0; samples.len()];
        for (i, px) in samples.chunks_exact(channels.max(1)).enumerate() {
            for (c, &v) in px.iter().enumerate() {
                data[c * n + i] = v;
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && channels > 0);
        assert!(value.is_finite());
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        assert!(width > 0 && height > 0 && channels > 0);
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    /// Image with the same shape as `self` whose data comes from `data`.
    /// Used by kernels that have already checked finiteness themselves.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Pixels per channel.
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn planes(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.plane_len())
    }

    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, channel: usize, value: f64) {
        self.data[(channel * self.height + y) * self.width + x] = value;
    }

    /// Channel-interleaved copy of the samples.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let n = self.plane_len();
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..n {
            for c in 0..self.channels {
                out.push(self.data[c * n + i]);
            }
        }
        out
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        self.with_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Replaces every intensity below `floor` with `floor`; returns the new
    /// image and how many samples were lifted.
    pub fn lift_floor(&self, floor: f64) -> (Image, usize) {
        let mut lifted = 0;
        let data = self
            .data
            .iter()
            .map(|&v| {
                if v < floor {
                    lifted += 1;
                    floor
                } else {
                    v
                }
            })
            .collect();
        (self.with_data(data), lifted)
    }

    /// Extracts one channel as a single-channel image.
    pub fn channel(&self, channel: usize) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(channel).to_vec(),
        }
    }
}

/// Space-invariant point-spread function `h` with its anchor at the centre.
///
/// The weights are row-major, `weights[ky * width + kx]`, and act on an image
/// as a true convolution: `(h * g)(x) = sum_z h(z) g(x - z)` where the tap at
/// `(kx, ky)` has offset `z = (kx - width / 2, ky - height / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpreadFunction {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl PointSpreadFunction {
    /// Validates and normalises a kernel to unit mass.
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::KernelShape { width, height });
        }
        if weights.len() != width * height {
            return Err(Error::DegenerateKernel(format!(
                "expected {} weights, got {}",
                width * height,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::DegenerateKernel(format!(
                "weights must be finite and nonnegative, found {w}"
            )));
        }
        let mass: f64 = weights.iter().sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateKernel("all weights are zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / mass).collect();
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn delta() -> Self {
        Self {
            width: 1,
            height: 1,
            weights: vec![1.0],
        }
    }

    /// Separable binomial kernel of odd size `n` (1, 3, 5, ...).
    pub fn binomial(n: usize) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(Error::KernelShape {
                width: n,
                height: n,
            });
        }
        let mut row = vec![1.0f64];
        for _ in 1..n {
            let mut next = vec![1.0; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        let weights = row
            .iter()
            .flat_map(|a| row.iter().map(move |b| a * b))
            .collect();
        Self::new(n, n, weights)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn radius_x(&self) -> usize {
        self.width / 2
    }

    pub fn radius_y(&self) -> usize {
        self.height / 2
    }

    pub fn radius(&self) -> usize {
        self.radius_x().max(self.radius_y())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, kx: usize, ky: usize) -> f64 {
        self.weights[ky * self.width + kx]
    }

    /// Nonzero taps as `(dx, dy, weight)` offsets from the anchor.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let (rx, ry) = (self.radius_x() as isize, self.radius_y() as isize);
        let mut taps = Vec::new();
        for ky in 0..self.height {
            for kx in 0..self.width {
                let w = self.weight(kx, ky);
                if w != 0.0 {
                    taps.push((kx as isize - rx, ky as isize - ry, w));
                }
            }
        }
        taps
    }

    /// Point-reflected kernel `h(-z)`, the adjoint of a space-invariant blur.
    pub fn flipped(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        Self {
            width: self.width,
            height: self.height,
            weights,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaved_round_trip() {
        let samples: Vec<f64> = (0..12).map(f64::from).collect();
        let img = Image::from_interleaved(2, 2, 3, &samples).unwrap();
        assert_eq!(img.plane(0), &[0.0, 3.0, 6.0, 9.0]);
        assert_eq!(img.plane(2), &[2.0, 5.0, 8.0, 11.0]);
        assert_eq!(img.to_interleaved(), samples);
    }

    #[test]
    fn rejects_bad_images() {
        assert!(Image::new(0, 2, 1, vec![]).is_err());
        assert!(Image::new(2, 2, 1, vec![1.0; 3]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn floor_lifts_zeros() {
        let img = Image::new(3, 1, 1, vec![0.0, 0.05, 7.0]).unwrap();
        let (lifted, count) = img.lift_floor(INTENSITY_FLOOR);
        assert_eq!(count, 2);
        assert_eq!(lifted.data(), &[0.1, 0.1, 7.0]);
    }

    #[test]
    fn kernel_normalisation() {
        let psf = PointSpreadFunction::binomial(3).unwrap();
        assert!((psf.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(psf.weight(1, 1), 0.25);
        assert!(matches!(
            PointSpreadFunction::new(2, 3, vec![1.0; 6]),
            Err(Error::KernelShape { .. })
        ));
        assert!(matches!(
            PointSpreadFunction::new(3, 1, vec![0.0; 3]),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn flipped_kernel_taps() {
        let psf = PointSpreadFunction::new(3, 1, vec![1.0, 0.0, 3.0]).unwrap();
        assert_eq!(psf.taps(), vec![(-1, 0, 0.25), (1, 0, 0.75)]);
        assert_eq!(psf.flipped().taps(), vec![(-1, 0, 0.75), (1, 0, 0.25)]);
    }
}
