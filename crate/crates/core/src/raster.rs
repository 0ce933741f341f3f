//! Dense pixel buffers shared by every module that touches images.
//!
//! An [`Image`] stores `f64` samples in row-major, channel-interleaved order
//! with values normally in `[0, 1]`. Pixel coordinates are `(x, y)` =
//! (column, row) with the origin at the centre of the top-left pixel, so the
//! sampleable hull of a `W x H` image is `[0, W-1] x [0, H-1]`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions {0}x{1} with {2} channels do not match buffer of len {3}")]
    BadBuffer(usize, usize, usize, usize),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// Border policy for filtering operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Repeat the edge sample outward.
    Clamp,
    /// Wrap around (circular convolution). Preserves the global mean exactly.
    Wrap,
}

/// H x W x C raster of `f64` samples, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_vec(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, RasterError> {
        if data.len() != width * height * channels {
            return Err(RasterError::BadBuffer(width, height, channels, data.len()));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Build an image by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let v = f(x, y, c);
                    img.set(x, y, c, v);
                }
            }
        }
        img
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn idx(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.idx(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.idx(x, y, c);
        self.data[i] = v;
    }

    /// All channel samples of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Tolerance on the sample-hull boundary: projections of exactly-boundary
    /// pixels can land an ulp outside after a camera round trip, and those
    /// must stay valid.
    pub const BOUNDARY_EPS: f64 = 1e-9;

    /// True iff `(x, y)` lies inside the closed pixel-centre hull (within
    /// [`Self::BOUNDARY_EPS`]), i.e. the position can be bilinearly
    /// interpolated.
    #[inline]
    pub fn in_sample_hull(&self, x: f64, y: f64) -> bool {
        let eps = Self::BOUNDARY_EPS;
        x >= -eps
            && y >= -eps
            && x <= (self.width - 1) as f64 + eps
            && y <= (self.height - 1) as f64 + eps
    }

    /// Bilinear sample of every channel at `(x, y)`, written into `out`.
    ///
    /// Returns `false` (leaving `out` untouched) when the position is outside
    /// the sampleable hull. Positions exactly on the far edge are handled by
    /// anchoring the cell one sample inward, which keeps integer positions
    /// exact everywhere including the last row/column.
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        if !x.is_finite() || !y.is_finite() || !self.in_sample_hull(x, y) {
            return false;
        }
        debug_assert_eq!(out.len(), self.channels);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let max_x0 = self.width.saturating_sub(2);
        let max_y0 = self.height.saturating_sub(2);
        let x0 = (x.floor() as usize).min(max_x0);
        let y0 = (y.floor() as usize).min(max_y0);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        for c in 0..self.channels {
            let v00 = self.get(x0, y0, c);
            let v10 = self.get(x1, y0, c);
            let v01 = self.get(x0, y1, c);
            let v11 = self.get(x1, y1, c);
            out[c] = v00 * (1.0 - fx) * (1.0 - fy)
                + v10 * fx * (1.0 - fy)
                + v01 * (1.0 - fx) * fy
                + v11 * fx * fy;
        }
        true
    }

    /// Minimum and maximum sample per channel.
    pub fn channel_range(&self) -> Vec<(f64, f64)> {
        let mut range = vec![(f64::INFINITY, f64::NEG_INFINITY); self.channels];
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let v = self.get(x, y, c);
                    let r = &mut range[c];
                    r.0 = r.0.min(v);
                    r.1 = r.1.max(v);
                }
            }
        }
        range
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp01(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Mean over all samples of one channel.
    pub fn channel_mean(&self, c: usize) -> f64 {
        let mut acc = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                acc += self.get(x, y, c);
            }
        }
        acc / (self.width * self.height) as f64
    }

    /// Separable Gaussian blur with a kernel truncated at three sigma.
    ///
    /// `sigma <= 0` returns the image unchanged.
    pub fn gaussian_blur(&self, sigma: f64, border: Border) -> Image {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
        let mut norm = 0.0;
        for i in -radius..=radius {
            let w = (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp();
            kernel.push(w);
            norm += w;
        }
        for w in &mut kernel {
            *w /= norm;
        }
        let horizontal = self.convolve_1d(&kernel, radius, true, border);
        horizontal.convolve_1d(&kernel, radius, false, border)
    }

    fn convolve_1d(&self, kernel: &[f64], radius: isize, along_x: bool, border: Border) -> Image {
        let mut out = Image::new(self.width, self.height, self.channels);
        let (w, h) = (self.width as isize, self.height as isize);
        let resolve = |v: isize, n: isize| -> usize {
            match border {
                Border::Clamp => v.clamp(0, n - 1) as usize,
                Border::Wrap => v.rem_euclid(n) as usize,
            }
        };
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let mut acc = 0.0;
                    for (ki, kw) in kernel.iter().enumerate() {
                        let o = ki as isize - radius;
                        let (sx, sy) = if along_x {
                            (resolve(x as isize + o, w), y)
                        } else {
                            (x, resolve(y as isize + o, h))
                        };
                        acc += kw * self.get(sx, sy, c);
                    }
                    out.set(x, y, c, acc);
                }
            }
        }
        out
    }

    /// Per-channel gradient magnitude from central differences (one-sided at
    /// the borders).
    pub fn gradient_magnitude(&self) -> Image {
        let mut out = Image::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let xm = x.saturating_sub(1);
                    let xp = (x + 1).min(self.width - 1);
                    let ym = y.saturating_sub(1);
                    let yp = (y + 1).min(self.height - 1);
                    let gx = (self.get(xp, y, c) - self.get(xm, y, c)) / (xp - xm).max(1) as f64;
                    let gy = (self.get(x, yp, c) - self.get(x, ym, c)) / (yp - ym).max(1) as f64;
                    out.set(x, y, c, (gx * gx + gy * gy).sqrt());
                }
            }
        }
        out
    }
}

/// Deterministic pairwise (cascade) summation.
///
/// Used wherever a reduction feeds a reported metric: the result depends only
/// on the element order, never on thread scheduling, and the error grows as
/// O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
