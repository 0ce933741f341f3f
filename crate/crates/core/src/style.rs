//! Gram-matrix style statistics and the whitening-coloring transform.
//!
//! The transform operates on [`FeatureMap`]s: `C x M` matrices of channel
//! activations flattened over `M = H * W` spatial positions. Features can
//! come from [`extract_features`] (a deterministic hand-crafted extractor
//! whose level 0 is the raw image, so inversion back to pixels is exact) or
//! from externally produced activation files in the `FMAP` format, which
//! keeps the interface open for learned encoders.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::View;
use crate::raster::{Border, Image};

#[derive(Debug, Error)]
pub enum StyleError {
    #[error("feature maps must share the channel count: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("feature maps must share the full shape: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("blend must lie in [0, 1], got {0}")]
    BadBlend(f64),
    #[error("levels must be >= 1")]
    BadLevels,
    #[error("feature map is {0}x{1} but {2} spatial positions were declared")]
    BadSpatialDims(usize, usize, usize),
    #[error("feature map holds non-finite values")]
    NonFinite,
    #[error("fmap file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Eigenvalues of a feature covariance are clamped at this floor so the
/// inverse square root in the whitening transform stays finite on
/// rank-deficient inputs (constant channels).
pub const EIGENVALUE_FLOOR: f64 = 1e-8;

/// `C x M` feature activations with their spatial extent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    data: DMatrix<f64>,
    height: usize,
    width: usize,
}

impl FeatureMap {
    pub fn new(data: DMatrix<f64>, height: usize, width: usize) -> Result<Self, StyleError> {
        if data.ncols() != height * width {
            return Err(StyleError::BadSpatialDims(data.nrows(), data.ncols(), height * width));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(StyleError::NonFinite);
        }
        Ok(Self { data, height, width })
    }

    /// Flatten an image into a feature map: one row per channel, positions in
    /// row-major order.
    pub fn from_image(img: &Image) -> Self {
        let (w, h, c) = (img.width(), img.height(), img.channels());
        let mut data = DMatrix::zeros(c, w * h);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data[(ch, y * w + x)] = img.get(x, y, ch);
                }
            }
        }
        Self { data, height: h, width: w }
    }

    /// Reassemble the first `channels` rows into an image, clamped to [0, 1].
    pub fn to_image(&self, channels: usize) -> Result<Image, StyleError> {
        if channels > self.channel_count() {
            return Err(StyleError::ChannelMismatch(channels, self.channel_count()));
        }
        let (w, h) = (self.width, self.height);
        let img = Image::from_fn(w, h, channels, |x, y, c| {
            self.data[(c, y * w + x)].clamp(0.0, 1.0)
        });
        Ok(img)
    }

    pub fn channel_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn position_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Per-channel mean over spatial positions.
    pub fn channel_means(&self) -> DVector<f64> {
        let m = self.position_count() as f64;
        DVector::from_iterator(self.channel_count(), self.data.row_iter().map(|r| r.sum() / m))
    }

    /// Centered channel covariance `(1/M) F~ F~^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let means = self.channel_means();
        let mut centered = self.data.clone();
        for (c, mut row) in centered.row_iter_mut().enumerate() {
            row.add_scalar_mut(-means[c]);
        }
        (&centered * centered.transpose()) / self.position_count() as f64
    }
}

/// Uncentered channel correlation `G_ij = sum_k F_ik F_jk`; symmetric and
/// positive semidefinite, invariant to any permutation of spatial positions.
pub fn gram(f: &FeatureMap) -> DMatrix<f64> {
    f.data() * f.data().transpose()
}

/// Channel means plus the eigendecomposition of the centered covariance.
#[derive(Debug, Clone)]
pub struct StyleStats {
    pub mean: DVector<f64>,
    /// Descending, clamped at [`EIGENVALUE_FLOOR`].
    pub eigvals: DVector<f64>,
    /// Orthonormal columns matching `eigvals`.
    pub eigvecs: DMatrix<f64>,
}

impl StyleStats {
    /// `E diag(g(eigvals)) E^T` for an arbitrary spectral map `g`.
    fn spectral_map(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.eigvals.map(g));
        &self.eigvecs * d * self.eigvecs.transpose()
    }

    /// Reconstructed covariance `E diag(eigvals) E^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.spectral_map(|v| v)
    }
}

/// Symmetric eigendecomposition of the centered covariance, eigenvalues
/// sorted descending and clamped at the floor.
pub fn compute_style_stats(f: &FeatureMap) -> StyleStats {
    let mean = f.channel_means();
    let cov = f.covariance();
    let eig = cov.symmetric_eigen();
    let c = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigvals =
        DVector::from_iterator(c, order.iter().map(|&i| eig.eigenvalues[i].max(EIGENVALUE_FLOOR)));
    let eigvecs = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    StyleStats { mean, eigvals, eigvecs }
}

/// Whitening transform `E D^-1/2 E^T (F - mean)`: output covariance is the
/// identity when the stats were computed from `content`.
pub fn whiten(content: &FeatureMap, stats: &StyleStats) -> FeatureMap {
    let w = stats.spectral_map(|v| 1.0 / v.sqrt());
    let mut centered = content.data.clone();
    for (c, mut row) in centered.row_iter_mut().enumerate() {
        row.add_scalar_mut(-stats.mean[c]);
    }
    FeatureMap { data: w * centered, height: content.height, width: content.width }
}

/// Coloring transform `E D^1/2 E^T W + mean`: imposes the style covariance
/// and mean on whitened features.
pub fn color(white: &FeatureMap, stats: &StyleStats) -> FeatureMap {
    let c = stats.spectral_map(|v| v.sqrt());
    let mut out = c * &white.data;
    for (ch, mut row) in out.row_iter_mut().enumerate() {
        row.add_scalar_mut(stats.mean[ch]);
    }
    FeatureMap { data: out, height: white.height, width: white.width }
}

/// Whitening-coloring transfer of style statistics onto content features,
/// linearly blended with the original content (`blend = 1` is the full
/// transform, `blend = 0` returns the content unchanged).
pub fn wct(content: &FeatureMap, style: &FeatureMap, blend: f64) -> Result<FeatureMap, StyleError> {
    if content.channel_count() != style.channel_count() {
        return Err(StyleError::ChannelMismatch(content.channel_count(), style.channel_count()));
    }
    if !(0.0..=1.0).contains(&blend) {
        return Err(StyleError::BadBlend(blend));
    }
    if blend == 0.0 {
        return Ok(content.clone());
    }
    let stats_c = compute_style_stats(content);
    let stats_s = compute_style_stats(style);
    let transferred = color(&whiten(content, &stats_c), &stats_s);
    if blend == 1.0 {
        return Ok(transferred);
    }
    let data = transferred.data * blend + &content.data * (1.0 - blend);
    Ok(FeatureMap { data, height: content.height, width: content.width })
}

/// Squared Frobenius distance between feature maps.
pub fn content_loss(a: &FeatureMap, b: &FeatureMap) -> Result<f64, StyleError> {
    if a.channel_count() != b.channel_count() || a.position_count() != b.position_count() {
        return Err(StyleError::ShapeMismatch(
            a.channel_count(),
            a.position_count(),
            b.channel_count(),
            b.position_count(),
        ));
    }
    Ok((a.data() - b.data()).norm_squared())
}

/// Squared Frobenius distance between Gram matrices; position-invariant.
pub fn style_loss(a: &FeatureMap, b: &FeatureMap) -> Result<f64, StyleError> {
    if a.channel_count() != b.channel_count() {
        return Err(StyleError::ChannelMismatch(a.channel_count(), b.channel_count()));
    }
    Ok((gram(a) - gram(b)).norm_squared())
}

/// Deterministic multi-scale feature extractor.
///
/// Level 0 is the raw image. Each further level appends a Gaussian-blurred
/// copy (wrap-around borders, so channel means are preserved) and its
/// per-channel gradient magnitudes, giving `C * (2 * levels - 1)` channels in
/// total. Inverting back to pixels is the level-0 projection of
/// [`FeatureMap::to_image`].
pub fn extract_features(view: &View, levels: usize) -> Result<FeatureMap, StyleError> {
    if levels < 1 {
        return Err(StyleError::BadLevels);
    }
    let img = &view.image;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut planes: Vec<Image> = vec![img.clone()];
    for level in 1..levels {
        let blurred = img.gaussian_blur(level as f64, Border::Wrap);
        let grad = blurred.gradient_magnitude();
        planes.push(blurred);
        planes.push(grad);
    }
    let total_c = c * planes.len();
    let mut data = DMatrix::zeros(total_c, w * h);
    for (pi, plane) in planes.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data[(pi * c + ch, y * w + x)] = plane.get(x, y, ch);
                }
            }
        }
    }
    FeatureMap::new(data, h, w)
}

/// Style transfer on images: extract features of both, run [`wct`], invert
/// the level-0 channels back to pixels.
pub fn wct_image(
    content: &View,
    style: &View,
    blend: f64,
    levels: usize,
) -> Result<Image, StyleError> {
    if content.image.channels() != style.image.channels() {
        return Err(StyleError::ChannelMismatch(
            content.image.channels(),
            style.image.channels(),
        ));
    }
    let fc = extract_features(content, levels)?;
    let fs = extract_features(style, levels)?;
    let transferred = wct(&fc, &fs, blend)?;
    transferred.to_image(content.image.channels())
}

const FMAP_MAGIC: &[u8; 4] = b"FMAP";

/// Write a feature map as a flat binary file: magic `FMAP`, little-endian
/// `u32` C, H, W, then `C * H * W` little-endian `f32` values channel-major.
pub fn write_fmap(path: &Path, f: &FeatureMap) -> Result<(), StyleError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(FMAP_MAGIC)?;
    for dim in [f.channel_count(), f.height(), f.width()] {
        out.write_all(&u32::try_from(dim).map_err(|_| StyleError::Format("dim too large".into()))?.to_le_bytes())?;
    }
    for c in 0..f.channel_count() {
        for pos in 0..f.position_count() {
            out.write_all(&(f.data[(c, pos)] as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_fmap(path: &Path) -> Result<FeatureMap, StyleError> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != FMAP_MAGIC {
        return Err(StyleError::Format(format!("bad magic {magic:?}, expected \"FMAP\"")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let mut buf = [0u8; 4];
        input.read_exact(&mut buf)?;
        *d = u32::from_le_bytes(buf) as usize;
    }
    let [c, h, w] = dims;
    let count = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| StyleError::Format("dimension overflow".into()))?;
    let mut raw = vec![0u8; count * 4];
    input.read_exact(&mut raw)?;
    let mut data = DMatrix::zeros(c, h * w);
    for ch in 0..c {
        for pos in 0..h * w {
            let i = (ch * h * w + pos) * 4;
            data[(ch, pos)] = f32::from_le_bytes(raw[i..i + 4].try_into().unwrap()) as f64;
        }
    }
    FeatureMap::new(data, h, w)
}
