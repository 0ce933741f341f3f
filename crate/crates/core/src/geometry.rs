//! Pinhole cameras, cross-view correspondence and the photometric
//! consistency loss.
//!
//! A reference pixel with a depth hypothesis is lifted to a world point with
//! the reference camera and reprojected with a source camera; a correct depth
//! map therefore lets every source image reconstruct the reference image.
//! Pixel coordinates are `(x, y)` = (column, row), origin at the top-left
//! pixel centre. Extrinsics map world to camera: `x_cam = R * X + t`.

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::raster::{pairwise_sum, Image};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("focal lengths must be positive, got fx={0} fy={1}")]
    BadFocal(f64, f64),
    #[error("rotation is not a proper orthonormal matrix (residual {0:.2e})")]
    BadRotation(f64),
    #[error("image must be at least 2x2 with 1 or 3 channels, got {0}x{1}x{2}")]
    BadImage(usize, usize, usize),
    #[error("pixel values must be finite and in [0,1]")]
    BadPixelValues,
    #[error("depth map entries must be finite and >= 0")]
    BadDepthValues,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("pixel ({0}, {1}) is outside the image")]
    PixelOutOfBounds(f64, f64),
    #[error("projected point lies behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("projection produced a non-finite result")]
    NonFinite,
    #[error("depth map is {0}x{1} but the reference image is {2}x{3}")]
    DepthDimensionMismatch(usize, usize, usize, usize),
    #[error("at least one source view is required")]
    NoSourceViews,
}

/// Pinhole intrinsics with zero skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::BadFocal(fx, fy));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Camera-frame ray direction of a pixel, scaled so that z = 1.
    #[inline]
    pub fn unproject(&self, pixel: Vector2<f64>) -> Vector3<f64> {
        Vector3::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy, 1.0)
    }

    /// Perspective projection of a camera-frame point onto the image plane.
    #[inline]
    pub fn project(&self, p: Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ROTATION_TOL: f64 = 1e-6;

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let residual = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if residual > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(GeometryError::BadRotation(residual.max((det - 1.0).abs())));
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    #[inline]
    pub fn world_to_camera(&self, world: Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    #[inline]
    pub fn camera_to_world(&self, cam: Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (cam - self.translation)
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

/// A calibrated image.
#[derive(Debug, Clone)]
pub struct View {
    pub image: Image,
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
    pub id: usize,
}

impl View {
    pub fn new(
        image: Image,
        intrinsics: Intrinsics,
        extrinsics: Extrinsics,
        id: usize,
    ) -> Result<Self, GeometryError> {
        if image.width() < 2 || image.height() < 2 || !matches!(image.channels(), 1 | 3) {
            return Err(GeometryError::BadImage(image.width(), image.height(), image.channels()));
        }
        if image.data().iter().any(|&v| !v.is_finite() || !(0.0..=1.0).contains(&v)) {
            return Err(GeometryError::BadPixelValues);
        }
        Ok(Self { image, intrinsics, extrinsics, id })
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Same cameras, different pixels. Dimensions and channel count must match.
    pub fn with_image(&self, image: Image) -> Result<Self, GeometryError> {
        if !image.same_shape(&self.image) {
            return Err(GeometryError::BadImage(image.width(), image.height(), image.channels()));
        }
        View::new(image, self.intrinsics, self.extrinsics.clone(), self.id)
    }
}

/// Per-pixel depth in world units; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self, GeometryError> {
        if !depth.is_finite() || depth < 0.0 {
            return Err(GeometryError::BadDepthValues);
        }
        Ok(Self { width, height, data: vec![depth; width * height] })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self, GeometryError> {
        if data.len() != width * height || data.iter().any(|&d| !d.is_finite() || d < 0.0) {
            return Err(GeometryError::BadDepthValues);
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.data[y * self.width + x] = d;
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > 0.0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }

    /// Scale every valid depth by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        Self::from_vec(self.width, self.height, self.data.iter().map(|d| d * factor).collect())
    }
}

/// Boolean mask aligned with an image; true where a warp found a valid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl ValidityMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, flags: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.flags[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn all(&self) -> bool {
        self.flags.iter().all(|&f| f)
    }

    pub fn and(&self, other: &ValidityMask) -> ValidityMask {
        assert_eq!(self.width, other.width);
        assert_eq!(self.height, other.height);
        ValidityMask {
            width: self.width,
            height: self.height,
            flags: self.flags.iter().zip(&other.flags).map(|(a, b)| a & b).collect(),
        }
    }
}

/// Project a pixel of `src` at a given depth into `dst`.
///
/// The pixel is lifted to a world point with the source camera
/// (`X = T_src^-1 unproject(K_src, p, depth)`) and reprojected with the
/// destination camera; the second return value is the depth of the lifted
/// point in the destination camera frame.
pub fn project_pixel(
    pixel: Vector2<f64>,
    depth: f64,
    src: &View,
    dst: &View,
) -> Result<(Vector2<f64>, f64), GeometryError> {
    if depth <= 0.0 || !depth.is_finite() {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    if !src.image.in_sample_hull(pixel.x, pixel.y) {
        return Err(GeometryError::PixelOutOfBounds(pixel.x, pixel.y));
    }
    let cam_src = src.intrinsics.unproject(pixel) * depth;
    let world = src.extrinsics.camera_to_world(cam_src);
    let cam_dst = dst.extrinsics.world_to_camera(world);
    if cam_dst.z <= 0.0 {
        return Err(GeometryError::BehindCamera(cam_dst.z));
    }
    let projected = dst.intrinsics.project(cam_dst);
    if !projected.x.is_finite() || !projected.y.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    Ok((projected, cam_dst.z))
}

/// Reconstruct the reference image from a source view under a depth map.
///
/// Each reference pixel with a valid depth is projected into `src` and the
/// source colour is bilinearly sampled there. Pixels whose depth is invalid,
/// whose projection lands outside the source sample hull or behind the
/// camera are masked false and filled with 0.
pub fn warp_image(
    src: &View,
    reference: &View,
    depth: &DepthMap,
) -> Result<(Image, ValidityMask), GeometryError> {
    let (w, h) = (reference.width(), reference.height());
    if depth.width() != w || depth.height() != h {
        return Err(GeometryError::DepthDimensionMismatch(depth.width(), depth.height(), w, h));
    }
    let channels = reference.image.channels();
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0.0; w * channels];
            let mut flags = vec![false; w];
            let mut sample = vec![0.0; channels];
            for x in 0..w {
                let d = depth.get(x, y);
                if d <= 0.0 {
                    continue;
                }
                let p = Vector2::new(x as f64, y as f64);
                let Ok((q, _)) = project_pixel(p, d, reference, src) else { continue };
                if src.image.sample_bilinear(q.x, q.y, &mut sample) {
                    row[x * channels..(x + 1) * channels].copy_from_slice(&sample);
                    flags[x] = true;
                }
            }
            (row, flags)
        })
        .collect();

    let mut out = Image::new(w, h, channels);
    let mut mask = ValidityMask::new(w, h);
    for (y, (row, flags)) in rows.into_iter().enumerate() {
        out.data_mut()[y * w * channels..(y + 1) * w * channels].copy_from_slice(&row);
        for (x, &f) in flags.iter().enumerate() {
            mask.set(x, y, f);
        }
    }
    Ok((out, mask))
}

/// One source view's contribution to the photometric loss.
#[derive(Debug, Clone)]
pub struct PerViewPhotometric {
    pub view_id: usize,
    pub loss: f64,
    pub valid_pixels: usize,
}

/// Result of [`photometric_loss`]: the summed loss plus a per-view breakdown.
#[derive(Debug, Clone)]
pub struct PhotometricLoss {
    pub total: f64,
    pub per_view: Vec<PerViewPhotometric>,
}

/// Photometric consistency loss of a depth map on a reference view.
///
/// For each source view the reference is reconstructed by [`warp_image`] and
/// the mean (over its own valid pixels) squared colour error is accumulated;
/// the total is the sum over source views. A view with zero valid pixels
/// contributes 0 and is reported as such in the breakdown.
pub fn photometric_loss(
    reference: &View,
    sources: &[View],
    depth: &DepthMap,
) -> Result<PhotometricLoss, GeometryError> {
    if sources.is_empty() {
        return Err(GeometryError::NoSourceViews);
    }
    let (w, h) = (reference.width(), reference.height());
    if depth.width() != w || depth.height() != h {
        return Err(GeometryError::DepthDimensionMismatch(depth.width(), depth.height(), w, h));
    }
    let channels = reference.image.channels();
    let mut per_view = Vec::with_capacity(sources.len());
    for src in sources {
        let (warped, mask) = warp_image(src, reference, depth)?;
        let mut row_sums = vec![0.0; h];
        let mut valid = 0usize;
        for y in 0..h {
            let mut acc = 0.0;
            for x in 0..w {
                if !mask.get(x, y) {
                    continue;
                }
                valid += 1;
                for c in 0..channels {
                    let d = warped.get(x, y, c) - reference.image.get(x, y, c);
                    acc += d * d;
                }
            }
            row_sums[y] = acc;
        }
        let loss = if valid == 0 { 0.0 } else { pairwise_sum(&row_sums) / valid as f64 };
        per_view.push(PerViewPhotometric { view_id: src.id, loss, valid_pixels: valid });
    }
    let total = pairwise_sum(&per_view.iter().map(|v| v.loss).collect::<Vec<_>>());
    Ok(PhotometricLoss { total, per_view })
}
