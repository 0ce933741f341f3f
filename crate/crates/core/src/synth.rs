//! Deterministic synthetic multi-view scenes with analytic ground truth.
//!
//! Cameras sit on a circular arc facing a parametric surface; depths come
//! from exact ray-surface intersection and pixel colours from a texture
//! field evaluated at the hit point, so Lambertian multi-view photometric
//! consistency holds by construction. Everything a benchmark needs is
//! produced alongside: ground-truth depth maps, an exact surface point
//! cloud, sparse multi-view correspondences, and per-view visibility masks
//! derived from analytic occlusion tests.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fusion::PointCloud;
use crate::geometry::{DepthMap, Extrinsics, GeometryError, Intrinsics, ValidityMask, View};
use crate::raster::Image;
use crate::spn::{SparseCorrespondences, SparsePoint};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("need at least 2 views, got {0}")]
    TooFewViews(usize),
    #[error("camera {0} lies inside or on the surface")]
    CameraInsideSurface(usize),
    #[error("resolution must be at least 2x2")]
    BadResolution,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fusion(#[from] crate::fusion::FusionError),
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    fn contains(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Entry parameter of the ray, if it hits with `s > eps`.
    fn cast(&self, origin: Vector3<f64>, dir: Vector3<f64>, eps: f64) -> Option<f64> {
        let mut enter = f64::NEG_INFINITY;
        let mut exit = f64::INFINITY;
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[a] - origin[a]) / dir[a];
            let t1 = (self.max[a] - origin[a]) / dir[a];
            enter = enter.max(t0.min(t1));
            exit = exit.min(t0.max(t1));
        }
        (enter <= exit && enter > eps).then_some(enter)
    }
}

/// The analytic surface a scene renders.
#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceSpec {
    /// The plane `z = offset`, facing the cameras.
    Plane { offset: f64 },
    /// A sphere; rays that miss it produce invalid (zero) depth.
    Sphere { center: Vector3<f64>, radius: f64 },
    /// Two boxes in front of a backdrop plane; creates real occlusions.
    TwoBox { front: Aabb, back: Aabb, backdrop: f64 },
}

impl SurfaceSpec {
    pub fn default_plane() -> Self {
        SurfaceSpec::Plane { offset: 0.0 }
    }

    pub fn default_sphere() -> Self {
        SurfaceSpec::Sphere { center: Vector3::zeros(), radius: 0.9 }
    }

    pub fn default_two_box() -> Self {
        SurfaceSpec::TwoBox {
            front: Aabb { min: Vector3::new(-0.85, -0.55, -0.45), max: Vector3::new(-0.05, 0.55, 0.25) },
            back: Aabb { min: Vector3::new(-0.25, -0.65, 0.35), max: Vector3::new(0.85, 0.5, 1.0) },
            backdrop: 1.4,
        }
    }

    /// Smallest `s > eps` with `origin + s * dir` on the surface.
    fn cast(&self, origin: Vector3<f64>, dir: Vector3<f64>) -> Option<f64> {
        const EPS: f64 = 1e-9;
        match self {
            SurfaceSpec::Plane { offset } => {
                if dir.z == 0.0 {
                    return None;
                }
                let s = (offset - origin.z) / dir.z;
                (s > EPS).then_some(s)
            }
            SurfaceSpec::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(&dir);
                let b = 2.0 * oc.dot(&dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let s0 = (-b - sq) / (2.0 * a);
                let s1 = (-b + sq) / (2.0 * a);
                [s0, s1].into_iter().find(|&s| s > EPS)
            }
            SurfaceSpec::TwoBox { front, back, backdrop } => {
                let mut best: Option<f64> = None;
                for b in [front, back] {
                    if let Some(s) = b.cast(origin, dir, EPS) {
                        best = Some(best.map_or(s, |cur: f64| cur.min(s)));
                    }
                }
                if dir.z != 0.0 {
                    let s = (backdrop - origin.z) / dir.z;
                    if s > EPS {
                        best = Some(best.map_or(s, |cur| cur.min(s)));
                    }
                }
                best
            }
        }
    }

    fn camera_is_inside(&self, center: Vector3<f64>) -> bool {
        match self {
            SurfaceSpec::Plane { offset } => (center.z - offset).abs() < 1e-6,
            SurfaceSpec::Sphere { center: c, radius } => (center - c).norm() <= radius + 1e-6,
            SurfaceSpec::TwoBox { front, back, backdrop } => {
                front.contains(center) || back.contains(center) || (center.z - backdrop).abs() < 1e-6
            }
        }
    }
}

/// Texture field sampled at surface points.
#[derive(Debug, Clone, PartialEq)]
pub enum TextureSpec {
    /// Hard-edged 3D checkerboard; strong gradients, not resampling-smooth.
    Checker { period: f64 },
    /// Smooth trilinear value noise on a seeded lattice; textured everywhere
    /// with bounded second derivatives.
    Noise { seed: u64, scale: f64 },
    /// Low-frequency sinusoid; the smoothest of the three.
    Gradient,
}

impl TextureSpec {
    pub fn default_noise(seed: u64) -> Self {
        TextureSpec::Noise { seed, scale: 0.3 }
    }

    fn sample(&self, p: Vector3<f64>, channel: usize) -> f64 {
        match self {
            TextureSpec::Checker { period } => {
                let parity = ((p.x / period).floor() + (p.y / period).floor()
                    + (p.z / period).floor()) as i64;
                let base = if parity.rem_euclid(2) == 0 { 0.82 } else { 0.18 };
                (base + 0.04 * channel as f64).min(1.0)
            }
            TextureSpec::Noise { seed, scale } => {
                let q = p / *scale;
                let cell = q.map(f64::floor);
                let frac = q - cell;
                // Trilinear blend of hashed lattice corners.
                let mut acc = 0.0;
                for corner in 0..8 {
                    let (dx, dy, dz) = ((corner & 1) as f64, ((corner >> 1) & 1) as f64, ((corner >> 2) & 1) as f64);
                    let w = (if corner & 1 == 0 { 1.0 - frac.x } else { frac.x })
                        * (if corner >> 1 & 1 == 0 { 1.0 - frac.y } else { frac.y })
                        * (if corner >> 2 & 1 == 0 { 1.0 - frac.z } else { frac.z });
                    acc += w * lattice_value(
                        cell.x as i64 + dx as i64,
                        cell.y as i64 + dy as i64,
                        cell.z as i64 + dz as i64,
                        channel as u64,
                        *seed,
                    );
                }
                0.15 + 0.7 * acc
            }
            TextureSpec::Gradient => {
                let c = channel as f64;
                0.5 + 0.18 * (2.1 * p.x + 0.7 * c).sin()
                    + 0.18 * (1.7 * p.y + 1.3 * c).sin()
                    + 0.09 * (1.3 * p.z).sin()
            }
        }
    }
}

/// splitmix64-style integer hash mapped to [0, 1).
fn lattice_value(x: i64, y: i64, z: i64, channel: u64, seed: u64) -> f64 {
    let mut h = seed
        ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (z as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
        ^ channel.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    h ^= h >> 30;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Camera arc layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSpec {
    /// Distance of every camera centre from the look-at target.
    pub radius: f64,
    /// Total angular span of the arc, degrees.
    pub span_deg: f64,
    /// Vertical offset amplitude across the arc (fraction of the radius).
    pub elevation: f64,
    pub target: Vector3<f64>,
}

impl Default for ArcSpec {
    fn default() -> Self {
        Self { radius: 2.5, span_deg: 26.0, elevation: 0.08, target: Vector3::zeros() }
    }
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub surface: SurfaceSpec,
    pub texture: TextureSpec,
    pub n_views: usize,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub arc: ArcSpec,
    /// Number of sparse correspondence points to sample.
    pub sparse_points: usize,
    /// A surface point enters the ground-truth cloud only when it is seen by
    /// at least this many views; points nobody can triangulate would make
    /// recall unreachable for any reconstruction.
    pub gt_min_visibility: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn plane_default(n_views: usize, width: usize, height: usize, seed: u64) -> Self {
        Self {
            surface: SurfaceSpec::default_plane(),
            texture: TextureSpec::default_noise(seed),
            n_views,
            width,
            height,
            channels: 3,
            arc: ArcSpec::default(),
            sparse_points: 64,
            gt_min_visibility: 2,
            seed,
        }
    }
}

/// A generated scene: calibrated views with exact depth, cloud, sparse and
/// visibility ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub views: Vec<View>,
    pub gt_depths: Vec<DepthMap>,
    pub gt_cloud: PointCloud,
    pub sparse: SparseCorrespondences,
    /// Per view: pixels with valid depth that are unoccluded and in frame in
    /// every other view.
    pub visibility: Vec<ValidityMask>,
}

fn look_at(eye: Vector3<f64>, target: Vector3<f64>) -> Extrinsics {
    let forward = (target - eye).normalize();
    let up = Vector3::new(0.0, 1.0, 0.0);
    let right = up.cross(&forward).normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * eye);
    Extrinsics { rotation, translation }
}

/// World-space ray of a pixel; the parameter along `dir` equals the z-depth
/// in the camera frame.
fn pixel_ray(view: &View, pixel: Vector2<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let dir_cam = view.intrinsics.unproject(pixel);
    let dir_world = view.extrinsics.rotation.transpose() * dir_cam;
    (view.extrinsics.center(), dir_world)
}

/// Analytic visibility of a world point from a view: the point must project
/// into the sample hull and be the first surface hit along its viewing ray.
fn visible_from(
    surface: &SurfaceSpec,
    view: &View,
    point: Vector3<f64>,
) -> Option<Vector2<f64>> {
    let cam = view.extrinsics.world_to_camera(point);
    if cam.z <= 0.0 {
        return None;
    }
    let pixel = view.intrinsics.project(cam);
    if !view.image.in_sample_hull(pixel.x, pixel.y) {
        return None;
    }
    let (origin, dir) = pixel_ray(view, pixel);
    let first_hit = surface.cast(origin, dir)?;
    let tol = 1e-6 * cam.z.max(1.0);
    (first_hit >= cam.z - tol).then_some(pixel)
}

/// Generate a scene. Deterministic for a given spec.
pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene, SynthError> {
    if spec.n_views < 2 {
        return Err(SynthError::TooFewViews(spec.n_views));
    }
    if spec.width < 2 || spec.height < 2 {
        return Err(SynthError::BadResolution);
    }
    let (w, h) = (spec.width, spec.height);
    let intrinsics = Intrinsics::new(
        0.9 * w as f64,
        0.9 * w as f64,
        (w - 1) as f64 / 2.0,
        (h - 1) as f64 / 2.0,
    )?;

    // Camera arc.
    let span = spec.arc.span_deg.to_radians();
    let mut extrinsics = Vec::with_capacity(spec.n_views);
    for i in 0..spec.n_views {
        let t = if spec.n_views == 1 { 0.0 } else { i as f64 / (spec.n_views - 1) as f64 - 0.5 };
        let angle = span * t;
        let lift = spec.arc.elevation * (2.0 * t);
        let offset = Vector3::new(angle.sin(), lift, -angle.cos()).normalize() * spec.arc.radius;
        let eye = spec.arc.target + offset;
        if spec.surface.camera_is_inside(eye) {
            return Err(SynthError::CameraInsideSurface(i));
        }
        extrinsics.push(look_at(eye, spec.arc.target));
    }

    // Render views and depths.
    let rendered: Vec<(Image, DepthMap)> = extrinsics
        .par_iter()
        .map(|ext| {
            let center = ext.center();
            let rot_t = ext.rotation.transpose();
            let mut img = Image::new(w, h, spec.channels);
            let mut depth = DepthMap::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    let dir_cam = intrinsics.unproject(Vector2::new(x as f64, y as f64));
                    let dir_world = rot_t * dir_cam;
                    match spec.surface.cast(center, dir_world) {
                        Some(s) => {
                            let hit = center + dir_world * s;
                            depth.set(x, y, s);
                            for c in 0..spec.channels {
                                img.set(x, y, c, spec.texture.sample(hit, c).clamp(0.0, 1.0));
                            }
                        }
                        None => {
                            depth.set(x, y, 0.0);
                            for c in 0..spec.channels {
                                img.set(x, y, c, 0.25);
                            }
                        }
                    }
                }
            }
            (img, depth)
        })
        .collect();

    let mut views = Vec::with_capacity(spec.n_views);
    let mut gt_depths = Vec::with_capacity(spec.n_views);
    for (i, ((img, depth), ext)) in rendered.into_iter().zip(extrinsics).enumerate() {
        views.push(View::new(img, intrinsics, ext, i)?);
        gt_depths.push(depth);
    }

    // Per-pixel visibility counts from analytic occlusion tests: in how many
    // views (including its own) is each lifted pixel the first surface hit.
    let vis_counts: Vec<Vec<u32>> = views
        .par_iter()
        .zip(&gt_depths)
        .map(|(view, depth)| {
            let mut counts = vec![0u32; w * h];
            for y in 0..h {
                for x in 0..w {
                    let s = depth.get(x, y);
                    if s <= 0.0 {
                        continue;
                    }
                    let (origin, dir) = pixel_ray(view, Vector2::new(x as f64, y as f64));
                    let point = origin + dir * s;
                    counts[y * w + x] = 1 + views
                        .iter()
                        .filter(|other| other.id != view.id)
                        .filter(|other| visible_from(&spec.surface, other, point).is_some())
                        .count() as u32;
                }
            }
            counts
        })
        .collect();

    // Exact surface cloud: lift every sufficiently visible pixel.
    let mut cloud_positions = Vec::new();
    let mut cloud_colors = Vec::new();
    for ((view, depth), counts) in views.iter().zip(&gt_depths).zip(&vis_counts) {
        for y in 0..h {
            for x in 0..w {
                let s = depth.get(x, y);
                if s <= 0.0 || (counts[y * w + x] as usize) < spec.gt_min_visibility {
                    continue;
                }
                let (origin, dir) = pixel_ray(view, Vector2::new(x as f64, y as f64));
                cloud_positions.push(origin + dir * s);
                let px = view.image.pixel(x, y);
                cloud_colors.push(match px.len() {
                    1 => [px[0]; 3],
                    _ => [px[0], px[1], px[2]],
                });
            }
        }
    }
    let gt_cloud = PointCloud::with_colors(cloud_positions, cloud_colors)?;

    // Mask of pixels visible in every view.
    let visibility: Vec<ValidityMask> = vis_counts
        .iter()
        .map(|counts| {
            let mut mask = ValidityMask::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    mask.set(x, y, counts[y * w + x] as usize == spec.n_views);
                }
            }
            mask
        })
        .collect();

    // Sparse correspondences at exact projections; the stream is decoupled
    // from other consumers of the scene seed.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_0F5A);
    let mut points = Vec::new();
    let mut attempts = 0;
    while points.len() < spec.sparse_points && attempts < spec.sparse_points * 50 {
        attempts += 1;
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        if !visibility[0].get(x, y) {
            continue;
        }
        let s = gt_depths[0].get(x, y);
        let (origin, dir) = pixel_ray(&views[0], Vector2::new(x as f64, y as f64));
        let position = origin + dir * s;
        let mut observations = Vec::new();
        for view in &views {
            if let Some(pixel) = visible_from(&spec.surface, view, position) {
                observations.push((view.id, pixel.x, pixel.y));
            }
        }
        if observations.len() >= 2 {
            points.push(SparsePoint { position, observations });
        }
    }

    Ok(SyntheticScene {
        spec: spec.clone(),
        views,
        gt_depths,
        gt_cloud,
        sparse: SparseCorrespondences { points },
        visibility,
    })
}

impl SyntheticScene {
    /// Pixels at least `margin` away from every image border.
    pub fn interior_mask(&self, margin: usize) -> ValidityMask {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut mask = ValidityMask::new(w, h);
        for y in margin..h.saturating_sub(margin) {
            for x in margin..w.saturating_sub(margin) {
                mask.set(x, y, true);
            }
        }
        mask
    }

    /// Pixels whose local intensity gradient exceeds `threshold` in view
    /// `view_idx`; the usable pixels for patch matching.
    pub fn textured_mask(&self, view_idx: usize, threshold: f64) -> ValidityMask {
        let img = &self.views[view_idx].image;
        let grad = img.gradient_magnitude();
        let (w, h) = (img.width(), img.height());
        let mut mask = ValidityMask::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let g: f64 = (0..img.channels()).map(|c| grad.get(x, y, c)).sum();
                mask.set(x, y, g > threshold);
            }
        }
        mask
    }

    /// Valid-depth range over all views: `(min, max)`.
    pub fn depth_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &self.gt_depths {
            for &v in d.data() {
                if v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}
