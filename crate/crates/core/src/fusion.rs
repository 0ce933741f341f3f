//! Depth-map fusion: merge per-view depth estimates into one point cloud,
//! keeping only pixels whose geometry is confirmed by other views.
//!
//! Every view serves once as reference. A reference pixel survives when
//! enough other views agree with it, where "agree" means the round trip
//! (project into the other view, read its depth there, lift and reproject
//! back) lands close in both pixel position and relative depth. Surviving
//! observations are averaged, coloured from the reference image, and
//! deduplicated on a voxel grid.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::evaluation::SpatialIndex;
use crate::geometry::{project_pixel, DepthMap, GeometryError, View};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("need one depth map per view: {0} views vs {1} depth maps")]
    LengthMismatch(usize, usize),
    #[error("depth map {0} does not match its view's dimensions")]
    DepthShapeMismatch(usize),
    #[error("fusion thresholds must be positive")]
    BadConfig,
    #[error("point cloud colors length {0} does not match {1} positions")]
    ColorLengthMismatch(usize, usize),
    #[error("non-finite point position")]
    NonFinitePosition,
    #[error("ply parse error at line {line}: {message}")]
    PlyParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// N x 3 positions with optional per-point RGB colours in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
    colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vector3<f64>>) -> Result<Self, FusionError> {
        if positions.iter().any(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(FusionError::NonFinitePosition);
        }
        Ok(Self { positions, colors: None })
    }

    pub fn with_colors(
        positions: Vec<Vector3<f64>>,
        colors: Vec<[f64; 3]>,
    ) -> Result<Self, FusionError> {
        if colors.len() != positions.len() {
            return Err(FusionError::ColorLengthMismatch(colors.len(), positions.len()));
        }
        let mut cloud = Self::new(positions)?;
        cloud.colors = Some(colors);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[f64; 3]]> {
        self.colors.as_deref()
    }
}

/// Thresholds controlling cross-view agreement.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    /// How many *other* views must confirm a pixel.
    pub min_consistent_views: usize,
    /// `|d_reproj - d_ref| / d_ref` bound.
    pub max_relative_depth_error: f64,
    /// Round-trip pixel distance bound.
    pub max_reprojection_px: f64,
    /// Voxel edge for deduplication; `None` derives it from half the median
    /// fused-point spacing.
    pub dedup_cell: Option<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            min_consistent_views: 2,
            max_relative_depth_error: 0.01,
            max_reprojection_px: 1.0,
            dedup_cell: None,
        }
    }
}

impl FusionConfig {
    fn validate(&self) -> Result<(), FusionError> {
        if self.min_consistent_views < 1
            || !(self.max_relative_depth_error > 0.0)
            || !(self.max_reprojection_px > 0.0)
            || self.dedup_cell.is_some_and(|c| !(c > 0.0))
        {
            return Err(FusionError::BadConfig);
        }
        Ok(())
    }
}

/// Check whether view `other` confirms the reference pixel `p` at depth `d`.
/// On success returns the other view's lifted world point.
fn consistent_observation(
    reference: &View,
    other: &View,
    other_depth: &DepthMap,
    pixel: Vector2<f64>,
    depth: f64,
    cfg: &FusionConfig,
) -> Option<Vector3<f64>> {
    let (projected, _) = project_pixel(pixel, depth, reference, other).ok()?;
    let px = projected.x.round();
    let py = projected.y.round();
    if px < 0.0 || py < 0.0 || px >= other.width() as f64 || py >= other.height() as f64 {
        return None;
    }
    let (ox, oy) = (px as usize, py as usize);
    let d_other = other_depth.get(ox, oy);
    if d_other <= 0.0 {
        return None;
    }
    let other_pixel = Vector2::new(px, py);
    let (back, d_back) = project_pixel(other_pixel, d_other, other, reference).ok()?;
    if (back - pixel).norm() > cfg.max_reprojection_px {
        return None;
    }
    if (d_back - depth).abs() / depth > cfg.max_relative_depth_error {
        return None;
    }
    let cam = other.intrinsics.unproject(other_pixel) * d_other;
    Some(other.extrinsics.camera_to_world(cam))
}

/// Fuse per-view depth maps into a deduplicated coloured point cloud.
pub fn fuse(
    views: &[View],
    depths: &[DepthMap],
    cfg: &FusionConfig,
) -> Result<PointCloud, FusionError> {
    cfg.validate()?;
    if views.len() != depths.len() {
        return Err(FusionError::LengthMismatch(views.len(), depths.len()));
    }
    for (i, (v, d)) in views.iter().zip(depths).enumerate() {
        if v.width() != d.width() || v.height() != d.height() {
            return Err(FusionError::DepthShapeMismatch(i));
        }
    }

    // Reference views are processed in ascending id order so the merged
    // output is independent of the input ordering.
    let mut order: Vec<usize> = (0..views.len()).collect();
    order.sort_by_key(|&i| views[i].id);

    // Per survivor: the averaged position, the reference's own lifted point
    // (used as the dedup key so the voxel assignment does not move when
    // thresholds change), and the reference colour.
    let per_view: Vec<Vec<(Vector3<f64>, Vector3<f64>, [f64; 3])>> = order
        .par_iter()
        .map(|&ri| {
            let reference = &views[ri];
            let depth = &depths[ri];
            let mut out = Vec::new();
            for y in 0..reference.height() {
                for x in 0..reference.width() {
                    let d = depth.get(x, y);
                    if d <= 0.0 {
                        continue;
                    }
                    let pixel = Vector2::new(x as f64, y as f64);
                    let cam = reference.intrinsics.unproject(pixel) * d;
                    let own = reference.extrinsics.camera_to_world(cam);
                    let mut agreeing = Vec::new();
                    for (oi, other) in views.iter().enumerate() {
                        if oi == ri {
                            continue;
                        }
                        if let Some(p) = consistent_observation(
                            reference, other, &depths[oi], pixel, d, cfg,
                        ) {
                            agreeing.push(p);
                        }
                    }
                    if agreeing.len() < cfg.min_consistent_views {
                        continue;
                    }
                    let mut mean = own;
                    for p in &agreeing {
                        mean += p;
                    }
                    mean /= (agreeing.len() + 1) as f64;
                    let px = reference.image.pixel(x, y);
                    let color = match px.len() {
                        1 => [px[0]; 3],
                        _ => [px[0], px[1], px[2]],
                    };
                    out.push((mean, own, color));
                }
            }
            out
        })
        .collect();

    let mut positions = Vec::new();
    let mut anchors = Vec::new();
    let mut colors = Vec::new();
    for view_points in per_view {
        for (mean, own, color) in view_points {
            positions.push(mean);
            anchors.push(own);
            colors.push(color);
        }
    }
    if positions.is_empty() {
        return Ok(PointCloud::default());
    }

    let cell = match cfg.dedup_cell {
        Some(c) => c,
        None => {
            let spacing = median_nn_spacing(&anchors);
            if spacing > 0.0 {
                0.5 * spacing
            } else {
                // All points coincide; any positive cell collapses them.
                1e-9
            }
        }
    };
    Ok(voxel_dedup(&positions, &anchors, &colors, cell))
}

/// Median nearest-neighbour distance.
fn median_nn_spacing(points: &[Vector3<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let index = SpatialIndex::build(points).expect("non-empty");
    let mut spacings: Vec<f64> = (0..points.len())
        .into_par_iter()
        .map(|i| index.nearest_excluding(points[i], Some(i)).map_or(0.0, |(d, _)| d))
        .collect();
    spacings.sort_by(f64::total_cmp);
    spacings[spacings.len() / 2]
}

/// Average together all points whose anchor falls into the same voxel.
/// Output follows voxel-key order, making the merge deterministic.
fn voxel_dedup(
    positions: &[Vector3<f64>],
    anchors: &[Vector3<f64>],
    colors: &[[f64; 3]],
    cell: f64,
) -> PointCloud {
    use std::collections::BTreeMap;
    let key = |p: &Vector3<f64>| -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, [f64; 3], usize)> = BTreeMap::new();
    for ((p, a), c) in positions.iter().zip(anchors).zip(colors) {
        let entry = cells.entry(key(a)).or_insert((Vector3::zeros(), [0.0; 3], 0));
        entry.0 += p;
        for i in 0..3 {
            entry.1[i] += c[i];
        }
        entry.2 += 1;
    }
    let mut out_positions = Vec::with_capacity(cells.len());
    let mut out_colors = Vec::with_capacity(cells.len());
    for (_, (sum_p, sum_c, n)) in cells {
        let inv = 1.0 / n as f64;
        out_positions.push(sum_p * inv);
        out_colors.push([sum_c[0] * inv, sum_c[1] * inv, sum_c[2] * inv]);
    }
    PointCloud { positions: out_positions, colors: Some(out_colors) }
}

/// Write a binary little-endian PLY with float32 positions and, when colours
/// are present, uchar red/green/blue.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<(), FusionError> {
    let mut out = BufWriter::new(File::create(path)?);
    let with_color = cloud.colors.is_some();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.len()
    )?;
    if with_color {
        write!(out, "property uchar red\nproperty uchar green\nproperty uchar blue\n")?;
    }
    write!(out, "end_header\n")?;
    for (i, p) in cloud.positions.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        if let Some(colors) = &cloud.colors {
            for c in colors[i] {
                out.write_all(&[(c.clamp(0.0, 1.0) * 255.0).round() as u8])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_ply(path: &Path) -> Result<PointCloud, FusionError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut line_no = 0usize;
    let mut read_line = |reader: &mut BufReader<File>, line: &mut String| -> Result<usize, FusionError> {
        line.clear();
        line_no += 1;
        let n = reader.read_line(line)?;
        Ok(if n == 0 { 0 } else { line_no })
    };

    let expect = |got: &str, want: &str, line: usize| -> Result<(), FusionError> {
        if got.trim_end() != want {
            return Err(FusionError::PlyParse {
                line,
                message: format!("expected {want:?}, got {got:?}", got = got.trim_end()),
            });
        }
        Ok(())
    };

    let l = read_line(&mut reader, &mut line)?;
    expect(&line, "ply", l)?;
    let l = read_line(&mut reader, &mut line)?;
    expect(&line, "format binary_little_endian 1.0", l)?;

    let mut count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    loop {
        let l = read_line(&mut reader, &mut line)?;
        if l == 0 {
            return Err(FusionError::PlyParse {
                line: line_no,
                message: "unexpected end of header".into(),
            });
        }
        let trimmed = line.trim_end();
        if trimmed == "end_header" {
            break;
        } else if let Some(rest) = trimmed.strip_prefix("element vertex ") {
            count = Some(rest.parse().map_err(|_| FusionError::PlyParse {
                line: l,
                message: format!("bad vertex count {rest:?}"),
            })?);
        } else if let Some(rest) = trimmed.strip_prefix("property ") {
            properties.push(rest.to_string());
        } else if trimmed.starts_with("comment") || trimmed.starts_with("element") {
            // Ignore comments; non-vertex elements are not supported below.
        } else {
            return Err(FusionError::PlyParse {
                line: l,
                message: format!("unsupported header line {trimmed:?}"),
            });
        }
    }
    let count = count.ok_or(FusionError::PlyParse {
        line: line_no,
        message: "missing element vertex".into(),
    })?;
    let with_color = match properties.as_slice() {
        [x, y, z] if x == "float x" && y == "float y" && z == "float z" => false,
        [x, y, z, r, g, b]
            if x == "float x"
                && y == "float y"
                && z == "float z"
                && r == "uchar red"
                && g == "uchar green"
                && b == "uchar blue" =>
        {
            true
        }
        other => {
            return Err(FusionError::PlyParse {
                line: line_no,
                message: format!("unsupported property layout {other:?}"),
            })
        }
    };

    let stride = 12 + if with_color { 3 } else { 0 };
    let mut raw = vec![0u8; count * stride];
    reader.read_exact(&mut raw).map_err(|e| FusionError::PlyParse {
        line: line_no,
        message: format!("truncated vertex data: {e}"),
    })?;
    let mut positions = Vec::with_capacity(count);
    let mut colors = if with_color { Some(Vec::with_capacity(count)) } else { None };
    for rec in raw.chunks_exact(stride) {
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        positions.push(Vector3::new(f(0), f(4), f(8)));
        if let Some(colors) = &mut colors {
            colors.push([rec[12] as f64 / 255.0, rec[13] as f64 / 255.0, rec[14] as f64 / 255.0]);
        }
    }
    Ok(PointCloud { positions, colors })
}
