//! Point-cloud benchmarking: exact nearest-neighbour distances through a
//! uniform grid, precision/recall/F-score at a distance threshold, DTU-style
//! accuracy/completeness, and uniform mesh sampling for ground truth.
//!
//! The grid index is exact by construction: the ring search only stops once
//! no unvisited cell can hold a closer point, and distances are computed with
//! the same expression a brute-force scan would use.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fusion::PointCloud;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("target point cloud is empty")]
    EmptyTarget,
    #[error("query point cloud is empty")]
    EmptyQuery,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("precision and recall must lie in [0, 100]")]
    BadScore,
    #[error("all distances exceeded the outlier cap {0}")]
    AllOutliers(f64),
    #[error("mesh has no positive-area triangles")]
    DegenerateMesh,
    #[error("triangle index {0} out of range ({1} vertices)")]
    BadTriangleIndex(usize, usize),
    #[error("need at least one sample")]
    BadSampleCount,
}

/// Squared Euclidean distance, shared by the index and any brute-force
/// oracle so the two produce bitwise-identical minima.
#[inline]
pub fn dist2(a: Vector3<f64>, b: Vector3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Uniform-grid spatial index over a fixed point set.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vector3<f64>>,
    min: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl SpatialIndex {
    pub fn build(points: &[Vector3<f64>]) -> Result<Self, EvalError> {
        if points.is_empty() {
            return Err(EvalError::EmptyTarget);
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let extent = max - min;
        let target_cells = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = if extent.max() > 0.0 { extent.max() / target_cells } else { 1.0 };
        let dims = [
            (extent.x / cell).floor() as usize + 1,
            (extent.y / cell).floor() as usize + 1,
            (extent.z / cell).floor() as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of(p, min, cell, dims);
            buckets[Self::bucket_index(c, dims)].push(i as u32);
        }
        Ok(Self { points: points.to_vec(), min, cell, dims, buckets })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    fn cell_of(p: &Vector3<f64>, min: Vector3<f64>, cell: f64, dims: [usize; 3]) -> [isize; 3] {
        let clamp = |v: f64, n: usize| ((v / cell).floor() as isize).clamp(0, n as isize - 1);
        [clamp(p.x - min.x, dims[0]), clamp(p.y - min.y, dims[1]), clamp(p.z - min.z, dims[2])]
    }

    #[inline]
    fn bucket_index(c: [isize; 3], dims: [usize; 3]) -> usize {
        (c[2] as usize * dims[1] + c[1] as usize) * dims[0] + c[0] as usize
    }

    /// Exact nearest neighbour: `(distance, point index)`.
    pub fn nearest(&self, query: Vector3<f64>) -> (f64, usize) {
        self.nearest_excluding(query, None).expect("index is never empty")
    }

    /// Nearest neighbour, optionally ignoring one point index. Returns `None`
    /// only when the exclusion empties the index.
    pub fn nearest_excluding(
        &self,
        query: Vector3<f64>,
        skip: Option<usize>,
    ) -> Option<(f64, usize)> {
        if self.points.len() == 1 && skip == Some(0) {
            return None;
        }
        // Virtual cell of the query; may lie outside the grid.
        let home = [
            ((query.x - self.min.x) / self.cell).floor() as isize,
            ((query.y - self.min.y) / self.cell).floor() as isize,
            ((query.z - self.min.z) / self.cell).floor() as isize,
        ];
        // First ring that intersects the grid and the last ring it can span.
        let ring_start = (0..3)
            .map(|a| {
                let hi = self.dims[a] as isize - 1;
                if home[a] < 0 {
                    -home[a]
                } else if home[a] > hi {
                    home[a] - hi
                } else {
                    0
                }
            })
            .max()
            .unwrap_or(0) as usize;
        let ring_end = (0..3)
            .map(|a| {
                let hi = (self.dims[a] as isize - 1) - home[a];
                home[a].abs().max(hi.abs())
            })
            .max()
            .unwrap_or(0)
            .max(0) as usize;

        let mut best = f64::INFINITY;
        let mut best_idx = usize::MAX;
        for ring in ring_start..=ring_end {
            // Any point in a cell at Chebyshev ring >= r is at least
            // (r - 1) * cell away from the query, so once the best squared
            // distance is within that bound no farther ring can improve the
            // minimum.
            if ring > ring_start {
                let bound = (ring as f64 - 1.0) * self.cell;
                if best <= bound * bound {
                    break;
                }
            }
            self.scan_ring(home, ring as isize, query, skip, &mut best, &mut best_idx);
        }
        (best_idx != usize::MAX).then(|| (best.sqrt(), best_idx))
    }

    fn scan_ring(
        &self,
        home: [isize; 3],
        ring: isize,
        query: Vector3<f64>,
        skip: Option<usize>,
        best: &mut f64,
        best_idx: &mut usize,
    ) {
        let ranges: Vec<(isize, isize)> = (0..3)
            .map(|a| ((home[a] - ring).max(0), (home[a] + ring).min(self.dims[a] as isize - 1)))
            .collect();
        for cz in ranges[2].0..=ranges[2].1 {
            for cy in ranges[1].0..=ranges[1].1 {
                for cx in ranges[0].0..=ranges[0].1 {
                    let cheb =
                        (cx - home[0]).abs().max((cy - home[1]).abs()).max((cz - home[2]).abs());
                    if cheb != ring {
                        continue;
                    }
                    let bucket = &self.buckets[Self::bucket_index([cx, cy, cz], self.dims)];
                    for &i in bucket {
                        let i = i as usize;
                        if skip == Some(i) {
                            continue;
                        }
                        let d2 = dist2(query, self.points[i]);
                        if d2 < *best {
                            *best = d2;
                            *best_idx = i;
                        }
                    }
                }
            }
        }
    }
}

/// Exact distance from every query point to its nearest target point.
pub fn nn_distances(query: &PointCloud, target: &PointCloud) -> Result<Vec<f64>, EvalError> {
    if target.is_empty() {
        return Err(EvalError::EmptyTarget);
    }
    let index = SpatialIndex::build(target.positions())?;
    Ok(query.positions().par_iter().map(|&q| index.nearest(q).0).collect())
}

/// Percentage of reconstructed points strictly within `d` of the ground
/// truth.
pub fn precision(recon: &PointCloud, gt: &PointCloud, d: f64) -> Result<f64, EvalError> {
    if !(d > 0.0) {
        return Err(EvalError::BadThreshold(d));
    }
    if recon.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    let distances = nn_distances(recon, gt)?;
    Ok(score_within(&distances, d))
}

/// Percentage of ground-truth points strictly within `d` of the
/// reconstruction; by definition `recall(a, b, d) == precision(b, a, d)`.
pub fn recall(recon: &PointCloud, gt: &PointCloud, d: f64) -> Result<f64, EvalError> {
    precision(gt, recon, d)
}

fn score_within(distances: &[f64], d: f64) -> f64 {
    let hits = distances.iter().filter(|&&e| e < d).count();
    100.0 * hits as f64 / distances.len() as f64
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn fscore(p: f64, r: f64) -> Result<f64, EvalError> {
    if !(0.0..=100.0).contains(&p) || !(0.0..=100.0).contains(&r) {
        return Err(EvalError::BadScore);
    }
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// DTU-style metrics: mean distance reconstruction→GT (accuracy) and
/// GT→reconstruction (completeness) after discarding distances above
/// `outlier_cap`, and their average.
pub fn dtu_metrics(
    recon: &PointCloud,
    gt: &PointCloud,
    outlier_cap: f64,
) -> Result<(f64, f64, f64), EvalError> {
    if !(outlier_cap > 0.0) {
        return Err(EvalError::BadThreshold(outlier_cap));
    }
    if recon.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    let capped_mean = |distances: &[f64]| -> Result<f64, EvalError> {
        let kept: Vec<f64> = distances.iter().copied().filter(|&e| e <= outlier_cap).collect();
        if kept.is_empty() {
            return Err(EvalError::AllOutliers(outlier_cap));
        }
        Ok(crate::raster::pairwise_sum(&kept) / kept.len() as f64)
    };
    let accuracy = capped_mean(&nn_distances(recon, gt)?)?;
    let completeness = capped_mean(&nn_distances(gt, recon)?)?;
    Ok((accuracy, completeness, 0.5 * (accuracy + completeness)))
}

/// Full benchmark report at one threshold.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub threshold: f64,
    pub recon_to_gt: Vec<f64>,
    pub gt_to_recon: Vec<f64>,
}

/// Compute precision/recall/F-score and keep the underlying distance arrays
/// for histogramming.
pub fn evaluate(recon: &PointCloud, gt: &PointCloud, d: f64) -> Result<EvalReport, EvalError> {
    if !(d > 0.0) {
        return Err(EvalError::BadThreshold(d));
    }
    if recon.is_empty() {
        return Err(EvalError::EmptyQuery);
    }
    let recon_to_gt = nn_distances(recon, gt)?;
    let gt_to_recon = nn_distances(gt, recon)?;
    let p = score_within(&recon_to_gt, d);
    let r = score_within(&gt_to_recon, d);
    Ok(EvalReport { precision: p, recall: r, fscore: fscore(p, r)?, threshold: d, recon_to_gt, gt_to_recon })
}

/// Sample `n` points uniformly (by area) from a triangle mesh,
/// deterministic per seed.
pub fn sample_mesh(
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    n: usize,
    seed: u64,
) -> Result<PointCloud, EvalError> {
    if n < 1 {
        return Err(EvalError::BadSampleCount);
    }
    let mut cumulative = Vec::with_capacity(triangles.len());
    let mut total = 0.0;
    for t in triangles {
        for &i in t {
            if i >= vertices.len() {
                return Err(EvalError::BadTriangleIndex(i, vertices.len()));
            }
        }
        let ab = vertices[t[1]] - vertices[t[0]];
        let ac = vertices[t[2]] - vertices[t[0]];
        total += 0.5 * ab.cross(&ac).norm();
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(EvalError::DegenerateMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = rng.random_range(0.0..total);
        let ti = cumulative.partition_point(|&c| c <= pick).min(triangles.len() - 1);
        let t = triangles[ti];
        let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = vertices[t[0]]
            + (vertices[t[1]] - vertices[t[0]]) * u
            + (vertices[t[2]] - vertices[t[0]]) * v;
        positions.push(p);
    }
    PointCloud::new(positions).map_err(|_| EvalError::DegenerateMesh)
}
