//! Distribution-gap measurement between scenes: maximum mean discrepancy
//! over per-view feature embeddings, and the scene-by-scene confusion matrix.
//!
//! The estimator is the biased V-statistic with a Gaussian kernel, so the
//! self-distance is exactly zero and the estimate is always non-negative.
//! The bandwidth defaults to the median pairwise distance of the pooled
//! samples.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::View;
use crate::raster::pairwise_sum;

#[derive(Debug, Error)]
pub enum MmdError {
    #[error("embedding sets must share the dimension: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("an embedding set needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("embeddings must be finite")]
    NonFinite,
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("need at least 2 embedding sets, got {0}")]
    TooFewSets(usize),
}

/// One scene's distribution: an embedding vector per view.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub scene_id: String,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(scene_id: impl Into<String>, vectors: Vec<Vec<f64>>) -> Result<Self, MmdError> {
        if vectors.len() < 2 {
            return Err(MmdError::TooFewVectors(vectors.len()));
        }
        let d = vectors[0].len();
        for v in &vectors {
            if v.len() != d {
                return Err(MmdError::DimensionMismatch(d, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MmdError::NonFinite);
            }
        }
        Ok(Self { scene_id: scene_id.into(), vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Kernel bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median pairwise distance over the pooled samples.
    Median,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn gaussian(sq: f64, sigma: f64) -> f64 {
    (-sq / (2.0 * sigma * sigma)).exp()
}

/// Median pairwise Euclidean distance over all distinct pairs of the pooled
/// vector collection. Falls back to 1.0 when every pair coincides.
pub fn median_pairwise_distance(pooled: &[&[f64]]) -> f64 {
    let mut distances = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in (i + 1)..pooled.len() {
            distances.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    if distances.is_empty() {
        return 1.0;
    }
    distances.sort_by(f64::total_cmp);
    let n = distances.len();
    let median =
        if n % 2 == 1 { distances[n / 2] } else { 0.5 * (distances[n / 2 - 1] + distances[n / 2]) };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], sigma: f64) -> f64 {
    let rows: Vec<f64> = a
        .par_iter()
        .map(|x| {
            let row: Vec<f64> = b.iter().map(|y| gaussian(sq_dist(x, y), sigma)).collect();
            pairwise_sum(&row)
        })
        .collect();
    pairwise_sum(&rows) / (a.len() * b.len()) as f64
}

/// Squared maximum mean discrepancy (biased V-statistic):
/// `mean k(x,x') + mean k(y,y') - 2 mean k(x,y)`.
pub fn mmd_squared(x: &EmbeddingSet, y: &EmbeddingSet, bandwidth: Bandwidth) -> Result<f64, MmdError> {
    if x.dim() != y.dim() {
        return Err(MmdError::DimensionMismatch(x.dim(), y.dim()));
    }
    let sigma = match bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 => s,
        Bandwidth::Fixed(s) => return Err(MmdError::BadBandwidth(s)),
        Bandwidth::Median => {
            let pooled: Vec<&[f64]> = x
                .vectors
                .iter()
                .chain(&y.vectors)
                .map(|v| v.as_slice())
                .collect();
            median_pairwise_distance(&pooled)
        }
    };
    let kxx = mean_kernel(&x.vectors, &x.vectors, sigma);
    let kyy = mean_kernel(&y.vectors, &y.vectors, sigma);
    let kxy = mean_kernel(&x.vectors, &y.vectors, sigma);
    Ok((kxx + kyy - 2.0 * kxy).max(0.0))
}

/// Pairwise MMD matrix over scenes with a single pooled median bandwidth:
/// symmetric with a zero diagonal.
pub fn confusion_matrix(sets: &[EmbeddingSet]) -> Result<Vec<Vec<f64>>, MmdError> {
    if sets.len() < 2 {
        return Err(MmdError::TooFewSets(sets.len()));
    }
    let d = sets[0].dim();
    for s in sets {
        if s.dim() != d {
            return Err(MmdError::DimensionMismatch(d, s.dim()));
        }
    }
    let pooled: Vec<&[f64]> =
        sets.iter().flat_map(|s| s.vectors.iter().map(|v| v.as_slice())).collect();
    let sigma = median_pairwise_distance(&pooled);

    let n = sets.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            mmd_squared(&sets[i], &sets[j], Bandwidth::Fixed(sigma)).expect("dims checked")
        })
        .collect();
    let mut matrix = vec![vec![0.0; n]; n];
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        matrix[i][j] = v;
        matrix[j][i] = v;
    }
    Ok(matrix)
}

/// Bins of the gradient-orientation histogram in [`embed_view`].
const ORIENTATION_BINS: usize = 8;
/// Downsampled intensity grid side length.
const POOL_SIDE: usize = 8;

/// Deterministic hand-crafted view descriptor: per-channel mean and variance,
/// an 8x8 average-pooled intensity grid, and a magnitude-weighted
/// gradient-orientation histogram, concatenated and L2-normalized.
///
/// This is the built-in stand-in for a learned embedding; externally computed
/// embedding files are the higher-fidelity input path.
pub fn embed_view(view: &View) -> Vec<f64> {
    let img = &view.image;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let n = (w * h) as f64;
    let mut out = Vec::with_capacity(2 * c + POOL_SIDE * POOL_SIDE + ORIENTATION_BINS);

    for ch in 0..c {
        let mean = img.channel_mean(ch);
        let mut var = 0.0;
        for y in 0..h {
            for x in 0..w {
                let d = img.get(x, y, ch) - mean;
                var += d * d;
            }
        }
        out.push(mean);
        out.push(var / n);
    }

    // Average-pooled intensity (channels averaged).
    let intensity = |x: usize, y: usize| -> f64 {
        img.pixel(x, y).iter().sum::<f64>() / c as f64
    };
    for gy in 0..POOL_SIDE {
        for gx in 0..POOL_SIDE {
            let x0 = gx * w / POOL_SIDE;
            let x1 = ((gx + 1) * w / POOL_SIDE).max(x0 + 1).min(w);
            let y0 = gy * h / POOL_SIDE;
            let y1 = ((gy + 1) * h / POOL_SIDE).max(y0 + 1).min(h);
            let mut acc = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    acc += intensity(x, y);
                }
            }
            out.push(acc / ((x1 - x0) * (y1 - y0)) as f64);
        }
    }

    // Magnitude-weighted orientation histogram of the intensity gradient.
    let mut hist = [0.0; ORIENTATION_BINS];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let gx = (intensity(x + 1, y) - intensity(x - 1, y)) / 2.0;
            let gy = (intensity(x, y + 1) - intensity(x, y - 1)) / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag > 0.0 {
                let angle = gy.atan2(gx); // (-pi, pi]
                let t = (angle + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
                let bin = ((t * ORIENTATION_BINS as f64) as usize).min(ORIENTATION_BINS - 1);
                hist[bin] += mag;
            }
        }
    }
    out.extend_from_slice(&hist);

    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for v in &mut out {
            *v /= norm;
        }
    } else {
        // Fully black frame: fall back to a fixed unit vector.
        out[0] = 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use crate::raster::Image;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_set(id: &str, n: usize, d: usize, center: f64, spread: f64, seed: u64) -> EmbeddingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddingSet::new(
            id,
            (0..n)
                .map(|_| (0..d).map(|_| center + rng.random_range(-spread..spread)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_distance_is_zero() {
        let x = gaussian_set("a", 20, 4, 0.0, 1.0, 1);
        let d = mmd_squared(&x, &x, Bandwidth::Median).unwrap();
        assert!(d < 1e-12, "self distance {d}");
    }

    #[test]
    fn separated_tight_clusters_approach_two() {
        let sigma = 0.01;
        let x = gaussian_set("a", 15, 3, 0.0, 1e-4, 2);
        let y = gaussian_set("b", 15, 3, 100.0 * sigma, 1e-4, 3);
        let d = mmd_squared(&x, &y, Bandwidth::Fixed(sigma)).unwrap();
        assert!(d > 1.9, "mmd^2 {d}");
        assert!(d <= 2.0 + 1e-12);
    }

    #[test]
    fn same_distribution_passes_permutation_test() {
        // Permutation oracle: pool the two samples, re-split randomly, and
        // compare the observed statistic against the 95th percentile.
        let mut successes = 0;
        let trials = 20;
        for trial in 0..trials {
            let x = gaussian_set("a", 12, 3, 0.0, 1.0, 100 + trial);
            let y = gaussian_set("b", 12, 3, 0.0, 1.0, 200 + trial);
            let observed = mmd_squared(&x, &y, Bandwidth::Fixed(1.0)).unwrap();

            let mut pooled: Vec<Vec<f64>> = x.vectors().to_vec();
            pooled.extend_from_slice(y.vectors());
            let mut rng = ChaCha8Rng::seed_from_u64(300 + trial);
            let mut stats = Vec::new();
            for _ in 0..99 {
                let mut order: Vec<usize> = (0..pooled.len()).collect();
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
                let xs: Vec<Vec<f64>> =
                    order[..12].iter().map(|&i| pooled[i].clone()).collect();
                let ys: Vec<Vec<f64>> =
                    order[12..].iter().map(|&i| pooled[i].clone()).collect();
                let sx = EmbeddingSet::new("p", xs).unwrap();
                let sy = EmbeddingSet::new("q", ys).unwrap();
                stats.push(mmd_squared(&sx, &sy, Bandwidth::Fixed(1.0)).unwrap());
            }
            stats.sort_by(f64::total_cmp);
            let p95 = stats[94];
            if observed <= p95 {
                successes += 1;
            }
        }
        assert!(successes >= 18, "only {successes}/{trials} below the 95th percentile");
    }

    #[test]
    fn confusion_matrix_properties() {
        let sets = vec![
            gaussian_set("s0", 10, 4, 0.0, 0.5, 10),
            gaussian_set("s1", 12, 4, 1.0, 0.5, 11),
            gaussian_set("s2", 9, 4, 2.0, 0.5, 12),
        ];
        let m = confusion_matrix(&sets).unwrap();
        for i in 0..3 {
            assert!(m[i][i] < 1e-9);
            for j in 0..3 {
                assert!((m[i][j] - m[j][i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identical_sets_give_zero_matrix() {
        let base = gaussian_set("s", 8, 3, 0.0, 1.0, 42);
        let sets = vec![
            EmbeddingSet::new("a", base.vectors().to_vec()).unwrap(),
            EmbeddingSet::new("b", base.vectors().to_vec()).unwrap(),
        ];
        let m = confusion_matrix(&sets).unwrap();
        assert!(m[0][1] < 1e-12);
    }

    #[test]
    fn three_clusters_ordered_by_separation() {
        // Cluster centers at 0, 1, 3 along one axis: pairwise distances
        // 1, 2, 3 should order the matrix entries accordingly.
        let sets = vec![
            gaussian_set("c0", 14, 5, 0.0, 0.05, 20),
            gaussian_set("c1", 14, 5, 1.0, 0.05, 21),
            gaussian_set("c2", 14, 5, 3.0, 0.05, 22),
        ];
        let m = confusion_matrix(&sets).unwrap();
        assert!(m[0][1] < m[0][2], "d(0,1)={} d(0,2)={}", m[0][1], m[0][2]);
        assert!(m[1][2] < m[0][2], "d(1,2)={} d(0,2)={}", m[1][2], m[0][2]);
    }

    #[test]
    fn matrix_invariant_to_view_permutation_within_scene() {
        let a = gaussian_set("a", 10, 3, 0.0, 1.0, 7);
        let mut shuffled = a.vectors().to_vec();
        shuffled.reverse();
        let a2 = EmbeddingSet::new("a2", shuffled).unwrap();
        let b = gaussian_set("b", 10, 3, 2.0, 1.0, 8);
        let m1 = confusion_matrix(&[a, b.clone()]).unwrap();
        let m2 = confusion_matrix(&[a2, b]).unwrap();
        assert_relative_eq!(m1[0][1], m2[0][1], epsilon = 1e-12);
    }

    fn image_view(f: impl Fn(usize, usize, usize) -> f64) -> View {
        View::new(
            Image::from_fn(32, 32, 3, |x, y, c| f(x, y, c).clamp(0.0, 1.0)),
            Intrinsics::new(30.0, 30.0, 15.5, 15.5).unwrap(),
            Extrinsics::identity(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn embed_view_is_unit_norm_and_deterministic() {
        let v = image_view(|x, y, c| ((x * 3 + y * 5 + c) % 17) as f64 / 16.0);
        let e1 = embed_view(&v);
        let e2 = embed_view(&v);
        assert_eq!(e1, e2);
        let norm: f64 = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn black_frame_still_unit_norm() {
        let v = image_view(|_, _, _| 0.0);
        let e = embed_view(&v);
        let norm: f64 = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn brightness_shift_stays_closer_than_unrelated_scene() {
        let original = image_view(|x, y, _| ((x / 4 + y / 4) % 2) as f64 * 0.6 + 0.2);
        let shifted = image_view(|x, y, _| ((x / 4 + y / 4) % 2) as f64 * 0.6 + 0.3);
        let unrelated = image_view(|x, y, _| ((x * x + 3 * y) % 9) as f64 / 8.0);
        let d = |a: &[f64], b: &[f64]| sq_dist(a, b).sqrt();
        let (e0, e1, e2) = (embed_view(&original), embed_view(&shifted), embed_view(&unrelated));
        assert!(d(&e0, &e1) < d(&e0, &e2));
    }
}
