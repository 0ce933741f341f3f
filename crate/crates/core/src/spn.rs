//! Edge-guided spatial propagation: a directional linear recurrence that
//! filters distortions out of style-transferred images while respecting the
//! edges of a clean guide image.
//!
//! Four sweeps (left-right, right-left, top-bottom, bottom-top) each connect
//! a pixel to three neighbours on the previous line; the per-pixel weights
//! come from a bilateral-style affinity on the guide and are normalized to a
//! fixed stability budget below 1, which makes every sweep a contraction and
//! bounds the output by the input range.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{GeometryError, View};
use crate::raster::{pairwise_sum, Image};

#[derive(Debug, Error)]
pub enum SpnError {
    #[error("affinity field is {0}x{1} but the image is {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("strength must be >= 0, got {0}")]
    BadStrength(f64),
    #[error("affinity weights violate the stability condition at pixel/direction {0}")]
    UnstableWeights(usize),
    #[error("need one filtered image per view: {0} views vs {1} images")]
    ViewCountMismatch(usize, usize),
    #[error("filtered image {0} does not match its view's dimensions")]
    ImageShapeMismatch(usize),
    #[error("sparse file parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-pixel, per-direction weights sum to this budget; keeping it strictly
/// below 1 makes the recurrence a contraction.
pub const STABILITY_BUDGET: f64 = 0.9;

const NUM_DIRECTIONS: usize = 4;
const NEIGHBORS_PER_LINE: usize = 3;

/// Sweep directions of the propagation recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    LeftRight,
    RightLeft,
    TopBottom,
    BottomTop,
}

pub const ALL_DIRECTIONS: [SweepDirection; NUM_DIRECTIONS] = [
    SweepDirection::LeftRight,
    SweepDirection::RightLeft,
    SweepDirection::TopBottom,
    SweepDirection::BottomTop,
];

impl SweepDirection {
    fn index(self) -> usize {
        match self {
            SweepDirection::LeftRight => 0,
            SweepDirection::RightLeft => 1,
            SweepDirection::TopBottom => 2,
            SweepDirection::BottomTop => 3,
        }
    }

    /// The three previous-line neighbours of `(x, y)`, or `None` when the
    /// offset leaves the image.
    fn neighbors(
        self,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
    ) -> [Option<(usize, usize)>; NEIGHBORS_PER_LINE] {
        let (xi, yi) = (x as isize, y as isize);
        let coords: [(isize, isize); NEIGHBORS_PER_LINE] = match self {
            SweepDirection::LeftRight => [(xi - 1, yi - 1), (xi - 1, yi), (xi - 1, yi + 1)],
            SweepDirection::RightLeft => [(xi + 1, yi - 1), (xi + 1, yi), (xi + 1, yi + 1)],
            SweepDirection::TopBottom => [(xi - 1, yi - 1), (xi, yi - 1), (xi + 1, yi - 1)],
            SweepDirection::BottomTop => [(xi - 1, yi + 1), (xi, yi + 1), (xi + 1, yi + 1)],
        };
        coords.map(|(cx, cy)| {
            (cx >= 0 && cy >= 0 && cx < w as isize && cy < h as isize)
                .then_some((cx as usize, cy as usize))
        })
    }
}

/// H x W x 4 x 3 propagation weights.
#[derive(Debug, Clone)]
pub struct AffinityField {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl AffinityField {
    /// Build a field from raw weights laid out as `H x W x 4 x 3`
    /// (pixel-major, then direction, then neighbour). Every pixel/direction
    /// triple must satisfy the stability condition `sum |w| <= 1`; the
    /// convex-combination range bound of [`propagate`] additionally needs
    /// non-negative weights, which is what [`guidance_affinity`] produces.
    pub fn from_weights(width: usize, height: usize, weights: Vec<f64>) -> Result<Self, SpnError> {
        if weights.len() != width * height * NUM_DIRECTIONS * NEIGHBORS_PER_LINE {
            return Err(SpnError::DimensionMismatch(width, height, 0, weights.len()));
        }
        for (i, triple) in weights.chunks_exact(NEIGHBORS_PER_LINE).enumerate() {
            let sum: f64 = triple.iter().map(|w| w.abs()).sum();
            if !sum.is_finite() || sum > 1.0 + 1e-12 {
                return Err(SpnError::UnstableWeights(i));
            }
        }
        Ok(Self { width, height, weights })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    fn offset(&self, x: usize, y: usize, dir: usize) -> usize {
        ((y * self.width + x) * NUM_DIRECTIONS + dir) * NEIGHBORS_PER_LINE
    }

    #[inline]
    pub fn weight(&self, x: usize, y: usize, dir: SweepDirection, i: usize) -> f64 {
        self.weights[self.offset(x, y, dir.index()) + i]
    }

    /// Sum of absolute weights for one pixel and direction.
    pub fn stability_sum(&self, x: usize, y: usize, dir: SweepDirection) -> f64 {
        let o = self.offset(x, y, dir.index());
        self.weights[o..o + NEIGHBORS_PER_LINE].iter().map(|w| w.abs()).sum()
    }
}

/// Edge-aware affinities from a guide image.
///
/// The raw weight toward a previous-line neighbour `q` is
/// `exp(-strength * ||guide(p) - guide(q)||^2)`; the weights of each pixel
/// and direction are rescaled down so their sum never exceeds
/// [`STABILITY_BUDGET`]. Where enough raw similarity mass exists the sum
/// equals the budget exactly; where every neighbour lies across a strong
/// edge the weights stay near zero instead of being inflated back to the
/// budget, so sweeps do not bleed across edges and the propagation leaves
/// self-consistent input essentially untouched. Pixels on the first line of
/// a sweep have no neighbours and keep zero weights. `strength = 0` yields
/// uniform weights (a pure smoother).
pub fn guidance_affinity(guide: &View, strength: f64) -> Result<AffinityField, SpnError> {
    if !(strength >= 0.0) {
        return Err(SpnError::BadStrength(strength));
    }
    let (w, h) = (guide.width(), guide.height());
    let img = &guide.image;
    let mut weights = vec![0.0; w * h * NUM_DIRECTIONS * NEIGHBORS_PER_LINE];
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            for dir in ALL_DIRECTIONS {
                let neighbors = dir.neighbors(x, y, w, h);
                let mut raw = [0.0; NEIGHBORS_PER_LINE];
                let mut total = 0.0;
                for (i, n) in neighbors.iter().enumerate() {
                    if let Some((nx, ny)) = n {
                        let q = img.pixel(*nx, *ny);
                        let dist2: f64 =
                            p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                        raw[i] = (-strength * dist2).exp();
                        total += raw[i];
                    }
                }
                if total > 0.0 {
                    let z = (STABILITY_BUDGET / total).min(1.0);
                    let base = ((y * w + x) * NUM_DIRECTIONS + dir.index()) * NEIGHBORS_PER_LINE;
                    for i in 0..NEIGHBORS_PER_LINE {
                        weights[base + i] = raw[i] * z;
                    }
                }
            }
        }
    }
    Ok(AffinityField { width: w, height: h, weights })
}

fn sweep(input: &Image, affinity: &AffinityField, dir: SweepDirection) -> Image {
    let (w, h, c) = (input.width(), input.height(), input.channels());
    let mut out = input.clone();
    // Visit lines in recurrence order; the previous line is complete when a
    // pixel reads from it.
    let line_major: Vec<(usize, usize)> = match dir {
        SweepDirection::LeftRight => {
            (0..w).flat_map(|x| (0..h).map(move |y| (x, y))).collect()
        }
        SweepDirection::RightLeft => {
            (0..w).rev().flat_map(|x| (0..h).map(move |y| (x, y))).collect()
        }
        SweepDirection::TopBottom => {
            (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect()
        }
        SweepDirection::BottomTop => {
            (0..h).rev().flat_map(|y| (0..w).map(move |x| (x, y))).collect()
        }
    };
    for (x, y) in line_major {
        let neighbors = dir.neighbors(x, y, w, h);
        let mut wsum = 0.0;
        let mut acc = vec![0.0; c];
        for (i, n) in neighbors.iter().enumerate() {
            let Some((nx, ny)) = n else { continue };
            let wgt = affinity.weight(x, y, dir, i);
            wsum += wgt;
            for ch in 0..c {
                acc[ch] += wgt * out.get(*nx, *ny, ch);
            }
        }
        for ch in 0..c {
            let v = (1.0 - wsum) * input.get(x, y, ch) + acc[ch];
            out.set(x, y, ch, v);
        }
    }
    out
}

/// Run the propagation recurrence along all four sweeps and average them.
///
/// With non-negative weights summing to at most 1 every sweep is a convex
/// combination, so the output never leaves the per-channel input range.
pub fn propagate(distorted: &Image, affinity: &AffinityField) -> Result<Image, SpnError> {
    if distorted.width() != affinity.width || distorted.height() != affinity.height {
        return Err(SpnError::DimensionMismatch(
            affinity.width,
            affinity.height,
            distorted.width(),
            distorted.height(),
        ));
    }
    let sweeps: Vec<Image> = ALL_DIRECTIONS
        .par_iter()
        .map(|&dir| sweep(distorted, affinity, dir))
        .collect();
    let mut out = Image::new(distorted.width(), distorted.height(), distorted.channels());
    let quarter = 1.0 / NUM_DIRECTIONS as f64;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v = sweeps.iter().map(|s| s.data()[i]).sum::<f64>() * quarter;
    }
    Ok(out)
}

/// Filter a distorted (e.g. style-transferred) image with affinities built
/// from its clean content counterpart.
pub fn guided_filter(
    transferred: &Image,
    content_guide: &View,
    strength: f64,
) -> Result<Image, SpnError> {
    let affinity = guidance_affinity(content_guide, strength)?;
    propagate(transferred, &affinity)
}

/// One 3D point together with the pixels observing it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoint {
    pub position: Vector3<f64>,
    /// `(view id, column, row)` observations.
    pub observations: Vec<(usize, f64, f64)>,
}

/// Sparse multi-view correspondences, e.g. the output of an SfM pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCorrespondences {
    pub points: Vec<SparsePoint>,
}

impl SparseCorrespondences {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest reprojection residual (pixels) over all observations.
    pub fn max_reprojection_error(&self, views: &[View]) -> f64 {
        let mut worst = 0.0f64;
        for point in &self.points {
            for &(vid, px, py) in &point.observations {
                let Some(view) = views.iter().find(|v| v.id == vid) else { continue };
                let cam = view.extrinsics.world_to_camera(point.position);
                if cam.z <= 0.0 {
                    worst = f64::INFINITY;
                    continue;
                }
                let proj = view.intrinsics.project(cam);
                worst = worst.max((proj - Vector2::new(px, py)).norm());
            }
        }
        worst
    }
}

/// Read the text format: one point per line,
/// `X Y Z  v0 u0 w0  v1 u1 w1 ...` with `(view id, column, row)` triples.
pub fn read_sparse(path: &Path) -> Result<SparseCorrespondences, SpnError> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() < 3 || (tokens.len() - 3) % 3 != 0 {
            return Err(SpnError::Parse {
                line: line_no,
                message: format!("expected `X Y Z (view u v)*`, got {} tokens", tokens.len()),
            });
        }
        let parse = |t: &str| -> Result<f64, SpnError> {
            t.parse().map_err(|_| SpnError::Parse {
                line: line_no,
                message: format!("invalid number {t:?}"),
            })
        };
        let position = Vector3::new(parse(tokens[0])?, parse(tokens[1])?, parse(tokens[2])?);
        let mut observations = Vec::new();
        for obs in tokens[3..].chunks_exact(3) {
            let vid: usize = obs[0].parse().map_err(|_| SpnError::Parse {
                line: line_no,
                message: format!("invalid view id {:?}", obs[0]),
            })?;
            observations.push((vid, parse(obs[1])?, parse(obs[2])?));
        }
        points.push(SparsePoint { position, observations });
    }
    Ok(SparseCorrespondences { points })
}

pub fn write_sparse(path: &Path, sparse: &SparseCorrespondences) -> Result<(), SpnError> {
    let mut out = String::new();
    for p in &sparse.points {
        write!(out, "{} {} {}", p.position.x, p.position.y, p.position.z).unwrap();
        for &(vid, px, py) in &p.observations {
            write!(out, "  {vid} {px} {py}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Result of [`spn_loss`]. `sparse_term` is `None` when the correspondence
/// set was empty, in which case only the dense image term is reported.
#[derive(Debug, Clone)]
pub struct SpnLoss {
    pub total: f64,
    pub image_term: f64,
    pub sparse_term: Option<f64>,
    pub per_view: Vec<f64>,
}

/// Dense + sparse consistency loss of filtered images against the originals.
///
/// Per view: the mean squared image residual, plus the mean squared colour
/// residual between the reference image at each sparse point's reference
/// pixel and the filtered view sampled at that point's projection. The
/// reference view is the first in `originals`.
pub fn spn_loss(
    originals: &[View],
    filtered: &[Image],
    sparse: &SparseCorrespondences,
) -> Result<SpnLoss, SpnError> {
    if originals.is_empty() || originals.len() != filtered.len() {
        return Err(SpnError::ViewCountMismatch(originals.len(), filtered.len()));
    }
    for (i, (v, f)) in originals.iter().zip(filtered).enumerate() {
        if !v.image.same_shape(f) {
            return Err(SpnError::ImageShapeMismatch(i));
        }
    }
    let reference = &originals[0];
    let channels = reference.image.channels();

    // Reference colours at each sparse point's reference-view observation.
    let ref_samples: Vec<Option<(Vector3<f64>, Vec<f64>)>> = sparse
        .points
        .iter()
        .map(|p| {
            let (_, px, py) = *p
                .observations
                .iter()
                .find(|(vid, _, _)| *vid == reference.id)?;
            let mut color = vec![0.0; channels];
            reference.image.sample_bilinear(px, py, &mut color).then_some((p.position, color))
        })
        .collect();

    let mut per_view = Vec::with_capacity(originals.len());
    let mut image_terms = Vec::with_capacity(originals.len());
    let mut sparse_terms = Vec::with_capacity(originals.len());
    for (view, filt) in originals.iter().zip(filtered) {
        let n_px = (view.width() * view.height()) as f64;
        let diffs: Vec<f64> = view
            .image
            .data()
            .iter()
            .zip(filt.data())
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        let image_term = pairwise_sum(&diffs) / n_px;

        let mut sparse_acc = Vec::new();
        let mut sample = vec![0.0; channels];
        for entry in ref_samples.iter().flatten() {
            let (position, ref_color) = entry;
            let cam = view.extrinsics.world_to_camera(*position);
            if cam.z <= 0.0 {
                continue;
            }
            let proj = view.intrinsics.project(cam);
            if !filt.sample_bilinear(proj.x, proj.y, &mut sample) {
                continue;
            }
            let d2: f64 =
                ref_color.iter().zip(&sample).map(|(a, b)| (a - b) * (a - b)).sum();
            sparse_acc.push(d2);
        }
        let sparse_term = if sparse_acc.is_empty() {
            0.0
        } else {
            pairwise_sum(&sparse_acc) / sparse_acc.len() as f64
        };

        image_terms.push(image_term);
        sparse_terms.push(sparse_term);
        per_view.push(image_term + if sparse.is_empty() { 0.0 } else { sparse_term });
    }
    let n = originals.len() as f64;
    let image_term = pairwise_sum(&image_terms) / n;
    let sparse_term =
        if sparse.is_empty() { None } else { Some(pairwise_sum(&sparse_terms) / n) };
    let total = image_term + sparse_term.unwrap_or(0.0);
    Ok(SpnLoss { total, image_term, sparse_term, per_view })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extrinsics, Intrinsics};
    use approx::assert_relative_eq;

    fn guide_view(img: Image) -> View {
        let (cx, cy) = ((img.width() - 1) as f64 / 2.0, (img.height() - 1) as f64 / 2.0);
        View::new(img, Intrinsics::new(20.0, 20.0, cx, cy).unwrap(), Extrinsics::identity(), 0)
            .unwrap()
    }

    #[test]
    fn constant_guide_gives_uniform_thirds() {
        let guide = guide_view(Image::from_fn(6, 6, 1, |_, _, _| 0.5));
        let aff = guidance_affinity(&guide, 10.0).unwrap();
        // Interior pixel, all three neighbours present.
        for dir in ALL_DIRECTIONS {
            for i in 0..3 {
                assert_relative_eq!(
                    aff.weight(3, 3, dir, i),
                    STABILITY_BUDGET / 3.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn stability_sum_holds_on_smooth_guides() {
        // On a gently varying guide the raw similarity mass is ample, so
        // every pixel with neighbours normalizes to the exact budget.
        let guide = guide_view(Image::from_fn(9, 7, 3, |x, y, c| {
            0.4 + 0.02 * ((x + 2 * y + c) % 5) as f64
        }));
        let aff = guidance_affinity(&guide, 25.0).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                for dir in ALL_DIRECTIONS {
                    let has_neighbors =
                        dir.neighbors(x, y, 9, 7).iter().any(|n| n.is_some());
                    let sum = aff.stability_sum(x, y, dir);
                    if has_neighbors {
                        assert!(
                            (sum - STABILITY_BUDGET).abs() < 1e-6,
                            "sum {sum} at ({x},{y})"
                        );
                    } else {
                        assert_eq!(sum, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn stability_sum_never_exceeds_budget() {
        let guide = guide_view(Image::from_fn(9, 7, 1, |x, y, _| {
            if (x / 2 + y / 2) % 2 == 0 { 0.05 } else { 0.95 }
        }));
        let aff = guidance_affinity(&guide, 80.0).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                for dir in ALL_DIRECTIONS {
                    assert!(aff.stability_sum(x, y, dir) <= STABILITY_BUDGET + 1e-12);
                }
            }
        }
    }

    #[test]
    fn edges_suppress_across_edge_weights() {
        // Hard vertical edge between x=3 and x=4.
        let guide = guide_view(Image::from_fn(8, 8, 1, |x, _, _| if x < 4 { 0.1 } else { 0.9 }));
        let aff = guidance_affinity(&guide, 30.0).unwrap();
        // Top-bottom sweep next to the edge: the straight-up neighbour (same
        // side) gets more weight than the diagonal one reaching across.
        let same_side = aff.weight(3, 4, SweepDirection::TopBottom, 1);
        let diagonal_across = aff.weight(3, 4, SweepDirection::TopBottom, 2);
        assert!(diagonal_across < same_side, "{diagonal_across} vs {same_side}");

        // Horizontal edge between y=3 and y=4 probes the left-right sweep.
        let guide = guide_view(Image::from_fn(8, 8, 1, |_, y, _| if y < 4 { 0.1 } else { 0.9 }));
        let aff = guidance_affinity(&guide, 30.0).unwrap();
        let across = aff.weight(4, 4, SweepDirection::LeftRight, 0); // (3, 3)
        let along = aff.weight(4, 4, SweepDirection::LeftRight, 1); // (3, 4)
        assert!(across < along, "{across} vs {along}");
    }

    #[test]
    fn zero_weights_mean_identity() {
        let img = Image::from_fn(7, 5, 2, |x, y, c| ((x + y + c) % 4) as f64 / 3.0);
        let aff = AffinityField { width: 7, height: 5, weights: vec![0.0; 7 * 5 * 12] };
        let out = propagate(&img, &aff).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_is_a_fixed_point() {
        let img = Image::from_fn(9, 9, 1, |_, _, _| 0.37);
        let guide = guide_view(Image::from_fn(9, 9, 1, |x, y, _| ((x ^ y) % 3) as f64 / 2.0));
        let aff = guidance_affinity(&guide, 8.0).unwrap();
        let out = propagate(&img, &aff).unwrap();
        for v in out.data() {
            assert_relative_eq!(*v, 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_stays_in_input_range() {
        let img = Image::from_fn(16, 16, 1, |x, y, _| ((x * 31 + y * 17) % 13) as f64 / 12.0);
        let guide = guide_view(Image::from_fn(16, 16, 1, |x, _, _| (x % 2) as f64));
        let aff = guidance_affinity(&guide, 5.0).unwrap();
        let out = propagate(&img, &aff).unwrap();
        let (lo, hi) = img.channel_range()[0];
        for &v in out.data() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn salt_noise_is_reduced_by_guided_filtering() {
        // Flat regions separated by an edge, plus salt noise; the guide is
        // the clean image.
        let clean = Image::from_fn(24, 24, 1, |x, _, _| if x < 12 { 0.2 } else { 0.8 });
        let mut noisy = clean.clone();
        for i in 0..24 {
            let (x, y) = ((i * 7) % 24, (i * 11) % 24);
            noisy.set(x, y, 0, if i % 2 == 0 { 1.0 } else { 0.0 });
        }
        let guide = guide_view(clean.clone());
        let filtered = guided_filter(&noisy, &guide, 40.0).unwrap();
        let mad = |img: &Image| -> f64 {
            img.data()
                .iter()
                .zip(clean.data())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / img.data().len() as f64
        };
        assert!(mad(&filtered) < mad(&noisy), "{} vs {}", mad(&filtered), mad(&noisy));
    }

    #[test]
    fn zero_strength_smooths_edges() {
        // Uniform weights blur across the edge: gradient energy drops.
        let img = Image::from_fn(16, 16, 1, |x, _, _| if x < 8 { 0.0 } else { 1.0 });
        let guide = guide_view(img.clone());
        let smoothed = guided_filter(&img, &guide, 0.0).unwrap();
        let energy = |i: &Image| i.gradient_magnitude().data().iter().sum::<f64>();
        assert!(energy(&smoothed) < energy(&img));
    }

    #[test]
    fn self_consistent_input_barely_changes() {
        // Piecewise-constant input: flat regions are fixed points of the
        // recurrence and strong guidance keeps the sweeps from crossing the
        // edges, so filtering its own guide is almost the identity.
        let img = Image::from_fn(20, 20, 1, |x, y, _| {
            if x < 7 {
                0.15
            } else if y < 10 {
                0.55
            } else {
                0.9
            }
        });
        let guide = guide_view(img.clone());
        let out = guided_filter(&img, &guide, 120.0).unwrap();
        let max_dev = out
            .data()
            .iter()
            .zip(img.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn spn_loss_zero_on_perfect_input() {
        let view = guide_view(Image::from_fn(8, 8, 1, |x, y, _| ((x + y) % 3) as f64 / 2.0));
        let filtered = vec![view.image.clone()];
        let sparse = SparseCorrespondences {
            points: vec![SparsePoint {
                position: Vector3::new(0.0, 0.0, 2.0),
                observations: vec![(0, 3.5, 3.5)],
            }],
        };
        let loss = spn_loss(&[view], &filtered, &sparse).unwrap();
        assert_eq!(loss.total, 0.0);
        assert_eq!(loss.sparse_term, Some(0.0));
    }

    #[test]
    fn spn_loss_constant_offset() {
        let img = Image::from_fn(8, 8, 1, |_, _, _| 0.4);
        let view = guide_view(img.clone());
        let shifted = img.map(|v| v + 0.1);
        let sparse = SparseCorrespondences {
            points: vec![SparsePoint {
                position: Vector3::new(0.0, 0.0, 2.0),
                observations: vec![(0, 3.5, 3.5)],
            }],
        };
        let loss = spn_loss(&[view], &[shifted], &sparse).unwrap();
        assert_relative_eq!(loss.image_term, 0.01, epsilon = 1e-12);
        assert_relative_eq!(loss.sparse_term.unwrap(), 0.01, epsilon = 1e-12);
        assert_relative_eq!(loss.total, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn empty_sparse_set_omits_term() {
        let view = guide_view(Image::from_fn(4, 4, 1, |_, _, _| 0.5));
        let loss = spn_loss(
            std::slice::from_ref(&view),
            std::slice::from_ref(&view.image),
            &SparseCorrespondences::default(),
        )
        .unwrap();
        assert_eq!(loss.sparse_term, None);
        assert_eq!(loss.total, 0.0);
    }

    #[test]
    fn sparse_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sparse.txt");
        let sparse = SparseCorrespondences {
            points: vec![
                SparsePoint {
                    position: Vector3::new(0.5, -1.25, 3.0),
                    observations: vec![(0, 10.5, 20.25), (2, 11.0, 19.75)],
                },
                SparsePoint {
                    position: Vector3::new(-2.0, 0.0, 4.5),
                    observations: vec![(1, 3.0, 4.0)],
                },
            ],
        };
        write_sparse(&path, &sparse).unwrap();
        let back = read_sparse(&path).unwrap();
        assert_eq!(back, sparse);
    }

    #[test]
    fn sparse_parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "1 2 3 0 1.0 2.0\n1 2\n").unwrap();
        match read_sparse(&path) {
            Err(SpnError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
