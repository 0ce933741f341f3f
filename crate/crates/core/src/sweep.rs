//! Classical plane-sweep stereo: cost volume, probability volume and
//! soft-argmin depth regression.
//!
//! Matching works on raw intensity patches, so the whole depth pipeline runs
//! without any learned components. Costs are "lower is better"; invalid
//! warps receive the maximum cost of the configured metric so probability
//! mass is pushed away from them without infinities.

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{warp_image, DepthMap, GeometryError, View};
use crate::raster::Image;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("need at least 2 strictly increasing positive depth hypotheses")]
    BadHypotheses,
    #[error("window must be an odd integer >= 1, got {0}")]
    BadWindow(usize),
    #[error("at least one source view is required")]
    NoSourceViews,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("volume has K={0} slices but {1} hypotheses were given")]
    HypothesisCountMismatch(usize, usize),
    #[error("volume shapes differ: {0}x{1}x{2} vs {3}x{4}x{5}")]
    ShapeMismatch(usize, usize, usize, usize, usize, usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Strictly increasing positive depth hypotheses, K >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthHypotheses {
    values: Vec<f64>,
}

impl DepthHypotheses {
    pub fn new(values: Vec<f64>) -> Result<Self, SweepError> {
        if values.len() < 2
            || values.iter().any(|&v| !v.is_finite() || v <= 0.0)
            || values.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(SweepError::BadHypotheses);
        }
        Ok(Self { values })
    }

    /// K evenly spaced hypotheses covering `[min, max]`.
    pub fn linear(min: f64, max: f64, k: usize) -> Result<Self, SweepError> {
        if k < 2 || !(min > 0.0) || !(max > min) {
            return Err(SweepError::BadHypotheses);
        }
        let step = (max - min) / (k - 1) as f64;
        Self::new((0..k).map(|i| min + step * i as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Mean spacing between consecutive hypotheses.
    pub fn mean_spacing(&self) -> f64 {
        (self.max() - self.min()) / (self.len() - 1) as f64
    }
}

/// Patch matching metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// Windowed sum of squared differences, scaled to the full window area.
    Ssd,
    /// One minus normalized cross-correlation of window intensities.
    Ncc,
}

/// H x W x K matching costs, lower = better.
#[derive(Debug, Clone)]
pub struct CostVolume {
    width: usize,
    height: usize,
    k: usize,
    data: Vec<f64>,
    invalid_cost: f64,
}

impl CostVolume {
    /// Build a volume from raw matching costs (finite, lower = better).
    pub fn from_vec(
        width: usize,
        height: usize,
        k: usize,
        data: Vec<f64>,
        invalid_cost: f64,
    ) -> Result<Self, SweepError> {
        if k < 1 || data.len() != width * height * k {
            return Err(SweepError::ShapeMismatch(width, height, k, 0, 0, data.len()));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(SweepError::BadHypotheses);
        }
        Ok(Self { width, height, k, data, invalid_cost })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(y * self.width + x) * self.k + k]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_hypotheses(&self) -> usize {
        self.k
    }

    /// The cost assigned to invalid warps (the metric's maximum).
    pub fn invalid_cost(&self) -> f64 {
        self.invalid_cost
    }
}

/// H x W x K per-pixel distributions over depth hypotheses.
#[derive(Debug, Clone)]
pub struct ProbabilityVolume {
    width: usize,
    height: usize,
    k: usize,
    data: Vec<f64>,
}

impl ProbabilityVolume {
    /// Validated constructor: entries in [0,1], per-pixel sums within 1e-5 of 1.
    pub fn from_vec(
        width: usize,
        height: usize,
        k: usize,
        data: Vec<f64>,
    ) -> Result<Self, SweepError> {
        if data.len() != width * height * k || k < 1 {
            return Err(SweepError::ShapeMismatch(width, height, k, 0, 0, data.len()));
        }
        for px in data.chunks_exact(k) {
            let sum: f64 = px.iter().sum();
            if px.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-5 {
                return Err(SweepError::BadHypotheses);
            }
        }
        Ok(Self { width, height, k, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(y * self.width + x) * self.k + k]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.k;
        &self.data[i..i + self.k]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_hypotheses(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Per-pixel maximum probability, a cheap confidence signal.
    pub fn max_prob_map(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.k)
            .map(|px| px.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Per-slice squared colour error against the reference, with invalid warps
/// replaced by the per-position maximum `channels * 1.0`.
fn per_pixel_error(reference: &View, warped: &Image, mask: &crate::geometry::ValidityMask) -> Vec<f64> {
    let (w, h) = (reference.width(), reference.height());
    let channels = reference.image.channels();
    let mut err = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            err[y * w + x] = if mask.get(x, y) {
                let mut acc = 0.0;
                for c in 0..channels {
                    let d = warped.get(x, y, c) - reference.image.get(x, y, c);
                    acc += d * d;
                }
                acc
            } else {
                channels as f64
            };
        }
    }
    err
}

/// Mean intensity per pixel (channels averaged); `None` where the warp was
/// invalid.
fn intensity_map(img: &Image, mask: Option<&crate::geometry::ValidityMask>) -> Vec<Option<f64>> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            if mask.map_or(true, |m| m.get(x, y)) {
                let px = img.pixel(x, y);
                out[y * w + x] = Some(px.iter().sum::<f64>() / c as f64);
            }
        }
    }
    out
}

const NCC_VARIANCE_FLOOR: f64 = 1e-6;
const NCC_INVALID_COST: f64 = 2.0;

/// Build a plane-sweep cost volume against one or more source views.
///
/// For every hypothesis the source images are warped onto the reference at
/// that constant depth; the cost at `(p, k)` is the windowed SSD (or
/// `1 - NCC`) between the reference patch and the warped source patch,
/// averaged over sources. Windows are clipped at the image border and SSD is
/// rescaled to the full window area so border costs stay comparable.
pub fn build_cost_volume(
    reference: &View,
    sources: &[View],
    hyps: &DepthHypotheses,
    cost_kind: CostKind,
    window: usize,
) -> Result<CostVolume, SweepError> {
    if sources.is_empty() {
        return Err(SweepError::NoSourceViews);
    }
    if window == 0 || window % 2 == 0 {
        return Err(SweepError::BadWindow(window));
    }
    let (w, h) = (reference.width(), reference.height());
    let channels = reference.image.channels();
    let invalid_cost = match cost_kind {
        CostKind::Ssd => (window * window * channels) as f64,
        CostKind::Ncc => NCC_INVALID_COST,
    };
    let radius = (window / 2) as isize;
    let area = (window * window) as f64;
    let ref_intensity = intensity_map(&reference.image, None);

    // One slice per hypothesis, computed independently.
    let slices: Vec<Vec<f64>> = hyps
        .values()
        .par_iter()
        .map(|&depth| {
            let mut slice = vec![0.0; w * h];
            let depth_map = DepthMap::constant(w, h, depth).expect("positive hypothesis");
            for src in sources {
                let (warped, mask) = warp_image(src, reference, &depth_map)
                    .expect("dimensions validated by caller");
                match cost_kind {
                    CostKind::Ssd => {
                        let err = per_pixel_error(reference, &warped, &mask);
                        // Summed-area table makes each clipped window sum O(1).
                        let stride = w + 1;
                        let mut integral = vec![0.0f64; (w + 1) * (h + 1)];
                        for y in 0..h {
                            for x in 0..w {
                                integral[(y + 1) * stride + (x + 1)] = err[y * w + x]
                                    + integral[y * stride + (x + 1)]
                                    + integral[(y + 1) * stride + x]
                                    - integral[y * stride + x];
                            }
                        }
                        for y in 0..h as isize {
                            let y0 = (y - radius).max(0) as usize;
                            let y1 = (y + radius).min(h as isize - 1) as usize;
                            for x in 0..w as isize {
                                let center = (y as usize) * w + x as usize;
                                let cost = if !mask.get(x as usize, y as usize) {
                                    invalid_cost
                                } else {
                                    let x0 = (x - radius).max(0) as usize;
                                    let x1 = (x + radius).min(w as isize - 1) as usize;
                                    let acc = integral[(y1 + 1) * stride + (x1 + 1)]
                                        - integral[y0 * stride + (x1 + 1)]
                                        - integral[(y1 + 1) * stride + x0]
                                        + integral[y0 * stride + x0];
                                    let n = ((y1 + 1 - y0) * (x1 + 1 - x0)) as f64;
                                    acc.max(0.0) * area / n
                                };
                                slice[center] += cost;
                            }
                        }
                    }
                    CostKind::Ncc => {
                        let warped_intensity = intensity_map(&warped, Some(&mask));
                        for y in 0..h as isize {
                            for x in 0..w as isize {
                                let center = (y as usize) * w + x as usize;
                                slice[center] += ncc_cost(
                                    &ref_intensity,
                                    &warped_intensity,
                                    w,
                                    h,
                                    x,
                                    y,
                                    radius,
                                );
                            }
                        }
                    }
                }
            }
            let inv = 1.0 / sources.len() as f64;
            for c in &mut slice {
                *c *= inv;
            }
            slice
        })
        .collect();

    let mut data = vec![0.0; w * h * hyps.len()];
    for (k, slice) in slices.iter().enumerate() {
        for (i, &c) in slice.iter().enumerate() {
            data[i * hyps.len() + k] = c;
        }
    }
    Ok(CostVolume { width: w, height: h, k: hyps.len(), data, invalid_cost })
}

fn ncc_cost(
    reference: &[Option<f64>],
    warped: &[Option<f64>],
    w: usize,
    h: usize,
    x: isize,
    y: isize,
    radius: isize,
) -> f64 {
    if warped[(y as usize) * w + x as usize].is_none() {
        return NCC_INVALID_COST;
    }
    let mut n = 0usize;
    let (mut sr, mut ss, mut srr, mut sss, mut srs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (sx, sy) = (x + dx, y + dy);
            if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                continue;
            }
            let i = (sy as usize) * w + sx as usize;
            let (Some(r), Some(s)) = (reference[i], warped[i]) else { continue };
            n += 1;
            sr += r;
            ss += s;
            srr += r * r;
            sss += s * s;
            srs += r * s;
        }
    }
    if n < 2 {
        return NCC_INVALID_COST;
    }
    let nf = n as f64;
    let var_r = srr / nf - (sr / nf) * (sr / nf);
    let var_s = sss / nf - (ss / nf) * (ss / nf);
    if var_r < NCC_VARIANCE_FLOOR || var_s < NCC_VARIANCE_FLOOR {
        return NCC_INVALID_COST;
    }
    let cov = srs / nf - (sr / nf) * (ss / nf);
    let ncc = (cov / (var_r * var_s).sqrt()).clamp(-1.0, 1.0);
    1.0 - ncc
}

/// Per-pixel softmax of `-cost / temperature`.
pub fn cost_to_probability(
    cv: &CostVolume,
    temperature: f64,
) -> Result<ProbabilityVolume, SweepError> {
    if !(temperature > 0.0) {
        return Err(SweepError::BadTemperature(temperature));
    }
    let k = cv.k;
    let mut data = vec![0.0; cv.data.len()];
    data.par_chunks_exact_mut(k).zip(cv.data.par_chunks_exact(k)).for_each(|(out, costs)| {
        let min = costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut sum = 0.0;
        for (o, &c) in out.iter_mut().zip(costs) {
            let e = (-(c - min) / temperature).exp();
            *o = e;
            sum += e;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    });
    Ok(ProbabilityVolume { width: cv.width, height: cv.height, k, data })
}

/// Expected depth under the probability volume: `sum_k p_k * hyps[k]`.
///
/// The output is a convex combination, hence always inside the hypothesis
/// range.
pub fn soft_argmin(pv: &ProbabilityVolume, hyps: &DepthHypotheses) -> Result<DepthMap, SweepError> {
    if pv.k != hyps.len() {
        return Err(SweepError::HypothesisCountMismatch(pv.k, hyps.len()));
    }
    let values = hyps.values();
    let data: Vec<f64> = pv
        .data
        .chunks_exact(pv.k)
        .map(|px| {
            let d: f64 = px.iter().zip(values).map(|(p, h)| p * h).sum();
            d.clamp(hyps.min(), hyps.max())
        })
        .collect();
    Ok(DepthMap::from_vec(pv.width, pv.height, data).expect("positive hypotheses"))
}

/// Full plane-sweep pipeline: cost volume, softmax, soft-argmin.
pub fn plane_sweep_depth(
    reference: &View,
    sources: &[View],
    hyps: &DepthHypotheses,
    cost_kind: CostKind,
    window: usize,
    temperature: f64,
) -> Result<(DepthMap, ProbabilityVolume), SweepError> {
    let cv = build_cost_volume(reference, sources, hyps, cost_kind, window)?;
    let pv = cost_to_probability(&cv, temperature)?;
    let depth = soft_argmin(&pv, hyps)?;
    Ok((depth, pv))
}
