//! The four training-loss terms and their weighted combination, plus the
//! photometric augmentation used by consistency regularization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{DepthMap, GeometryError, View};
use crate::raster::{pairwise_sum, Border};
use crate::sweep::ProbabilityVolume;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("depth maps differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("ground truth has no valid pixels, nothing to supervise")]
    NoSupervision,
    #[error("probability volumes differ in shape")]
    VolumeShapeMismatch,
    #[error("augmentation ranges must be non-empty and well-formed: {0}")]
    BadAugmentation(String),
    #[error("loss components must be non-negative, got {0}")]
    NegativeComponent(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Probability floor applied inside the KL logarithm. Without it a
/// zero-probability slice in the second argument makes the divergence
/// infinite.
pub const KL_PROB_FLOOR: f64 = 1e-8;

/// Default loss weights: `overall = sup + photo + LAMBDA1 * consis +
/// LAMBDA2 * style`.
pub const LAMBDA1: f64 = 0.1;
pub const LAMBDA2: f64 = 1.0;

/// Mean squared depth error over pixels with valid (positive) ground truth.
pub fn supervised_loss(pred: &DepthMap, gt: &DepthMap) -> Result<f64, LossError> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(LossError::DimensionMismatch(
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let mut acc = 0.0;
    let mut valid = 0usize;
    for (p, g) in pred.data().iter().zip(gt.data()) {
        if *g > 0.0 {
            let d = p - g;
            acc += d * d;
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(LossError::NoSupervision);
    }
    Ok(acc / valid as f64)
}

/// Depth supervision of a style-transferred sample against the labelled
/// ground truth. Identical contract to [`supervised_loss`]; the distinction
/// is which prediction is being scored.
pub fn style_consistency_loss(
    pred_on_generated: &DepthMap,
    gt_of_labeled: &DepthMap,
) -> Result<f64, LossError> {
    supervised_loss(pred_on_generated, gt_of_labeled)
}

#[inline]
fn kl_pixel(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            acc += pi * (pi.max(KL_PROB_FLOOR) / qi.max(KL_PROB_FLOOR)).ln();
        }
    }
    // True KL is non-negative; tiny negatives are floor/rounding artifacts.
    acc.max(0.0)
}

/// Mean forward KL divergence `KL(pv || pv_aug)` over all pixels, in nats.
///
/// Probabilities are floored at [`KL_PROB_FLOOR`] inside the logarithm, so
/// disjoint one-hot distributions give the finite value `ln(1/floor)`.
pub fn kl_consistency_loss(
    pv: &ProbabilityVolume,
    pv_aug: &ProbabilityVolume,
) -> Result<f64, LossError> {
    kl_reduce(pv, pv_aug, kl_pixel)
}

/// Symmetrized variant `(KL(p||q) + KL(q||p)) / 2`, exposed for experiments;
/// the consistency objective as published is the forward direction.
pub fn symmetric_kl_consistency_loss(
    pv: &ProbabilityVolume,
    pv_aug: &ProbabilityVolume,
) -> Result<f64, LossError> {
    kl_reduce(pv, pv_aug, |p, q| 0.5 * (kl_pixel(p, q) + kl_pixel(q, p)))
}

fn kl_reduce(
    pv: &ProbabilityVolume,
    pv_aug: &ProbabilityVolume,
    per_pixel: impl Fn(&[f64], &[f64]) -> f64 + Sync,
) -> Result<f64, LossError> {
    if pv.width() != pv_aug.width()
        || pv.height() != pv_aug.height()
        || pv.num_hypotheses() != pv_aug.num_hypotheses()
    {
        return Err(LossError::VolumeShapeMismatch);
    }
    let k = pv.num_hypotheses();
    let pixels: Vec<f64> = pv
        .data()
        .par_chunks_exact(k)
        .zip(pv_aug.data().par_chunks_exact(k))
        .map(|(p, q)| per_pixel(p, q))
        .collect();
    Ok(pairwise_sum(&pixels) / pixels.len() as f64)
}

/// Photometric perturbation ranges for the augmented branch of consistency
/// regularization. Geometry is never touched: the clean and augmented sample
/// must share camera parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSpec {
    /// Additive brightness offset range; identity is `(0, 0)`.
    pub brightness: (f64, f64),
    /// Contrast scale range about 0.5; identity is `(1, 1)`.
    pub contrast: (f64, f64),
    /// Gamma exponent range; identity is `(1, 1)`.
    pub gamma: (f64, f64),
    /// Gaussian blur sigma range in pixels; identity is `(0, 0)`.
    pub blur_sigma: (f64, f64),
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn identity(seed: u64) -> Self {
        Self { brightness: (0.0, 0.0), contrast: (1.0, 1.0), gamma: (1.0, 1.0), blur_sigma: (0.0, 0.0), seed }
    }

    /// A mild default: the kind of jitter used for consistency training.
    pub fn mild(seed: u64) -> Self {
        Self {
            brightness: (-0.08, 0.08),
            contrast: (0.85, 1.15),
            gamma: (0.8, 1.25),
            blur_sigma: (0.0, 1.0),
            seed,
        }
    }

    fn validate(&self) -> Result<(), LossError> {
        let ranges = [
            ("brightness", self.brightness),
            ("contrast", self.contrast),
            ("gamma", self.gamma),
            ("blur_sigma", self.blur_sigma),
        ];
        for (name, (lo, hi)) in ranges {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(LossError::BadAugmentation(format!("{name} range ({lo}, {hi})")));
            }
        }
        if self.gamma.0 <= 0.0 {
            return Err(LossError::BadAugmentation("gamma must stay positive".into()));
        }
        if self.blur_sigma.0 < 0.0 {
            return Err(LossError::BadAugmentation("blur sigma must be >= 0".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Photometric-only augmentation: contrast about 0.5, brightness offset,
/// gamma correction, Gaussian blur, with pixels clamped to `[0, 1]`.
///
/// Deterministic for a given seed. Camera parameters and image dimensions are
/// carried over unchanged, and identity ranges reproduce the input exactly.
pub fn augment(view: &View, spec: &AugmentationSpec) -> Result<View, LossError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let brightness = draw(&mut rng, spec.brightness);
    let contrast = draw(&mut rng, spec.contrast);
    let gamma = draw(&mut rng, spec.gamma);
    let sigma = draw(&mut rng, spec.blur_sigma);

    let mut img = view.image.clone();
    if contrast != 1.0 || brightness != 0.0 {
        img = img.map(|v| ((v - 0.5) * contrast + 0.5 + brightness).clamp(0.0, 1.0));
    }
    if gamma != 1.0 {
        img = img.map(|v| v.powf(gamma));
    }
    if sigma > 0.0 {
        img = img.gaussian_blur(sigma, Border::Clamp).clamp01();
    }
    Ok(view.with_image(img)?)
}

/// All loss terms of one training step and their weighted combination.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub sup: f64,
    pub photo: f64,
    pub consis: f64,
    pub style: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub overall: f64,
}

/// Weighted sum `sup + photo + lambda1 * consis + lambda2 * style`.
pub fn overall_loss(
    sup: f64,
    photo: f64,
    consis: f64,
    style: f64,
    lambda1: f64,
    lambda2: f64,
) -> Result<LossReport, LossError> {
    for v in [sup, photo, consis, style] {
        if !(v >= 0.0) {
            return Err(LossError::NegativeComponent(v));
        }
    }
    let overall = sup + photo + lambda1 * consis + lambda2 * style;
    Ok(LossReport { sup, photo, consis, style, lambda1, lambda2, overall })
}
