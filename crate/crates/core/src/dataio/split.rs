//! Semi-supervised split generation: mark a fraction of the dataset as
//! labeled, either by whole scenes or by individual multi-view pairs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DataError;

/// How the labeled subset is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Whole scenes become labeled; scenes are never split.
    ByScenes,
    /// Individual multi-view pairs across all scenes (global pool).
    ByViews,
}

#[derive(Debug, Clone)]
pub struct SplitSpec {
    pub mode: SplitMode,
    /// Labeled fraction, in (0, 1].
    pub ratio: f64,
    pub seed: u64,
    /// For [`SplitMode::ByViews`]: draw per scene instead of globally.
    pub stratified: bool,
}

/// One multi-view pair, identified by its scene and reference index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SplitItem {
    pub scene: String,
    pub pair_index: usize,
}

fn labeled_count(total: usize, ratio: f64) -> usize {
    ((ratio * total as f64).ceil() as usize).min(total)
}

/// Partition all multi-view pairs of `scenes` (given as `(scene id, pair
/// count)`) into labeled and unlabeled sets. Deterministic per seed; the two
/// sets are disjoint and together cover every pair.
pub fn make_split(
    scenes: &[(String, usize)],
    spec: &SplitSpec,
) -> Result<(Vec<SplitItem>, Vec<SplitItem>), DataError> {
    if scenes.is_empty() || scenes.iter().all(|(_, n)| *n == 0) {
        return Err(DataError::EmptyInput);
    }
    if !(spec.ratio > 0.0 && spec.ratio <= 1.0) {
        return Err(DataError::BadRatio(spec.ratio));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    fn items(scene: &str, count: usize) -> Vec<SplitItem> {
        (0..count).map(|i| SplitItem { scene: scene.to_string(), pair_index: i }).collect()
    }

    let (mut labeled, mut unlabeled) = (Vec::new(), Vec::new());
    match spec.mode {
        SplitMode::ByScenes => {
            let mut order: Vec<usize> = (0..scenes.len()).collect();
            order.shuffle(&mut rng);
            let n_labeled = labeled_count(scenes.len(), spec.ratio);
            for (rank, &si) in order.iter().enumerate() {
                let (scene, count) = &scenes[si];
                let bucket = if rank < n_labeled { &mut labeled } else { &mut unlabeled };
                bucket.extend(items(scene, *count));
            }
        }
        SplitMode::ByViews if spec.stratified => {
            for (scene, count) in scenes {
                let mut order: Vec<usize> = (0..*count).collect();
                order.shuffle(&mut rng);
                let n_labeled = labeled_count(*count, spec.ratio);
                for (rank, &pi) in order.iter().enumerate() {
                    let item = SplitItem { scene: scene.clone(), pair_index: pi };
                    if rank < n_labeled {
                        labeled.push(item);
                    } else {
                        unlabeled.push(item);
                    }
                }
            }
        }
        SplitMode::ByViews => {
            let mut all: Vec<SplitItem> =
                scenes.iter().flat_map(|(scene, count)| items(scene, *count)).collect();
            all.shuffle(&mut rng);
            let n_labeled = labeled_count(all.len(), spec.ratio);
            for (rank, item) in all.into_iter().enumerate() {
                if rank < n_labeled {
                    labeled.push(item);
                } else {
                    unlabeled.push(item);
                }
            }
        }
    }
    if labeled.is_empty() {
        return Err(DataError::EmptySplit);
    }
    labeled.sort();
    unlabeled.sort();
    Ok((labeled, unlabeled))
}
