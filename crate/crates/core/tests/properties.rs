//! Property tests for the module invariants: normalization, convexity,
//! non-negativity, masking semantics, file-format round trips and split
//! partitioning on randomized inputs.

use nalgebra::Vector3;
use proptest::prelude::*;

use mvs_core::dataio::{
    make_split, read_camera, read_pair, read_pfm, write_camera, write_pair, write_pfm,
    CameraFile, PairEntry, SplitMode, SplitSpec,
};
use mvs_core::evaluation::{fscore, precision};
use mvs_core::fusion::{read_ply, write_ply};
use mvs_core::geometry::{DepthMap, Extrinsics, Intrinsics, View};
use mvs_core::losses::{augment, kl_consistency_loss, supervised_loss, AugmentationSpec};
use mvs_core::raster::Image;
use mvs_core::spn::{propagate, read_sparse, write_sparse, AffinityField, SparseCorrespondences, SparsePoint};
use mvs_core::style::{gram, FeatureMap};
use mvs_core::sweep::{cost_to_probability, soft_argmin, CostVolume, DepthHypotheses, ProbabilityVolume};
use mvs_core::PointCloud;

fn normalized_volume(w: usize, h: usize, k: usize) -> impl Strategy<Value = ProbabilityVolume> {
    // Entries bounded away from zero so floors never bite.
    prop::collection::vec(0.01..1.0f64, w * h * k).prop_map(move |raw| {
        let mut data = raw;
        for px in data.chunks_exact_mut(k) {
            let sum: f64 = px.iter().sum();
            for v in px {
                *v /= sum;
            }
        }
        ProbabilityVolume::from_vec(w, h, k, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probability_volume_normalized_after_softmax(
        costs in prop::collection::vec(0.0..50.0f64, 3 * 2 * 8),
        temperature in 0.05..5.0f64,
    ) {
        let cv = CostVolume::from_vec(3, 2, 8, costs, 50.0).unwrap();
        let pv = cost_to_probability(&cv, temperature).unwrap();
        for px in pv.data().chunks_exact(8) {
            let sum: f64 = px.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-5);
            prop_assert!(px.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn soft_argmin_stays_in_hypothesis_range(
        pv in normalized_volume(4, 3, 6),
        lo in 0.5..2.0f64,
        span in 0.5..10.0f64,
    ) {
        let hyps = DepthHypotheses::linear(lo, lo + span, 6).unwrap();
        let depth = soft_argmin(&pv, &hyps).unwrap();
        for &d in depth.data() {
            prop_assert!(d >= hyps.min() && d <= hyps.max());
        }
    }

    #[test]
    fn kl_non_negative_and_zero_on_self(
        p in normalized_volume(3, 3, 5),
        q in normalized_volume(3, 3, 5),
    ) {
        let kl = kl_consistency_loss(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_consistency_loss(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn supervised_loss_ignores_garbage_at_invalid_pixels(
        valid_flags in prop::collection::vec(any::<bool>(), 12),
        garbage in prop::collection::vec(0.0..500.0f64, 12),
    ) {
        prop_assume!(valid_flags.iter().any(|&f| f));
        let gt = DepthMap::from_vec(
            4, 3,
            valid_flags.iter().map(|&f| if f { 2.0 } else { 0.0 }).collect(),
        ).unwrap();
        let pred_a = DepthMap::from_vec(
            4, 3,
            valid_flags.iter().zip(&garbage).map(|(&f, &g)| if f { 3.0 } else { g }).collect(),
        ).unwrap();
        let pred_b = DepthMap::constant(4, 3, 3.0).unwrap();
        prop_assert_eq!(
            supervised_loss(&pred_a, &gt).unwrap(),
            supervised_loss(&pred_b, &gt).unwrap()
        );
    }

    #[test]
    fn augment_preserves_geometry(seed in any::<u64>()) {
        let img = Image::from_fn(8, 6, 3, |x, y, c| ((x * 3 + y * 7 + c) % 10) as f64 / 9.0);
        let view = View::new(
            img,
            Intrinsics::new(40.0, 41.0, 3.5, 2.5).unwrap(),
            Extrinsics::identity(),
            3,
        ).unwrap();
        let out = augment(&view, &AugmentationSpec::mild(seed)).unwrap();
        prop_assert_eq!(out.intrinsics, view.intrinsics);
        prop_assert_eq!(&out.extrinsics, &view.extrinsics);
        prop_assert_eq!(out.width(), view.width());
        prop_assert_eq!(out.height(), view.height());
        for &v in out.image.data() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn fscore_never_exceeds_twice_the_weaker_score(p in 0.0..100.0f64, r in 0.0..100.0f64) {
        let f = fscore(p, r).unwrap();
        prop_assert!(f <= 2.0 * p.min(r) + 1e-9);
        prop_assert!(f <= 100.0);
    }

    #[test]
    fn gram_position_permutation_invariant(
        data in prop::collection::vec(-2.0..2.0f64, 3 * 8),
        swap_a in 0usize..8,
        swap_b in 0usize..8,
    ) {
        let f = FeatureMap::new(nalgebra::DMatrix::from_vec(3, 8, data.clone()), 2, 4).unwrap();
        let mut permuted = nalgebra::DMatrix::from_vec(3, 8, data);
        permuted.swap_columns(swap_a, swap_b);
        let g1 = gram(&f);
        let g2 = gram(&FeatureMap::new(permuted, 2, 4).unwrap());
        prop_assert!(((g1 - g2).norm()) < 1e-9);
    }

    #[test]
    fn propagate_respects_input_range(
        pixels in prop::collection::vec(0.0..1.0f64, 6 * 5),
        raw_weights in prop::collection::vec(0.0..1.0f64, 6 * 5 * 12),
    ) {
        let img = Image::from_vec(6, 5, 1, pixels).unwrap();
        // Scale every neighbour triple into the stability budget.
        let mut weights = raw_weights;
        for triple in weights.chunks_exact_mut(3) {
            let sum: f64 = triple.iter().sum();
            if sum > 0.0 {
                let scale = 0.95 / sum.max(1.0);
                for w in triple {
                    *w *= scale;
                }
            }
        }
        let field = AffinityField::from_weights(6, 5, weights).unwrap();
        let out = propagate(&img, &field).unwrap();
        let (lo, hi) = img.channel_range()[0];
        for &v in out.data() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn split_is_always_a_partition(
        counts in prop::collection::vec(1usize..12, 1..8),
        ratio in 0.05..1.0f64,
        seed in any::<u64>(),
        mode_by_views in any::<bool>(),
    ) {
        let scenes: Vec<(String, usize)> =
            counts.iter().enumerate().map(|(i, &c)| (format!("s{i}"), c)).collect();
        let spec = SplitSpec {
            mode: if mode_by_views { SplitMode::ByViews } else { SplitMode::ByScenes },
            ratio,
            seed,
            stratified: false,
        };
        let (labeled, unlabeled) = make_split(&scenes, &spec).unwrap();
        let total: usize = counts.iter().sum();
        prop_assert_eq!(labeled.len() + unlabeled.len(), total);
        prop_assert!(!labeled.is_empty());
        let mut seen = std::collections::BTreeSet::new();
        for item in labeled.iter().chain(&unlabeled) {
            prop_assert!(seen.insert((item.scene.clone(), item.pair_index)));
        }
    }
}

// File-format round trips on randomized valid inputs.
proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn camera_round_trip(
        angle in -3.0..3.0f64,
        axis_pick in 0usize..3,
        tx in -10.0..10.0f64,
        ty in -10.0..10.0f64,
        tz in -10.0..10.0f64,
        fx in 1.0..2000.0f64,
        fy in 1.0..2000.0f64,
        cx in -100.0..1000.0f64,
        cy in -100.0..1000.0f64,
        dmin in 0.1..10.0f64,
        dstep in 0.001..1.0f64,
    ) {
        let axis = [Vector3::x_axis(), Vector3::y_axis(), Vector3::z_axis()][axis_pick];
        let rotation = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        let camera = CameraFile {
            extrinsics: Extrinsics::new(rotation.into_inner(), Vector3::new(tx, ty, tz)).unwrap(),
            intrinsics: Intrinsics::new(fx, fy, cx, cy).unwrap(),
            depth_min: dmin,
            depth_interval: dstep,
            depth_num: None,
            depth_max: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cam.txt");
        write_camera(&path, &camera).unwrap();
        let back = read_camera(&path).unwrap();
        prop_assert!((back.extrinsics.rotation - camera.extrinsics.rotation).norm() < 1e-6);
        prop_assert!((back.extrinsics.translation - camera.extrinsics.translation).norm() < 1e-6);
        prop_assert!((back.intrinsics.fx - fx).abs() < 1e-6);
        prop_assert!((back.depth_min - dmin).abs() < 1e-6);
    }

    #[test]
    fn pair_round_trip(entries in prop::collection::vec(
        (0usize..50, prop::collection::vec((0usize..50, 0.0..100.0f64), 0..6)),
        1..8,
    )) {
        let entries: Vec<PairEntry> = entries
            .into_iter()
            .enumerate()
            .map(|(i, (_, sources))| PairEntry {
                reference: i,
                sources: sources.into_iter().filter(|(id, _)| *id != i).collect(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.txt");
        write_pair(&path, &entries).unwrap();
        let back = read_pair(&path).unwrap();
        prop_assert_eq!(back.len(), entries.len());
        for (a, b) in back.iter().zip(&entries) {
            prop_assert_eq!(a.reference, b.reference);
            prop_assert_eq!(a.sources.len(), b.sources.len());
            for ((ia, sa), (ib, sb)) in a.sources.iter().zip(&b.sources) {
                prop_assert_eq!(ia, ib);
                prop_assert!((sa - sb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pfm_round_trip(values in prop::collection::vec(0.0f32..1000.0, 1..64), w in 1usize..8) {
        prop_assume!(values.len() % w == 0);
        let h = values.len() / w;
        prop_assume!(h >= 1);
        let depth = DepthMap::from_vec(w, h, values.iter().map(|&v| v as f64).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pfm");
        write_pfm(&path, &depth).unwrap();
        prop_assert_eq!(read_pfm(&path).unwrap(), depth);
    }

    #[test]
    fn ply_round_trip(points in prop::collection::vec((-100.0f32..100.0, -100.0f32..100.0, -100.0f32..100.0), 1..64)) {
        let positions: Vec<Vector3<f64>> =
            points.iter().map(|&(x, y, z)| Vector3::new(x as f64, y as f64, z as f64)).collect();
        let cloud = PointCloud::new(positions.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_ply(&path, &cloud).unwrap();
        let back = read_ply(&path).unwrap();
        prop_assert_eq!(back.positions(), positions.as_slice());
    }

    #[test]
    fn sparse_round_trip(points in prop::collection::vec(
        ((-10.0f64..10.0, -10.0f64..10.0, 0.1f64..10.0),
         prop::collection::vec((0usize..8, 0.0f64..100.0, 0.0f64..100.0), 1..4)),
        1..16,
    )) {
        let sparse = SparseCorrespondences {
            points: points
                .into_iter()
                .map(|((x, y, z), obs)| SparsePoint {
                    position: Vector3::new(x, y, z),
                    observations: obs,
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sparse.txt");
        write_sparse(&path, &sparse).unwrap();
        prop_assert_eq!(read_sparse(&path).unwrap(), sparse);
    }

    #[test]
    fn precision_recall_monotone_in_threshold(
        seed_a in 0u64..1000,
        seed_b in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed_a * 1000 + seed_b);
        let cloud = |rng: &mut rand_chacha::ChaCha8Rng| -> PointCloud {
            PointCloud::new(
                (0..40)
                    .map(|_| Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ))
                    .collect(),
            ).unwrap()
        };
        let a = cloud(&mut rng);
        let b = cloud(&mut rng);
        let mut last = 0.0;
        for i in 1..=10 {
            let p = precision(&a, &b, i as f64 * 0.2).unwrap();
            prop_assert!(p >= last);
            last = p;
        }
    }
}
