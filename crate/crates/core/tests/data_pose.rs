//! Heatmap rendering against a brute-force oracle, pair sampling and the synthetic generator.

mod common;

use common::brute_force_heatmap;
use poseswap_core::data::{generate_synthetic, pair_in_clip, PairSampler, SamplerConfig, Split, SyntheticConfig};
use poseswap_core::pose::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pose_strategy(lo: f64, hi: f64) -> impl Strategy<Value = PoseVector> {
    prop::collection::vec((lo..hi, lo..hi), NUM_KEYPOINTS).prop_map(|kp| {
        let mut a = [[0.0; 2]; NUM_KEYPOINTS];
        for (d, (x, y)) in a.iter_mut().zip(kp) {
            *d = [x, y];
        }
        PoseVector::new(a).unwrap()
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn heatmap_matches_the_brute_force_density(pose in pose_strategy(-1.2, 1.2), res in prop::sample::select(vec![16usize, 32, 64])) {
        let cfg = HeatmapConfig::for_resolution(res);
        let fast = render_heatmap(&pose, &cfg);
        for (a, b) in fast.values.iter().zip(brute_force_heatmap(&pose, &cfg)) {
            prop_assert!(rel_err(*a, b) <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn heatmap_decodes_to_the_nearest_grid_point(pose in pose_strategy(-1.0, 1.0)) {
        let cfg = HeatmapConfig::for_resolution(64);
        let back = decode_heatmap(&render_heatmap(&pose, &cfg), &cfg).unwrap();
        let [px, py] = cfg.pixel_pitch();
        for (a, b) in pose.keypoints().iter().zip(back.keypoints()) {
            prop_assert!((a[0] - b[0]).abs() <= px / 2.0 + 1e-12);
            prop_assert!((a[1] - b[1]).abs() <= py / 2.0 + 1e-12);
        }
    }

    #[test]
    fn keypoint_normalization_round_trips(x in 0.0f64..159.0, y in 0.0f64..119.0) {
        prop_assert!((denormalize(normalize(x, 160), 160) - x).abs() < 1e-9);
        prop_assert!((denormalize(normalize(y, 120), 120) - y).abs() < 1e-9);
    }

    #[test]
    fn pairs_stay_in_range_with_nonzero_offsets(seed in 0u64..10_000, len in 2usize..40, window in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let p = pair_in_clip(&mut rng, 0, len, window);
            prop_assert!(p.k != 0);
            prop_assert!(p.k.unsigned_abs() <= window);
            prop_assert!(p.t < len);
            prop_assert!(p.offset().t < len);
        }
    }
}

#[test]
fn heatmap_of_a_missing_pose_is_zero() {
    let cfg = HeatmapConfig::for_resolution(32);
    assert!(render_heatmap(&missing_pose(), &cfg).values.iter().all(|&v| v == 0.0));
    assert_eq!(decode_heatmap(&render_heatmap(&missing_pose(), &cfg), &cfg).unwrap(), missing_pose());
}

#[test]
fn every_offset_in_the_window_is_drawn() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..2000 {
        seen.insert(pair_in_clip(&mut rng, 0, 10, 3).k);
    }
    assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![-3, -2, -1, 1, 2, 3]);
}

#[test]
fn restored_sampler_continues_the_stream() {
    let (clips, _) = common::small_synthetic(5, 6, 32);
    let cfg = SamplerConfig { window: 2, seed: 9 };
    let mut a = PairSampler::new(cfg);
    for _ in 0..7 {
        a.sample_pair(&clips).unwrap();
    }
    let mut b = PairSampler::restore(2, a.state());
    for _ in 0..20 {
        assert_eq!(a.sample_pair(&clips).unwrap(), b.sample_pair(&clips).unwrap());
        assert_eq!(a.sample_negative_pair(&clips).unwrap(), b.sample_negative_pair(&clips).unwrap());
    }
}

#[test]
fn negatives_come_from_another_video() {
    let (clips, _) = common::small_synthetic(4, 6, 32);
    let mut s = PairSampler::new(SamplerConfig::default());
    for _ in 0..200 {
        let (pair, neg) = s.sample_negative_pair(&clips).unwrap();
        assert_ne!(pair.clip, neg.clip);
    }
    assert!(s.sample_negative_pair(&clips[..1]).is_err());
}

#[test]
fn worker_samplers_are_independent() {
    let (clips, _) = common::small_synthetic(6, 6, 32);
    let cfg = SamplerConfig::default();
    let draw = |i| {
        let mut s = PairSampler::for_worker(cfg, i);
        (0..10).map(|_| s.sample_pair(&clips).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(1), draw(1));
    assert_ne!(draw(0), draw(1));
}

#[test]
fn default_synthetic_set_splits_by_subject() {
    let cfg = SyntheticConfig { frames_per_clip: 2, resolution: 32, ..Default::default() };
    let (clips, truth) = generate_synthetic(&cfg).unwrap();
    assert_eq!(clips.len(), 500);
    assert_eq!(Split::Train.select(&clips).len(), 320);
    assert_eq!(Split::Test.select(&clips).len(), 180);
    assert_eq!(truth.clips.len(), 500);
    // every palette color is used
    let used: std::collections::BTreeSet<usize> = truth.clips.iter().map(|c| c.palette_index).collect();
    assert_eq!(used.len(), truth.palette.len());
}

#[test]
fn synthetic_poses_stay_inside_the_frame() {
    let (clips, _) = generate_synthetic(&SyntheticConfig { n_clips: 40, ..Default::default() }).unwrap();
    for c in &clips {
        assert!(c.poses.iter().all(|p| p.visible() && p.in_bounds()), "{}", c.video_id);
    }
}
