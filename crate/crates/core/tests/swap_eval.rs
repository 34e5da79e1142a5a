//! Evaluation, swapping, diagnostics and the swap grid.

mod common;

use common::small_synthetic;
use poseswap_core::data::{render_figure, Clip, FigurePose, Frame};
use poseswap_core::nets::{Models, NetConfig};
use poseswap_core::pose::{missing_pose, render_heatmap, HeatmapConfig, PoseVector};
use poseswap_core::swap_eval::*;
use poseswap_core::{Method, Result};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

/// Returns all-zero frames (mid-gray in `[-1, 1]`).
struct Zero(usize);

impl Renderer for Zero {
    fn name(&self) -> String {
        "zero".into()
    }

    fn resolution(&self) -> usize {
        self.0
    }

    fn render(&self, content: &[&Frame], _: &[&Frame], _: &[&PoseVector]) -> Result<Vec<Frame>> {
        Ok(content.iter().map(|_| Frame::filled(self.0, self.0, [0.0; 3])).collect())
    }
}

/// Returns the content frames unchanged.
struct Content(usize);

impl Renderer for Content {
    fn name(&self) -> String {
        "content".into()
    }

    fn resolution(&self) -> usize {
        self.0
    }

    fn render(&self, content: &[&Frame], _: &[&Frame], _: &[&PoseVector]) -> Result<Vec<Frame>> {
        Ok(content.iter().map(|&f| f.clone()).collect())
    }
}

fn oracle(res: usize) -> Reconstructor {
    Reconstructor::IdentityOracle { resolution: res }
}

#[test]
fn identity_oracle_scores_exactly_zero() {
    let (clips, _) = small_synthetic(5, 8, 32);
    for temporal_shift in [true, false] {
        let cfg = EvalConfig { temporal_shift, ..Default::default() };
        let r = evaluate_mse(&oracle(32), &clips, &cfg).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.n_pairs, 50);
        assert!(r.per_clip.values().all(|&v| v == 0.0));
        assert_eq!(r.method, "identity_oracle");
    }
}

#[test]
fn zero_output_scores_the_mean_square_of_the_targets() {
    let (clips, _) = small_synthetic(4, 8, 32);
    let cfg = EvalConfig::default();
    let r = evaluate_mse(&Zero(32), &clips, &cfg).unwrap();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, clip) in clips.iter().enumerate() {
        for p in eval_pairs(&cfg, i, clip) {
            let f = &clip.frames[p.t];
            sum += f.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / f.data.len() as f64;
            n += 1;
        }
    }
    assert!((r.mse - sum / n as f64).abs() < 1e-12);
}

#[test]
fn temporal_shift_uses_the_offset_frame_as_content() {
    let (clips, _) = small_synthetic(3, 8, 32);
    let shifted = evaluate_mse(&Content(32), &clips, &EvalConfig::default()).unwrap();
    let plain = evaluate_mse(&Content(32), &clips, &EvalConfig { temporal_shift: false, ..Default::default() }).unwrap();
    assert_eq!(plain.mse, 0.0);
    assert!(shifted.mse > 0.0);
}

#[test]
fn evaluation_is_independent_of_clip_order() {
    let (clips, _) = small_synthetic(6, 8, 32);
    let mut reversed = clips.clone();
    reversed.reverse();
    let cfg = EvalConfig::default();
    let a = evaluate_mse(&Content(32), &clips, &cfg).unwrap();
    let b = evaluate_mse(&Content(32), &reversed, &cfg).unwrap();
    assert_eq!(a, b);
    let c = evaluate_mse(&Content(32), &clips, &EvalConfig { seed: 5, ..cfg }).unwrap();
    assert_ne!(a.per_clip, c.per_clip);
}

#[test]
fn pairs_respect_the_window() {
    let (clips, _) = small_synthetic(3, 8, 32);
    let cfg = EvalConfig { window: 2, pairs_per_clip: 200, ..Default::default() };
    for (i, c) in clips.iter().enumerate() {
        for p in eval_pairs(&cfg, i, c) {
            assert!(p.k != 0 && p.k.abs() <= 2);
            assert!(p.offset().t < c.len());
        }
    }
}

#[test]
fn empty_evaluation_set_is_an_error() {
    assert!(evaluate_mse(&oracle(32), &[], &EvalConfig::default()).is_err());
}

#[test]
fn distribution_quantiles() {
    let d = Distribution::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
    assert_eq!((d.min, d.p25, d.median, d.p75, d.max), (1.0, 2.0, 3.0, 4.0, 5.0));
    assert!((d.std - 2f64.sqrt()).abs() < 1e-12);
    assert!(Distribution::of(&[]).is_none());
}

// ----- swap ---------------------------------------------------------------

#[test]
fn degenerate_swap_equals_rendering_the_same_inputs() {
    let (clips, _) = small_synthetic(2, 5, 32);
    let cfg = NetConfig { in_resolution: 32, base_channels: 4, n_layers: 3, content_dim: 16, ..Default::default() };
    let model = Reconstructor::Model(Box::new(Models::new(Method::DisentangledPretrainedPose, &cfg, 1).unwrap()));
    let clip = &clips[0];
    let out = swap(&model, clip, &clip.frames[0]).unwrap();
    assert_eq!(out.frames.len(), clip.len());
    let content: Vec<&Frame> = vec![&clip.frames[0]; clip.len()];
    let poses: Vec<&PoseVector> = clip.poses.iter().collect();
    let frames: Vec<&Frame> = clip.frames.iter().collect();
    assert_eq!(model.render(&content, &frames, &poses).unwrap(), out.frames);
    assert!(out.frames.iter().all(Frame::in_range));
}

#[test]
fn invisible_frames_are_flagged_and_all_invisible_is_an_error() {
    let (clips, _) = small_synthetic(1, 4, 32);
    let mut clip = clips[0].clone();
    clip.poses[2] = missing_pose();
    let out = swap(&oracle(32), &clip, &clip.frames[0]).unwrap();
    assert_eq!(out.invisible, vec![false, false, true, false]);
    assert_eq!(out.frames.len(), 4);
    clip.poses.iter_mut().for_each(|p| *p = missing_pose());
    assert!(swap(&oracle(32), &clip, &clip.frames[0]).is_err());
}

#[test]
fn resolution_mismatch_names_both_sizes() {
    let (clips, _) = small_synthetic(1, 3, 32);
    let err = swap(&oracle(64), &clips[0], &clips[0].frames[0]).unwrap_err().to_string();
    assert!(err.contains("64x64") && err.contains("32x32"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn swap_emits_one_frame_per_pose_frame(len in 2usize..12, seed in 0u64..1000) {
        let (clips, _) = poseswap_core::data::generate_synthetic(&poseswap_core::data::SyntheticConfig {
            n_clips: 1,
            frames_per_clip: len,
            resolution: 32,
            seed,
            ..Default::default()
        })
        .unwrap();
        let out = swap(&oracle(32), &clips[0], &clips[0].frames[0]).unwrap();
        prop_assert_eq!(out.frames.len(), len);
        prop_assert_eq!(out.invisible.len(), len);
    }
}

#[test]
fn frames_are_written_as_numbered_pngs() {
    let dir = tempfile::tempdir().unwrap();
    let (clips, _) = small_synthetic(1, 3, 32);
    write_frames(&dir.path().join(FRAMES_DIR), &clips[0].frames).unwrap();
    for i in 0..3 {
        assert!(dir.path().join(FRAMES_DIR).join(format!("{i:06}.png")).is_file());
    }
}

// ----- diagnostics ----------------------------------------------------------

fn recolor(clip: &Clip, color: [f64; 3]) -> Vec<Frame> {
    let res = clip.frames[0].width;
    clip.poses.iter().map(|p| render_figure(&FigurePose::from_pose_vector(p, res), color, res)).collect()
}

fn pair_with_different_colors() -> (Vec<Clip>, poseswap_core::data::SyntheticTruth, usize, usize) {
    let (clips, truth) = small_synthetic(12, 6, 64);
    let pairs = synthetic_swap_pairs(&clips, &truth, 1).unwrap();
    let (p, c) = pairs[0];
    (clips, truth, p, c)
}

#[test]
fn unchanged_pose_video_scores_its_own_color() {
    let (clips, truth, p, c) = pair_with_different_colors();
    let own = truth.palette_index(&clips[p].video_id).unwrap();
    let other = truth.palette_index(&clips[c].video_id).unwrap();
    let d = synthetic_swap_diagnostics(&clips[p].frames, &truth.palette, other, &clips[p].poses).unwrap();
    assert_eq!(d.content_score, 0.0);
    let d = synthetic_swap_diagnostics(&clips[p].frames, &truth.palette, own, &clips[p].poses).unwrap();
    assert_eq!(d.content_score, 1.0);
}

#[test]
fn perfect_swap_scores_full_content_and_subpixel_pose() {
    let (clips, truth, p, c) = pair_with_different_colors();
    let color = truth.palette_index(&clips[c].video_id).unwrap();
    let perfect = recolor(&clips[p], truth.palette[color]);
    let d = synthetic_swap_diagnostics(&perfect, &truth.palette, color, &clips[p].poses).unwrap();
    assert_eq!(d.content_score, 1.0);
    // below the limb radius of the renderer
    assert!(d.pose_error_px <= 0.9, "{}", d.pose_error_px);
}

#[test]
fn static_content_scores_the_static_centroid_error() {
    let (clips, truth, p, c) = pair_with_different_colors();
    let color = truth.palette_index(&clips[c].video_id).unwrap();
    let still = vec![clips[c].frames[0].clone(); clips[p].len()];
    let d = synthetic_swap_diagnostics(&still, &truth.palette, color, &clips[p].poses).unwrap();
    let fixed = figure_centroid(&clips[c].frames[0]).unwrap();
    let expect: f64 = clips[p]
        .poses
        .iter()
        .map(|pose| {
            let t = skeleton_centroid(pose, 64).unwrap();
            ((fixed[0] - t[0]).powi(2) + (fixed[1] - t[1]).powi(2)).sqrt()
        })
        .sum::<f64>()
        / clips[p].len() as f64;
    assert!((d.pose_error_px - expect).abs() < 1e-12);
    assert_eq!(d.content_score, 1.0);
}

#[test]
fn blank_output_misses_content_and_pose() {
    let (clips, truth, p, _) = pair_with_different_colors();
    let blank = vec![Frame::filled(64, 64, [-1.0; 3]); clips[p].len()];
    let d = synthetic_swap_diagnostics(&blank, &truth.palette, 0, &clips[p].poses).unwrap();
    assert_eq!(d.content_score, 0.0);
    assert!((d.pose_error_px - 64.0 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn swap_evaluation_of_a_content_copier_gets_color_but_not_pose() {
    let (clips, truth) = small_synthetic(12, 6, 64);
    let d = synthetic_swap_evaluation(&Content(64), &clips, &truth, 4).unwrap();
    assert_eq!(d.content_score, 1.0);
    assert_eq!(d.n_frames, 24);
    let o = synthetic_swap_evaluation(&oracle(64), &clips, &truth, 4).unwrap();
    assert_eq!(o.content_score, 0.0);
    assert!(o.pose_error_px <= 0.9);
}

#[test]
fn swap_pairs_differ_in_color() {
    let (clips, truth) = small_synthetic(20, 3, 32);
    for (p, c) in synthetic_swap_pairs(&clips, &truth, 10).unwrap() {
        assert_ne!(truth.palette_index(&clips[p].video_id), truth.palette_index(&clips[c].video_id));
    }
}

// ----- grid -----------------------------------------------------------------

fn grid_inputs(frames: usize, methods: usize) -> (Vec<Frame>, Vec<PoseVector>, Frame, Vec<(String, Vec<Frame>)>) {
    let (clips, _) = small_synthetic(2, frames, 32);
    let outputs = (0..methods).map(|m| (format!("m{m}"), clips[1].frames.clone())).collect();
    (clips[0].frames.clone(), clips[0].poses.clone(), clips[1].frames[0].clone(), outputs)
}

#[test]
fn grid_layout_follows_the_input_counts() {
    let (f, p, c, o) = grid_inputs(8, 2);
    let img = render_swap_grid(&f, &p, &c, &o).unwrap();
    assert_eq!(grid_shape(8, 2), (4, 9));
    let cell = (32 + 2 * CELL_BORDER) as u32;
    assert_eq!((img.width(), img.height()), (9 * cell, 4 * cell));
}

#[test]
fn grid_bytes_are_deterministic_and_pinned() {
    let (f, p, c, o) = grid_inputs(4, 1);
    let a = render_swap_grid(&f, &p, &c, &o).unwrap();
    let b = render_swap_grid(&f, &p, &c, &o).unwrap();
    assert_eq!(a.as_raw(), b.as_raw());
    let hex: String = Sha256::digest(a.as_raw()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(hex, GOLDEN_GRID_SHA256);
}

const GOLDEN_GRID_SHA256: &str = "5cc15045b6837981cd0c3e8b3449b5ba160425cb94f38a21fc5b33dcc40443a6";

#[test]
fn keypoint_row_is_the_colorized_channel_maximum() {
    let (f, p, c, o) = grid_inputs(3, 1);
    let img = render_swap_grid(&f, &p, &c, &o).unwrap();
    let hm = render_heatmap(&p[1], &HeatmapConfig::for_resolution(32));
    let n = 32 * 32;
    let max: Vec<f64> = (0..n).map(|i| (0..17).map(|ch| hm.values[ch * n + i]).fold(0.0, f64::max)).collect();
    let peak = max.iter().copied().fold(0.0, f64::max);
    let cell = 32 + 2 * CELL_BORDER;
    for y in 0..32 {
        for x in 0..32 {
            let px = img.get_pixel((2 * cell + CELL_BORDER + x) as u32, (cell + CELL_BORDER + y) as u32).0;
            let want = ((max[y * 32 + x] / peak) * 255.0).round() as i32;
            assert_eq!(px[0], 0);
            assert_eq!(px[2], 0);
            assert!((px[1] as i32 - want).abs() <= 1, "({x}, {y}): {} vs {want}", px[1]);
        }
    }
}

#[test]
fn grid_rejects_mismatched_counts() {
    let (f, p, c, mut o) = grid_inputs(4, 2);
    o[1].1.pop();
    assert!(render_swap_grid(&f, &p, &c, &o).is_err());
    let (f, mut p, c, o) = grid_inputs(4, 1);
    p.pop();
    assert!(render_swap_grid(&f, &p, &c, &o).is_err());
}
