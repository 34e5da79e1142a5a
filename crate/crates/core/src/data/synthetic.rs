//! Procedural stick-figure videos with exact ground truth.
//!
//! Each clip shows one articulated figure in a single palette color on a
//! black background. Joints follow smooth sinusoidal trajectories and are
//! recorded as the clip's poses, so the pose plumbing sees the same 17-point
//! skeleton as real detector output.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Clip, Frame};
use crate::error::{Error, Result};
use crate::pose::{self, PoseVector, NUM_KEYPOINTS, SKELETON};

/// Ground-truth sidecar written next to a synthetic dataset.
pub const TRUTH_FILE: &str = "synthetic.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    /// Horizontal body sway, as a fraction of the resolution.
    pub sway_amplitude: [f64; 2],
    /// Limb swing in radians.
    pub swing_amplitude: [f64; 2],
    /// Cycles per frame.
    pub frequency: [f64; 2],
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self { sway_amplitude: [0.02, 0.08], swing_amplitude: [0.3, 0.8], frequency: [0.05, 0.15] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_clips: usize,
    pub frames_per_clip: usize,
    pub resolution: usize,
    pub n_keypoints: usize,
    /// Subject colors, RGB in `[0, 1]`.
    pub palette: Vec<[f64; 3]>,
    pub motion: MotionConfig,
    pub seed: u64,
    pub fps: f64,
}

pub fn default_palette() -> Vec<[f64; 3]> {
    vec![
        [0.95, 0.2, 0.2],
        [0.2, 0.9, 0.25],
        [0.25, 0.4, 1.0],
        [0.95, 0.85, 0.15],
        [0.9, 0.25, 0.9],
        [0.15, 0.9, 0.9],
    ]
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_clips: 500,
            frames_per_clip: 10,
            resolution: 64,
            n_keypoints: NUM_KEYPOINTS,
            palette: default_palette(),
            motion: MotionConfig::default(),
            seed: 0,
            fps: 25.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clips < 1 {
            return Err(Error::config("n_clips", "must be at least 1"));
        }
        if self.frames_per_clip < 2 {
            return Err(Error::config("frames_per_clip", "must be at least 2"));
        }
        if self.resolution < 32 {
            return Err(Error::config("resolution", format!("must be at least 32, got {}", self.resolution)));
        }
        if self.n_keypoints != NUM_KEYPOINTS {
            return Err(Error::config("n_keypoints", format!("the skeleton has {NUM_KEYPOINTS} keypoints")));
        }
        if self.palette.is_empty() {
            return Err(Error::config("palette", "needs at least one color"));
        }
        for (i, c) in self.palette.iter().enumerate() {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::config(format!("palette[{i}]"), format!("{c:?} is outside [0, 1]")));
            }
            if c.iter().all(|&v| v < 0.35) {
                return Err(Error::config(format!("palette[{i}]"), "too dark to separate from the background"));
            }
        }
        let m = &self.motion;
        for (name, r) in [
            ("motion.sway_amplitude", m.sway_amplitude),
            ("motion.swing_amplitude", m.swing_amplitude),
            ("motion.frequency", m.frequency),
        ] {
            if !(r[0] >= 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(Error::config(name, format!("invalid range {r:?}")));
            }
        }
        if !(self.fps > 0.0) {
            return Err(Error::config("fps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipTruth {
    pub video_id: String,
    pub palette_index: usize,
}

/// Palette and per-clip color assignment of a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub resolution: usize,
    pub palette: Vec<[f64; 3]>,
    pub clips: Vec<ClipTruth>,
}

impl SyntheticTruth {
    pub fn palette_index(&self, video_id: &str) -> Option<usize> {
        self.clips.iter().find(|c| c.video_id == video_id).map(|c| c.palette_index)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(TRUTH_FILE);
        let text = serde_json::to_string_pretty(self).expect("truth serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    /// `None` when `root` holds no synthetic ground truth.
    pub fn load(root: &Path) -> Result<Option<Self>> {
        let path = root.join(TRUTH_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Parse { path, line: e.line(), message: e.to_string() })
    }
}

/// Joint positions in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FigurePose {
    pub joints: [[f64; 2]; NUM_KEYPOINTS],
}

impl FigurePose {
    pub fn to_pose_vector(&self, resolution: usize) -> PoseVector {
        pose::normalize_keypoints(&self.joints, resolution, resolution).expect("figure joints are finite")
    }

    pub fn from_pose_vector(p: &PoseVector, resolution: usize) -> Self {
        Self { joints: pose::denormalize_keypoints(p, resolution, resolution) }
    }
}

#[derive(Clone, Copy, Debug)]
struct FigureParams {
    base: [f64; 2],
    sway: f64,
    freq: f64,
    phase: f64,
    arm_swing: f64,
    arm_spread: f64,
    leg_swing: f64,
    lean: f64,
}

fn along(from: [f64; 2], len: f64, angle: f64) -> [f64; 2] {
    // angle measured from straight down, positive towards +x
    [from[0] + len * angle.sin(), from[1] + len * angle.cos()]
}

fn figure_at(p: &FigureParams, t: usize, scale: f64) -> FigurePose {
    let phi = 2.0 * PI * p.freq * t as f64 + p.phase;
    let s = scale;
    let root = [p.base[0] + p.sway * phi.sin(), p.base[1] + 0.6 * s * (2.0 * phi).sin()];
    let neck = along(root, 14.0 * s, PI + p.lean);
    let nose = along(neck, 6.0 * s, PI + p.lean);
    let mut j = [[0.0; 2]; NUM_KEYPOINTS];
    j[0] = nose;
    j[1] = [nose[0] + 1.4 * s, nose[1] - 1.2 * s];
    j[2] = [nose[0] - 1.4 * s, nose[1] - 1.2 * s];
    j[3] = [nose[0] + 2.8 * s, nose[1] - 0.2 * s];
    j[4] = [nose[0] - 2.8 * s, nose[1] - 0.2 * s];
    j[5] = [neck[0] + 5.0 * s, neck[1]];
    j[6] = [neck[0] - 5.0 * s, neck[1]];
    let swing = phi.sin();
    let left_arm = p.arm_spread + p.arm_swing * swing;
    let right_arm = -(p.arm_spread - p.arm_swing * swing);
    j[7] = along(j[5], 7.0 * s, left_arm);
    j[8] = along(j[6], 7.0 * s, right_arm);
    j[9] = along(j[7], 6.0 * s, 1.5 * left_arm);
    j[10] = along(j[8], 6.0 * s, 1.5 * right_arm);
    j[11] = [root[0] + 3.5 * s, root[1]];
    j[12] = [root[0] - 3.5 * s, root[1]];
    let left_leg = -p.leg_swing * swing;
    let right_leg = p.leg_swing * swing;
    j[13] = along(j[11], 8.0 * s, left_leg);
    j[14] = along(j[12], 8.0 * s, right_leg);
    j[15] = along(j[13], 8.0 * s, 0.4 * left_leg);
    j[16] = along(j[14], 8.0 * s, 0.4 * right_leg);
    FigurePose { joints: j }
}

fn draw_params(rng: &mut ChaCha8Rng, m: &MotionConfig, res: f64) -> FigureParams {
    let mut range = |r: [f64; 2]| if r[1] > r[0] { rng.random_range(r[0]..r[1]) } else { r[0] };
    FigureParams {
        base: [range([0.38, 0.62]) * res, range([0.56, 0.62]) * res],
        sway: range(m.sway_amplitude) * res,
        freq: range(m.frequency),
        phase: range([0.0, 2.0 * PI]),
        arm_swing: range(m.swing_amplitude),
        arm_spread: range([0.1, 0.5]),
        leg_swing: range(m.swing_amplitude) * 0.7,
        lean: range([-0.08, 0.08]),
    }
}

fn limb_radius(resolution: usize) -> f64 {
    0.9 * resolution as f64 / 64.0
}

fn head_radius(resolution: usize) -> f64 {
    2.6 * resolution as f64 / 64.0
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let u = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a[0] + u * dx, a[1] + u * dy);
    ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
}

/// Anti-aliased coverage in `[0, 1]` of the figure at every pixel (`res × res`, row-major).
pub fn skeleton_mask(figure: &FigurePose, resolution: usize) -> Vec<f32> {
    let mut mask = vec![0.0f32; resolution * resolution];
    let j = &figure.joints;
    let mut stamp = |a: [f64; 2], b: [f64; 2], r: f64| {
        let pad = r + 1.0;
        let x0 = (a[0].min(b[0]) - pad).floor().max(0.0) as usize;
        let x1 = ((a[0].max(b[0]) + pad).ceil().max(0.0) as usize).min(resolution - 1);
        let y0 = (a[1].min(b[1]) - pad).floor().max(0.0) as usize;
        let y1 = ((a[1].max(b[1]) + pad).ceil().max(0.0) as usize).min(resolution - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = segment_distance([x as f64, y as f64], a, b);
                let c = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
                let m = &mut mask[y * resolution + x];
                *m = m.max(c);
            }
        }
    };
    for &(a, b) in SKELETON.iter() {
        stamp(j[a], j[b], limb_radius(resolution));
    }
    stamp(j[0], j[0], head_radius(resolution));
    mask
}

/// The figure in `color` (RGB in `[0, 1]`) over black.
pub fn render_figure(figure: &FigurePose, color: [f64; 3], resolution: usize) -> Frame {
    let mask = skeleton_mask(figure, resolution);
    let n = resolution * resolution;
    let mut data = vec![-1.0f32; 3 * n];
    for (c, &cv) in color.iter().enumerate() {
        let target = (2.0 * cv - 1.0) as f32;
        for (i, &m) in mask.iter().enumerate() {
            data[c * n + i] = -1.0 + m * (target + 1.0);
        }
    }
    Frame { height: resolution, width: resolution, data }
}

fn inside(fig: &FigurePose, res: usize) -> bool {
    let hi = res as f64 - 2.0;
    fig.joints.iter().all(|&[x, y]| (1.0..=hi).contains(&x) && (1.0..=hi).contains(&y))
}

/// Deterministic dataset of `n_clips` synthetic videos.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(Vec<Clip>, SyntheticTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let res = cfg.resolution;
    let scale = res as f64 / 64.0;
    let mut clips = Vec::with_capacity(cfg.n_clips);
    let mut truth = Vec::with_capacity(cfg.n_clips);
    for i in 0..cfg.n_clips {
        let palette_index = rng.random_range(0..cfg.palette.len());
        let figures = loop {
            let params = draw_params(&mut rng, &cfg.motion, res as f64);
            let figs: Vec<FigurePose> = (0..cfg.frames_per_clip).map(|t| figure_at(&params, t, scale)).collect();
            if figs.iter().all(|f| inside(f, res)) {
                break figs;
            }
        };
        let color = cfg.palette[palette_index];
        let frames = figures.iter().map(|f| render_figure(f, color, res)).collect();
        let poses = figures.iter().map(|f| f.to_pose_vector(res)).collect();
        // KTH-style ids so the subject split also holds out synthetic clips
        let video_id = format!("person{:02}_synth_{i:05}", i % 25 + 1);
        clips.push(Clip::new(video_id.clone(), frames, poses, cfg.fps)?);
        truth.push(ClipTruth { video_id, palette_index });
    }
    Ok((clips, SyntheticTruth { resolution: res, palette: cfg.palette.clone(), clips: truth }))
}
