use serde::{Deserialize, Serialize};

use crate::data::{skeleton_mask, FigurePose, Frame};
use crate::error::{Error, Result};
use crate::pose::PoseVector;

/// Pixels at least this fraction of the frame's brightest pixel count as figure.
pub const FIGURE_THRESHOLD: f64 = 0.5;

/// Frames whose brightest pixel is below this (in `[0, 1]`) hold no figure.
pub const MIN_FIGURE_BRIGHTNESS: f64 = 0.1;

/// Disentanglement scores of a swap on synthetic data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwapDiagnostics {
    /// Fraction of frames whose figure color is nearest the content palette entry.
    pub content_score: f64,
    /// Mean distance in pixels between output and ground-truth figure centroids.
    pub pose_error_px: f64,
    pub n_frames: usize,
}

fn brightness(frame: &Frame) -> Vec<f64> {
    let n = frame.height * frame.width;
    (0..n)
        .map(|i| (0..3).map(|c| (frame.data[c * n + i] as f64 + 1.0) / 2.0).sum::<f64>() / 3.0)
        .collect()
}

/// Indices of figure pixels and their brightness; empty for a blank frame.
fn figure_pixels(frame: &Frame) -> Vec<(usize, f64)> {
    let b = brightness(frame);
    let max = b.iter().copied().fold(0.0, f64::max);
    if max < MIN_FIGURE_BRIGHTNESS {
        return Vec::new();
    }
    b.into_iter().enumerate().filter(|&(_, v)| v >= FIGURE_THRESHOLD * max).collect()
}

/// Mean RGB in `[0, 1]` of the figure pixels.
pub fn figure_color(frame: &Frame) -> Option<[f64; 3]> {
    let px = figure_pixels(frame);
    if px.is_empty() {
        return None;
    }
    let n = frame.height * frame.width;
    let mut rgb = [0.0; 3];
    for &(i, _) in &px {
        for (c, v) in rgb.iter_mut().enumerate() {
            *v += (frame.data[c * n + i] as f64 + 1.0) / 2.0;
        }
    }
    Some(rgb.map(|v| v / px.len() as f64))
}

/// Palette entry nearest the figure color.
pub fn nearest_palette_entry(frame: &Frame, palette: &[[f64; 3]]) -> Option<usize> {
    let rgb = figure_color(frame)?;
    let dist = |p: &[f64; 3]| p.iter().zip(&rgb).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..palette.len()).min_by(|&a, &b| dist(&palette[a]).total_cmp(&dist(&palette[b])))
}

/// Brightness-weighted centroid `[x, y]` of the figure pixels.
pub fn figure_centroid(frame: &Frame) -> Option<[f64; 2]> {
    let px = figure_pixels(frame);
    let total: f64 = px.iter().map(|p| p.1).sum();
    if total <= 0.0 {
        return None;
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(i, w) in &px {
        sx += w * (i % frame.width) as f64;
        sy += w * (i / frame.width) as f64;
    }
    Some([sx / total, sy / total])
}

/// Coverage-weighted centroid of the figure drawn at `pose`.
pub fn skeleton_centroid(pose: &PoseVector, resolution: usize) -> Option<[f64; 2]> {
    if !pose.visible() {
        return None;
    }
    let mask = skeleton_mask(&FigurePose::from_pose_vector(pose, resolution), resolution);
    let total: f64 = mask.iter().map(|&m| m as f64).sum();
    if total <= 0.0 {
        return None;
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, &m) in mask.iter().enumerate() {
        sx += m as f64 * (i % resolution) as f64;
        sy += m as f64 * (i / resolution) as f64;
    }
    Some([sx / total, sy / total])
}

/// Score `outputs` against the content palette entry and the per-frame poses
/// they should show. A frame without a figure counts as a content miss and
/// as a centroid error of the frame diagonal.
pub fn synthetic_swap_diagnostics(
    outputs: &[Frame],
    palette: &[[f64; 3]],
    content_index: usize,
    pose_truth: &[PoseVector],
) -> Result<SwapDiagnostics> {
    if outputs.len() != pose_truth.len() {
        return Err(Error::Shape(format!("{} outputs for {} poses", outputs.len(), pose_truth.len())));
    }
    if content_index >= palette.len() {
        return Err(Error::Shape(format!("palette index {content_index} of {}", palette.len())));
    }
    let mut hits = 0usize;
    let mut err_sum = 0.0;
    let mut scored = 0usize;
    for (frame, pose) in outputs.iter().zip(pose_truth) {
        if nearest_palette_entry(frame, palette) == Some(content_index) {
            hits += 1;
        }
        let Some(truth) = skeleton_centroid(pose, frame.width) else { continue };
        scored += 1;
        err_sum += match figure_centroid(frame) {
            Some(c) => ((c[0] - truth[0]).powi(2) + (c[1] - truth[1]).powi(2)).sqrt(),
            None => (frame.width as f64).hypot(frame.height as f64),
        };
    }
    let n = outputs.len();
    Ok(SwapDiagnostics {
        content_score: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        pose_error_px: if scored == 0 { 0.0 } else { err_sum / scored as f64 },
        n_frames: n,
    })
}
