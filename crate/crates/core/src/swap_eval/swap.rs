use std::path::{Path, PathBuf};
use std::process::Command;

use super::diagnostics::{synthetic_swap_diagnostics, SwapDiagnostics};
use super::model::Renderer;
use crate::data::{Clip, Frame, SyntheticTruth};
use crate::error::{Error, Result};

pub const FRAMES_DIR: &str = "frames";
pub const GRID_FILE: &str = "grid.png";
pub const REPORT_FILE: &str = "report.json";
pub const VIDEO_FILE: &str = "video.mp4";

/// Frames of a swap, one per pose-video frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SwapOutput {
    pub frames: Vec<Frame>,
    /// Frames rendered from the zero pose because the source pose was invisible.
    pub invisible: Vec<bool>,
}

/// Re-render `pose_video` with the content of `content_image`.
pub fn swap(renderer: &dyn Renderer, pose_video: &Clip, content_image: &Frame) -> Result<SwapOutput> {
    if !pose_video.poses.iter().any(|p| p.visible()) {
        return Err(Error::Sampling(format!("video {} has no frame with a visible pose", pose_video.video_id)));
    }
    renderer.check_resolution(content_image.height, content_image.width)?;
    let (h, w) = pose_video.resolution();
    renderer.check_resolution(h, w)?;
    let content = vec![content_image; pose_video.len()];
    let pose_frames: Vec<&Frame> = pose_video.frames.iter().collect();
    let poses: Vec<_> = pose_video.poses.iter().collect();
    let frames = renderer.render(&content, &pose_frames, &poses)?;
    let invisible = pose_video.poses.iter().map(|p| !p.visible()).collect();
    Ok(SwapOutput { frames, invisible })
}

/// Write `frames` as `dir/000000.png`, `dir/000001.png`, ...
pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(format!("{i:06}.png"));
        f.to_rgb8().save(&path).map_err(|e| Error::Image { path, source: e })?;
    }
    Ok(())
}

/// Encode `frames_dir` into `out` with ffmpeg when it is on the `PATH`.
/// Returns `None`, after logging why, when no video was produced.
pub fn mux_video(frames_dir: &Path, fps: f64, out: &Path) -> Option<PathBuf> {
    let status = Command::new("ffmpeg")
        .args(["-y", "-loglevel", "error", "-framerate"])
        .arg(format!("{fps}"))
        .arg("-i")
        .arg(frames_dir.join("%06d.png"))
        .args(["-pix_fmt", "yuv420p"])
        .arg(out)
        .status();
    match status {
        Ok(s) if s.success() => Some(out.to_path_buf()),
        Ok(s) => {
            log::warn!("ffmpeg exited with {s}; keeping frames only");
            None
        }
        Err(e) => {
            log::info!("no video encoder available ({e}); keeping frames only");
            None
        }
    }
}

/// `(pose clip, content clip)` index pairs whose palette colors differ, chosen
/// deterministically: each clip in order is paired with the next clip of another color.
pub fn synthetic_swap_pairs(clips: &[Clip], truth: &SyntheticTruth, n: usize) -> Result<Vec<(usize, usize)>> {
    let colors: Vec<usize> = clips
        .iter()
        .map(|c| {
            truth
                .palette_index(&c.video_id)
                .ok_or_else(|| Error::Ingestion(format!("no ground-truth color for {}", c.video_id)))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..clips.len() {
        if pairs.len() == n {
            break;
        }
        let partner = (1..clips.len()).map(|d| (i + d) % clips.len()).find(|&j| colors[j] != colors[i]);
        if let Some(j) = partner {
            pairs.push((i, j));
        }
    }
    if pairs.len() < n {
        return Err(Error::Sampling(format!("only {} clip pairs with different colors, need {n}", pairs.len())));
    }
    Ok(pairs)
}

/// Swap the first frame of each content clip onto each pose clip and average the diagnostics.
pub fn synthetic_swap_evaluation(
    renderer: &dyn Renderer,
    clips: &[Clip],
    truth: &SyntheticTruth,
    n_pairs: usize,
) -> Result<SwapDiagnostics> {
    let mut hits = 0.0;
    let mut err = 0.0;
    let mut frames = 0;
    for (pi, ci) in synthetic_swap_pairs(clips, truth, n_pairs)? {
        let (pose_clip, content_clip) = (&clips[pi], &clips[ci]);
        let out = swap(renderer, pose_clip, &content_clip.frames[0])?;
        let color = truth.palette_index(&content_clip.video_id).expect("checked by synthetic_swap_pairs");
        let d = synthetic_swap_diagnostics(&out.frames, &truth.palette, color, &pose_clip.poses)?;
        hits += d.content_score * d.n_frames as f64;
        err += d.pose_error_px * d.n_frames as f64;
        frames += d.n_frames;
    }
    Ok(SwapDiagnostics { content_score: hits / frames as f64, pose_error_px: err / frames as f64, n_frames: frames })
}
