use std::path::Path;

use poseswap_core::config::{self, config_hash};
use poseswap_core::data::{
    generate_synthetic, load_kth, read_clip, write_dataset, Clip, Frame, Split, SyntheticConfig, SyntheticTruth,
};
use poseswap_core::swap_eval::{
    evaluate_mse, mux_video, render_swap_grid, save_grid, swap, synthetic_swap_evaluation, write_frames,
    EvalConfig, Reconstructor, Renderer, FRAMES_DIR, GRID_FILE, REPORT_FILE, VIDEO_FILE,
};
use poseswap_core::train::{run_training, Checkpoint, MethodConfig, RunOptions};
use poseswap_core::{Error, Method, Result};
use serde::Serialize;

use crate::args::Common;

/// Refuse to write into a non-empty directory unless forced.
fn prepare_out(out: &Path, force: bool) -> Result<()> {
    if out.is_dir() {
        let non_empty = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::config(
                "out",
                format!("{} exists and is not empty (pass --force to write into it)", out.display()),
            ));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_image(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })?;
    Ok(Frame::from_rgb8(&img.to_rgb8()))
}

fn load_renderer(path: &Path) -> Result<Reconstructor> {
    Reconstructor::from_checkpoint(&Checkpoint::load(path)?)
}

pub fn synth(common: &Common, out: &Path) -> Result<()> {
    let mut cfg: SyntheticConfig = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    prepare_out(out, common.force)?;
    let (clips, truth) = generate_synthetic(&cfg)?;
    write_dataset(out, &clips)?;
    truth.save(out)?;
    let frames: usize = clips.iter().map(Clip::len).sum();
    println!("{} clips, {frames} frames, {}x{} pixels -> {}", clips.len(), cfg.resolution, cfg.resolution, out.display());
    Ok(())
}

pub fn ingest(common: &Common, root: &Path, split: &str, resolution: usize, out: &Path) -> Result<()> {
    let split: Split = split.parse()?;
    let clips = load_kth(root, split, resolution)?;
    prepare_out(out, common.force)?;
    write_dataset(out, &clips)?;
    let frames: usize = clips.iter().map(Clip::len).sum();
    println!("{} clips, {frames} frames, {resolution}x{resolution} pixels -> {}", clips.len(), out.display());
    Ok(())
}

pub fn train(common: &Common, data: &Path, split: &str, out: &Path, resume: Option<&Path>) -> Result<()> {
    let mut cfg: MethodConfig = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    let split: Split = split.parse()?;
    let clips = load_kth(data, split, cfg.net.in_resolution)?;
    if resume.is_none() {
        prepare_out(out, common.force)?;
    }
    log::info!("config hash {}", config_hash(&cfg));
    let opts = RunOptions { out_dir: out.to_path_buf(), resume: resume.map(Path::to_path_buf), max_steps: None };
    let run = run_training(&cfg, &clips, &opts)?;
    if let Some(last) = run.records.last() {
        let losses: Vec<String> = last.losses.iter().map(|(k, v)| format!("{k}={v:.5}")).collect();
        println!("step {} epoch {}: {}", last.step, last.epoch, losses.join(" "));
    }
    println!("checkpoint {}", run.final_checkpoint.display());
    Ok(())
}

pub fn eval(
    common: &Common,
    checkpoint: &Path,
    data: &Path,
    split: &str,
    method: Option<&str>,
    swap_pairs: usize,
    out: &Path,
) -> Result<()> {
    let mut cfg: EvalConfig = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let renderer = load_renderer(checkpoint)?;
    if let Some(m) = method {
        let expected: Method = m.parse()?;
        if renderer.name() != expected.name() {
            return Err(Error::config(
                "method",
                format!("checkpoint holds {}, expected {}", renderer.name(), expected.name()),
            ));
        }
    }
    let split: Split = split.parse()?;
    let clips = load_kth(data, split, renderer.resolution())?;
    let mut report = evaluate_mse(&renderer, &clips, &cfg)?;
    if let Some(truth) = SyntheticTruth::load(data)? {
        report.diagnostics = Some(synthetic_swap_evaluation(&renderer, &clips, &truth, swap_pairs)?);
    }
    prepare_out(out, common.force)?;
    let path = out.join(REPORT_FILE);
    std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))?;
    println!("{}: mse {:.6} over {} pairs", report.method, report.mse, report.n_pairs);
    if let Some(d) = &report.diagnostics {
        println!("content score {:.3}, pose error {:.2} px", d.content_score, d.pose_error_px);
    }
    Ok(())
}

#[derive(Serialize)]
struct SwapReport<'a> {
    method: String,
    pose_video: &'a str,
    content_image: String,
    n_frames: usize,
    /// Frames rendered from the zero pose.
    invisible_frames: Vec<usize>,
    video: Option<String>,
}

pub fn swap_cmd(common: &Common, checkpoint: &Path, data: &Path, pose_video: &str, content: &Path, out: &Path) -> Result<()> {
    let renderer = load_renderer(checkpoint)?;
    let content_image = load_image(content)?;
    renderer.check_resolution(content_image.height, content_image.width)?;
    let clip = read_clip(data, pose_video, Some(renderer.resolution()))?;
    let result = swap(&renderer, &clip, &content_image)?;
    prepare_out(out, common.force)?;
    let frames_dir = out.join(FRAMES_DIR);
    write_frames(&frames_dir, &result.frames)?;
    let grid = render_swap_grid(&clip.frames, &clip.poses, &content_image, &[(renderer.name(), result.frames.clone())])?;
    save_grid(&grid, &out.join(GRID_FILE))?;
    let video = mux_video(&frames_dir, clip.fps, &out.join(VIDEO_FILE));
    let report = SwapReport {
        method: renderer.name(),
        pose_video,
        content_image: content.display().to_string(),
        n_frames: result.frames.len(),
        invisible_frames: result.invisible.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect(),
        video: video.map(|p| p.display().to_string()),
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    println!("{} frames -> {}", report.n_frames, out.display());
    Ok(())
}

pub fn grid(
    common: &Common,
    checkpoints: &[std::path::PathBuf],
    data: &Path,
    pose_video: &str,
    content: &Path,
    frames: usize,
    out: &Path,
) -> Result<()> {
    if frames == 0 {
        return Err(Error::config("frames", "must be at least 1"));
    }
    let renderers = checkpoints.iter().map(|p| load_renderer(p)).collect::<Result<Vec<_>>>()?;
    let res = renderers[0].resolution();
    if let Some(r) = renderers.iter().find(|r| r.resolution() != res) {
        return Err(Error::config("checkpoint", format!("{} is {0}x{0}, the first checkpoint is {res}x{res}", r.resolution())));
    }
    let content_image = load_image(content)?;
    renderers[0].check_resolution(content_image.height, content_image.width)?;
    let mut clip = read_clip(data, pose_video, Some(res))?;
    let n = frames.min(clip.len());
    clip.frames.truncate(n);
    clip.poses.truncate(n);
    let mut rows = Vec::with_capacity(renderers.len());
    for r in &renderers {
        rows.push((r.name(), swap(r, &clip, &content_image)?.frames));
    }
    let img = render_swap_grid(&clip.frames, &clip.poses, &content_image, &rows)?;
    prepare_out(out, common.force)?;
    save_grid(&img, &out.join(GRID_FILE))?;
    println!("{} rows x {} columns -> {}", rows.len() + 2, n + 1, out.join(GRID_FILE).display());
    Ok(())
}
