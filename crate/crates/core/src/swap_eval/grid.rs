use std::path::Path;

use image::{Rgb, RgbImage};

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::pose::{render_heatmap, HeatmapConfig, PoseVector};

/// Border width around each cell, in pixels.
pub const CELL_BORDER: usize = 2;

const POSE_BORDER: Rgb<u8> = Rgb([40, 90, 230]);
const KEYPOINT_BORDER: Rgb<u8> = Rgb([40, 200, 60]);
const CONTENT_BORDER: Rgb<u8> = Rgb([220, 40, 40]);
const PLAIN_BORDER: Rgb<u8> = Rgb([255, 255, 255]);

/// `(rows, columns)` of a grid for `n_frames` pose frames and `n_methods` methods.
pub fn grid_shape(n_frames: usize, n_methods: usize) -> (usize, usize) {
    (2 + n_methods, 1 + n_frames)
}

/// Keypoints of `pose` drawn in green: the heatmap's per-pixel maximum over
/// channels, scaled so the brightest pixel is full intensity.
pub fn keypoint_frame(pose: &PoseVector, resolution: usize) -> Frame {
    let hm = render_heatmap(pose, &HeatmapConfig::for_resolution(resolution));
    let m = hm.max_over_channels();
    let peak = m.iter().copied().fold(0.0, f64::max);
    let n = resolution * resolution;
    let mut data = vec![-1.0f32; 3 * n];
    if peak > 0.0 {
        for (i, v) in m.iter().enumerate() {
            data[n + i] = (2.0 * v / peak - 1.0) as f32;
        }
    }
    Frame { height: resolution, width: resolution, data }
}

fn blit(img: &mut RgbImage, frame: &Frame, row: usize, col: usize, border: Rgb<u8>) {
    let cell = frame.width + 2 * CELL_BORDER;
    let (x0, y0) = ((col * cell) as u32, (row * cell) as u32);
    for dy in 0..cell as u32 {
        for dx in 0..cell as u32 {
            img.put_pixel(x0 + dx, y0 + dy, border);
        }
    }
    let px = frame.to_rgb8();
    for (x, y, p) in px.enumerate_pixels() {
        img.put_pixel(x0 + CELL_BORDER as u32 + x, y0 + CELL_BORDER as u32 + y, *p);
    }
}

/// Composite swap figure: row 0 holds the pose frames, row 1 their keypoints,
/// then one row per method with the content image in column 0 and the
/// method's outputs after it.
pub fn render_swap_grid(
    pose_frames: &[Frame],
    poses: &[PoseVector],
    content_image: &Frame,
    outputs: &[(String, Vec<Frame>)],
) -> Result<RgbImage> {
    let n = pose_frames.len();
    if n == 0 {
        return Err(Error::Shape("no pose frames to lay out".into()));
    }
    if poses.len() != n {
        return Err(Error::Shape(format!("{n} pose frames but {} poses", poses.len())));
    }
    for (name, frames) in outputs {
        if frames.len() != n {
            return Err(Error::Shape(format!("{name}: {} outputs for {n} pose frames", frames.len())));
        }
    }
    let res = content_image.width;
    let all = pose_frames.iter().chain(outputs.iter().flat_map(|o| &o.1)).chain([content_image]);
    if let Some(f) = all.into_iter().find(|f| (f.height, f.width) != (res, res)) {
        return Err(Error::Shape(format!("{}x{} frame in a {res}x{res} grid", f.height, f.width)));
    }
    let (rows, cols) = grid_shape(n, outputs.len());
    let cell = res + 2 * CELL_BORDER;
    let mut img = RgbImage::from_pixel((cols * cell) as u32, (rows * cell) as u32, PLAIN_BORDER);
    let blank = Frame::filled(res, res, [1.0, 1.0, 1.0]);
    blit(&mut img, &blank, 0, 0, PLAIN_BORDER);
    blit(&mut img, &blank, 1, 0, PLAIN_BORDER);
    for (t, (f, p)) in pose_frames.iter().zip(poses).enumerate() {
        blit(&mut img, f, 0, t + 1, POSE_BORDER);
        blit(&mut img, &keypoint_frame(p, res), 1, t + 1, KEYPOINT_BORDER);
    }
    for (m, (_, frames)) in outputs.iter().enumerate() {
        blit(&mut img, content_image, m + 2, 0, CONTENT_BORDER);
        for (t, f) in frames.iter().enumerate() {
            blit(&mut img, f, m + 2, t + 1, PLAIN_BORDER);
        }
    }
    Ok(img)
}

pub fn save_grid(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Image { path: path.to_path_buf(), source: e })
}
