//! Human keypoint poses: normalization, Gaussian heatmap rendering and the
//! line-delimited keypoint file format.
//!
//! Keypoints follow the 17-point COCO ordering. Normalized coordinates map the
//! pixel grid affinely onto `[-1, 1]` so that the centers of the corner pixels
//! land exactly on `±1`: `x_norm = 2·x / (W − 1) − 1`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_KEYPOINTS: usize = 17;
/// 17 (x, y) pairs plus the visibility flag.
pub const POSE_DIM: usize = 2 * NUM_KEYPOINTS + 1;

pub const KEYPOINT_NAMES: [&str; NUM_KEYPOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Bones of the COCO skeleton as keypoint index pairs.
pub const SKELETON: [(usize, usize); 16] = [
    (0, 1),
    (0, 2),
    (1, 3),
    (2, 4),
    (5, 6),
    (5, 7),
    (7, 9),
    (6, 8),
    (8, 10),
    (5, 11),
    (6, 12),
    (11, 12),
    (11, 13),
    (13, 15),
    (12, 14),
    (14, 16),
];

/// Normalized single-person pose: 17 keypoints and a visibility flag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseVector {
    keypoints: [[f64; 2]; NUM_KEYPOINTS],
    visible: bool,
}

impl PoseVector {
    /// A visible pose from normalized coordinates. Coordinates outside
    /// `[-1, 1]` are kept (detectors emit near-border points); see [`PoseVector::is_valid`].
    pub fn new(keypoints: [[f64; 2]; NUM_KEYPOINTS]) -> Result<Self> {
        if keypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKeypoint("non-finite normalized coordinate".into()));
        }
        Ok(Self { keypoints, visible: true })
    }

    pub fn keypoints(&self) -> &[[f64; 2]; NUM_KEYPOINTS] {
        &self.keypoints
    }

    pub fn keypoint(&self, i: usize) -> [f64; 2] {
        self.keypoints[i]
    }

    pub fn visible(&self) -> bool {
        self.visible
    }

    /// True when every invariant holds: finite, in `[-1, 1]`, zero when invisible.
    pub fn is_valid(&self) -> bool {
        let coords = self.keypoints.iter().flatten();
        if self.visible {
            coords.clone().all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
        } else {
            coords.clone().all(|&v| v == 0.0)
        }
    }

    pub fn in_bounds(&self) -> bool {
        self.keypoints.iter().flatten().all(|v| (-1.0..=1.0).contains(v))
    }

    /// `[x0, y0, x1, y1, …, x16, y16, visible]`
    pub fn flatten(&self) -> [f64; POSE_DIM] {
        let mut out = [0.0; POSE_DIM];
        for (i, [x, y]) in self.keypoints.iter().enumerate() {
            out[2 * i] = *x;
            out[2 * i + 1] = *y;
        }
        out[POSE_DIM - 1] = if self.visible { 1.0 } else { 0.0 };
        out
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() != POSE_DIM {
            return Err(Error::Format(format!("pose vector has {} entries, expected {POSE_DIM}", v.len())));
        }
        let flag = v[POSE_DIM - 1];
        if flag == 0.0 {
            return Ok(missing_pose());
        }
        if flag != 1.0 {
            return Err(Error::Format(format!("visibility flag must be 0 or 1, got {flag}")));
        }
        let mut kp = [[0.0; 2]; NUM_KEYPOINTS];
        for (i, pair) in kp.iter_mut().enumerate() {
            *pair = [v[2 * i], v[2 * i + 1]];
        }
        Self::new(kp)
    }

    /// Mean of the keypoints in pixel coordinates of a `width × height` grid.
    pub fn centroid_px(&self, width: usize, height: usize) -> Option<[f64; 2]> {
        if !self.visible {
            return None;
        }
        let n = NUM_KEYPOINTS as f64;
        let (sx, sy) = self.keypoints.iter().fold((0.0, 0.0), |(sx, sy), &[x, y]| {
            (sx + denormalize(x, width), sy + denormalize(y, height))
        });
        Some([sx / n, sy / n])
    }
}

/// The "no subject" pose: invisible, every coordinate zero.
pub fn missing_pose() -> PoseVector {
    PoseVector { keypoints: [[0.0; 2]; NUM_KEYPOINTS], visible: false }
}

/// Pixel coordinate → `[-1, 1]` along an axis of `extent` pixels.
pub fn normalize(px: f64, extent: usize) -> f64 {
    2.0 * px / (extent as f64 - 1.0) - 1.0
}

/// Inverse of [`normalize`].
pub fn denormalize(v: f64, extent: usize) -> f64 {
    (v + 1.0) * (extent as f64 - 1.0) / 2.0
}

/// Normalize detector output given in pixel coordinates of an `image_width × image_height` frame.
pub fn normalize_keypoints(raw: &[[f64; 2]], image_width: usize, image_height: usize) -> Result<PoseVector> {
    if image_width <= 1 || image_height <= 1 {
        return Err(Error::InvalidKeypoint(format!(
            "image size {image_width}x{image_height} must exceed 1 pixel per side"
        )));
    }
    if raw.len() != NUM_KEYPOINTS {
        return Err(Error::Format(format!("expected {NUM_KEYPOINTS} keypoints, got {}", raw.len())));
    }
    let mut kp = [[0.0; 2]; NUM_KEYPOINTS];
    for (i, (dst, &[x, y])) in kp.iter_mut().zip(raw).enumerate() {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidKeypoint(format!("keypoint {i} ({}) is not finite: ({x}, {y})", KEYPOINT_NAMES[i])));
        }
        *dst = [normalize(x, image_width), normalize(y, image_height)];
    }
    PoseVector::new(kp)
}

/// Pixel coordinates of every keypoint on a `width × height` grid.
pub fn denormalize_keypoints(pose: &PoseVector, width: usize, height: usize) -> [[f64; 2]; NUM_KEYPOINTS] {
    let mut out = [[0.0; 2]; NUM_KEYPOINTS];
    for (dst, &[x, y]) in out.iter_mut().zip(pose.keypoints()) {
        *dst = [denormalize(x, width), denormalize(y, height)];
    }
    out
}

// ---------------------------------------------------------------------------
// Heatmaps

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapConfig {
    pub height: usize,
    pub width: usize,
    /// Standard deviation in pixels.
    pub sigma: f64,
    pub channels: usize,
    /// Divide each channel by its maximum before feeding a discriminator.
    pub peak_normalize: bool,
}

impl HeatmapConfig {
    /// Square grid with σ = 4 px at 128 × 128, scaled proportionally.
    pub fn for_resolution(resolution: usize) -> Self {
        Self {
            height: resolution,
            width: resolution,
            sigma: 4.0 * resolution as f64 / 128.0,
            channels: NUM_KEYPOINTS,
            peak_normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("heatmap.sigma", format!("must be positive, got {}", self.sigma)));
        }
        if self.height < 8 || self.width < 8 {
            return Err(Error::config("heatmap", format!("grid {}x{} smaller than 8x8", self.height, self.width)));
        }
        if self.channels != NUM_KEYPOINTS {
            return Err(Error::config("heatmap.channels", format!("must be {NUM_KEYPOINTS}, got {}", self.channels)));
        }
        Ok(())
    }

    /// Normalized distance between neighbouring grid points along x and y.
    pub fn pixel_pitch(&self) -> [f64; 2] {
        [2.0 / (self.width as f64 - 1.0), 2.0 / (self.height as f64 - 1.0)]
    }
}

/// `channels × height × width` density values.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, values: vec![0.0; channels * height * width] }
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    /// Each non-zero channel rescaled so its maximum is 1.
    pub fn peak_normalized(&self) -> Self {
        let n = self.height * self.width;
        let mut out = self.clone();
        for chan in out.values.chunks_mut(n) {
            let max = chan.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                chan.iter_mut().for_each(|v| *v /= max);
            }
        }
        out
    }

    /// Maximum over channels at every pixel (`height × width`).
    pub fn max_over_channels(&self) -> Vec<f64> {
        let n = self.height * self.width;
        let mut out = vec![0.0f64; n];
        for chan in self.values.chunks(n) {
            for (o, &v) in out.iter_mut().zip(chan) {
                *o = (*o).max(v);
            }
        }
        out
    }
}

/// Isotropic Gaussian density `N((x_i, y_i), σ²I)` of each keypoint, evaluated at pixel centers.
pub fn render_heatmap(pose: &PoseVector, cfg: &HeatmapConfig) -> Heatmap {
    let mut hm = Heatmap::zeros(cfg.channels, cfg.height, cfg.width);
    if !pose.visible() {
        return hm;
    }
    if !pose.in_bounds() {
        log::debug!("rendering heatmap for out-of-range keypoints");
    }
    let inv_two_var = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let norm = 1.0 / (2.0 * PI * cfg.sigma * cfg.sigma);
    let n = cfg.height * cfg.width;
    let mut gx = vec![0.0; cfg.width];
    let mut gy = vec![0.0; cfg.height];
    for (c, &[x, y]) in pose.keypoints().iter().enumerate().take(cfg.channels) {
        let (cx, cy) = (denormalize(x, cfg.width), denormalize(y, cfg.height));
        for (i, g) in gx.iter_mut().enumerate() {
            let d = i as f64 - cx;
            *g = d * d;
        }
        for (j, g) in gy.iter_mut().enumerate() {
            let d = j as f64 - cy;
            *g = d * d;
        }
        let chan = &mut hm.values[c * n..(c + 1) * n];
        for (j, &dy2) in gy.iter().enumerate() {
            let row = &mut chan[j * cfg.width..(j + 1) * cfg.width];
            for (v, &dx2) in row.iter_mut().zip(&gx) {
                *v = norm * (-(dx2 + dy2) * inv_two_var).exp();
            }
        }
    }
    hm
}

/// Heatmap as fed to the pose discriminator (peak-normalized when configured).
pub fn discriminator_heatmap(pose: &PoseVector, cfg: &HeatmapConfig) -> Heatmap {
    let hm = render_heatmap(pose, cfg);
    if cfg.peak_normalize {
        hm.peak_normalized()
    } else {
        hm
    }
}

/// Per-channel argmax, renormalized to `[-1, 1]`; ties go to the smallest
/// row-major index. An all-zero heatmap decodes to [`missing_pose`].
pub fn decode_heatmap(hm: &Heatmap, cfg: &HeatmapConfig) -> Result<PoseVector> {
    if hm.channels != cfg.channels || hm.height != cfg.height || hm.width != cfg.width {
        return Err(Error::Shape(format!(
            "heatmap {}x{}x{} does not match config {}x{}x{}",
            hm.channels, hm.height, hm.width, cfg.channels, cfg.height, cfg.width
        )));
    }
    if hm.values.iter().all(|&v| v == 0.0) {
        return Ok(missing_pose());
    }
    let mut kp = [[0.0; 2]; NUM_KEYPOINTS];
    for (c, dst) in kp.iter_mut().enumerate().take(cfg.channels) {
        let chan = hm.channel(c);
        let mut best = 0;
        for (i, &v) in chan.iter().enumerate() {
            if v > chan[best] {
                best = i;
            }
        }
        let (row, col) = (best / cfg.width, best % cfg.width);
        *dst = [normalize(col as f64, cfg.width), normalize(row as f64, cfg.height)];
    }
    PoseVector::new(kp)
}

// ---------------------------------------------------------------------------
// Keypoint files

/// One line of a `.kp` file, in pixel coordinates of the source frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub frame: usize,
    pub visible: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp: Option<Vec<[f64; 2]>>,
    pub w: usize,
    pub h: usize,
}

impl KeypointRecord {
    pub fn detected(frame: usize, kp: Vec<[f64; 2]>, w: usize, h: usize) -> Self {
        Self { frame, visible: 1, kp: Some(kp), w, h }
    }

    pub fn missing(frame: usize, w: usize, h: usize) -> Self {
        Self { frame, visible: 0, kp: None, w, h }
    }

    /// Record for a normalized pose on a `w × h` grid.
    pub fn from_pose(frame: usize, pose: &PoseVector, w: usize, h: usize) -> Self {
        if pose.visible() {
            Self::detected(frame, denormalize_keypoints(pose, w, h).to_vec(), w, h)
        } else {
            Self::missing(frame, w, h)
        }
    }

    pub fn to_pose(&self) -> Result<PoseVector> {
        match (self.visible, &self.kp) {
            (0, _) => Ok(missing_pose()),
            (1, Some(kp)) => normalize_keypoints(kp, self.w, self.h),
            (1, None) => Err(Error::Format(format!("frame {}: visible record without `kp`", self.frame))),
            (v, _) => Err(Error::Format(format!("frame {}: visible must be 0 or 1, got {v}", self.frame))),
        }
    }

    fn check(&self) -> Result<()> {
        if let (1, Some(kp)) = (self.visible, &self.kp) {
            if kp.len() != NUM_KEYPOINTS {
                return Err(Error::Format(format!(
                    "frame {}: expected {NUM_KEYPOINTS} keypoints, got {}",
                    self.frame,
                    kp.len()
                )));
            }
        }
        self.to_pose().map(|_| ())
    }
}

pub fn parse_keypoint_records(text: &str, path: &Path) -> Result<Vec<KeypointRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: KeypointRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.check()?;
        if rec.frame != out.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected frame {}, found frame {}", out.len(), rec.frame),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_keypoint_records(path: &Path) -> Result<Vec<KeypointRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keypoint_records(&text, path)
}

/// One [`PoseVector`] per frame, in frame order.
pub fn read_keypoint_file(path: &Path) -> Result<Vec<PoseVector>> {
    read_keypoint_records(path)?.iter().map(KeypointRecord::to_pose).collect()
}

pub fn format_keypoint_records(records: &[KeypointRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::to_string(r).expect("keypoint records always serialize");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn write_keypoint_file(path: &Path, records: &[KeypointRecord]) -> Result<()> {
    std::fs::write(path, format_keypoint_records(records)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose_at(x: f64, y: f64) -> PoseVector {
        PoseVector::new([[x, y]; NUM_KEYPOINTS]).unwrap()
    }

    #[test]
    fn normalization_corners_and_center() {
        let center = normalize_keypoints(&[[79.5, 59.5]; 17], 160, 120).unwrap();
        assert_eq!(center.keypoint(0), [0.0, 0.0]);
        let origin = normalize_keypoints(&[[0.0, 0.0]; 17], 160, 120).unwrap();
        assert_eq!(origin.keypoint(3), [-1.0, -1.0]);
        let far = normalize_keypoints(&[[159.0, 119.0]; 17], 160, 120).unwrap();
        assert_eq!(far.keypoint(16), [1.0, 1.0]);
        assert!(far.visible());
    }

    #[test]
    fn normalization_rejects_bad_input() {
        let mut raw = [[1.0, 1.0]; 17];
        raw[4] = [f64::NAN, 0.0];
        assert!(matches!(normalize_keypoints(&raw, 160, 120), Err(Error::InvalidKeypoint(_))));
        assert!(normalize_keypoints(&[[0.0, 0.0]; 17], 1, 120).is_err());
        assert!(matches!(normalize_keypoints(&[[0.0, 0.0]; 16], 160, 120), Err(Error::Format(_))));
    }

    #[test]
    fn missing_pose_is_all_zero() {
        let p = missing_pose();
        let flat = p.flatten();
        assert_eq!(flat.len(), 35);
        assert!(flat.iter().all(|&v| v == 0.0));
        assert!(p.is_valid());
        let hm = render_heatmap(&p, &HeatmapConfig::for_resolution(64));
        assert!(hm.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flatten_layout() {
        let mut kp = [[0.0; 2]; 17];
        kp[2] = [0.25, -0.5];
        let flat = PoseVector::new(kp).unwrap().flatten();
        assert_eq!(&flat[4..6], &[0.25, -0.5]);
        assert_eq!(flat[34], 1.0);
        assert_eq!(PoseVector::from_flat(&flat).unwrap().flatten(), flat);
        assert!(PoseVector::from_flat(&flat[..34]).is_err());
    }

    #[test]
    fn peak_value_on_grid_point() {
        let cfg = HeatmapConfig { sigma: 4.0, ..HeatmapConfig::for_resolution(128) };
        // grid point (40, 70)
        let p = pose_at(normalize(40.0, 128), normalize(70.0, 128));
        let hm = render_heatmap(&p, &cfg);
        let expected = 1.0 / (2.0 * PI * 16.0);
        assert!((hm.get(0, 70, 40) - expected).abs() < 1e-15);
        let chan = hm.channel(0);
        let max = chan.iter().copied().fold(0.0, f64::max);
        assert_eq!(max, hm.get(0, 70, 40));
        // one σ away along x and along y
        let ratio = (-0.5f64).exp();
        assert!((hm.get(0, 70, 44) / expected - ratio).abs() < 1e-12);
        assert!((hm.get(0, 66, 40) / expected - ratio).abs() < 1e-12);
    }

    #[test]
    fn peak_normalization_gives_unit_maximum() {
        let cfg = HeatmapConfig::for_resolution(64);
        let p = pose_at(0.1, -0.3);
        let hm = discriminator_heatmap(&p, &cfg);
        for c in 0..17 {
            let max = hm.channel(c).iter().copied().fold(0.0, f64::max);
            assert!((max - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_tie_break_and_missing() {
        let cfg = HeatmapConfig::for_resolution(32);
        let zero = Heatmap::zeros(17, 32, 32);
        assert_eq!(decode_heatmap(&zero, &cfg).unwrap(), missing_pose());
        let uniform = Heatmap { values: vec![0.5; 17 * 32 * 32], ..zero.clone() };
        let p = decode_heatmap(&uniform, &cfg).unwrap();
        assert_eq!(p.keypoint(0), [-1.0, -1.0]);
        let wrong = Heatmap::zeros(17, 16, 32);
        assert!(matches!(decode_heatmap(&wrong, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn keypoint_records_parse() {
        let kp: Vec<[f64; 2]> = (0..17).map(|i| [i as f64 * 3.0, 100.0 - i as f64]).collect();
        let recs = vec![KeypointRecord::detected(0, kp, 160, 120), KeypointRecord::missing(1, 160, 120)];
        let text = format_keypoint_records(&recs);
        assert!(text.lines().nth(1).unwrap().starts_with(r#"{"frame":1,"visible":0,"w":160"#));
        let parsed = parse_keypoint_records(&text, Path::new("v.kp")).unwrap();
        assert_eq!(parsed, recs);
        assert!(parsed[0].to_pose().unwrap().visible());
        assert_eq!(parsed[1].to_pose().unwrap(), missing_pose());
    }

    #[test]
    fn keypoint_records_errors() {
        let kp16: Vec<[f64; 2]> = vec![[1.0, 1.0]; 16];
        let text = format_keypoint_records(&[KeypointRecord::detected(0, kp16, 160, 120)]);
        assert!(matches!(parse_keypoint_records(&text, Path::new("a.kp")), Err(Error::Format(_))));
        let bad = "{\"frame\":0,\"visible\":0,\"w\":160,\"h\":120}\nnot json\n";
        match parse_keypoint_records(bad, Path::new("b.kp")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
