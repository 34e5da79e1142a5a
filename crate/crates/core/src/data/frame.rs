use image::{imageops::FilterType, RgbImage};

use crate::error::{Error, Result};
use crate::pose::PoseVector;

/// RGB frame stored channel-first (`3 × height × width`) with values in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let n = height * width;
        let mut data = Vec::with_capacity(3 * n);
        for c in rgb {
            data.extend(std::iter::repeat_n(c, n));
        }
        Self { height, width, data }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Shape(format!("{} values for a 3x{height}x{width} frame", data.len())));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let n = w * h;
        let mut data = vec![0.0; 3 * n];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..3 {
                data[c * n + i] = px.0[c] as f32 / 127.5 - 1.0;
            }
        }
        Self { height: h, width: w, data }
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let n = self.height * self.width;
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let i = y as usize * self.width + x as usize;
            let q = |c: usize| ((self.data[c * n + i] + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
            image::Rgb([q(0), q(1), q(2)])
        })
    }

    /// Bilinear resize to `width × height` (aspect ratio not preserved).
    pub fn resized(&self, height: usize, width: usize) -> Self {
        if height == self.height && width == self.width {
            return self.clone();
        }
        let img = image::imageops::resize(&self.to_rgb8(), width as u32, height as u32, FilterType::Triangle);
        Self::from_rgb8(&img)
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let n = self.height * self.width;
        let i = y * self.width + x;
        [self.data[i], self.data[n + i], self.data[2 * n + i]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f32; 3]) {
        let n = self.height * self.width;
        let i = y * self.width + x;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[c * n + i] = v;
        }
    }

    pub fn in_range(&self) -> bool {
        self.data.iter().all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn mse(&self, other: &Frame) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "frame sizes differ");
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        s / self.data.len() as f64
    }
}

/// Frames and per-frame poses of one video.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub video_id: String,
    pub frames: Vec<Frame>,
    pub poses: Vec<PoseVector>,
    pub fps: f64,
}

impl Clip {
    pub fn new(video_id: impl Into<String>, frames: Vec<Frame>, poses: Vec<PoseVector>, fps: f64) -> Result<Self> {
        let video_id = video_id.into();
        if frames.len() != poses.len() {
            return Err(Error::Ingestion(format!(
                "video {video_id}: {} frames but {} pose records",
                frames.len(),
                poses.len()
            )));
        }
        if frames.len() < 2 {
            return Err(Error::Ingestion(format!("video {video_id}: clips need at least 2 frames")));
        }
        let (h, w) = (frames[0].height, frames[0].width);
        if frames.iter().any(|f| f.height != h || f.width != w) {
            return Err(Error::Ingestion(format!("video {video_id}: frames differ in resolution")));
        }
        Ok(Self { video_id, frames, poses, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.frames[0].height, self.frames[0].width)
    }
}
