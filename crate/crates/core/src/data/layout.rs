//! On-disk dataset layout: `<root>/<video_id>/frame_%06d.png` plus
//! `<root>/<video_id>.kp`, shared by KTH ingestion and the synthetic generator.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::{Clip, Frame};
use crate::error::{Error, Result};
use crate::pose::{self, read_keypoint_records, KeypointRecord, PoseVector};

const DEFAULT_FPS: f64 = 25.0;

/// Subject-disjoint KTH split: subjects 1–16 train, 17–25 test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    All,
}

impl Split {
    pub fn contains_subject(self, subject: u32) -> bool {
        match self {
            Split::Train => (1..=16).contains(&subject),
            Split::Test => (17..=25).contains(&subject),
            Split::All => true,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            other => Err(Error::config("split", format!("unknown split `{other}` (train|test|all)"))),
        }
    }
}

/// Subject number of a KTH video id such as `person07_walking_d1`.
pub fn subject_id(video_id: &str) -> Option<u32> {
    let rest = video_id.strip_prefix("person")?;
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn frame_path(root: &Path, video_id: &str, index: usize) -> PathBuf {
    root.join(video_id).join(format!("frame_{index:06}.png"))
}

fn video_ids(root: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

/// Rescale a pose given on a `from_w × from_h` grid onto `to_w × to_h`,
/// following pixel-center alignment of the image resize.
fn rescale_pose(rec: &KeypointRecord, to_w: usize, to_h: usize) -> Result<PoseVector> {
    let Some(kp) = rec.kp.as_ref().filter(|_| rec.visible == 1) else {
        return rec.to_pose();
    };
    if rec.w == to_w && rec.h == to_h {
        return rec.to_pose();
    }
    let sx = to_w as f64 / rec.w as f64;
    let sy = to_h as f64 / rec.h as f64;
    let moved: Vec<[f64; 2]> = kp.iter().map(|&[x, y]| [(x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5]).collect();
    pose::normalize_keypoints(&moved, to_w, to_h)
}

/// Read one video folder and its keypoint file, resizing frames to
/// `resolution × resolution` when given.
pub fn read_clip(root: &Path, video_id: &str, resolution: Option<usize>) -> Result<Clip> {
    let kp_path = root.join(format!("{video_id}.kp"));
    if !kp_path.is_file() {
        return Err(Error::Ingestion(format!("video {video_id}: missing keypoint file {}", kp_path.display())));
    }
    let records = read_keypoint_records(&kp_path)?;
    let mut frames = Vec::new();
    loop {
        let path = frame_path(root, video_id, frames.len());
        if !path.is_file() {
            break;
        }
        let img = image::open(&path).map_err(|e| Error::Image { path: path.clone(), source: e })?.to_rgb8();
        let frame = Frame::from_rgb8(&img);
        frames.push(match resolution {
            Some(r) => frame.resized(r, r),
            None => frame,
        });
    }
    if frames.len() != records.len() {
        return Err(Error::Ingestion(format!(
            "video {video_id}: {} frames but {} keypoint records",
            frames.len(),
            records.len()
        )));
    }
    let poses = records
        .iter()
        .zip(&frames)
        .map(|(rec, f)| rescale_pose(rec, f.width, f.height))
        .collect::<Result<Vec<_>>>()?;
    Clip::new(video_id, frames, poses, DEFAULT_FPS)
}

/// Every clip under `root`, sorted by video id.
pub fn load_dataset(root: &Path, resolution: Option<usize>) -> Result<Vec<Clip>> {
    let clips = video_ids(root)?
        .iter()
        .map(|id| read_clip(root, id, resolution))
        .collect::<Result<Vec<_>>>()?;
    if clips.is_empty() {
        return Err(Error::Ingestion(format!("no videos under {}", root.display())));
    }
    Ok(clips)
}

impl Split {
    /// Whether `video_id` belongs to this split; ids without a subject number only belong to `All`.
    pub fn contains_video(self, video_id: &str) -> bool {
        match self {
            Split::All => true,
            _ => subject_id(video_id).is_some_and(|s| self.contains_subject(s)),
        }
    }

    /// The clips of `clips` in this split, in their original order.
    pub fn select(self, clips: &[Clip]) -> Vec<Clip> {
        clips.iter().filter(|c| self.contains_video(&c.video_id)).cloned().collect()
    }
}

/// KTH-style dataset restricted to one subject split, resized to `resolution × resolution`.
pub fn load_kth(root: &Path, split: Split, resolution: usize) -> Result<Vec<Clip>> {
    let mut clips = Vec::new();
    for id in video_ids(root)? {
        let keep = match split {
            Split::All => true,
            _ => {
                let subject = subject_id(&id)
                    .ok_or_else(|| Error::Ingestion(format!("video {id}: cannot determine subject id")))?;
                split.contains_subject(subject)
            }
        };
        if keep {
            clips.push(read_clip(root, &id, Some(resolution))?);
        }
    }
    if clips.is_empty() {
        return Err(Error::Ingestion(format!("split {split:?} of {} is empty", root.display())));
    }
    Ok(clips)
}

/// Write clips in the standard layout; keypoints are stored in pixel
/// coordinates of the written frames.
pub fn write_dataset(root: &Path, clips: &[Clip]) -> Result<()> {
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for clip in clips {
        let dir = root.join(&clip.video_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (i, frame) in clip.frames.iter().enumerate() {
            let path = frame_path(root, &clip.video_id, i);
            frame.to_rgb8().save(&path).map_err(|e| Error::Image { path: path.clone(), source: e })?;
        }
        let records: Vec<KeypointRecord> = clip
            .poses
            .iter()
            .zip(&clip.frames)
            .enumerate()
            .map(|(i, (p, f))| KeypointRecord::from_pose(i, p, f.width, f.height))
            .collect();
        pose::write_keypoint_file(&root.join(format!("{}.kp", clip.video_id)), &records)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subject_ids_and_splits() {
        assert_eq!(subject_id("person07_walking_d1"), Some(7));
        assert_eq!(subject_id("person25_boxing_d4"), Some(25));
        assert_eq!(subject_id("synth_00001"), None);
        assert!(Split::Train.contains_subject(16) && !Split::Train.contains_subject(17));
        assert!(Split::Test.contains_subject(17) && !Split::Test.contains_subject(16));
        for s in 1..=25 {
            assert!(Split::Train.contains_subject(s) != Split::Test.contains_subject(s));
        }
    }

    #[test]
    fn rescale_keeps_pixel_centers_aligned() {
        // the center of a 160x120 frame stays at the center of a 64x64 frame
        let rec = KeypointRecord::detected(0, vec![[79.5, 59.5]; 17], 160, 120);
        let p = rescale_pose(&rec, 64, 64).unwrap();
        assert!(p.keypoint(0)[0].abs() < 1e-12 && p.keypoint(0)[1].abs() < 1e-12);
    }
}
