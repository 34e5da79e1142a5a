use poseswap_grad::Tensor;

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::nets::{frames_tensor, tensor_frames, Models};
use crate::pose::PoseVector;
use crate::train::{Checkpoint, ModelKind};

/// Renders `G(content code of content[i], pose code of pose_frames[i] / poses[i])`.
pub trait Renderer {
    fn name(&self) -> String;

    /// Side length of the square frames accepted.
    fn resolution(&self) -> usize;

    fn render(&self, content: &[&Frame], pose_frames: &[&Frame], poses: &[&PoseVector]) -> Result<Vec<Frame>>;

    /// Check that frames of `height × width` can be processed.
    fn check_resolution(&self, height: usize, width: usize) -> Result<()> {
        let r = self.resolution();
        if (height, width) != (r, r) {
            return Err(Error::config(
                "resolution",
                format!("checkpoint expects {r}x{r} frames, input is {height}x{width}"),
            ));
        }
        Ok(())
    }
}

/// A trained model or the identity oracle, as stored in a checkpoint.
#[derive(Clone, Debug)]
pub enum Reconstructor {
    Model(Box<Models<f32>>),
    /// Returns the pose frame itself. Under the temporal-shifted protocol the
    /// pose frame is the target, so this scores exactly zero.
    IdentityOracle { resolution: usize },
}

impl Reconstructor {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        match ckpt.meta.method {
            ModelKind::IdentityOracle => Ok(Self::IdentityOracle { resolution: ckpt.meta.net.in_resolution }),
            ModelKind::Trained(_) => ckpt
                .models
                .clone()
                .map(|m| Self::Model(Box::new(m)))
                .ok_or_else(|| Error::Checkpoint("checkpoint holds no networks".into())),
        }
    }

    /// Frames per forward pass.
    pub const BATCH: usize = 32;
}

impl Renderer for Reconstructor {
    fn name(&self) -> String {
        match self {
            Self::Model(m) => m.method.name().to_string(),
            Self::IdentityOracle { .. } => crate::train::IDENTITY_ORACLE.to_string(),
        }
    }

    fn resolution(&self) -> usize {
        match self {
            Self::Model(m) => m.cfg.in_resolution,
            Self::IdentityOracle { resolution } => *resolution,
        }
    }

    fn render(&self, content: &[&Frame], pose_frames: &[&Frame], poses: &[&PoseVector]) -> Result<Vec<Frame>> {
        if content.len() != pose_frames.len() || content.len() != poses.len() {
            return Err(Error::Shape("content, pose frames and poses differ in length".into()));
        }
        for f in content.iter().chain(pose_frames) {
            self.check_resolution(f.height, f.width)?;
        }
        match self {
            Self::IdentityOracle { .. } => Ok(pose_frames.iter().map(|&f| f.clone()).collect()),
            Self::Model(m) => {
                let mut out = Vec::with_capacity(content.len());
                for start in (0..content.len()).step_by(Self::BATCH) {
                    let end = (start + Self::BATCH).min(content.len());
                    let code = m.encode_content(&frames_tensor::<f32>(&content[start..end])?)?;
                    let z: Tensor<f32> = m.pose_input(&pose_frames[start..end], &poses[start..end])?;
                    out.extend(tensor_frames(&m.generate(&code, &z)?));
                }
                Ok(out)
            }
        }
    }
}
