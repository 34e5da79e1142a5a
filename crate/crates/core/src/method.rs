use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four training procedures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Learned pose encoder with an adversarial scene discriminator.
    DisentangledBaseline,
    /// Fixed keypoint poses; content encoder and generator only.
    DisentangledPretrainedPose,
    /// Pose and content discriminators.
    Cgan,
    /// Pose discriminator plus a triplet content embedder.
    CganTriplet,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::DisentangledBaseline, Method::DisentangledPretrainedPose, Method::Cgan, Method::CganTriplet];

    pub fn name(self) -> &'static str {
        match self {
            Method::DisentangledBaseline => "disentangled_baseline",
            Method::DisentangledPretrainedPose => "disentangled_pretrained_pose",
            Method::Cgan => "cgan",
            Method::CganTriplet => "cgan_triplet",
        }
    }

    /// Whether pose comes from a learned encoder rather than keypoints.
    pub fn learns_pose(self) -> bool {
        self == Method::DisentangledBaseline
    }

    pub fn is_gan(self) -> bool {
        matches!(self, Method::Cgan | Method::CganTriplet)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::config("method", format!("unknown method `{s}`; expected one of {}", names.join(", ")))
        })
    }
}
