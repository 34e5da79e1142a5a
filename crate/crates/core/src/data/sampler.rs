use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Clip, Frame};
use crate::error::{Error, Result};
use crate::pose::PoseVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Offsets are drawn from `[-window, window] \ {0}`.
    pub window: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { window: 3, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self, clips: &[Clip]) -> Result<()> {
        if self.window < 1 {
            return Err(Error::config("sampler.window", "must be at least 1"));
        }
        if let Some(shortest) = clips.iter().map(Clip::len).min() {
            if self.window >= shortest {
                return Err(Error::config(
                    "sampler.window",
                    format!("window {} must be shorter than the shortest clip ({shortest} frames)", self.window),
                ));
            }
        }
        Ok(())
    }
}

/// A frame of a clip, by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameRef {
    pub clip: usize,
    pub t: usize,
}

impl FrameRef {
    pub fn frame<'a>(&self, clips: &'a [Clip]) -> &'a Frame {
        &clips[self.clip].frames[self.t]
    }

    pub fn pose<'a>(&self, clips: &'a [Clip]) -> &'a PoseVector {
        &clips[self.clip].poses[self.t]
    }
}

/// Two frames of one video, `k` steps apart (0-based `t`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FramePair {
    pub clip: usize,
    pub t: usize,
    pub k: isize,
}

impl FramePair {
    pub fn anchor(&self) -> FrameRef {
        FrameRef { clip: self.clip, t: self.t }
    }

    pub fn offset(&self) -> FrameRef {
        FrameRef { clip: self.clip, t: (self.t as isize + self.k) as usize }
    }

    pub fn video_id<'a>(&self, clips: &'a [Clip]) -> &'a str {
        &clips[self.clip].video_id
    }
}

/// Uniform `t` in a clip of `len ≥ 2` frames, then a uniform nonzero offset
/// `k ∈ [-window, window]` keeping `t + k` in range.
pub fn pair_in_clip(rng: &mut impl Rng, clip: usize, len: usize, window: usize) -> FramePair {
    assert!(len >= 2 && window >= 1, "pairs need a clip of 2+ frames and a positive window");
    let t = rng.random_range(0..len);
    let w = window as isize;
    let lo = (-w).max(-(t as isize));
    let hi = w.min((len - 1 - t) as isize);
    // nonzero offsets in [lo, hi]; there is at least one since len ≥ 2
    let choices = (hi - lo) as usize;
    let mut k = lo + rng.random_range(0..choices) as isize;
    if k >= 0 {
        k += 1;
    }
    FramePair { clip, t, k }
}

/// Position of a sampler's random stream, enough to resume it exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    pub seed: u64,
    pub word_pos: u128,
}

/// Deterministic stream of temporal pairs. One instance per worker.
#[derive(Clone, Debug)]
pub struct PairSampler {
    window: usize,
    seed: u64,
    rng: ChaCha8Rng,
}

impl PairSampler {
    pub fn new(cfg: SamplerConfig) -> Self {
        Self { window: cfg.window, seed: cfg.seed, rng: ChaCha8Rng::seed_from_u64(cfg.seed) }
    }

    /// Sampler for worker `index`, seeded with `seed + index`.
    pub fn for_worker(cfg: SamplerConfig, index: u64) -> Self {
        Self::new(SamplerConfig { seed: cfg.seed.wrapping_add(index), ..cfg })
    }

    pub fn state(&self) -> SamplerState {
        SamplerState { seed: self.seed, word_pos: self.rng.get_word_pos() }
    }

    pub fn restore(window: usize, state: SamplerState) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_word_pos(state.word_pos);
        Self { window, seed: state.seed, rng }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn pair_in(&mut self, clip: usize, len: usize) -> FramePair {
        pair_in_clip(&mut self.rng, clip, len, self.window)
    }

    /// A uniformly chosen clip, then `t` and a nonzero offset `k` with both frames in range.
    pub fn sample_pair(&mut self, clips: &[Clip]) -> Result<FramePair> {
        if clips.is_empty() {
            return Err(Error::Sampling("no clips to sample from".into()));
        }
        let clip = self.rng.random_range(0..clips.len());
        let len = clips[clip].len();
        if len < 2 {
            return Err(Error::Sampling(format!("clip {} has fewer than 2 frames", clips[clip].video_id)));
        }
        Ok(self.pair_in(clip, len))
    }

    /// [`PairSampler::sample_pair`] plus one frame drawn from a different video.
    pub fn sample_negative_pair(&mut self, clips: &[Clip]) -> Result<(FramePair, FrameRef)> {
        if clips.len() < 2 {
            return Err(Error::Sampling(format!("negative sampling needs at least 2 clips, got {}", clips.len())));
        }
        let pair = self.sample_pair(clips)?;
        let mut other = self.rng.random_range(0..clips.len() - 1);
        if other >= pair.clip {
            other += 1;
        }
        let t = self.rng.random_range(0..clips[other].len());
        Ok((pair, FrameRef { clip: other, t }))
    }
}
