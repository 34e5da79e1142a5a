use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::diagnostics::SwapDiagnostics;
use super::model::Renderer;
use crate::data::{pair_in_clip, Clip, FramePair};
use crate::error::{Error, Result};

/// Which frame pairs the reconstruction error is measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub pairs_per_clip: usize,
    /// Offsets are drawn from `[-window, window] \ {0}`, shrunk for short clips.
    pub window: usize,
    pub seed: u64,
    /// Reconstruct `I^t` from the content of `I^{t+k}`; otherwise from `I^t` itself.
    pub temporal_shift: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { pairs_per_clip: 10, window: 3, seed: 0, temporal_shift: true }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_clip == 0 {
            return Err(Error::config("eval.pairs_per_clip", "must be at least 1"));
        }
        if self.window == 0 {
            return Err(Error::config("eval.window", "must be at least 1"));
        }
        Ok(())
    }
}

/// Quantiles of the per-clip errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distribution {
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
    pub std: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        // linear interpolation between closest ranks
        let q = |p: f64| {
            let r = p * (v.len() - 1) as f64;
            let (lo, hi) = (r.floor() as usize, r.ceil() as usize);
            v[lo] + (r - lo as f64) * (v[hi] - v[lo])
        };
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        Some(Self { min: v[0], p25: q(0.25), median: q(0.5), p75: q(0.75), max: v[v.len() - 1], std: var.sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub method: String,
    pub protocol: EvalConfig,
    /// Per-pixel mean squared error over every evaluated pair.
    pub mse: f64,
    pub n_pairs: usize,
    pub per_clip: BTreeMap<String, f64>,
    pub distribution: Distribution,
    /// Content and pose scores, present for synthetic data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<SwapDiagnostics>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("eval report: {e}")))
    }
}

/// RNG for one clip, independent of where the clip sits in the dataset.
fn clip_rng(seed: u64, video_id: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(video_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(seed ^ u64::from_le_bytes(bytes))
}

/// The evaluation pairs of one clip (`clip` is its index in the caller's slice).
pub fn eval_pairs(cfg: &EvalConfig, clip_index: usize, clip: &Clip) -> Vec<FramePair> {
    let mut rng = clip_rng(cfg.seed, &clip.video_id);
    let window = cfg.window.min(clip.len() - 1);
    (0..cfg.pairs_per_clip).map(|_| pair_in_clip(&mut rng, clip_index, clip.len(), window)).collect()
}

/// Mean squared error of `‖I^t − G(F_content(I^{t+k}), Z^t)‖²` over seeded pairs of every clip.
pub fn evaluate_mse(renderer: &dyn Renderer, clips: &[Clip], cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    if clips.is_empty() {
        return Err(Error::Sampling("evaluation set is empty".into()));
    }
    let mut per_clip = BTreeMap::new();
    let mut pair_errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (ci, clip) in clips.iter().enumerate() {
        let pairs = eval_pairs(cfg, ci, clip);
        let targets: Vec<_> = pairs.iter().map(|p| p.anchor().frame(clips)).collect();
        let content: Vec<_> = if cfg.temporal_shift {
            pairs.iter().map(|p| p.offset().frame(clips)).collect()
        } else {
            targets.clone()
        };
        let poses: Vec<_> = pairs.iter().map(|p| p.anchor().pose(clips)).collect();
        let out = renderer.render(&content, &targets, &poses)?;
        let errs: Vec<f64> = out.iter().zip(&targets).map(|(o, t)| o.mse(t)).collect();
        if let Some(bad) = errs.iter().find(|e| !e.is_finite()) {
            return Err(Error::NonFinite(format!("reconstruction error {bad} on {}", clip.video_id)));
        }
        if pair_errors.insert(clip.video_id.clone(), errs).is_some() {
            return Err(Error::Sampling(format!("video {} appears twice", clip.video_id)));
        }
    }
    // aggregate in video-id order so the result does not depend on clip order
    let mut total = 0.0;
    let mut n_pairs = 0;
    for (id, errs) in &pair_errors {
        total += errs.iter().sum::<f64>();
        n_pairs += errs.len();
        per_clip.insert(id.clone(), errs.iter().sum::<f64>() / errs.len() as f64);
    }
    let values: Vec<f64> = per_clip.values().copied().collect();
    Ok(EvalReport {
        method: renderer.name(),
        protocol: *cfg,
        mse: total / n_pairs as f64,
        n_pairs,
        distribution: Distribution::of(&values).expect("at least one clip"),
        per_clip,
        diagnostics: None,
    })
}
