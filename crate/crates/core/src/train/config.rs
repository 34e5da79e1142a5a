use poseswap_grad::AdamConfig;
use serde::{Deserialize, Serialize};

use crate::data::SamplerConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::method::Method;
use crate::nets::NetConfig;

/// Adam moment coefficients; the learning rate lives on [`MethodConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub method: Method,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Seeds network initialization.
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    /// Peak-normalize heatmaps before they enter the pose discriminator.
    pub heatmap_peak_normalize: bool,
    pub optimizer: OptimizerConfig,
    pub weights: LossWeights,
    pub sampler: SamplerConfig,
    pub net: NetConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            method: Method::DisentangledPretrainedPose,
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
            d_steps_per_g_step: 1,
            heatmap_peak_normalize: true,
            optimizer: OptimizerConfig::default(),
            weights: LossWeights::default(),
            sampler: SamplerConfig::default(),
            net: NetConfig::default(),
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", format!("must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.d_steps_per_g_step < 1 {
            return Err(Error::config("d_steps_per_g_step", "must be at least 1"));
        }
        let o = &self.optimizer;
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return Err(Error::config("optimizer", "betas must lie in [0, 1) and eps must be positive"));
        }
        self.weights.validate()?;
        self.net.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            eps: self.optimizer.eps,
        }
    }

    /// Sets both the initialization and the sampler seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sampler.seed = seed;
        self
    }
}
