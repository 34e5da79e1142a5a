//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use poseswap_core::data::{generate_synthetic, Clip, SyntheticConfig, SyntheticTruth};
use poseswap_core::method::Method;
use poseswap_core::nets::{self, Models, NetConfig};
use poseswap_core::pose::{denormalize, HeatmapConfig, PoseVector};
use poseswap_core::train::MethodConfig;
use poseswap_grad::{Bound, Graph, ParamSet, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 8×8 input, two layers.
pub fn tiny_net() -> NetConfig {
    NetConfig {
        in_resolution: 8,
        base_channels: 3,
        n_layers: 2,
        content_dim: 6,
        pose_dim: 4,
        embed_dim: 5,
        ..Default::default()
    }
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Per-pixel Gaussian density straight from the definition.
pub fn brute_force_heatmap(pose: &PoseVector, cfg: &HeatmapConfig) -> Vec<f64> {
    let mut out = vec![0.0; cfg.channels * cfg.height * cfg.width];
    if !pose.visible() {
        return out;
    }
    let s2 = cfg.sigma * cfg.sigma;
    for c in 0..cfg.channels {
        let [x, y] = pose.keypoint(c);
        let (cx, cy) = (denormalize(x, cfg.width), denormalize(y, cfg.height));
        for py in 0..cfg.height {
            for px in 0..cfg.width {
                let d2 = (px as f64 - cx).powi(2) + (py as f64 - cy).powi(2);
                out[(c * cfg.height + py) * cfg.width + px] = (-d2 / (2.0 * s2)).exp() / (2.0 * PI * s2);
            }
        }
    }
    out
}

/// Inputs shared by every network loss of a gradient check.
pub struct Probe {
    pub frames: Tensor<f64>,
    pub frames2: Tensor<f64>,
    pub heatmaps: Tensor<f64>,
    pub pose_codes: [Tensor<f64>; 2],
    pub keypoints: Tensor<f64>,
    seed: u64,
}

impl Probe {
    pub fn new(cfg: &NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = cfg.in_resolution;
        Self {
            frames: uniform(&mut rng, &[2, 3, r, r], -1.0, 1.0),
            frames2: uniform(&mut rng, &[2, 3, r, r], -1.0, 1.0),
            heatmaps: uniform(&mut rng, &[2, 17, r, r], 0.0, 1.0),
            pose_codes: [uniform(&mut rng, &[2, cfg.pose_dim], -1.0, 1.0), uniform(&mut rng, &[2, cfg.pose_dim], -1.0, 1.0)],
            keypoints: uniform(&mut rng, &[2, 35], -1.0, 1.0),
            seed,
        }
    }

    /// `Σ w ⊙ y` with fixed random weights `w`, reducing any output to a scalar.
    fn project(&self, g: &mut Graph<f64>, y: Var, salt: u64) -> Var {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (salt.wrapping_mul(0x9E37_79B9)));
        let w = uniform(&mut rng, g.shape(y), -1.0, 1.0);
        let w = g.constant(w);
        let p = g.mul(y, w);
        g.sum(p)
    }

    /// Scalar output of network `name` in `m`, with that network's weights taken from `params`.
    pub fn loss(&self, m: &Models<f64>, name: &str, params: &ParamSet<f64>, trainable: bool) -> (Graph<f64>, Var, Bound) {
        let mut g = Graph::new();
        let p = params.bind(&mut g, trainable);
        let x = g.constant(self.frames.clone());
        let out = match name {
            nets::CONTENT_ENCODER => {
                let code = m.content_encoder.forward(&mut g, &p, x).unwrap();
                let parts: Vec<Var> = code.all().collect();
                let mut total = self.project(&mut g, parts[0], 0);
                for (i, &v) in parts.iter().enumerate().skip(1) {
                    let s = self.project(&mut g, v, i as u64);
                    total = g.add(total, s);
                }
                total
            }
            nets::GENERATOR => {
                let pe = m.content_encoder.params.bind(&mut g, false);
                let code = m.content_encoder.forward(&mut g, &pe, x).unwrap();
                let z = if m.method.learns_pose() { self.pose_codes[0].clone() } else { self.keypoints.clone() };
                let z = g.constant(z);
                let y = m.generator.forward(&mut g, &p, &code, z).unwrap();
                self.project(&mut g, y, 10)
            }
            nets::POSE_ENCODER => {
                let y = m.pose_encoder.as_ref().unwrap().forward(&mut g, &p, x).unwrap();
                self.project(&mut g, y, 20)
            }
            nets::SCENE_DISCRIMINATOR => {
                let z1 = g.constant(self.pose_codes[0].clone());
                let z2 = g.constant(self.pose_codes[1].clone());
                let y = m.scene_discriminator.as_ref().unwrap().discriminate(&mut g, &p, z1, z2).unwrap();
                self.project(&mut g, y, 30)
            }
            nets::POSE_DISCRIMINATOR => {
                let h = g.constant(self.heatmaps.clone());
                let xin = g.concat(&[x, h]);
                let y = m.pose_discriminator.as_ref().unwrap().discriminate(&mut g, &p, xin).unwrap();
                self.project(&mut g, y, 40)
            }
            nets::CONTENT_DISCRIMINATOR => {
                let x2 = g.constant(self.frames2.clone());
                let xin = g.concat(&[x, x2]);
                let y = m.content_discriminator.as_ref().unwrap().discriminate(&mut g, &p, xin).unwrap();
                self.project(&mut g, y, 50)
            }
            nets::CONTENT_EMBEDDER => {
                let y = m.content_embedder.as_ref().unwrap().forward(&mut g, &p, x).unwrap();
                self.project(&mut g, y, 60)
            }
            other => panic!("unknown network {other}"),
        };
        (g, out, p)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
}

/// Compare analytic gradients of network `name` against central differences
/// on `samples` parameters drawn uniformly over all of its scalars.
pub fn check_network_gradients(m: &Models<f64>, name: &str, probe: &Probe, samples: usize, seed: u64) -> GradCheck {
    let params = m.networks().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p.clone()).unwrap();
    let (g, loss, bound) = probe.loss(m, name, &params, true);
    let grads = g.backward(loss);
    let analytic = bound.grads(&grads, &params);
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut max_rel_err: f64 = 0.0;
    let n = samples.min(total);
    for _ in 0..n {
        let mut flat = rng.random_range(0..total);
        let mut ti = 0;
        while flat >= sizes[ti] {
            flat -= sizes[ti];
            ti += 1;
        }
        let eval = |delta: f64| {
            let mut p = params.clone();
            p.tensors_mut()[ti].data_mut()[flat] += delta;
            let (g, y, _) = probe.loss(m, name, &p, false);
            g.value(y).item()
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let a = analytic[ti].data()[flat];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        max_rel_err = max_rel_err.max(err);
    }
    GradCheck { checked: n, max_rel_err }
}

/// Every `(method, network)` combination, each network checked once.
pub fn all_networks() -> Vec<(Method, &'static str)> {
    vec![
        (Method::DisentangledPretrainedPose, nets::CONTENT_ENCODER),
        (Method::DisentangledPretrainedPose, nets::GENERATOR),
        (Method::DisentangledBaseline, nets::GENERATOR),
        (Method::DisentangledBaseline, nets::POSE_ENCODER),
        (Method::DisentangledBaseline, nets::SCENE_DISCRIMINATOR),
        (Method::Cgan, nets::POSE_DISCRIMINATOR),
        (Method::Cgan, nets::CONTENT_DISCRIMINATOR),
        (Method::CganTriplet, nets::CONTENT_EMBEDDER),
    ]
}

/// Small synthetic set for training tests.
pub fn small_synthetic(n_clips: usize, frames: usize, resolution: usize) -> (Vec<Clip>, SyntheticTruth) {
    generate_synthetic(&SyntheticConfig { n_clips, frames_per_clip: frames, resolution, ..Default::default() }).unwrap()
}

/// Quick training config at 32×32.
pub fn quick_config(method: Method) -> MethodConfig {
    MethodConfig {
        method,
        epochs: 2,
        batch_size: 4,
        net: NetConfig { in_resolution: 32, base_channels: 4, n_layers: 3, content_dim: 16, pose_dim: 6, embed_dim: 8, ..Default::default() },
        ..Default::default()
    }
}
