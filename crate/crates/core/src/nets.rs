//! Parameterized networks.
//!
//! Every network owns a [`ParamSet`] and exposes a `forward` that records its
//! computation on a caller-supplied [`Graph`]. Training binds the parameter
//! sets it wants to update as trainable leaves and the rest as constants, so
//! freezing a network is a property of the binding, not of the network.
//!
//! All convolutions use 4×4 kernels with stride 2 and padding 1, so every
//! layer halves (or, transposed, doubles) the spatial size.

use poseswap_grad::{Bound, Graph, ParamId, ParamSet, Scalar, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Frame;
use crate::error::{Error, Result};
use crate::method::Method;
use crate::pose::{Heatmap, PoseVector, NUM_KEYPOINTS, POSE_DIM};

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_STD: f64 = 0.02;
/// Discriminator outputs lie in `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-6;
pub const LEAKY_SLOPE: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;
const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;
/// Hidden width of the scene discriminator.
pub const SCENE_HIDDEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Instance,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    LeakyRelu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub in_resolution: usize,
    pub base_channels: usize,
    pub n_layers: usize,
    /// Channel cap, which is also the bottleneck width once the schedule saturates.
    pub content_dim: usize,
    /// Width of the learned pose code.
    pub pose_dim: usize,
    /// Width of the triplet content embedding.
    pub embed_dim: usize,
    /// Normalization inside the generator's decoder.
    pub norm_kind: NormKind,
    /// Activation inside the generator's decoder.
    pub nonlinearity_kind: Nonlinearity,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            in_resolution: 64,
            base_channels: 32,
            n_layers: 6,
            content_dim: 512,
            pose_dim: 16,
            embed_dim: 64,
            norm_kind: NormKind::Instance,
            nonlinearity_kind: Nonlinearity::Relu,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers < 2 {
            return Err(Error::config("net.n_layers", "must be at least 2"));
        }
        if self.n_layers >= usize::BITS as usize - 1 {
            return Err(Error::config("net.n_layers", "too deep"));
        }
        let div = 1usize << self.n_layers;
        if self.in_resolution == 0 || self.in_resolution % div != 0 {
            return Err(Error::config(
                "net.in_resolution",
                format!("{} is not divisible by 2^n_layers = {div}", self.in_resolution),
            ));
        }
        for (field, v) in [
            ("net.base_channels", self.base_channels),
            ("net.content_dim", self.content_dim),
            ("net.pose_dim", self.pose_dim),
            ("net.embed_dim", self.embed_dim),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        Ok(())
    }

    /// Channels produced by encoder layer `level`.
    pub fn channels(&self, level: usize) -> usize {
        let mut c = self.base_channels;
        for _ in 0..level {
            c = c.saturating_mul(2);
        }
        c.min(self.content_dim)
    }

    /// Spatial size after encoder layer `level`.
    pub fn resolution(&self, level: usize) -> usize {
        self.in_resolution >> (level + 1)
    }

    /// `[channels, height, width]` of the content bottleneck.
    pub fn bottleneck_shape(&self) -> [usize; 3] {
        let l = self.n_layers - 1;
        [self.channels(l), self.resolution(l), self.resolution(l)]
    }

    /// Shapes of the skip features, highest resolution first.
    pub fn skip_shapes(&self) -> Vec<[usize; 3]> {
        (0..self.n_layers - 1).map(|l| [self.channels(l), self.resolution(l), self.resolution(l)]).collect()
    }

    fn trunk_features(&self) -> usize {
        let [c, h, w] = self.bottleneck_shape();
        c * h * w
    }
}

/// Width of the pose input the generator expects for `method`.
pub fn generator_pose_dim(method: Method, cfg: &NetConfig) -> usize {
    if method.learns_pose() {
        cfg.pose_dim
    } else {
        POSE_DIM
    }
}

struct Init {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
}

impl Init {
    fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), normal: Normal::new(0.0, INIT_STD).expect("valid std") }
    }

    fn normal<T: Scalar>(&mut self, shape: &[usize]) -> Tensor<T> {
        let n = shape.iter().product();
        let data: Vec<T> = (0..n).map(|_| T::from_f64_lossy(self.normal.sample(&mut self.rng))).collect();
        Tensor::from_vec(shape, data)
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

fn conv_layer<T: Scalar>(ps: &mut ParamSet<T>, init: &mut Init, name: &str, c_in: usize, c_out: usize) -> Layer {
    let w = ps.add(format!("{name}/weight"), init.normal(&[c_out, c_in, KERNEL, KERNEL]));
    let b = ps.add(format!("{name}/bias"), Tensor::zeros(&[c_out]));
    Layer { w, b }
}

fn tconv_layer<T: Scalar>(ps: &mut ParamSet<T>, init: &mut Init, name: &str, c_in: usize, c_out: usize) -> Layer {
    let w = ps.add(format!("{name}/weight"), init.normal(&[c_in, c_out, KERNEL, KERNEL]));
    let b = ps.add(format!("{name}/bias"), Tensor::zeros(&[c_out]));
    Layer { w, b }
}

fn dense_layer<T: Scalar>(ps: &mut ParamSet<T>, init: &mut Init, name: &str, d_in: usize, d_out: usize) -> Layer {
    let w = ps.add(format!("{name}/weight"), init.normal(&[d_out, d_in]));
    let b = ps.add(format!("{name}/bias"), Tensor::zeros(&[d_out]));
    Layer { w, b }
}

fn norm_layer<T: Scalar>(ps: &mut ParamSet<T>, name: &str, c: usize) -> Norm {
    let gamma = ps.add(format!("{name}/gamma"), Tensor::full(&[c], T::one()));
    let beta = ps.add(format!("{name}/beta"), Tensor::zeros(&[c]));
    Norm { gamma, beta }
}

fn conv<T: Scalar>(g: &mut Graph<T>, p: &Bound, l: Layer, x: Var) -> Var {
    g.conv2d(x, p.var(l.w), Some(p.var(l.b)), STRIDE, PAD)
}

fn tconv<T: Scalar>(g: &mut Graph<T>, p: &Bound, l: Layer, x: Var) -> Var {
    g.conv_transpose2d(x, p.var(l.w), Some(p.var(l.b)), STRIDE, PAD)
}

fn dense<T: Scalar>(g: &mut Graph<T>, p: &Bound, l: Layer, x: Var) -> Var {
    g.linear(x, p.var(l.w), Some(p.var(l.b)))
}

/// Map logits into `[PROB_EPS, 1 - PROB_EPS]`, strictly inside `(0, 1)`.
pub fn probability<T: Scalar>(g: &mut Graph<T>, logits: Var) -> Var {
    let s = g.sigmoid(logits);
    let s = g.scale(s, 1.0 - 2.0 * PROB_EPS);
    g.offset(s, PROB_EPS)
}

fn check_input<T: Scalar>(g: &Graph<T>, x: Var, channels: usize, resolution: usize, what: &str) -> Result<usize> {
    let s = g.shape(x);
    if s.len() != 4 || s[1] != channels || s[2] != resolution || s[3] != resolution {
        return Err(Error::Shape(format!(
            "{what} expects [n, {channels}, {resolution}, {resolution}], got {s:?}"
        )));
    }
    Ok(s[0])
}

/// Content code as graph nodes.
#[derive(Clone, Debug)]
pub struct CodeVars {
    pub bottleneck: Var,
    /// Highest resolution first.
    pub skips: Vec<Var>,
}

impl CodeVars {
    pub fn all(&self) -> impl Iterator<Item = Var> + '_ {
        std::iter::once(self.bottleneck).chain(self.skips.iter().copied())
    }
}

/// Content code values for a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentCode<T> {
    pub bottleneck: Tensor<T>,
    pub skips: Vec<Tensor<T>>,
}

impl<T: Scalar> ContentCode<T> {
    pub fn batch_len(&self) -> usize {
        self.bottleneck.shape()[0]
    }

    pub fn from_graph(g: &Graph<T>, code: &CodeVars) -> Self {
        Self {
            bottleneck: g.value(code.bottleneck).clone(),
            skips: code.skips.iter().map(|&s| g.value(s).clone()).collect(),
        }
    }

    /// Place the code on `g` as constants.
    pub fn to_graph(&self, g: &mut Graph<T>) -> CodeVars {
        CodeVars {
            bottleneck: g.constant(self.bottleneck.clone()),
            skips: self.skips.iter().map(|s| g.constant(s.clone())).collect(),
        }
    }

    /// Repeat sample `i` `n` times.
    pub fn repeat(&self, i: usize, n: usize) -> Self {
        let rep = |t: &Tensor<T>| {
            let one = t.slice_outer(i, i + 1);
            Tensor::stack_outer(&vec![&one; n])
        };
        Self { bottleneck: rep(&self.bottleneck), skips: self.skips.iter().map(rep).collect() }
    }
}

/// `F_content`: strided convolutions producing a bottleneck and a skip stack.
#[derive(Clone, Debug)]
pub struct ContentEncoder<T> {
    pub params: ParamSet<T>,
    cfg: NetConfig,
    layers: Vec<Layer>,
}

impl<T: Scalar> ContentEncoder<T> {
    fn build(cfg: &NetConfig, init: &mut Init) -> Self {
        let mut params = ParamSet::new();
        let mut c_in = 3;
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let c_out = cfg.channels(l);
                let layer = conv_layer(&mut params, init, &format!("conv{l}"), c_in, c_out);
                c_in = c_out;
                layer
            })
            .collect();
        Self { params, cfg: cfg.clone(), layers }
    }

    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, frames: Var) -> Result<CodeVars> {
        check_input(g, frames, 3, self.cfg.in_resolution, "content encoder")?;
        let mut h = frames;
        let mut skips = Vec::with_capacity(self.layers.len() - 1);
        for (l, &layer) in self.layers.iter().enumerate() {
            h = conv(g, p, layer, h);
            h = g.leaky_relu(h, LEAKY_SLOPE);
            if l + 1 < self.layers.len() {
                skips.push(h);
            }
        }
        Ok(CodeVars { bottleneck: h, skips })
    }
}

/// Decoder `G`: the pose vector is broadcast over the bottleneck grid and
/// concatenated to it; each upsampling stage then concatenates the content
/// skip of matching resolution.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub params: ParamSet<T>,
    cfg: NetConfig,
    pose_in: usize,
    layers: Vec<Layer>,
    norms: Vec<Norm>,
}

impl<T: Scalar> Generator<T> {
    fn build(cfg: &NetConfig, pose_in: usize, init: &mut Init) -> Self {
        let mut params = ParamSet::new();
        let n = cfg.n_layers;
        let mut layers = Vec::with_capacity(n);
        let mut norms = Vec::new();
        for j in 0..n {
            let level = n - 1 - j;
            let c_in = if j == 0 { cfg.channels(level) + pose_in } else { 2 * cfg.channels(level) };
            let c_out = if level == 0 { 3 } else { cfg.channels(level - 1) };
            layers.push(tconv_layer(&mut params, init, &format!("deconv{j}"), c_in, c_out));
            if level > 0 && cfg.norm_kind == NormKind::Instance {
                norms.push(norm_layer(&mut params, &format!("norm{j}"), c_out));
            }
        }
        Self { params, cfg: cfg.clone(), pose_in, layers, norms }
    }

    pub fn pose_dim(&self) -> usize {
        self.pose_in
    }

    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, code: &CodeVars, pose: Var) -> Result<Var> {
        let [cb, hb, wb] = self.cfg.bottleneck_shape();
        let bs = g.shape(code.bottleneck).to_vec();
        if bs.len() != 4 || bs[1..] != [cb, hb, wb] {
            return Err(Error::Shape(format!("bottleneck {bs:?} does not match [n, {cb}, {hb}, {wb}]")));
        }
        let n = bs[0];
        if g.shape(pose) != [n, self.pose_in] {
            return Err(Error::Shape(format!("pose input {:?}, expected [{n}, {}]", g.shape(pose), self.pose_in)));
        }
        if code.skips.len() != self.cfg.n_layers - 1 {
            return Err(Error::Shape(format!("expected {} skips, got {}", self.cfg.n_layers - 1, code.skips.len())));
        }
        let tiled = g.broadcast_spatial(pose, hb, wb);
        let mut h = g.concat(&[code.bottleneck, tiled]);
        let n_layers = self.layers.len();
        for (j, &layer) in self.layers.iter().enumerate() {
            h = tconv(g, p, layer, h);
            let level = n_layers - 1 - j;
            if level == 0 {
                return Ok(g.tanh(h));
            }
            if let Some(norm) = self.norms.get(j) {
                h = g.instance_norm(h, p.var(norm.gamma), p.var(norm.beta), NORM_EPS);
            }
            h = match self.cfg.nonlinearity_kind {
                Nonlinearity::Relu => g.relu(h),
                Nonlinearity::LeakyRelu => g.leaky_relu(h, LEAKY_SLOPE),
            };
            let skip = code.skips[level - 1];
            if g.shape(skip) != g.shape(h) {
                return Err(Error::Shape(format!("skip {:?} does not match decoder {:?}", g.shape(skip), g.shape(h))));
            }
            h = g.concat(&[h, skip]);
        }
        unreachable!("decoder ends with the output layer")
    }
}

/// Strided convolution trunk with a linear head. Used for the learned pose
/// encoder, the triplet embedder, and (with a probability head) the pose and
/// content discriminators.
#[derive(Clone, Debug)]
pub struct ConvNet<T> {
    pub params: ParamSet<T>,
    in_channels: usize,
    resolution: usize,
    out_dim: usize,
    layers: Vec<Layer>,
    head: Layer,
}

impl<T: Scalar> ConvNet<T> {
    fn build(cfg: &NetConfig, in_channels: usize, out_dim: usize, init: &mut Init) -> Self {
        let mut params = ParamSet::new();
        let mut c_in = in_channels;
        let layers = (0..cfg.n_layers)
            .map(|l| {
                let c_out = cfg.channels(l);
                let layer = conv_layer(&mut params, init, &format!("conv{l}"), c_in, c_out);
                c_in = c_out;
                layer
            })
            .collect();
        let head = dense_layer(&mut params, init, "head", cfg.trunk_features(), out_dim);
        Self { params, in_channels, resolution: cfg.in_resolution, out_dim, layers, head }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `[n, out_dim]` head output, no final activation.
    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        check_input(g, x, self.in_channels, self.resolution, "convolutional network")?;
        let mut h = x;
        for &layer in &self.layers {
            h = conv(g, p, layer, h);
            h = g.leaky_relu(h, LEAKY_SLOPE);
        }
        let flat = g.flatten(h);
        Ok(dense(g, p, self.head, flat))
    }

    /// `[n, 1]` probabilities for a discriminator built with `out_dim = 1`.
    pub fn discriminate(&self, g: &mut Graph<T>, p: &Bound, x: Var) -> Result<Var> {
        let logits = self.forward(g, p, x)?;
        Ok(probability(g, logits))
    }
}

/// MLP judging whether two learned pose codes come from the same video.
#[derive(Clone, Debug)]
pub struct SceneDiscriminator<T> {
    pub params: ParamSet<T>,
    pose_dim: usize,
    layers: [Layer; 3],
}

impl<T: Scalar> SceneDiscriminator<T> {
    fn build(pose_dim: usize, init: &mut Init) -> Self {
        let mut params = ParamSet::new();
        let layers = [
            dense_layer(&mut params, init, "fc0", 2 * pose_dim, SCENE_HIDDEN),
            dense_layer(&mut params, init, "fc1", SCENE_HIDDEN, SCENE_HIDDEN),
            dense_layer(&mut params, init, "fc2", SCENE_HIDDEN, 1),
        ];
        Self { params, pose_dim, layers }
    }

    /// `[n, 1]` probability that `z1[i]` and `z2[i]` share a video.
    pub fn discriminate(&self, g: &mut Graph<T>, p: &Bound, z1: Var, z2: Var) -> Result<Var> {
        let (s1, s2) = (g.shape(z1).to_vec(), g.shape(z2).to_vec());
        if s1 != s2 || s1.len() != 2 || s1[1] != self.pose_dim {
            return Err(Error::Shape(format!("scene discriminator inputs {s1:?} and {s2:?}")));
        }
        let mut h = g.concat(&[z1, z2]);
        for (i, &layer) in self.layers.iter().enumerate() {
            h = dense(g, p, layer, h);
            if i < 2 {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(probability(g, h))
    }
}

/// Every network a method trains.
#[derive(Clone, Debug)]
pub struct Models<T> {
    pub method: Method,
    pub cfg: NetConfig,
    pub content_encoder: ContentEncoder<T>,
    pub generator: Generator<T>,
    pub pose_encoder: Option<ConvNet<T>>,
    pub scene_discriminator: Option<SceneDiscriminator<T>>,
    pub pose_discriminator: Option<ConvNet<T>>,
    pub content_discriminator: Option<ConvNet<T>>,
    pub content_embedder: Option<ConvNet<T>>,
}

pub const CONTENT_ENCODER: &str = "content_encoder";
pub const GENERATOR: &str = "generator";
pub const POSE_ENCODER: &str = "pose_encoder";
pub const SCENE_DISCRIMINATOR: &str = "scene_discriminator";
pub const POSE_DISCRIMINATOR: &str = "pose_discriminator";
pub const CONTENT_DISCRIMINATOR: &str = "content_discriminator";
pub const CONTENT_EMBEDDER: &str = "content_embedder";

impl<T: Scalar> Models<T> {
    /// Freshly initialized networks; weights are a pure function of `seed`.
    pub fn new(method: Method, cfg: &NetConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = Init::new(seed);
        let content_encoder = ContentEncoder::build(cfg, &mut init);
        let generator = Generator::build(cfg, generator_pose_dim(method, cfg), &mut init);
        let mut m = Self {
            method,
            cfg: cfg.clone(),
            content_encoder,
            generator,
            pose_encoder: None,
            scene_discriminator: None,
            pose_discriminator: None,
            content_discriminator: None,
            content_embedder: None,
        };
        match method {
            Method::DisentangledBaseline => {
                m.pose_encoder = Some(ConvNet::build(cfg, 3, cfg.pose_dim, &mut init));
                m.scene_discriminator = Some(SceneDiscriminator::build(cfg.pose_dim, &mut init));
            }
            Method::DisentangledPretrainedPose => {}
            Method::Cgan => {
                m.pose_discriminator = Some(ConvNet::build(cfg, 3 + NUM_KEYPOINTS, 1, &mut init));
                m.content_discriminator = Some(ConvNet::build(cfg, 6, 1, &mut init));
            }
            Method::CganTriplet => {
                m.pose_discriminator = Some(ConvNet::build(cfg, 3 + NUM_KEYPOINTS, 1, &mut init));
                m.content_embedder = Some(ConvNet::build(cfg, 3, cfg.embed_dim, &mut init));
            }
        }
        Ok(m)
    }

    /// `(name, params)` of every present network, in a fixed order.
    pub fn networks(&self) -> Vec<(&'static str, &ParamSet<T>)> {
        let mut out = vec![(CONTENT_ENCODER, &self.content_encoder.params), (GENERATOR, &self.generator.params)];
        let optional = [
            (POSE_ENCODER, self.pose_encoder.as_ref().map(|n| &n.params)),
            (SCENE_DISCRIMINATOR, self.scene_discriminator.as_ref().map(|n| &n.params)),
            (POSE_DISCRIMINATOR, self.pose_discriminator.as_ref().map(|n| &n.params)),
            (CONTENT_DISCRIMINATOR, self.content_discriminator.as_ref().map(|n| &n.params)),
            (CONTENT_EMBEDDER, self.content_embedder.as_ref().map(|n| &n.params)),
        ];
        out.extend(optional.into_iter().filter_map(|(name, p)| p.map(|p| (name, p))));
        out
    }

    pub fn network_mut(&mut self, name: &str) -> Option<&mut ParamSet<T>> {
        match name {
            CONTENT_ENCODER => Some(&mut self.content_encoder.params),
            GENERATOR => Some(&mut self.generator.params),
            POSE_ENCODER => self.pose_encoder.as_mut().map(|n| &mut n.params),
            SCENE_DISCRIMINATOR => self.scene_discriminator.as_mut().map(|n| &mut n.params),
            POSE_DISCRIMINATOR => self.pose_discriminator.as_mut().map(|n| &mut n.params),
            CONTENT_DISCRIMINATOR => self.content_discriminator.as_mut().map(|n| &mut n.params),
            CONTENT_EMBEDDER => self.content_embedder.as_mut().map(|n| &mut n.params),
            _ => None,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.networks().iter().map(|(_, p)| p.num_scalars()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.networks().iter().all(|(_, p)| p.is_finite())
    }

    /// Same networks with another element type.
    pub fn cast<U: Scalar>(&self) -> Models<U> {
        let mut out = Models::<U>::new(self.method, &self.cfg, 0).expect("config was validated");
        for (name, params) in self.networks() {
            *out.network_mut(name).expect("same method") = params.cast();
        }
        out
    }

    // ----- inference helpers ---------------------------------------------

    pub fn encode_content(&self, frames: &Tensor<T>) -> Result<ContentCode<T>> {
        let mut g = Graph::new();
        let p = self.content_encoder.params.bind(&mut g, false);
        let x = g.constant(frames.clone());
        let code = self.content_encoder.forward(&mut g, &p, x)?;
        Ok(ContentCode::from_graph(&g, &code))
    }

    /// Learned pose codes `[n, pose_dim]`; only for methods that learn pose.
    pub fn encode_pose(&self, frames: &Tensor<T>) -> Result<Tensor<T>> {
        let enc = self
            .pose_encoder
            .as_ref()
            .ok_or_else(|| Error::config("method", format!("{} has no learned pose encoder", self.method)))?;
        let mut g = Graph::new();
        let p = enc.params.bind(&mut g, false);
        let x = g.constant(frames.clone());
        let z = enc.forward(&mut g, &p, x)?;
        Ok(g.value(z).clone())
    }

    pub fn generate(&self, code: &ContentCode<T>, pose: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = self.generator.params.bind(&mut g, false);
        let c = code.to_graph(&mut g);
        let z = g.constant(pose.clone());
        let out = self.generator.forward(&mut g, &p, &c, z)?;
        Ok(g.value(out).clone())
    }

    /// Generator pose input for frames with keypoints `poses`: the keypoint
    /// vectors themselves, or the learned codes of `pose_frames`.
    pub fn pose_input(&self, pose_frames: &[&Frame], poses: &[&PoseVector]) -> Result<Tensor<T>> {
        if self.method.learns_pose() {
            self.encode_pose(&frames_tensor(pose_frames)?)
        } else {
            Ok(poses_tensor(poses))
        }
    }
}

/// Stack frames into `[n, 3, h, w]`.
pub fn frames_tensor<T: Scalar>(frames: &[&Frame]) -> Result<Tensor<T>> {
    let first = frames.first().ok_or_else(|| Error::Shape("empty frame batch".into()))?;
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(frames.len() * 3 * h * w);
    for f in frames {
        if (f.height, f.width) != (h, w) {
            return Err(Error::Shape(format!("frame {}x{} in a batch of {h}x{w}", f.height, f.width)));
        }
        data.extend(f.data.iter().map(|&v| T::from_f64_lossy(v as f64)));
    }
    Ok(Tensor::from_vec(&[frames.len(), 3, h, w], data))
}

/// Split `[n, 3, h, w]` back into frames.
pub fn tensor_frames<T: Scalar>(t: &Tensor<T>) -> Vec<Frame> {
    let s = t.shape();
    assert!(s.len() == 4 && s[1] == 3, "expected [n, 3, h, w], got {s:?}");
    let per = 3 * s[2] * s[3];
    t.data()
        .chunks(per)
        .map(|c| Frame { height: s[2], width: s[3], data: c.iter().map(|v| v.to_f64_lossy() as f32).collect() })
        .collect()
}

/// Flattened keypoint vectors `[n, 35]`.
pub fn poses_tensor<T: Scalar>(poses: &[&PoseVector]) -> Tensor<T> {
    let data: Vec<T> = poses.iter().flat_map(|p| p.flatten()).map(T::from_f64_lossy).collect();
    Tensor::from_vec(&[poses.len(), POSE_DIM], data)
}

/// Stack heatmaps into `[n, channels, h, w]`.
pub fn heatmaps_tensor<T: Scalar>(maps: &[Heatmap]) -> Result<Tensor<T>> {
    let first = maps.first().ok_or_else(|| Error::Shape("empty heatmap batch".into()))?;
    let shape = [maps.len(), first.channels, first.height, first.width];
    let mut data = Vec::with_capacity(shape.iter().product());
    for m in maps {
        if (m.channels, m.height, m.width) != (first.channels, first.height, first.width) {
            return Err(Error::Shape("heatmaps of different shapes in one batch".into()));
        }
        data.extend(m.values.iter().map(|&v| T::from_f64_lossy(v)));
    }
    Ok(Tensor::from_vec(&shape, data))
}
