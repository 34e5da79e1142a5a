use std::collections::BTreeMap;

use poseswap_grad::{Adam, Bound, Gradients, Graph, Tensor, Var};

use super::config::MethodConfig;
use crate::data::{Clip, Frame, FramePair, FrameRef, PairSampler, SamplerState};
use crate::error::{Error, Result};
use crate::losses::{
    adv_pose_encoder_var, consistency_var, discriminator_var, non_saturating_var, reconstruction_var,
    squared_distance_var, triplet_var,
};
use crate::method::Method;
use crate::nets::{
    frames_tensor, heatmaps_tensor, poses_tensor, CodeVars, Models, CONTENT_DISCRIMINATOR, CONTENT_EMBEDDER,
    CONTENT_ENCODER, GENERATOR, POSE_DISCRIMINATOR, POSE_ENCODER, SCENE_DISCRIMINATOR,
};
use crate::pose::{discriminator_heatmap, render_heatmap, HeatmapConfig, PoseVector};

/// Loss name to value for one training step.
pub type LossRecord = BTreeMap<String, f64>;

/// One minibatch: temporal pairs, plus a frame from another video per pair
/// for methods that need negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub pairs: Vec<FramePair>,
    pub negatives: Vec<FrameRef>,
}

/// Parameter fingerprints around one sub-step, recorded when auditing is on.
#[derive(Clone, Debug, PartialEq)]
pub struct SubStepAudit {
    pub substep: &'static str,
    /// Networks whose fingerprint changed.
    pub changed: Vec<&'static str>,
    /// Networks whose fingerprint did not change.
    pub unchanged: Vec<&'static str>,
}

pub const SUBSTEP_SCENE: &str = "scene_discriminator";
pub const SUBSTEP_POSE_CODE: &str = "pose_code";
pub const SUBSTEP_RECONSTRUCTION: &str = "reconstruction";
pub const SUBSTEP_D_POSE: &str = "d_pose";
pub const SUBSTEP_D_CONTENT: &str = "d_content";
pub const SUBSTEP_TRIPLET: &str = "triplet";
pub const SUBSTEP_GENERATOR: &str = "generator";

/// Training state for one method over one dataset.
pub struct Trainer<'a> {
    pub cfg: MethodConfig,
    pub models: Models<f32>,
    pub optimizers: BTreeMap<&'static str, Adam<f32>>,
    pub sampler: PairSampler,
    clips: &'a [Clip],
    heatmap: HeatmapConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub global_step: u64,
    audit: Option<Vec<SubStepAudit>>,
}

fn frames_of<'c>(clips: &'c [Clip], refs: impl Iterator<Item = FrameRef>) -> Vec<&'c Frame> {
    refs.map(|r| r.frame(clips)).collect()
}

fn poses_of<'c>(clips: &'c [Clip], refs: impl Iterator<Item = FrameRef>) -> Vec<&'c PoseVector> {
    refs.map(|r| r.pose(clips)).collect()
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: MethodConfig, clips: &'a [Clip]) -> Result<Self> {
        cfg.validate()?;
        let models = Models::new(cfg.method, &cfg.net, cfg.seed)?;
        let optimizers = models.networks().into_iter().map(|(name, p)| (name, Adam::new(cfg.adam(), p))).collect();
        let sampler = PairSampler::new(cfg.sampler);
        Self::assemble(cfg, models, optimizers, sampler, clips, 0, 0)
    }

    /// Continue from saved state.
    pub fn restore(
        cfg: MethodConfig,
        models: Models<f32>,
        optimizers: BTreeMap<&'static str, Adam<f32>>,
        sampler: SamplerState,
        clips: &'a [Clip],
        epoch: usize,
        global_step: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let sampler = PairSampler::restore(cfg.sampler.window, sampler);
        Self::assemble(cfg, models, optimizers, sampler, clips, epoch, global_step)
    }

    fn assemble(
        cfg: MethodConfig,
        models: Models<f32>,
        optimizers: BTreeMap<&'static str, Adam<f32>>,
        sampler: PairSampler,
        clips: &'a [Clip],
        epoch: usize,
        global_step: u64,
    ) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::Ingestion("training set is empty".into()));
        }
        cfg.sampler.validate(clips)?;
        let res = cfg.net.in_resolution;
        if let Some(c) = clips.iter().find(|c| c.resolution() != (res, res)) {
            return Err(Error::config(
                "net.in_resolution",
                format!("network expects {res}x{res} frames but clip {} is {:?}", c.video_id, c.resolution()),
            ));
        }
        if cfg.method == Method::DisentangledBaseline && clips.len() < 2 {
            return Err(Error::Sampling("the learned-pose method needs at least 2 videos".into()));
        }
        let mut heatmap = HeatmapConfig::for_resolution(res);
        heatmap.peak_normalize = cfg.heatmap_peak_normalize;
        Ok(Self { cfg, models, optimizers, sampler, clips, heatmap, epoch, global_step, audit: None })
    }

    pub fn clips(&self) -> &'a [Clip] {
        self.clips
    }

    /// `⌈total frames / batch size⌉`.
    pub fn steps_per_epoch(&self) -> u64 {
        let frames: usize = self.clips.iter().map(Clip::len).sum();
        frames.div_ceil(self.cfg.batch_size) as u64
    }

    /// Record parameter fingerprints around every sub-step from now on.
    pub fn enable_audit(&mut self) {
        self.audit = Some(Vec::new());
    }

    pub fn take_audit(&mut self) -> Vec<SubStepAudit> {
        self.audit.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn sample_batch(&mut self) -> Result<Batch> {
        let n = self.cfg.batch_size;
        let mut batch = Batch { pairs: Vec::with_capacity(n), negatives: Vec::new() };
        for _ in 0..n {
            if self.cfg.method == Method::DisentangledBaseline {
                let (pair, neg) = self.sampler.sample_negative_pair(self.clips)?;
                batch.pairs.push(pair);
                batch.negatives.push(neg);
            } else {
                batch.pairs.push(self.sampler.sample_pair(self.clips)?);
            }
        }
        Ok(batch)
    }

    /// Sample a batch and run one step of the configured method.
    pub fn step(&mut self) -> Result<LossRecord> {
        let batch = self.sample_batch()?;
        let record = self.train_step(&batch)?;
        self.global_step += 1;
        Ok(record)
    }

    pub fn train_step(&mut self, batch: &Batch) -> Result<LossRecord> {
        if batch.pairs.is_empty() {
            return Err(Error::Sampling("empty batch".into()));
        }
        let record = match self.cfg.method {
            Method::DisentangledBaseline => self.train_step_disentangled_baseline(batch)?,
            Method::DisentangledPretrainedPose => self.train_step_pretrained_pose(batch)?,
            Method::Cgan => self.train_step_cgan(batch)?,
            Method::CganTriplet => self.train_step_cgan_triplet(batch)?,
        };
        if !self.models.is_finite() {
            return Err(Error::NonFinite(format!("parameters after step {}", self.global_step + 1)));
        }
        Ok(record)
    }

    // ----- helpers -------------------------------------------------------

    fn bind(&self, g: &mut Graph<f32>, name: &str, trainable: bool) -> Bound {
        let (_, params) = self
            .models
            .networks()
            .into_iter()
            .find(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("{} has no {name}", self.cfg.method));
        params.bind(g, trainable)
    }

    fn fingerprints(&self) -> Vec<(&'static str, u64)> {
        self.models.networks().into_iter().map(|(n, p)| (n, p.fingerprint())).collect()
    }

    /// Apply the gradients of `loss` to exactly the networks in `updates`.
    fn update(
        &mut self,
        substep: &'static str,
        g: &Graph<f32>,
        loss: Var,
        updates: &[(&'static str, &Bound)],
    ) -> Result<()> {
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{substep} loss at step {} is {value}", self.global_step + 1)));
        }
        let before = self.audit.is_some().then(|| self.fingerprints());
        let grads: Gradients<f32> = g.backward(loss);
        for &(name, bound) in updates {
            let params = self.models.network_mut(name).expect("network present");
            let gr = bound.grads(&grads, params);
            self.optimizers.get_mut(name).expect("optimizer present").step(params, &gr);
        }
        if let Some(before) = before {
            let after = self.fingerprints();
            let (mut changed, mut unchanged) = (Vec::new(), Vec::new());
            for ((name, a), (_, b)) in before.into_iter().zip(after) {
                if a == b {
                    unchanged.push(name);
                } else {
                    changed.push(name);
                }
            }
            self.audit.as_mut().expect("auditing").push(SubStepAudit { substep, changed, unchanged });
        }
        Ok(())
    }

    fn pair_frames(&self, batch: &Batch) -> (Vec<&'a Frame>, Vec<&'a Frame>) {
        let clips = self.clips;
        (frames_of(clips, batch.pairs.iter().map(|p| p.anchor())), frames_of(clips, batch.pairs.iter().map(|p| p.offset())))
    }

    fn heatmaps(&self, poses: &[&PoseVector], for_discriminator: bool) -> Result<Tensor<f32>> {
        let maps: Vec<_> = poses
            .iter()
            .map(|p| if for_discriminator { discriminator_heatmap(p, &self.heatmap) } else { render_heatmap(p, &self.heatmap) })
            .collect();
        heatmaps_tensor(&maps)
    }

    // ----- method (a) ----------------------------------------------------

    /// Scene discriminator update on detached learned pose codes, then a joint
    /// update of the pose encoder, content encoder and generator with the
    /// discriminator held fixed.
    pub fn train_step_disentangled_baseline(&mut self, batch: &Batch) -> Result<LossRecord> {
        if batch.negatives.len() != batch.pairs.len() {
            return Err(Error::Sampling("baseline step needs one negative per pair".into()));
        }
        let w = self.cfg.weights.clone();
        let (anchors, offsets) = self.pair_frames(batch);
        let negatives = frames_of(self.clips, batch.negatives.iter().copied());
        let x_t = frames_tensor::<f32>(&anchors)?;
        let x_tk = frames_tensor::<f32>(&offsets)?;
        let x_neg = frames_tensor::<f32>(&negatives)?;
        let mut record = LossRecord::new();

        {
            let pose_enc = self.models.pose_encoder.as_ref().expect("baseline has a pose encoder");
            let scene = self.models.scene_discriminator.as_ref().expect("baseline has a scene discriminator");
            let mut g = Graph::new();
            let pp = self.bind(&mut g, POSE_ENCODER, false);
            let ps = self.bind(&mut g, SCENE_DISCRIMINATOR, true);
            let (a, b, c) = (g.constant(x_t.clone()), g.constant(x_tk.clone()), g.constant(x_neg));
            let z_t = pose_enc.forward(&mut g, &pp, a)?;
            let z_tk = pose_enc.forward(&mut g, &pp, b)?;
            let z_neg = pose_enc.forward(&mut g, &pp, c)?;
            let same = scene.discriminate(&mut g, &ps, z_t, z_tk)?;
            let diff = scene.discriminate(&mut g, &ps, z_t, z_neg)?;
            let adv_c = discriminator_var(&mut g, same, diff);
            record.insert("adv_C".into(), g.value(adv_c).item() as f64);
            self.update(SUBSTEP_SCENE, &g, adv_c, &[(SCENE_DISCRIMINATOR, &ps)])?;
        }

        let pose_enc = self.models.pose_encoder.as_ref().expect("present");
        let scene = self.models.scene_discriminator.as_ref().expect("present");
        let mut g = Graph::new();
        let pp = self.bind(&mut g, POSE_ENCODER, true);
        let pe = self.bind(&mut g, CONTENT_ENCODER, true);
        let pg = self.bind(&mut g, GENERATOR, true);
        let ps = self.bind(&mut g, SCENE_DISCRIMINATOR, false);
        let (a, b) = (g.constant(x_t), g.constant(x_tk));
        let z_t = pose_enc.forward(&mut g, &pp, a)?;
        let z_tk = pose_enc.forward(&mut g, &pp, b)?;
        let code_tk = self.models.content_encoder.forward(&mut g, &pe, b)?;
        let code_t = self.models.content_encoder.forward(&mut g, &pe, a)?;
        let out = self.models.generator.forward(&mut g, &pg, &code_tk, z_t)?;
        let rec = reconstruction_var(&mut g, a, out);
        let consist = consistency_var(&mut g, &code_t, &code_tk);
        let same = scene.discriminate(&mut g, &ps, z_t, z_tk)?;
        let adv_ep = adv_pose_encoder_var(&mut g, same);
        record.insert("rec".into(), g.value(rec).item() as f64);
        record.insert("consist".into(), g.value(consist).item() as f64);
        record.insert("adv_Ep".into(), g.value(adv_ep).item() as f64);
        let total = weighted_sum(&mut g, &[(rec, w.w_rec), (consist, w.w_consist), (adv_ep, w.w_adv_pose_code)]);
        self.update(
            SUBSTEP_POSE_CODE,
            &g,
            total,
            &[(POSE_ENCODER, &pp), (CONTENT_ENCODER, &pe), (GENERATOR, &pg)],
        )?;
        Ok(record)
    }

    // ----- method (b) ----------------------------------------------------

    /// Reconstruct frame `t` from the content of frame `t+k` and the keypoint pose of frame `t`.
    pub fn train_step_pretrained_pose(&mut self, batch: &Batch) -> Result<LossRecord> {
        let w = self.cfg.weights.clone();
        let (anchors, offsets) = self.pair_frames(batch);
        let poses = poses_of(self.clips, batch.pairs.iter().map(|p| p.anchor()));
        let mut g = Graph::new();
        let pe = self.bind(&mut g, CONTENT_ENCODER, true);
        let pg = self.bind(&mut g, GENERATOR, true);
        let x_t = g.constant(frames_tensor(&anchors)?);
        let x_tk = g.constant(frames_tensor(&offsets)?);
        let z_t = g.constant(poses_tensor(&poses));
        let code_tk = self.models.content_encoder.forward(&mut g, &pe, x_tk)?;
        let out = self.models.generator.forward(&mut g, &pg, &code_tk, z_t)?;
        let rec = reconstruction_var(&mut g, x_t, out);
        let mut record = LossRecord::new();
        record.insert("rec".into(), g.value(rec).item() as f64);
        let mut terms = vec![(rec, w.w_rec)];
        if w.w_consist > 0.0 {
            let code_t = self.models.content_encoder.forward(&mut g, &pe, x_t)?;
            let consist = consistency_var(&mut g, &code_t, &code_tk);
            record.insert("consist".into(), g.value(consist).item() as f64);
            terms.push((consist, w.w_consist));
        }
        let total = weighted_sum(&mut g, &terms);
        self.update(SUBSTEP_RECONSTRUCTION, &g, total, &[(CONTENT_ENCODER, &pe), (GENERATOR, &pg)])?;
        Ok(record)
    }

    // ----- methods (c) and (d) --------------------------------------------

    /// `G(F_content(I^t), Z^{t'})` with frozen networks.
    fn fake_frames(&self, x_t: &Tensor<f32>, z: &Tensor<f32>) -> Result<Tensor<f32>> {
        let code = self.models.encode_content(x_t)?;
        self.models.generate(&code, z)
    }

    fn pose_discriminator_step(
        &mut self,
        x_real: &Tensor<f32>,
        fake: &Tensor<f32>,
        hm: &Tensor<f32>,
    ) -> Result<f64> {
        let d = self.models.pose_discriminator.as_ref().expect("GAN methods have a pose discriminator");
        let mut g = Graph::new();
        let pd = self.bind(&mut g, POSE_DISCRIMINATOR, true);
        let (r, f, h) = (g.constant(x_real.clone()), g.constant(fake.clone()), g.constant(hm.clone()));
        let real_in = g.concat(&[r, h]);
        let fake_in = g.concat(&[f, h]);
        let d_real = d.discriminate(&mut g, &pd, real_in)?;
        let d_fake = d.discriminate(&mut g, &pd, fake_in)?;
        let loss = discriminator_var(&mut g, d_real, d_fake);
        let value = g.value(loss).item() as f64;
        self.update(SUBSTEP_D_POSE, &g, loss, &[(POSE_DISCRIMINATOR, &pd)])?;
        Ok(value)
    }

    /// Pose discriminator plus content discriminator, then the generator.
    pub fn train_step_cgan(&mut self, batch: &Batch) -> Result<LossRecord> {
        self.gan_step(batch, false)
    }

    /// Pose discriminator plus triplet embedder, then the generator.
    pub fn train_step_cgan_triplet(&mut self, batch: &Batch) -> Result<LossRecord> {
        self.gan_step(batch, true)
    }

    fn gan_step(&mut self, batch: &Batch, triplet: bool) -> Result<LossRecord> {
        let w = self.cfg.weights.clone();
        let (anchors, offsets) = self.pair_frames(batch);
        let target_poses = poses_of(self.clips, batch.pairs.iter().map(|p| p.offset()));
        let x_t = frames_tensor::<f32>(&anchors)?;
        let x_tp = frames_tensor::<f32>(&offsets)?;
        let z_tp = poses_tensor::<f32>(&target_poses);
        let hm = self.heatmaps(&target_poses, true)?;
        let fake = self.fake_frames(&x_t, &z_tp)?;
        let mut record = LossRecord::new();

        for _ in 0..self.cfg.d_steps_per_g_step {
            let d_pose = self.pose_discriminator_step(&x_tp, &fake, &hm)?;
            record.insert("d_pose".into(), d_pose);
            if triplet {
                let emb = self.models.content_embedder.as_ref().expect("triplet method has an embedder");
                let mut g = Graph::new();
                let pm = self.bind(&mut g, CONTENT_EMBEDDER, true);
                let (a, p, n) = (g.constant(x_t.clone()), g.constant(x_tp.clone()), g.constant(fake.clone()));
                let ea = emb.forward(&mut g, &pm, a)?;
                let ep = emb.forward(&mut g, &pm, p)?;
                let en = emb.forward(&mut g, &pm, n)?;
                let loss = triplet_var(&mut g, ea, ep, en, w.margin);
                record.insert("triplet".into(), g.value(loss).item() as f64);
                self.update(SUBSTEP_TRIPLET, &g, loss, &[(CONTENT_EMBEDDER, &pm)])?;
            } else {
                let d = self.models.content_discriminator.as_ref().expect("cgan has a content discriminator");
                let mut g = Graph::new();
                let pc = self.bind(&mut g, CONTENT_DISCRIMINATOR, true);
                let (a, p, f) = (g.constant(x_t.clone()), g.constant(x_tp.clone()), g.constant(fake.clone()));
                let real_pair = g.concat(&[a, p]);
                let fake_pair = g.concat(&[f, a]);
                let d_real = d.discriminate(&mut g, &pc, real_pair)?;
                let d_fake = d.discriminate(&mut g, &pc, fake_pair)?;
                let loss = discriminator_var(&mut g, d_real, d_fake);
                record.insert("d_content".into(), g.value(loss).item() as f64);
                self.update(SUBSTEP_D_CONTENT, &g, loss, &[(CONTENT_DISCRIMINATOR, &pc)])?;
            }
        }

        let d_pose = self.models.pose_discriminator.as_ref().expect("present");
        let mut g = Graph::new();
        let pe = self.bind(&mut g, CONTENT_ENCODER, true);
        let pg = self.bind(&mut g, GENERATOR, true);
        let pd = self.bind(&mut g, POSE_DISCRIMINATOR, false);
        let a = g.constant(x_t);
        let p = g.constant(x_tp);
        let z = g.constant(z_tp);
        let h = g.constant(hm);
        let code_t: CodeVars = self.models.content_encoder.forward(&mut g, &pe, a)?;
        let out = self.models.generator.forward(&mut g, &pg, &code_t, z)?;
        let fake_in = g.concat(&[out, h]);
        let dp = d_pose.discriminate(&mut g, &pd, fake_in)?;
        let gan_pose = non_saturating_var(&mut g, dp);
        let rec = reconstruction_var(&mut g, p, out);
        let mut terms = vec![(gan_pose, w.w_gan_pose), (rec, w.w_rec)];
        let mut g_gan = g.value(gan_pose).item() as f64;
        if triplet {
            let emb = self.models.content_embedder.as_ref().expect("present");
            let pm = self.bind(&mut g, CONTENT_EMBEDDER, false);
            let e_fake = emb.forward(&mut g, &pm, out)?;
            let e_anchor = emb.forward(&mut g, &pm, a)?;
            let pull = squared_distance_var(&mut g, e_fake, e_anchor);
            record.insert("g_content_pull".into(), g.value(pull).item() as f64);
            terms.push((pull, w.w_triplet));
        } else {
            let d_content = self.models.content_discriminator.as_ref().expect("present");
            let pc = self.bind(&mut g, CONTENT_DISCRIMINATOR, false);
            let fake_pair = g.concat(&[out, a]);
            let dc = d_content.discriminate(&mut g, &pc, fake_pair)?;
            let gan_content = non_saturating_var(&mut g, dc);
            g_gan += g.value(gan_content).item() as f64;
            terms.push((gan_content, w.w_gan_content));
        }
        if w.consist_in_gan {
            let code_tp = self.models.content_encoder.forward(&mut g, &pe, p)?;
            let consist = consistency_var(&mut g, &code_t, &code_tp);
            record.insert("consist".into(), g.value(consist).item() as f64);
            terms.push((consist, w.w_consist));
        }
        record.insert("g_gan".into(), g_gan);
        record.insert("rec".into(), g.value(rec).item() as f64);
        let total = weighted_sum(&mut g, &terms);
        self.update(SUBSTEP_GENERATOR, &g, total, &[(CONTENT_ENCODER, &pe), (GENERATOR, &pg)])?;
        Ok(record)
    }
}

fn weighted_sum(g: &mut Graph<f32>, terms: &[(Var, f64)]) -> Var {
    let mut total = g.scale(terms[0].0, terms[0].1);
    for &(v, w) in &terms[1..] {
        let s = g.scale(v, w);
        total = g.add(total, s);
    }
    total
}
