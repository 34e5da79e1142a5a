//! Training objectives.
//!
//! Each loss exists twice: a value-level function over plain `f64` data that
//! validates its inputs, and a graph-level builder (`*_var`) used by the
//! training steps. Both reduce over the batch with a mean, so duplicating a
//! batch leaves every loss unchanged.

use poseswap_grad::{Graph, Scalar, Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{CodeVars, ContentCode};

/// Probabilities are floored at this value before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_rec: f64,
    pub w_consist: f64,
    pub w_adv_pose_code: f64,
    pub w_gan_pose: f64,
    pub w_gan_content: f64,
    pub w_triplet: f64,
    /// Triplet margin.
    pub margin: f64,
    /// Also apply the consistency loss in the GAN methods.
    pub consist_in_gan: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_rec: 1.0,
            w_consist: 1.0,
            w_adv_pose_code: 0.1,
            w_gan_pose: 1.0,
            w_gan_content: 1.0,
            w_triplet: 1.0,
            margin: 0.5,
            consist_in_gan: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("weights.w_rec", self.w_rec),
            ("weights.w_consist", self.w_consist),
            ("weights.w_adv_pose_code", self.w_adv_pose_code),
            ("weights.w_gan_pose", self.w_gan_pose),
            ("weights.w_gan_content", self.w_gan_content),
            ("weights.w_triplet", self.w_triplet),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(name, format!("must be a finite non-negative number, got {w}")));
            }
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::config("weights.margin", format!("must be positive, got {}", self.margin)));
        }
        Ok(())
    }
}

// ----- value level ----------------------------------------------------------

fn check_probs(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::Domain(format!("{name}: empty batch")));
    }
    match p.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        Some(v) => Err(Error::Domain(format!("{name}: probability {v} is outside (0, 1)"))),
        None => Ok(()),
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

fn neg_log(p: f64) -> f64 {
    -p.max(PROB_FLOOR).ln()
}

/// Mean of `-log p`: cross entropy against target 1.
fn bce_real(p: &[f64]) -> f64 {
    mean(p.iter().map(|&v| neg_log(v)))
}

/// Mean of `-log(1 - p)`: cross entropy against target 0.
fn bce_fake(p: &[f64]) -> f64 {
    mean(p.iter().map(|&v| neg_log(1.0 - v)))
}

fn same_shape(name: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{name}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Squared L2 distance over every code element, averaged over the batch.
pub fn loss_consistency(a: &ContentCode<f64>, b: &ContentCode<f64>) -> Result<f64> {
    if a.skips.len() != b.skips.len() {
        return Err(Error::Shape(format!("consistency: {} vs {} skip levels", a.skips.len(), b.skips.len())));
    }
    let mut total = 0.0;
    for (x, y) in std::iter::once((&a.bottleneck, &b.bottleneck)).chain(a.skips.iter().zip(&b.skips)) {
        same_shape("consistency", x.shape(), y.shape())?;
        total += x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok(total / a.batch_len() as f64)
}

/// Mean squared error over pixels and batch.
pub fn loss_reconstruction(target: &Tensor<f64>, generated: &Tensor<f64>) -> Result<f64> {
    same_shape("reconstruction", target.shape(), generated.shape())?;
    if target.is_empty() {
        return Err(Error::Shape("reconstruction: empty input".into()));
    }
    Ok(mean(target.data().iter().zip(generated.data()).map(|(a, b)| (a - b) * (a - b))))
}

/// Scene discriminator: target 1 on same-video pose pairs, 0 on different-video pairs.
pub fn loss_adv_scene_discriminator(same: &[f64], diff: &[f64]) -> Result<f64> {
    check_probs("scene discriminator (same)", same)?;
    check_probs("scene discriminator (different)", diff)?;
    Ok(bce_real(same) + bce_fake(diff))
}

/// Pose encoder: cross entropy against target ½, minimal when the scene
/// discriminator is maximally uncertain.
pub fn loss_adv_pose_encoder(same: &[f64]) -> Result<f64> {
    check_probs("pose encoder", same)?;
    Ok(0.5 * (bce_real(same) + bce_fake(same)))
}

pub fn loss_pose_discriminator(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    check_probs("pose discriminator (real)", d_real)?;
    check_probs("pose discriminator (fake)", d_fake)?;
    Ok(bce_real(d_real) + bce_fake(d_fake))
}

pub fn loss_content_discriminator(d_real_pair: &[f64], d_fake_pair: &[f64]) -> Result<f64> {
    check_probs("content discriminator (real)", d_real_pair)?;
    check_probs("content discriminator (fake)", d_fake_pair)?;
    Ok(bce_real(d_real_pair) + bce_fake(d_fake_pair))
}

/// Non-saturating generator loss `-log D_content - log D_pose`.
pub fn loss_generator_gan(d_content_on_fake: &[f64], d_pose_on_fake: &[f64]) -> Result<f64> {
    check_probs("generator (content)", d_content_on_fake)?;
    check_probs("generator (pose)", d_pose_on_fake)?;
    Ok(bce_real(d_content_on_fake) + bce_real(d_pose_on_fake))
}

/// `max(0, ‖a−p‖² + m − ‖a−n‖²)` averaged over rows of `[n, d]` embeddings.
pub fn loss_triplet(anchor: &Tensor<f64>, positive: &Tensor<f64>, negative: &Tensor<f64>, margin: f64) -> Result<f64> {
    same_shape("triplet (positive)", anchor.shape(), positive.shape())?;
    same_shape("triplet (negative)", anchor.shape(), negative.shape())?;
    if anchor.shape().len() != 2 || anchor.shape()[0] == 0 {
        return Err(Error::Shape(format!("triplet expects [n, d] embeddings, got {:?}", anchor.shape())));
    }
    if !(margin > 0.0) {
        return Err(Error::Domain(format!("triplet margin must be positive, got {margin}")));
    }
    let d = anchor.shape()[1];
    let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let rows = anchor.data().chunks(d).zip(positive.data().chunks(d)).zip(negative.data().chunks(d));
    Ok(mean(rows.map(|((a, p), n)| (dist(a, p) + margin - dist(a, n)).max(0.0))))
}

// ----- graph level ----------------------------------------------------------

fn bce_real_var<T: Scalar>(g: &mut Graph<T>, p: Var) -> Var {
    let c = g.clamp(p, PROB_FLOOR, 1.0);
    let l = g.log(c);
    let m = g.mean(l);
    g.scale(m, -1.0)
}

fn bce_fake_var<T: Scalar>(g: &mut Graph<T>, p: Var) -> Var {
    let q = g.scale(p, -1.0);
    let q = g.offset(q, 1.0);
    bce_real_var(g, q)
}

/// Two-term discriminator cross entropy: target 1 on `real`, 0 on `fake`.
pub fn discriminator_var<T: Scalar>(g: &mut Graph<T>, real: Var, fake: Var) -> Var {
    let a = bce_real_var(g, real);
    let b = bce_fake_var(g, fake);
    g.add(a, b)
}

/// Non-saturating `-log D`, averaged over the batch.
pub fn non_saturating_var<T: Scalar>(g: &mut Graph<T>, d_on_fake: Var) -> Var {
    bce_real_var(g, d_on_fake)
}

pub fn adv_pose_encoder_var<T: Scalar>(g: &mut Graph<T>, same: Var) -> Var {
    let a = bce_real_var(g, same);
    let b = bce_fake_var(g, same);
    let s = g.add(a, b);
    g.scale(s, 0.5)
}

pub fn reconstruction_var<T: Scalar>(g: &mut Graph<T>, target: Var, generated: Var) -> Var {
    let d = g.sub(generated, target);
    let s = g.square(d);
    g.mean(s)
}

/// Per-sample squared distance summed over features, averaged over the batch.
pub fn squared_distance_var<T: Scalar>(g: &mut Graph<T>, a: Var, b: Var) -> Var {
    let n = g.shape(a)[0];
    let d = g.sub(a, b);
    let s = g.square(d);
    let s = g.sum(s);
    g.scale(s, 1.0 / n as f64)
}

pub fn consistency_var<T: Scalar>(g: &mut Graph<T>, a: &CodeVars, b: &CodeVars) -> Var {
    let parts: Vec<Var> = a.all().zip(b.all()).map(|(x, y)| squared_distance_var(g, x, y)).collect();
    let mut total = parts[0];
    for &p in &parts[1..] {
        total = g.add(total, p);
    }
    total
}

pub fn triplet_var<T: Scalar>(g: &mut Graph<T>, anchor: Var, positive: Var, negative: Var, margin: f64) -> Var {
    let dp = g.sub(anchor, positive);
    let dp = g.square(dp);
    let dp = g.sum_per_sample(dp);
    let dn = g.sub(anchor, negative);
    let dn = g.square(dn);
    let dn = g.sum_per_sample(dn);
    let h = g.sub(dp, dn);
    let h = g.offset(h, margin);
    let h = g.relu(h);
    g.mean(h)
}
