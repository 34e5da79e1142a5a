//! Checkpoints: a safetensors archive with parameters keyed
//! `<network>/<layer>/<tensor>`, Adam moments under `optimizer/`, and one
//! JSON metadata record.

use std::collections::BTreeMap;
use std::path::Path;

use poseswap_grad::{Adam, ParamSet, Tensor};
use safetensors::tensor::TensorView;
use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};

use super::config::MethodConfig;
use crate::data::SamplerState;
use crate::error::{Error, Result};
use crate::method::Method;
use crate::nets::{Models, NetConfig};

pub const FORMAT_VERSION: u32 = 1;
const META_KEY: &str = "poseswap";
const OPTIMIZER_PREFIX: &str = "optimizer";

/// What produced a checkpoint: a trained method, or the identity oracle used
/// to validate the evaluation pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Trained(Method),
    IdentityOracle,
}

pub const IDENTITY_ORACLE: &str = "identity_oracle";

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        match k {
            ModelKind::Trained(m) => m.name().to_string(),
            ModelKind::IdentityOracle => IDENTITY_ORACLE.to_string(),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s == IDENTITY_ORACLE {
            Ok(ModelKind::IdentityOracle)
        } else {
            s.parse().map(ModelKind::Trained)
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&String::from(*self))
    }
}

/// Mean losses over one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: u64,
    pub losses: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub method: ModelKind,
    pub net: NetConfig,
    pub config: MethodConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub global_step: u64,
    pub seed: u64,
    pub loss_history: Vec<EpochSummary>,
    pub sampler: SamplerState,
    /// Adam step counter per network.
    pub optimizer_steps: BTreeMap<String, u64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    /// Absent for the identity oracle.
    pub models: Option<Models<f32>>,
    pub optimizers: BTreeMap<String, Adam<f32>>,
}

fn f32_bytes(t: &Tensor<f32>) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn tensor_from_view(name: &str, view: &TensorView<'_>) -> Result<Tensor<f32>> {
    if view.dtype() != Dtype::F32 {
        return Err(Error::Checkpoint(format!("{name}: expected F32, found {:?}", view.dtype())));
    }
    let data = view.data().chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(Tensor::from_vec(view.shape(), data))
}

fn ckpt_err(e: impl std::fmt::Display) -> Error {
    Error::Checkpoint(e.to_string())
}

impl Checkpoint {
    /// Checkpoint of the identity oracle for a given resolution.
    pub fn identity_oracle(resolution: usize) -> Self {
        let mut config = MethodConfig::default();
        config.net.in_resolution = resolution;
        Self {
            meta: CheckpointMeta {
                format_version: FORMAT_VERSION,
                method: ModelKind::IdentityOracle,
                net: config.net.clone(),
                config,
                epoch: 0,
                global_step: 0,
                seed: 0,
                loss_history: Vec::new(),
                sampler: SamplerState { seed: 0, word_pos: 0 },
                optimizer_steps: BTreeMap::new(),
            },
            models: None,
            optimizers: BTreeMap::new(),
        }
    }

    fn entries(&self) -> Vec<(String, Vec<u8>, Vec<usize>)> {
        let mut out = Vec::new();
        let mut push = |key: String, t: &Tensor<f32>| out.push((key, f32_bytes(t), t.shape().to_vec()));
        if let Some(models) = &self.models {
            for (net, params) in models.networks() {
                for (name, t) in params.iter() {
                    push(format!("{net}/{name}"), t);
                }
                if let Some(opt) = self.optimizers.get(net) {
                    for (((name, _), m), v) in params.iter().zip(opt.first_moments()).zip(opt.second_moments()) {
                        push(format!("{OPTIMIZER_PREFIX}/{net}/m/{name}"), m);
                        push(format!("{OPTIMIZER_PREFIX}/{net}/v/{name}"), v);
                    }
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_string(&self.meta).map_err(ckpt_err)?;
        let entries = self.entries();
        let views = entries
            .iter()
            .map(|(k, bytes, shape)| Ok((k.clone(), TensorView::new(Dtype::F32, shape.clone(), bytes).map_err(ckpt_err)?)))
            .collect::<Result<Vec<_>>>()?;
        let info = std::collections::HashMap::from([(META_KEY.to_string(), meta)]);
        safetensors::serialize(views, Some(info)).map_err(ckpt_err)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, header) = SafeTensors::read_metadata(bytes).map_err(ckpt_err)?;
        let meta_json = header
            .metadata()
            .as_ref()
            .and_then(|m| m.get(META_KEY))
            .ok_or_else(|| Error::Checkpoint("missing metadata record".into()))?;
        let meta: CheckpointMeta = serde_json::from_str(meta_json).map_err(ckpt_err)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (this build reads {FORMAT_VERSION})",
                meta.format_version
            )));
        }
        let st = SafeTensors::deserialize(bytes).map_err(ckpt_err)?;
        let method = match meta.method {
            ModelKind::IdentityOracle => {
                if !st.names().is_empty() {
                    return Err(Error::Checkpoint("identity oracle checkpoint holds tensors".into()));
                }
                return Ok(Self { meta, models: None, optimizers: BTreeMap::new() });
            }
            ModelKind::Trained(m) => m,
        };
        let mut models = Models::<f32>::new(method, &meta.net, 0)?;
        let mut used = 0usize;
        let load_into = |key: &str, target: &mut Tensor<f32>, used: &mut usize| -> Result<()> {
            let view = st.tensor(key).map_err(|_| Error::Checkpoint(format!("missing tensor {key}")))?;
            let t = tensor_from_view(key, &view)?;
            if t.shape() != target.shape() {
                return Err(Error::Checkpoint(format!("{key}: shape {:?}, expected {:?}", t.shape(), target.shape())));
            }
            *target = t;
            *used += 1;
            Ok(())
        };
        let names: Vec<&'static str> = models.networks().iter().map(|(n, _)| *n).collect();
        let mut optimizers = BTreeMap::new();
        for net in names {
            let params: &mut ParamSet<f32> = models.network_mut(net).expect("listed network");
            let tensor_names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
            for (i, t) in params.tensors_mut().iter_mut().enumerate() {
                load_into(&format!("{net}/{}", tensor_names[i]), t, &mut used)?;
            }
            if let Some(&steps) = meta.optimizer_steps.get(net) {
                let mut m: Vec<Tensor<f32>> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
                let mut v = m.clone();
                for (i, name) in tensor_names.iter().enumerate() {
                    load_into(&format!("{OPTIMIZER_PREFIX}/{net}/m/{name}"), &mut m[i], &mut used)?;
                    load_into(&format!("{OPTIMIZER_PREFIX}/{net}/v/{name}"), &mut v[i], &mut used)?;
                }
                optimizers.insert(net.to_string(), Adam::from_state(meta.config.adam(), steps, m, v));
            }
        }
        if used != st.len() {
            return Err(Error::Checkpoint(format!("{} unexpected tensors", st.len() - used)));
        }
        Ok(Self { meta, models: Some(models), optimizers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        // write-then-rename so an interrupted save never leaves a truncated checkpoint
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
