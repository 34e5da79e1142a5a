use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::{Checkpoint, CheckpointMeta, EpochSummary, ModelKind, FORMAT_VERSION};
use super::config::MethodConfig;
use super::metrics::{read_metrics, MetricsWriter, StepRecord};
use super::steps::Trainer;
use crate::config;
use crate::data::Clip;
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const FINAL_CHECKPOINT: &str = "final.safetensors";
pub const FAILURE_CHECKPOINT: &str = "failure.safetensors";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn epoch_checkpoint_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("epoch_{epoch:04}.safetensors"))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Continue from this checkpoint.
    pub resume: Option<PathBuf>,
    /// Stop after this many global steps even if epochs remain.
    pub max_steps: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_checkpoint: PathBuf,
    pub metrics_log: PathBuf,
    /// Every record in the log, including those from before a resume.
    pub records: Vec<StepRecord>,
}

fn epoch_summaries(records: &[StepRecord]) -> Vec<EpochSummary> {
    let mut by_epoch: BTreeMap<usize, (u64, BTreeMap<String, f64>)> = BTreeMap::new();
    for r in records {
        let (n, sums) = by_epoch.entry(r.epoch).or_default();
        *n += 1;
        for (k, v) in &r.losses {
            *sums.entry(k.clone()).or_default() += v;
        }
    }
    by_epoch
        .into_iter()
        .map(|(epoch, (steps, sums))| EpochSummary {
            epoch,
            steps,
            losses: sums.into_iter().map(|(k, v)| (k, v / steps as f64)).collect(),
        })
        .collect()
}

/// Snapshot of a trainer as a checkpoint.
pub fn snapshot(trainer: &Trainer<'_>, records: &[StepRecord]) -> Checkpoint {
    Checkpoint {
        meta: CheckpointMeta {
            format_version: FORMAT_VERSION,
            method: ModelKind::Trained(trainer.cfg.method),
            net: trainer.cfg.net.clone(),
            config: trainer.cfg.clone(),
            epoch: trainer.epoch,
            global_step: trainer.global_step,
            seed: trainer.cfg.seed,
            loss_history: epoch_summaries(records),
            sampler: trainer.sampler.state(),
            optimizer_steps: trainer.optimizers.iter().map(|(k, o)| (k.to_string(), o.steps())).collect(),
        },
        models: Some(trainer.models.clone()),
        optimizers: trainer.optimizers.iter().map(|(k, o)| (k.to_string(), o.clone())).collect(),
    }
}

/// Rebuild a trainer from a checkpoint, training until `epochs`.
pub fn resume_trainer<'a>(ckpt: Checkpoint, clips: &'a [Clip], epochs: usize) -> Result<Trainer<'a>> {
    let ModelKind::Trained(method) = ckpt.meta.method else {
        return Err(Error::Checkpoint("cannot resume training from the identity oracle".into()));
    };
    let mut cfg = ckpt.meta.config.clone();
    cfg.method = method;
    cfg.epochs = epochs;
    let models = ckpt.models.ok_or_else(|| Error::Checkpoint("checkpoint holds no networks".into()))?;
    let mut optimizers = BTreeMap::new();
    for (name, _) in models.networks() {
        let opt = ckpt
            .optimizers
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Checkpoint(format!("no optimizer state for {name}")))?;
        optimizers.insert(name, opt);
    }
    Trainer::restore(cfg, models, optimizers, ckpt.meta.sampler, clips, ckpt.meta.epoch, ckpt.meta.global_step)
}

/// Train for `cfg.epochs` epochs, checkpointing after each, with one metrics record per step.
pub fn run_training(cfg: &MethodConfig, clips: &[Clip], opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = &opts.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let metrics_path = out.join(METRICS_FILE);

    let (mut trainer, mut records) = match &opts.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let step = ckpt.meta.global_step;
            let trainer = resume_trainer(ckpt, clips, cfg.epochs)?;
            let previous = if metrics_path.is_file() { read_metrics(&metrics_path)? } else { Vec::new() };
            let kept: Vec<StepRecord> = previous.into_iter().filter(|r| r.step <= step).collect();
            (trainer, kept)
        }
        None => (Trainer::new(cfg.clone(), clips)?, Vec::new()),
    };
    config::save(&trainer.cfg, &out.join(CONFIG_FILE))?;
    let mut writer = MetricsWriter::create(&metrics_path, &records)?;

    let spe = trainer.steps_per_epoch();
    let total = spe * trainer.cfg.epochs as u64;
    let limit = opts.max_steps.map_or(total, |m| m.min(total));
    let time_offset = records.last().map_or(0.0, |r| r.wall_time);
    let start = Instant::now();
    log::info!(
        "training {} for {} epochs x {spe} steps ({} parameters)",
        trainer.cfg.method,
        trainer.cfg.epochs,
        trainer.models.parameter_count()
    );

    while trainer.global_step < limit {
        let epoch = (trainer.global_step / spe) as usize + 1;
        let losses = match trainer.step() {
            Ok(l) if l.values().all(|v| v.is_finite()) => l,
            Ok(l) => Err(Error::NonFinite(format!("losses at step {}: {l:?}", trainer.global_step)))
                .or_else(|e| fail(&trainer, &records, out, &mut writer, e))?,
            Err(e @ Error::NonFinite(_)) => fail(&trainer, &records, out, &mut writer, e)?,
            Err(e) => return Err(e),
        };
        let record = StepRecord {
            step: trainer.global_step,
            epoch,
            losses,
            wall_time: time_offset + start.elapsed().as_secs_f64(),
        };
        writer.append(&record)?;
        records.push(record);
        if trainer.global_step % spe == 0 {
            trainer.epoch = epoch;
            writer.flush()?;
            snapshot(&trainer, &records).save(&epoch_checkpoint_path(out, epoch))?;
            if let Some(s) = epoch_summaries(&records).last() {
                log::info!("epoch {epoch}: {:?} ({:.1}s)", s.losses, start.elapsed().as_secs_f64());
            }
        }
    }
    writer.flush()?;
    let final_checkpoint = out.join(FINAL_CHECKPOINT);
    snapshot(&trainer, &records).save(&final_checkpoint)?;
    Ok(RunOutcome { final_checkpoint, metrics_log: metrics_path, records })
}

fn fail<T>(
    trainer: &Trainer<'_>,
    records: &[StepRecord],
    out: &Path,
    writer: &mut MetricsWriter,
    err: Error,
) -> Result<T> {
    writer.flush()?;
    let path = out.join(FAILURE_CHECKPOINT);
    snapshot(trainer, records).save(&path)?;
    log::error!("{err}; state saved to {}", path.display());
    Err(err)
}
