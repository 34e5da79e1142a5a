//! Train method (b) on the default synthetic set and report held-out error and swap scores.
//!
//! `cargo run --release -p poseswap-core --example pilot -- configs/synthetic_pilot.toml [out_dir] [key=value ...]`

use std::path::PathBuf;
use std::time::Instant;

use poseswap_core::config::{self, config_hash};
use poseswap_core::data::{generate_synthetic, Split, SyntheticConfig};
use poseswap_core::swap_eval::{evaluate_mse, synthetic_swap_evaluation, EvalConfig, Reconstructor};
use poseswap_core::train::{run_training, Checkpoint, MethodConfig, RunOptions};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let config_path = PathBuf::from(args.next().unwrap_or_else(|| "configs/synthetic_pilot.toml".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/pilot".into()));
    let overrides: Vec<String> = args.collect();
    let cfg: MethodConfig = config::load(Some(&config_path), &overrides)?;
    println!("config hash {}", config_hash(&cfg));

    let (clips, truth) = generate_synthetic(&SyntheticConfig::default())?;
    let train = Split::Train.select(&clips);
    let test = Split::Test.select(&clips);
    println!("{} train clips, {} test clips", train.len(), test.len());

    let start = Instant::now();
    let run = run_training(&cfg, &train, &RunOptions { out_dir: out, ..Default::default() })?;
    println!("trained in {:.0}s", start.elapsed().as_secs_f64());

    let model = Reconstructor::from_checkpoint(&Checkpoint::load(&run.final_checkpoint)?)?;
    let report = evaluate_mse(&model, &test, &EvalConfig::default())?;
    let swap = synthetic_swap_evaluation(&model, &test, &truth, 10)?;
    println!("test mse {:.5} (median clip {:.5})", report.mse, report.distribution.median);
    println!("content score {:.3}, pose error {:.2}px", swap.content_score, swap.pose_error_px);
    println!("total {:.0}s", start.elapsed().as_secs_f64());
    Ok(())
}
