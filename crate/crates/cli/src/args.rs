use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Learn disentangled content/pose video representations and swap content between videos.
#[derive(Debug, Parser)]
#[command(name = "poseswap", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config for the subcommand (synthetic set, training or evaluation settings).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override a config value, e.g. `--set net.base_channels=16`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Random seed, applied after the config file and overrides.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic stick-figure dataset.
    Synth {
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert KTH-style frame folders with keypoint files to the training resolution.
    Ingest {
        /// Source root holding `<video_id>/frame_%06d.png` and `<video_id>.kp`.
        #[arg(long)]
        root: PathBuf,
        /// Subject split to keep: train, test or all.
        #[arg(long, default_value = "all")]
        split: String,
        /// Square output resolution in pixels.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one of the four methods.
    Train {
        /// Dataset directory in the standard layout.
        #[arg(long)]
        data: PathBuf,
        /// Subject split to train on: train, test or all.
        #[arg(long, default_value = "train")]
        split: String,
        /// Run directory for checkpoints, config and metrics.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
    },
    /// Reconstruction error of a checkpoint on held-out clips.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Subject split to evaluate on: train, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        /// Expected method name; mismatches with the checkpoint are an error.
        #[arg(long)]
        method: Option<String>,
        /// Clip pairs with different colors for the synthetic swap scores.
        #[arg(long, default_value_t = 10)]
        swap_pairs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render a video's poses with the content of another image.
    Swap {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory holding the pose video.
        #[arg(long)]
        data: PathBuf,
        /// Video id of the pose source.
        #[arg(long)]
        pose_video: String,
        /// PNG whose subject supplies the content.
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side swap figure for one or more checkpoints.
    Grid {
        /// Checkpoint per output row. Repeatable.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        pose_video: String,
        #[arg(long)]
        content: PathBuf,
        /// Number of leading pose-video frames to show.
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
}
