mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use poseswap_core::Error;

use args::{Cli, Command};

/// Exit status for failures during computation; everything else the user can fix is 1.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) | Error::Shape(_) | Error::Domain(_) => 2,
        _ => 1,
    }
}

fn run(cli: &Cli) -> poseswap_core::Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Synth { out } => commands::synth(c, out),
        Command::Ingest { root, split, resolution, out } => commands::ingest(c, root, split, *resolution, out),
        Command::Train { data, split, out, resume } => commands::train(c, data, split, out, resume.as_deref()),
        Command::Eval { checkpoint, data, split, method, swap_pairs, out } => {
            commands::eval(c, checkpoint, data, split, method.as_deref(), *swap_pairs, out)
        }
        Command::Swap { checkpoint, data, pose_video, content, out } => {
            commands::swap_cmd(c, checkpoint, data, pose_video, content, out)
        }
        Command::Grid { checkpoints, data, pose_video, content, frames, out } => {
            commands::grid(c, checkpoints, data, pose_video, content, *frames, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
