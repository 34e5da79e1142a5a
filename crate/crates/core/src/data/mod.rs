//! Video clips, dataset ingestion and the temporal pair sampler.

mod frame;
mod layout;
mod sampler;
mod synthetic;

pub use frame::{Clip, Frame};
pub use layout::{load_dataset, load_kth, read_clip, subject_id, write_dataset, Split};
pub use sampler::{pair_in_clip, FramePair, FrameRef, PairSampler, SamplerConfig, SamplerState};
pub use synthetic::{
    default_palette, generate_synthetic, render_figure, skeleton_mask, ClipTruth, FigurePose, MotionConfig,
    SyntheticConfig, SyntheticTruth, TRUTH_FILE,
};
