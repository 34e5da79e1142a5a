//! Content swapping at inference time, reconstruction error and swap figures.

mod diagnostics;
mod eval;
mod grid;
mod model;
mod swap;

pub use diagnostics::{
    figure_centroid, figure_color, nearest_palette_entry, skeleton_centroid, synthetic_swap_diagnostics,
    SwapDiagnostics, FIGURE_THRESHOLD, MIN_FIGURE_BRIGHTNESS,
};
pub use eval::{eval_pairs, evaluate_mse, Distribution, EvalConfig, EvalReport};
pub use grid::{grid_shape, keypoint_frame, render_swap_grid, save_grid, CELL_BORDER};
pub use model::{Reconstructor, Renderer};
pub use swap::{
    mux_video, swap, synthetic_swap_evaluation, synthetic_swap_pairs, write_frames, SwapOutput, FRAMES_DIR,
    GRID_FILE, REPORT_FILE, VIDEO_FILE,
};
