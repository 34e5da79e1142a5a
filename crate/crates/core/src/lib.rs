//! Disentangled content/pose video representations and pose-conditioned content swapping.
//!
//! A video frame is factored into a *content* code (who is in the scene, what
//! it looks like) and a *pose* code (where the body parts are). Swapping
//! content between two clips re-renders one subject in another subject's pose.

pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod method;
pub mod nets;
pub mod pose;
pub mod swap_eval;
pub mod train;

pub use error::{Error, Result};
pub use method::Method;
