//! Automatic 3D box annotation for LiDAR sequences guided by 2D instance cues.
//!
//! The pipeline runs in two stages. Instance alignment lifts 2D masks onto
//! the LiDAR sweep and cleans the result with density clusters. Box
//! generation then splits instances by physical type (static rigid, dynamic
//! rigid, deformable) and fits a box with the strategy suited to each.

pub mod alignment;
pub mod boxfit;
pub mod config;
pub mod error;
pub mod eval;
pub mod export;
pub mod geometry;
pub mod grid;
pub mod mask;
pub mod motion;
pub mod pipeline;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};
