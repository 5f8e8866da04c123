//! Per-task explanations of a trained network.
//!
//! Spatial maps are Grad-CAM over a branch's task-specific video
//! convolution. Temporal weights are the gradient norms of a task logit
//! with respect to each timestep's recurrent input.

pub mod error;
pub mod render;
pub mod saliency;

pub use error::{Error, Result};
pub use render::{write_curve_png, write_overlay_png};
pub use saliency::{
    bilinear_upsample, explain, grad_cam, read_saliency, temporal_saliency, write_saliency, CamLayer, SaliencyResult,
    SpatialMaps, TemporalWeights, OUT_HEIGHT, OUT_WIDTH,
};
