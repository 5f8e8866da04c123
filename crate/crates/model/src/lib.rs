//! Dual-branch CNN-LSTM for multi-label prediction from video with optional
//! gaze-derived streams (pupil images, attention maps).
//!
//! Every layer has a hand-written backward pass. The network is generic over
//! [`Scalar`] so the same code runs in `f32` for training and `f64` for
//! finite-difference checks.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod input;
pub mod layers;
pub mod network;
pub mod params;
pub mod scalar;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use error::{Error, Result};
pub use input::{BatchInput, Fill, InferenceMode, ModalityPolicy, ModalityStats};
pub use network::{EvalMaps, FeatureGrads, Features, Graph, KeepMaps, Network, TaskMaps};
pub use scalar::Scalar;
