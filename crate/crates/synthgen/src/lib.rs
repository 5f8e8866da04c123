//! Synthetic trials with known structure.
//!
//! Scenes are camera pans over flat coloured rectangles. A simulated
//! observer follows the rectangles with its gaze, its pupil reacts to local
//! luminance and to a latent interest process, and its ratings mix scene
//! properties with two trial latents: `exploration`, visible only through
//! where and how often the observer fixates, and `interest`, visible only
//! through phasic pupil dilations. Ground truth for every trial is written
//! to a sidecar file that the learning pipeline never reads.

pub mod dataset;
pub mod error;
pub mod gaze;
pub mod labels;
pub mod observer;
pub mod scene;
mod seed;

pub use dataset::{gen_dataset, Design, GroundTruth, SynthConfig};
pub use error::{Error, Result};
pub use gaze::{gen_gaze, GazeStats, GazeTrace};
pub use labels::gen_labels;
pub use observer::{SimObserver, TrialLatents};
pub use scene::{edge_density, gen_scene, render, Rect, RenderSpec, Scene, SceneParams};
