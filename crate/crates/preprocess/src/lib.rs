//! Turns raw trials into model-ready [`AlignedSample`]s.
//!
//! Every stream is cut into one-second windows so that the video, the
//! pupil-response images and the attention maps share one time axis.

pub mod align;
pub mod attention;
pub mod config;
pub mod error;
pub mod imaging;
pub mod labels;
pub mod pupil;
pub mod store;

pub use align::{align, AlignedSample};
pub use attention::{attention_maps, sigma_pixels, AttentionMapSequence};
pub use config::PreprocessConfig;
pub use error::{Error, Result};
pub use imaging::{gaf, mtf, paa, pupil_image_sequence, PupilImageSequence};
pub use labels::{normalize_and_binarize, NormalizedLabelTable};
pub use pupil::{clean_pupil, CleanPupilTrace};
pub use store::{preprocess_manifest, SampleIndex, SampleStore, Streams};
