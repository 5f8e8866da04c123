//! Shared domain types for the gazefusion pipeline.
//!
//! This crate owns everything the other stages agree on: the registry of
//! aesthetic dimensions, the `ARR1` array container, the gaze CSV schema,
//! the dataset manifest, participant-level splitting and the flat
//! `key = value` configuration format.

pub mod array;
pub mod config;
pub mod dims;
pub mod error;
pub mod gaze;
pub mod manifest;
pub mod split;

pub use array::{read_array, write_array, Array, DType};
pub use config::{KvConfig, ScreenGeometry, StimulusConfig};
pub use dims::{Category, DimensionSpec, ACTIVE_DIMENSIONS, EXCLUDED_DIMENSIONS, N_TASKS};
pub use error::{Error, Result};
pub use gaze::{read_gaze_csv, write_gaze_csv, GazeSample};
pub use manifest::{load_manifest, DatasetManifest, RecordRef, SequenceRecord, SCHEMA_VERSION};
pub use split::{split_by_participant, Split, SplitAssignment};
