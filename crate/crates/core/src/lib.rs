//! Event stream denoising based on graph spectral features.
//!
//! The pipeline: scale event timestamps, estimate a neighborhood radius from
//! the local density profile, build a weighted neighborhood graph, extract
//! low-eigenvalue Laplacian eigenvectors with a reordered-operator power
//! method, and label events by eigenvector support.

pub mod cli;
pub mod detect;
pub mod error;
pub mod event;
pub mod graph;
pub mod kdtree;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod plot;
pub mod spectral;
pub mod synthdata;

pub use detect::{detect_multi, detect_single, DetectionConfig, DetectionMode, LabelVector};
pub use error::{Error, Result};
pub use event::{load_events, save_events, Event, EventStream, FileFormat, Label, TimeUnit};
pub use graph::{build_eng, build_knng, build_vknng, knee_epsilon, local_density, SparseGraph};
pub use metrics::{evaluate, ConfusionReport};
pub use noise::{synthesize, NoiseSpec};
pub use pipeline::{run_denoise, DenoiseOutcome, PipelineConfig};
pub use spectral::{dense_evd, power_iteration, EigenPair, SpectralOperator};
