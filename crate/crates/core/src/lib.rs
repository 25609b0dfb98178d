//! Spatio-temporal augmentation toolkit for foreground segmentation in
//! fixed-camera surveillance video.
//!
//! The crate covers the whole data path: loading scene directories
//! ([`sequence_io`]), generating synthetic scenes with exact ground truth
//! ([`synth`]), a per-pixel sample-consensus background subtractor
//! ([`background`]), the background-model splicing and frame-interval
//! augmentations ([`augmentation`]), 6-channel sample assembly and dataset
//! export ([`dataset`]), the change-detection metric suite ([`metrics`]) and
//! the end-to-end dataset build ([`pipeline`]).
//!
//! Numeric code that works on real values (normalization, probability maps,
//! metrics) is generic over [`Scalar`]; the aliases below fix the common
//! choices.

pub mod augmentation;
pub mod background;
pub mod dataset;
mod error;
pub mod fsutil;
pub mod metrics;
pub mod pipeline;
pub mod rng;
mod scalar;
pub mod sequence_io;
pub mod synth;

pub use error::Error;
pub use scalar::Scalar;

pub type MetricReport32 = metrics::MetricReport<f32>;
pub type MetricReport64 = metrics::MetricReport<f64>;
pub type SceneReport64 = metrics::SceneReport<f64>;
pub type ProbMap32 = metrics::ProbMap<f32>;
pub type ProbMap64 = metrics::ProbMap<f64>;
pub type NormalizedSample32 = dataset::NormalizedSample<f32>;
pub type NormalizedSample64 = dataset::NormalizedSample<f64>;
