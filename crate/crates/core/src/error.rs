use thiserror::Error;

use crate::augmentation::AugError;
use crate::background::BgsError;
use crate::dataset::DatasetError;
use crate::metrics::MetricsError;
use crate::pipeline::PipelineError;
use crate::sequence_io::LoadError;
use crate::synth::SynthError;

/// Any error produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Bgs(#[from] BgsError),
    #[error(transparent)]
    Aug(#[from] AugError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}
