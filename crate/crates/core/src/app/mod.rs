//! The pipeline front end: training, evaluation, classification, grammar
//! augmentation, grid search and the alert monitor. The `silentalarm`
//! binary is a thin argument parser over these functions.

mod augment;
mod config;
mod grid;
pub mod monitor;
mod pipeline;

use std::io;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::featurize::FeaturizeError;
use crate::jsgf::JsgfError;
use crate::smote::SmoteError;
use crate::svm::{KernelError, ModelError, SvmError};
use crate::textprep::TextprepError;

pub use augment::{augment, cmd_augment, AugmentMode};
pub use config::{FeaturizerChoice, PipelineConfig};
pub use grid::{cmd_grid_search, grid_search, GridResult, GridRow, GridSpec};
pub use monitor::{AlertEvent, MonitorConfig, MonitorStats};
pub use pipeline::{
    classify_lines, cmd_classify, cmd_evaluate, cmd_train, evaluate, format_score, load_classifier, train_pipeline,
    training_date, Classification, Featurized, Featurizer, TrainOutcome,
};

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad arguments or configuration.
pub const EXIT_USAGE: i32 = 1;
/// Unreadable or inconsistent input data.
pub const EXIT_DATA: i32 = 2;
/// I/O or other runtime failure.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Textprep(#[from] TextprepError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error(transparent)]
    Jsgf(#[from] JsgfError),
    #[error(transparent)]
    Smote(#[from] SmoteError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("featurizer does not match the model: {0}")]
    FeaturizerMismatch(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl AppError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        AppError::Io { context: context.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Svm(SvmError::BadParameter(_)) => EXIT_USAGE,
            AppError::Io { .. }
            | AppError::Corpus(CorpusError::Io(_))
            | AppError::Textprep(TextprepError::Io(_))
            | AppError::Featurize(FeaturizeError::Io(_))
            | AppError::Model(ModelError::Io(_)) => EXIT_RUNTIME,
            _ => EXIT_DATA,
        }
    }
}
