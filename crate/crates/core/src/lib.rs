//! Detection of violent and abusive utterances in short sentences.
//!
//! Two classification pipelines share one SVM trainer:
//!
//! * bag-of-words (boolean, tf or tf-idf over stemmed tokens) fed to an
//!   RBF or polynomial kernel SVM;
//! * averaged pretrained word embeddings, optionally balanced with SMOTE
//!   before training.
//!
//! Around them sit a JSGF-subset phrase generator for corpus augmentation,
//! confusion-matrix evaluation, and a monitor that classifies a text stream
//! and dispatches silent alerts to a webhook or a local command.
//!
//! Batch work (featurization, kernel rows, SMOTE neighbour search,
//! cross-validation folds) runs on rayon when the `parallel` feature is on.
//! Every parallel path produces the same bytes as its sequential fallback.

pub mod app;
pub mod corpus;
pub mod eval;
pub mod featurize;
pub mod jsgf;
pub mod par;
pub mod smote;
pub mod svm;
pub mod textprep;

pub use corpus::{Corpus, Label, LabeledSentence, SplitSpec};
pub use eval::{ConfusionMatrix, EvalReport};
pub use featurize::{BowMode, EmbeddingTable, FeatureVector, Vocabulary};
pub use par::Execution;
pub use svm::{KernelSpec, SvmConfig, SvmModel};
