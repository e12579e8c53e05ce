use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::AppError;
use crate::corpus::SplitSpec;
use crate::featurize::{BowMode, DEFAULT_MAX_TERMS};
use crate::smote::SmoteConfig;
use crate::svm::{KernelSpec, SvmConfig};
use crate::textprep::{Preprocessor, StemRules, Stemmer, StopList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FeaturizerChoice {
    Bow { mode: BowMode, max_terms: usize },
    Embedding { path: PathBuf },
}

/// Everything `train` and `grid-search` need besides the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub featurizer: FeaturizerChoice,
    pub svm: SvmConfig,
    pub smote: Option<SmoteConfig>,
    pub split: SplitSpec,
    pub stoplist_path: Option<PathBuf>,
    pub stemrules_path: Option<PathBuf>,
    /// Replace the kernel's gamma with 1/dim once the feature dimension is
    /// known. Ignored by the linear kernel.
    pub auto_gamma: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::bag_of_words()
    }
}

impl PipelineConfig {
    /// Boolean bag-of-words over 1000 terms, RBF γ=0.1, C=10, no SMOTE.
    pub fn bag_of_words() -> Self {
        Self {
            featurizer: FeaturizerChoice::Bow { mode: BowMode::Boolean, max_terms: DEFAULT_MAX_TERMS },
            svm: SvmConfig::default(),
            smote: None,
            split: SplitSpec::default(),
            stoplist_path: None,
            stemrules_path: None,
            auto_gamma: false,
        }
    }

    /// Averaged embeddings, degree-4 polynomial kernel with coef0 1 and
    /// γ=1/dim, C=50, SMOTE on.
    pub fn embeddings(path: impl Into<PathBuf>) -> Self {
        Self {
            featurizer: FeaturizerChoice::Embedding { path: path.into() },
            svm: SvmConfig {
                kernel: KernelSpec::Poly { degree: 4, gamma: 1.0, coef0: 1.0 },
                cost: 50.0,
                ..SvmConfig::default()
            },
            smote: Some(SmoteConfig::default()),
            split: SplitSpec::default(),
            stoplist_path: None,
            stemrules_path: None,
            auto_gamma: true,
        }
    }

    /// Uses one seed for the split, SMOTE and the SVM metadata.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.svm.seed = seed;
        if let Some(s) = &mut self.smote {
            s.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<(), AppError> {
        match &self.featurizer {
            FeaturizerChoice::Bow { max_terms, .. } if *max_terms == 0 => {
                return Err(AppError::Usage("max_terms must be at least 1".into()));
            }
            FeaturizerChoice::Embedding { path } if path.as_os_str().is_empty() => {
                return Err(AppError::Usage("the embedding featurizer needs an embeddings file".into()));
            }
            _ => {}
        }
        self.svm.validate()?;
        if let Some(s) = &self.smote {
            if s.k_neighbors == 0 {
                return Err(AppError::Usage("SMOTE k must be at least 1".into()));
            }
            if !(s.target_ratio.is_finite() && s.target_ratio > 0.0) {
                return Err(AppError::Usage("SMOTE ratio must be positive".into()));
            }
        }
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(AppError::Usage(format!("train fraction must lie in (0, 1), got {f}")));
        }
        Ok(())
    }

    pub fn preprocessor(&self) -> Result<Preprocessor, AppError> {
        let stops = match &self.stoplist_path {
            Some(p) => StopList::load(p)?,
            None => StopList::portuguese(),
        };
        let rules = match &self.stemrules_path {
            Some(p) => StemRules::load(p)?,
            None => StemRules::portuguese(),
        };
        Ok(Preprocessor::new(stops, Stemmer::Rules(rules)))
    }

    /// Kernel with gamma resolved for a feature dimension.
    pub fn kernel_for_dim(&self, dim: usize) -> KernelSpec {
        if !self.auto_gamma || dim == 0 {
            return self.svm.kernel;
        }
        let g = 1.0 / dim as f64;
        match self.svm.kernel {
            KernelSpec::Linear => KernelSpec::Linear,
            KernelSpec::Rbf { .. } => KernelSpec::Rbf { gamma: g },
            KernelSpec::Poly { degree, coef0, .. } => KernelSpec::Poly { degree, gamma: g, coef0 },
        }
    }

    /// Configuration summary copied into evaluation reports.
    pub fn echo(&self) -> serde_json::Value {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        json!({
            "featurizer": self.featurizer,
            "kernel": self.svm.kernel,
            "auto_gamma": self.auto_gamma,
            "C": self.svm.cost,
            "tolerance": self.svm.tolerance,
            "max_iterations": self.svm.max_iterations,
            "smote": self.smote,
            "split": self.split,
            "stoplist": path(&self.stoplist_path),
            "stemrules": path(&self.stemrules_path),
        })
    }
}
