use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kernel::{KernelError, KernelSpec};
use crate::corpus::Label;
use crate::featurize::{FeatureVector, FeaturizerSpec};
use crate::par::{self, Execution};

/// Version written to and required from model files.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// RFC-3339 training date. Left empty unless explicitly stamped so that
    /// identical inputs produce identical files.
    pub date: Option<String>,
    /// Hex SHA-256 of the training corpus file.
    pub corpus_hash: Option<String>,
    pub n_train: usize,
    pub iterations: u64,
    /// False when the iteration cap was hit before the tolerance.
    pub converged: bool,
    /// Final dual objective.
    pub objective: f64,
    pub tolerance: f64,
}

/// A trained binary SVM: `f(x) = Σ coefᵢ K(svᵢ, x) + b`, where
/// `coefᵢ = αᵢ yᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub cost: f64,
    pub support_vectors: Vec<FeatureVector>,
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub feature_dim: usize,
    pub featurizer: Option<FeaturizerSpec>,
    pub metadata: TrainingMetadata,
}

impl SvmModel {
    pub fn decision_value(&self, x: &[f64]) -> Result<f64, KernelError> {
        if x.len() != self.feature_dim {
            return Err(KernelError::DimMismatch(self.feature_dim, x.len()));
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * self.kernel.eval_unchecked(sv.as_slice(), x))
            .sum::<f64>()
            + self.bias
    }

    /// Violent when `f(x) ≥ 0`; an exact zero errs toward alerting.
    pub fn predict(&self, x: &[f64]) -> Result<Label, KernelError> {
        self.decision_value(x).map(label_for)
    }

    pub fn decision_batch(&self, exec: Execution, xs: &[FeatureVector]) -> Result<Vec<f64>, KernelError> {
        if let Some(bad) = xs.iter().find(|x| x.dim() != self.feature_dim) {
            return Err(KernelError::DimMismatch(self.feature_dim, bad.dim()));
        }
        Ok(par::map(exec, xs, |x| self.decision_unchecked(x.as_slice())))
    }

    /// Dual objective recomputed from the stored support vectors.
    pub fn dual_objective(&self) -> f64 {
        let n = self.support_vectors.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.dual_coefs[i]
                    * self.dual_coefs[j]
                    * self.kernel.eval_unchecked(self.support_vectors[i].as_slice(), self.support_vectors[j].as_slice());
            }
        }
        self.dual_coefs.iter().map(|c| c.abs()).sum::<f64>() - 0.5 * quad
    }

    /// Serializes to the versioned JSON model document.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFileRef::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::Corrupt("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(ModelError::VersionMismatch { found: version });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        file.into_model()
    }
}

pub fn label_for(decision: f64) -> Label {
    if decision >= 0.0 {
        Label::Violent
    } else {
        Label::Benign
    }
}

#[derive(Serialize, Deserialize)]
struct LabelMap {
    violent: i8,
    benign: i8,
}

const LABEL_MAP: LabelMap = LabelMap { violent: 1, benign: -1 };

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u32,
    featurizer: &'a Option<FeaturizerSpec>,
    kernel: &'a KernelSpec,
    #[serde(rename = "C")]
    cost: f64,
    feature_dim: usize,
    label_map: &'a LabelMap,
    support_vectors: &'a [FeatureVector],
    dual_coefs: &'a [f64],
    bias: f64,
    training_metadata: &'a TrainingMetadata,
}

impl<'a> From<&'a SvmModel> for ModelFileRef<'a> {
    fn from(m: &'a SvmModel) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            featurizer: &m.featurizer,
            kernel: &m.kernel,
            cost: m.cost,
            feature_dim: m.feature_dim,
            label_map: &LABEL_MAP,
            support_vectors: &m.support_vectors,
            dual_coefs: &m.dual_coefs,
            bias: m.bias,
            training_metadata: &m.metadata,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[allow(dead_code)]
    format_version: u32,
    featurizer: Option<FeaturizerSpec>,
    kernel: KernelSpec,
    #[serde(rename = "C")]
    cost: f64,
    feature_dim: usize,
    label_map: LabelMap,
    support_vectors: Vec<FeatureVector>,
    dual_coefs: Vec<f64>,
    bias: f64,
    training_metadata: TrainingMetadata,
}

impl ModelFile {
    fn into_model(self) -> Result<SvmModel, ModelError> {
        let corrupt = |m: &str| Err(ModelError::Corrupt(m.to_string()));
        if self.label_map.violent != 1 || self.label_map.benign != -1 {
            return corrupt("unsupported label map");
        }
        if self.support_vectors.len() != self.dual_coefs.len() {
            return corrupt("support vector and coefficient counts differ");
        }
        if self.support_vectors.iter().any(|sv| sv.dim() != self.feature_dim) {
            return corrupt("support vector dimension differs from feature_dim");
        }
        if let Some(f) = &self.featurizer {
            if f.kind.dim() != self.feature_dim {
                return corrupt("featurizer dimension differs from feature_dim");
            }
        }
        if self.kernel.validate().is_err() || !(self.cost > 0.0) {
            return corrupt("invalid kernel or C");
        }
        let all_finite = self.bias.is_finite()
            && self.dual_coefs.iter().all(|c| c.is_finite())
            && self.support_vectors.iter().all(|sv| sv.as_slice().iter().all(|v| v.is_finite()));
        if !all_finite {
            return corrupt("non-finite parameter");
        }
        Ok(SvmModel {
            kernel: self.kernel,
            cost: self.cost,
            support_vectors: self.support_vectors,
            dual_coefs: self.dual_coefs,
            bias: self.bias,
            feature_dim: self.feature_dim,
            featurizer: self.featurizer,
            metadata: self.training_metadata,
        })
    }
}

pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut f = fs::File::create(path)?;
    f.write_all(model.to_json().as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, ModelError> {
    SvmModel::from_json(&fs::read_to_string(path)?)
}
