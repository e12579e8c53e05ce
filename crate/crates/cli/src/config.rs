//! The optional TOML configuration file and its merge with command-line
//! flags. Flags win over the file, the file wins over built-in defaults.
//!
//! ```toml
//! seed = 7
//! stoplist = "stop.txt"          # relative paths resolve against this file
//! stemrules = "rules.txt"
//!
//! [featurizer]
//! type = "embedding"             # or "bow"
//! mode = "boolean"               # bow only: boolean | tf | tfidf
//! max_terms = 1000
//! embeddings = "vectors.txt"
//!
//! [svm]
//! kernel = "poly"                # linear | rbf | poly
//! gamma = 0.01                   # omit for 1/dim with the embedding featurizer
//! degree = 4
//! coef0 = 1.0
//! cost = 50.0
//! tolerance = 0.001
//! max_iterations = 10000000
//!
//! [smote]
//! enabled = true
//! k = 5
//! ratio = 1.0
//!
//! [split]
//! train_fraction = 0.7
//!
//! [monitor]
//! webhook = "https://example.org/hook"
//! command = "logger -t alarm"
//! debounce_seconds = 30
//! source_id = "kitchen"
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use serde::Deserialize;
use silentalarm::app::{AppError, FeaturizerChoice, MonitorConfig, PipelineConfig};
use silentalarm::featurize::{BowMode, DEFAULT_MAX_TERMS};
use silentalarm::par::Execution;
use silentalarm::smote::SmoteConfig;
use silentalarm::svm::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bow,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Boolean,
    Tf,
    Tfidf,
}

impl From<Weighting> for BowMode {
    fn from(w: Weighting) -> Self {
        match w {
            Weighting::Boolean => BowMode::Boolean,
            Weighting::Tf => BowMode::Tf,
            Weighting::Tfidf => BowMode::TfIdf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Linear,
    Rbf,
    Poly,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub stoplist: Option<PathBuf>,
    pub stemrules: Option<PathBuf>,
    #[serde(default)]
    pub featurizer: FeaturizerSection,
    #[serde(default)]
    pub svm: SvmSection,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub monitor: MonitorSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturizerSection {
    #[serde(rename = "type")]
    pub method: Option<Method>,
    pub mode: Option<Weighting>,
    pub max_terms: Option<usize>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmSection {
    pub kernel: Option<KernelName>,
    pub gamma: Option<f64>,
    pub degree: Option<u32>,
    pub coef0: Option<f64>,
    #[serde(alias = "C")]
    pub cost: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSection {
    pub enabled: Option<bool>,
    pub k: Option<usize>,
    pub ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    pub webhook: Option<String>,
    pub command: Option<String>,
    pub debounce_seconds: Option<f64>,
    pub source_id: Option<String>,
    pub dry_run: Option<bool>,
}

impl FileConfig {
    /// Reads and parses a config file. Relative paths inside it are made
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| AppError::Usage(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.stoplist, &mut cfg.stemrules, &mut cfg.featurizer.embeddings].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Pipeline flags shared by `train` and `grid-search`, all optional so an
/// absent flag falls through to the config file.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct PipelineFlags {
    /// Feature extraction method.
    #[arg(long, visible_alias = "method", value_enum)]
    pub featurizer: Option<Method>,
    /// Word-vector text file for the embedding featurizer.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Bag-of-words weighting.
    #[arg(long, value_enum)]
    pub bow_mode: Option<Weighting>,
    /// Vocabulary size cap.
    #[arg(long)]
    pub max_terms: Option<usize>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelName>,
    /// Kernel gamma; fixes it instead of using 1/dim.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Polynomial degree.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Polynomial offset.
    #[arg(long)]
    pub coef0: Option<f64>,
    /// Box constraint C.
    #[arg(long, short = 'C')]
    pub cost: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<u64>,
    /// Oversample the minority class with SMOTE.
    #[arg(long, conflicts_with = "no_smote")]
    pub smote: bool,
    /// Disable SMOTE even if the method or config enables it.
    #[arg(long)]
    pub no_smote: bool,
    /// SMOTE neighbour count.
    #[arg(long)]
    pub smote_k: Option<usize>,
    /// Target minority size relative to the majority.
    #[arg(long)]
    pub smote_ratio: Option<f64>,
    /// Share of each class used for training.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

/// Settings common to every subcommand.
#[derive(Debug, Default, Clone)]
pub struct Common {
    pub seed: Option<u64>,
    pub stoplist: Option<PathBuf>,
    pub stemrules: Option<PathBuf>,
    pub sequential: bool,
}

impl Common {
    pub fn seed(&self, file: &FileConfig) -> u64 {
        self.seed.or(file.seed).unwrap_or(0)
    }
}

pub fn pipeline_config(common: &Common, flags: &PipelineFlags, file: &FileConfig) -> Result<PipelineConfig, AppError> {
    let embeddings = flags.embeddings.clone().or_else(|| file.featurizer.embeddings.clone());
    let method = flags.featurizer.or(file.featurizer.method).unwrap_or(match embeddings {
        Some(_) => Method::Embedding,
        None => Method::Bow,
    });
    let mut cfg = match method {
        Method::Bow => {
            let mode = flags.bow_mode.or(file.featurizer.mode).map_or(BowMode::Boolean, BowMode::from);
            let max_terms = flags.max_terms.or(file.featurizer.max_terms).unwrap_or(DEFAULT_MAX_TERMS);
            PipelineConfig { featurizer: FeaturizerChoice::Bow { mode, max_terms }, ..PipelineConfig::bag_of_words() }
        }
        Method::Embedding => {
            let path = embeddings
                .ok_or_else(|| AppError::Usage("the embedding featurizer needs --embeddings".into()))?;
            PipelineConfig::embeddings(path)
        }
    };

    let (mut gamma, mut degree, mut coef0) = match cfg.svm.kernel {
        KernelSpec::Rbf { gamma } => (gamma, 3, 0.0),
        KernelSpec::Poly { degree, gamma, coef0 } => (gamma, degree, coef0),
        KernelSpec::Linear => (0.1, 3, 0.0),
    };
    if let Some(g) = flags.gamma.or(file.svm.gamma) {
        gamma = g;
        cfg.auto_gamma = false;
    }
    degree = flags.degree.or(file.svm.degree).unwrap_or(degree);
    coef0 = flags.coef0.or(file.svm.coef0).unwrap_or(coef0);
    let kernel = flags.kernel.or(file.svm.kernel).unwrap_or(match cfg.svm.kernel {
        KernelSpec::Linear => KernelName::Linear,
        KernelSpec::Rbf { .. } => KernelName::Rbf,
        KernelSpec::Poly { .. } => KernelName::Poly,
    });
    cfg.svm.kernel = match kernel {
        KernelName::Linear => KernelSpec::Linear,
        KernelName::Rbf => KernelSpec::Rbf { gamma },
        KernelName::Poly => KernelSpec::Poly { degree, gamma, coef0 },
    };
    if let Some(c) = flags.cost.or(file.svm.cost) {
        cfg.svm.cost = c;
    }
    if let Some(t) = flags.tolerance.or(file.svm.tolerance) {
        cfg.svm.tolerance = t;
    }
    if let Some(m) = flags.max_iterations.or(file.svm.max_iterations) {
        cfg.svm.max_iterations = m;
    }
    if common.sequential {
        cfg.svm.execution = Execution::Sequential;
    }

    let smote_on = if flags.smote {
        true
    } else if flags.no_smote {
        false
    } else {
        file.smote.enabled.unwrap_or(cfg.smote.is_some())
    };
    cfg.smote = smote_on.then(|| {
        let d = SmoteConfig::default();
        SmoteConfig {
            k_neighbors: flags.smote_k.or(file.smote.k).unwrap_or(d.k_neighbors),
            target_ratio: flags.smote_ratio.or(file.smote.ratio).unwrap_or(d.target_ratio),
            seed: d.seed,
        }
    });
    if let Some(f) = flags.train_fraction.or(file.split.train_fraction) {
        cfg.split.train_fraction = f;
    }
    cfg.stoplist_path = common.stoplist.clone().or_else(|| file.stoplist.clone());
    cfg.stemrules_path = common.stemrules.clone().or_else(|| file.stemrules.clone());
    let cfg = cfg.with_seed(common.seed(file));
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Default, Clone, clap::Args)]
pub struct MonitorFlags {
    /// POST each alert here as JSON.
    #[arg(long)]
    pub webhook: Option<String>,
    /// Run this shell command per alert with the JSON on stdin.
    #[arg(long)]
    pub command: Option<String>,
    /// Seconds within which repeated detections collapse into one alert.
    #[arg(long)]
    pub debounce: Option<f64>,
    /// Log alerts instead of sending them.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub source_id: Option<String>,
}

pub fn monitor_config(flags: &MonitorFlags, file: &FileConfig) -> Result<MonitorConfig, AppError> {
    let m = &file.monitor;
    let mut cfg = MonitorConfig {
        webhook_url: flags.webhook.clone().or_else(|| m.webhook.clone()),
        command: flags.command.clone().or_else(|| m.command.clone()),
        dry_run: flags.dry_run || m.dry_run.unwrap_or(false),
        ..MonitorConfig::default()
    };
    if let Some(s) = flags.source_id.clone().or_else(|| m.source_id.clone()) {
        cfg.source_id = s;
    }
    if let Some(secs) = flags.debounce.or(m.debounce_seconds) {
        cfg.debounce = Duration::try_from_secs_f64(secs)
            .map_err(|_| AppError::Usage(format!("debounce must be a non-negative number of seconds, got {secs}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}
