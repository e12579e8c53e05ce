use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use sha2::{Digest, Sha256};

use super::{AppError, FeaturizerChoice, PipelineConfig};
use crate::corpus::{parse_corpus, stratified_split, Corpus, Label};
use crate::eval::{ConfusionMatrix, EvalReport};
use crate::featurize::{
    bow_vector, embed_sentence, BowMode, EmbeddingTable, FeatureVector, FeaturizerKind, FeaturizerSpec, Vocabulary,
};
use crate::par::{self, Execution};
use crate::smote::smote_traced;
use crate::svm::{self, label_for, load_model, save_model, SvmConfig, SvmModel};
use crate::textprep::{Preprocessor, StemRules, Stemmer, StopList, Token};

#[derive(Debug, Clone)]
enum Kind {
    Bow { mode: BowMode, vocab: Vocabulary },
    Embedding { path: String, table: Arc<EmbeddingTable> },
}

/// A fitted featurizer: preprocessing plus either a vocabulary or an
/// embedding table.
#[derive(Debug, Clone)]
pub struct Featurizer {
    pre: Preprocessor,
    kind: Kind,
}

/// A feature vector and whether it carries almost no information: nothing
/// survived preprocessing, or no token was known to the featurizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    pub vector: FeatureVector,
    pub low_signal: bool,
}

impl Featurizer {
    /// Fits on preprocessed training sentences. The vocabulary sees only
    /// these documents.
    pub fn fit(choice: &FeaturizerChoice, pre: Preprocessor, train_docs: &[Vec<Token>]) -> Result<Self, AppError> {
        let kind = match choice {
            FeaturizerChoice::Bow { mode, max_terms } => {
                Kind::Bow { mode: *mode, vocab: Vocabulary::from_tokens(train_docs, *max_terms)? }
            }
            FeaturizerChoice::Embedding { path } => Kind::Embedding {
                path: path.display().to_string(),
                table: Arc::new(EmbeddingTable::load(path)?),
            },
        };
        Ok(Self { pre, kind })
    }

    /// Rebuilds the featurizer stored in a model. A relative embeddings
    /// path is tried as given, then relative to `model_dir`; `embeddings`
    /// overrides both.
    pub fn from_spec(
        spec: &FeaturizerSpec,
        embeddings: Option<&Path>,
        model_dir: Option<&Path>,
    ) -> Result<Self, AppError> {
        let stops = StopList::new(spec.stop_words.iter());
        let stemmer = match &spec.stem_rules {
            Some(text) => Stemmer::Rules(StemRules::parse(text)?),
            None => Stemmer::Identity,
        };
        let kind = match &spec.kind {
            FeaturizerKind::Bow { mode, vocabulary } => Kind::Bow { mode: *mode, vocab: vocabulary.clone() },
            FeaturizerKind::Embedding { path, dim } => {
                let resolved = match embeddings {
                    Some(p) => p.to_path_buf(),
                    None => resolve(path, model_dir),
                };
                let table = EmbeddingTable::load(&resolved)?;
                if table.dim() != *dim {
                    return Err(AppError::FeaturizerMismatch(format!(
                        "embeddings in {} have dimension {}, the model expects {dim}",
                        resolved.display(),
                        table.dim()
                    )));
                }
                Kind::Embedding { path: path.clone(), table: Arc::new(table) }
            }
        };
        Ok(Self { pre: Preprocessor::new(stops, stemmer), kind })
    }

    pub fn to_spec(&self) -> FeaturizerSpec {
        let kind = match &self.kind {
            Kind::Bow { mode, vocab } => FeaturizerKind::Bow { mode: *mode, vocabulary: vocab.clone() },
            Kind::Embedding { path, table } => FeaturizerKind::Embedding { path: path.clone(), dim: table.dim() },
        };
        let stem_rules = match &self.pre.stemmer {
            Stemmer::Rules(r) => Some(r.to_rule_text()),
            Stemmer::Identity => None,
        };
        FeaturizerSpec { kind, stop_words: self.pre.stops.sorted(), stem_rules }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Bow { vocab, .. } => vocab.len(),
            Kind::Embedding { table, .. } => table.dim(),
        }
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.pre
    }

    pub fn tokens<S: AsRef<str> + Sync>(&self, exec: Execution, texts: &[S]) -> Vec<Vec<Token>> {
        par::map(exec, texts, |t| self.pre.preprocess(t.as_ref()))
    }

    pub fn from_tokens(&self, exec: Execution, docs: &[Vec<Token>]) -> Vec<Featurized> {
        par::map(exec, docs, |d| self.one(d))
    }

    pub fn featurize<S: AsRef<str> + Sync>(&self, exec: Execution, texts: &[S]) -> Vec<Featurized> {
        par::map(exec, texts, |t| self.one(&self.pre.preprocess(t.as_ref())))
    }

    fn one(&self, tokens: &[Token]) -> Featurized {
        match &self.kind {
            Kind::Bow { mode, vocab } => {
                let vector = bow_vector(tokens, vocab, *mode);
                let low_signal = tokens.is_empty() || vector.is_zero();
                Featurized { vector, low_signal }
            }
            Kind::Embedding { table, .. } => {
                let e = embed_sentence(tokens, table);
                Featurized { vector: e.vector, low_signal: tokens.is_empty() || e.coverage_warning }
            }
        }
    }

    /// Same preprocessing and feature space as `spec`; embedding paths may
    /// differ.
    fn matches(&self, spec: &FeaturizerSpec) -> Result<(), String> {
        let mine = self.to_spec();
        if mine.stop_words != spec.stop_words {
            return Err("stop lists differ".into());
        }
        if mine.stem_rules != spec.stem_rules {
            return Err("stem rules differ".into());
        }
        match (&mine.kind, &spec.kind) {
            (FeaturizerKind::Bow { .. }, FeaturizerKind::Bow { .. }) if mine.kind != spec.kind => {
                Err("vocabularies or weighting modes differ".into())
            }
            (FeaturizerKind::Embedding { dim: a, .. }, FeaturizerKind::Embedding { dim: b, .. }) if a != b => {
                Err(format!("embedding dimensions differ ({a} vs {b})"))
            }
            (FeaturizerKind::Bow { .. }, FeaturizerKind::Embedding { .. })
            | (FeaturizerKind::Embedding { .. }, FeaturizerKind::Bow { .. }) => Err("featurizer types differ".into()),
            _ => Ok(()),
        }
    }
}

fn resolve(path: &str, model_dir: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(path);
    match model_dir {
        Some(dir) if p.is_relative() && !p.exists() => dir.join(p),
        _ => p,
    }
}

/// Classifies every sentence of `test` and tallies the confusion matrix.
pub fn evaluate(model: &SvmModel, featurizer: &Featurizer, test: &Corpus) -> Result<EvalReport, AppError> {
    if test.is_empty() {
        return Err(AppError::EmptyTestSet);
    }
    if featurizer.dim() != model.feature_dim {
        return Err(AppError::FeaturizerMismatch(format!(
            "featurizer produces {} features, the model expects {}",
            featurizer.dim(),
            model.feature_dim
        )));
    }
    if let Some(spec) = &model.featurizer {
        featurizer.matches(spec).map_err(AppError::FeaturizerMismatch)?;
    }
    let texts: Vec<&str> = test.iter().map(|s| s.text.as_str()).collect();
    let xs: Vec<FeatureVector> =
        featurizer.featurize(Execution::default(), &texts).into_iter().map(|f| f.vector).collect();
    let scores = model.decision_batch(Execution::default(), &xs)?;
    let matrix = ConfusionMatrix::tally(test.iter().zip(&scores).map(|(s, &d)| (s.label, label_for(d))));
    Ok(EvalReport::from_matrix(matrix))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvmModel,
    pub featurizer: Featurizer,
    pub report: EvalReport,
    pub train: Corpus,
    pub test: Corpus,
    /// Number of SMOTE vectors added to the training set.
    pub synthetic: usize,
}

/// Split, featurize, optionally oversample, train and evaluate. SMOTE only
/// ever sees training vectors.
pub fn train_pipeline(cfg: &PipelineConfig, corpus: &Corpus) -> Result<TrainOutcome, AppError> {
    cfg.validate()?;
    let exec = cfg.svm.execution;
    let (train, test) = stratified_split(corpus, cfg.split)?;
    let pre = cfg.preprocessor()?;
    let texts: Vec<&str> = train.iter().map(|s| s.text.as_str()).collect();
    let docs: Vec<Vec<Token>> = par::map(exec, &texts, |t| pre.preprocess(t));
    let featurizer = Featurizer::fit(&cfg.featurizer, pre, &docs)?;

    let mut xs: Vec<FeatureVector> = featurizer.from_tokens(exec, &docs).into_iter().map(|f| f.vector).collect();
    let mut ys: Vec<Label> = train.iter().map(|s| s.label).collect();
    let synthetic = match &cfg.smote {
        Some(smote) => oversample(exec, smote, &mut xs, &mut ys)?,
        None => 0,
    };

    let svm_cfg = SvmConfig { kernel: cfg.kernel_for_dim(featurizer.dim()), ..cfg.svm.clone() };
    info!("training on {} vectors ({} synthetic), dimension {}", xs.len(), synthetic, featurizer.dim());
    let mut model = svm::train(&xs, &ys, &svm_cfg)?;
    model.featurizer = Some(featurizer.to_spec());
    let report = evaluate(&model, &featurizer, &test)?;
    Ok(TrainOutcome { model, featurizer, report, train, test, synthetic })
}

fn oversample(
    exec: Execution,
    smote: &crate::smote::SmoteConfig,
    xs: &mut Vec<FeatureVector>,
    ys: &mut Vec<Label>,
) -> Result<usize, AppError> {
    let violent = ys.iter().filter(|&&l| l == Label::Violent).count();
    let benign = ys.len() - violent;
    let (minority, majority_count) = match violent.cmp(&benign) {
        std::cmp::Ordering::Less => (Label::Violent, benign),
        std::cmp::Ordering::Greater => (Label::Benign, violent),
        std::cmp::Ordering::Equal => return Ok(0),
    };
    let points: Vec<FeatureVector> =
        xs.iter().zip(ys.iter()).filter(|(_, &l)| l == minority).map(|(x, _)| x.clone()).collect();
    let synthetic = smote_traced(exec, &points, majority_count, smote)?;
    let n = synthetic.len();
    for s in synthetic {
        xs.push(s.vector);
        ys.push(minority);
    }
    Ok(n)
}

fn read(path: &Path) -> Result<Vec<u8>, AppError> {
    fs::read(path).map_err(|e| AppError::io(format!("reading {}", path.display()), e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    fs::write(path, bytes).map_err(|e| AppError::io(format!("writing {}", path.display()), e))
}

fn corpus_from_bytes(bytes: &[u8], path: &Path) -> Result<Corpus, AppError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| AppError::Usage(format!("{} is not valid UTF-8", path.display())))?;
    Ok(parse_corpus(text)?)
}

/// Trains from a corpus file and writes the model (and the JSON report when
/// `report_out` is set). `date` is recorded in the model metadata.
pub fn cmd_train(
    cfg: &PipelineConfig,
    corpus_path: &Path,
    model_out: &Path,
    report_out: Option<&Path>,
    date: Option<String>,
) -> Result<TrainOutcome, AppError> {
    let bytes = read(corpus_path)?;
    let corpus = corpus_from_bytes(&bytes, corpus_path)?;
    let mut outcome = train_pipeline(cfg, &corpus)?;
    outcome.model.metadata.corpus_hash = Some(hex::encode(Sha256::digest(&bytes)));
    outcome.model.metadata.date = date;
    if !outcome.model.metadata.converged {
        warn!("SVM training stopped at the iteration cap before converging");
    }
    save_model(&outcome.model, model_out)
        .map_err(|e| match e {
            svm::ModelError::Io(io) => AppError::io(format!("writing {}", model_out.display()), io),
            other => other.into(),
        })?;
    if let Some(path) = report_out {
        write(path, outcome.report.to_json(cfg.echo()).as_bytes())?;
    }
    Ok(outcome)
}

/// RFC-3339 training date: `SOURCE_DATE_EPOCH` when set, else now.
pub fn training_date() -> String {
    let stamp = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    stamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Loads a model together with the featurizer it was trained with.
pub fn load_classifier(model_path: &Path, embeddings: Option<&Path>) -> Result<(SvmModel, Featurizer), AppError> {
    let model = load_model(model_path).map_err(|e| match e {
        svm::ModelError::Io(io) => AppError::io(format!("reading {}", model_path.display()), io),
        other => other.into(),
    })?;
    let spec = model
        .featurizer
        .as_ref()
        .ok_or_else(|| AppError::FeaturizerMismatch("model file carries no featurizer".into()))?;
    let featurizer = Featurizer::from_spec(spec, embeddings, model_path.parent())?;
    if featurizer.dim() != model.feature_dim {
        return Err(AppError::FeaturizerMismatch("featurizer and model dimensions differ".into()));
    }
    Ok((model, featurizer))
}

pub fn cmd_evaluate(
    model_path: &Path,
    corpus_path: &Path,
    embeddings: Option<&Path>,
    report_out: Option<&Path>,
) -> Result<EvalReport, AppError> {
    let (model, featurizer) = load_classifier(model_path, embeddings)?;
    let corpus = corpus_from_bytes(&read(corpus_path)?, corpus_path)?;
    let report = evaluate(&model, &featurizer, &corpus)?;
    if let Some(path) = report_out {
        let echo = serde_json::json!({
            "model": model_path.display().to_string(),
            "corpus": corpus_path.display().to_string(),
            "kernel": model.kernel,
            "C": model.cost,
        });
        write(path, report.to_json(echo).as_bytes())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: Label,
    pub score: f64,
    pub low_signal: bool,
}

pub fn classify_lines<S: AsRef<str> + Sync>(
    model: &SvmModel,
    featurizer: &Featurizer,
    exec: Execution,
    lines: &[S],
) -> Result<Vec<Classification>, AppError> {
    let feats = featurizer.featurize(exec, lines);
    let xs: Vec<FeatureVector> = feats.iter().map(|f| f.vector.clone()).collect();
    let scores = model.decision_batch(exec, &xs)?;
    Ok(scores
        .into_iter()
        .zip(feats)
        .map(|(score, f)| Classification { label: label_for(score), score, low_signal: f.low_signal })
        .collect())
}

/// Decision value rounded to six decimals, without a negative zero.
pub fn format_score(score: f64) -> String {
    let r = (score * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".to_string()
    } else {
        r.to_string()
    }
}

/// Writes `<label>\t<score>\t<text>` per input line, plus a trailing
/// `\tlow-signal` column when the features carry almost no information.
pub fn cmd_classify<S: AsRef<str> + Sync>(
    model_path: &Path,
    embeddings: Option<&Path>,
    lines: &[S],
    out: &mut dyn Write,
) -> Result<Vec<Classification>, AppError> {
    let (model, featurizer) = load_classifier(model_path, embeddings)?;
    let results = classify_lines(&model, &featurizer, Execution::default(), lines)?;
    for (line, c) in lines.iter().zip(&results) {
        let flag = if c.low_signal { "\tlow-signal" } else { "" };
        writeln!(out, "{}\t{}\t{}{}", c.label, format_score(c.score), line.as_ref(), flag)
            .map_err(|e| AppError::io("writing output", e))?;
    }
    Ok(results)
}
