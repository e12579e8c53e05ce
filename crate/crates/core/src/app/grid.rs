use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::Featurizer;
use super::{AppError, PipelineConfig};
use crate::corpus::{load_corpus, stratified_folds, stratified_split, Corpus, Label};
use crate::eval::{ConfusionMatrix, EvalReport};
use crate::featurize::FeatureVector;
use crate::par;
use crate::smote::smote_traced;
use crate::svm::{self, label_for, KernelSpec, SvmConfig};
use crate::textprep::Token;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub costs: Vec<f64>,
    pub gammas: Vec<f64>,
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub cost: f64,
    pub gamma: f64,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// One row per (C, γ), C-major in the order given.
    pub rows: Vec<GridRow>,
    pub best: usize,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn render_text(&self) -> String {
        let mut s = String::from("C\tgamma\tmean_f1\tfold_f1\n");
        for (i, r) in self.rows.iter().enumerate() {
            let folds: Vec<String> = r.fold_f1.iter().map(|f| format!("{f:.4}")).collect();
            let mark = if i == self.best { "\t*" } else { "" };
            let _ = writeln!(s, "{}\t{}\t{:.4}\t{}{}", r.cost, r.gamma, r.mean_f1, folds.join(","), mark);
        }
        let b = self.best_row();
        let _ = writeln!(s, "best: C={} gamma={} mean_f1={:.4}", b.cost, b.gamma, b.mean_f1);
        s
    }
}

fn with_gamma(kernel: KernelSpec, gamma: f64) -> KernelSpec {
    match kernel {
        KernelSpec::Linear => KernelSpec::Linear,
        KernelSpec::Rbf { .. } => KernelSpec::Rbf { gamma },
        KernelSpec::Poly { degree, coef0, .. } => KernelSpec::Poly { degree, gamma, coef0 },
    }
}

struct FoldData {
    train_x: Vec<FeatureVector>,
    train_y: Vec<Label>,
    test_x: Vec<FeatureVector>,
    test_y: Vec<Label>,
}

/// Seeded stratified k-fold cross-validation over C × γ on the training
/// split. Each fold refits the featurizer (and SMOTE) on its own training
/// part. The best row has the highest mean positive-class F1; ties go to
/// the smaller C, then the smaller γ.
pub fn grid_search(cfg: &PipelineConfig, corpus: &Corpus, grid: &GridSpec) -> Result<GridResult, AppError> {
    cfg.validate()?;
    if grid.folds < 2 {
        return Err(AppError::Usage("grid search needs at least 2 folds".into()));
    }
    if grid.costs.is_empty() || grid.gammas.is_empty() {
        return Err(AppError::Usage("grid must contain at least one C and one gamma".into()));
    }
    if grid.costs.iter().chain(&grid.gammas).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(AppError::Usage("grid values must be positive".into()));
    }
    let exec = cfg.svm.execution;
    let (train, _) = stratified_split(corpus, cfg.split)?;
    let assignment = stratified_folds(&train, grid.folds, cfg.split.seed)?;
    let pre = cfg.preprocessor()?;
    let texts: Vec<&str> = train.iter().map(|s| s.text.as_str()).collect();
    let docs: Vec<Vec<Token>> = par::map(exec, &texts, |t| pre.preprocess(t));

    let mut folds = Vec::with_capacity(grid.folds);
    for k in 0..grid.folds {
        let pick = |inside: bool| -> (Vec<Vec<Token>>, Vec<Label>) {
            train
                .iter()
                .zip(&docs)
                .zip(&assignment)
                .filter(|(_, &f)| (f == k) == inside)
                .map(|((s, d), _)| (d.clone(), s.label))
                .unzip()
        };
        let (tr_docs, mut train_y) = pick(false);
        let (te_docs, test_y) = pick(true);
        let featurizer = Featurizer::fit(&cfg.featurizer, pre.clone(), &tr_docs)?;
        let mut train_x: Vec<FeatureVector> =
            featurizer.from_tokens(exec, &tr_docs).into_iter().map(|f| f.vector).collect();
        let test_x = featurizer.from_tokens(exec, &te_docs).into_iter().map(|f| f.vector).collect();
        if let Some(smote) = &cfg.smote {
            let v = train_y.iter().filter(|&&l| l == Label::Violent).count();
            let b = train_y.len() - v;
            if v != b {
                let (minority, majority) = if v < b { (Label::Violent, b) } else { (Label::Benign, v) };
                let points: Vec<FeatureVector> = train_x
                    .iter()
                    .zip(&train_y)
                    .filter(|(_, &l)| l == minority)
                    .map(|(x, _)| x.clone())
                    .collect();
                for s in smote_traced(exec, &points, majority, smote)? {
                    train_x.push(s.vector);
                    train_y.push(minority);
                }
            }
        }
        folds.push(FoldData { train_x, train_y, test_x, test_y });
    }

    let dim = folds[0].train_x.first().map_or(0, |x| x.dim());
    let base_kernel = cfg.kernel_for_dim(dim);
    let configs: Vec<(f64, f64)> =
        grid.costs.iter().flat_map(|&c| grid.gammas.iter().map(move |&g| (c, g))).collect();
    let jobs: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|c| (0..grid.folds).map(move |f| (c, f))).collect();
    let scores: Vec<Result<f64, AppError>> = par::map(exec, &jobs, |&(ci, fi)| {
        let (cost, gamma) = configs[ci];
        let fold = &folds[fi];
        let svm_cfg = SvmConfig { kernel: with_gamma(base_kernel, gamma), cost, ..cfg.svm.clone() };
        let model = svm::train(&fold.train_x, &fold.train_y, &svm_cfg)?;
        let d = model.decision_batch(exec, &fold.test_x)?;
        let m = ConfusionMatrix::tally(fold.test_y.iter().zip(d).map(|(&t, d)| (t, label_for(d))));
        Ok(EvalReport::from_matrix(m).f1)
    });

    let mut rows = Vec::with_capacity(configs.len());
    let mut scores = scores.into_iter();
    for &(cost, gamma) in &configs {
        let fold_f1 = (0..grid.folds).map(|_| scores.next().unwrap()).collect::<Result<Vec<f64>, _>>()?;
        let mean_f1 = fold_f1.iter().sum::<f64>() / grid.folds as f64;
        rows.push(GridRow { cost, gamma, fold_f1, mean_f1 });
    }
    let best = (0..rows.len())
        .reduce(|a, b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            let better = rb.mean_f1 > ra.mean_f1
                || (rb.mean_f1 == ra.mean_f1 && (rb.cost, rb.gamma) < (ra.cost, ra.gamma));
            if better {
                b
            } else {
                a
            }
        })
        .expect("grid is non-empty");
    Ok(GridResult { rows, best })
}

pub fn cmd_grid_search(cfg: &PipelineConfig, corpus_path: &Path, grid: &GridSpec) -> Result<GridResult, AppError> {
    let corpus = load_corpus(corpus_path).map_err(|e| match e {
        crate::corpus::CorpusError::Io(io) => AppError::io(format!("reading {}", corpus_path.display()), io),
        other => other.into(),
    })?;
    grid_search(cfg, &corpus, grid)
}
