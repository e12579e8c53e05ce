use std::sync::Arc;

use thiserror::Error;

use super::cache::RowCache;
use super::kernel::{KernelError, KernelSpec};
use super::model::{SvmModel, TrainingMetadata};
use crate::corpus::Label;
use crate::featurize::FeatureVector;
use crate::par::{self, Execution};

/// Curvature floor for non positive-definite working pairs.
const TAU: f64 = 1e-12;
/// Multipliers at or below this are not stored as support vectors.
const SV_THRESHOLD: f64 = 1e-12;
/// Kernel rows shorter than this are computed sequentially.
const PAR_ROW_MIN: usize = 128;
/// Default cache budget in bytes.
const CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("{x} feature vectors but {y} labels")]
    LengthMismatch { x: usize, y: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("sample {index} has dimension {got}, expected {expected}")]
    DimMismatch { index: usize, expected: usize, got: usize },
    #[error("invalid SVM parameter: {0}")]
    BadParameter(&'static str),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    pub kernel: KernelSpec,
    /// Box constraint C.
    pub cost: f64,
    /// Stop once the maximal KKT violation is at most this.
    pub tolerance: f64,
    /// Cap on SMO pair updates.
    pub max_iterations: u64,
    /// Recorded in the model metadata.
    pub seed: u64,
    /// Kernel rows kept in the LRU cache; `None` sizes it from a memory budget.
    pub cache_rows: Option<usize>,
    pub execution: Execution,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Rbf { gamma: 0.1 },
            cost: 10.0,
            tolerance: 1e-3,
            max_iterations: 10_000_000,
            seed: 0,
            cache_rows: None,
            execution: Execution::default(),
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.cost.is_finite() && self.cost > 0.0) {
            return Err(SvmError::BadParameter("C must be positive and finite"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SvmError::BadParameter("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SvmError::BadParameter("max_iterations must be at least 1"));
        }
        self.kernel.validate()?;
        Ok(())
    }
}

struct Problem<'a> {
    x: &'a [FeatureVector],
    y: Vec<f64>,
    kernel: KernelSpec,
    exec: Execution,
}

impl Problem<'_> {
    /// Row `i` of `Q = yᵢ yⱼ K(xᵢ, xⱼ)`.
    fn q_row(&self, i: usize) -> Vec<f64> {
        let n = self.x.len();
        let xi = self.x[i].as_slice();
        let yi = self.y[i];
        let exec = if n >= PAR_ROW_MIN { self.exec } else { Execution::Sequential };
        let mut row = vec![0.0; n];
        par::fill(exec, &mut row, |j| {
            yi * self.y[j] * self.kernel.eval_unchecked(xi, self.x[j].as_slice())
        });
        row
    }
}

/// State of the dual problem in LIBSVM's minimization form:
/// `min ½ αᵀQα − eᵀα`, gradient `G = Qα − e`.
struct Smo<'a> {
    problem: Problem<'a>,
    cost: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    diag: Vec<f64>,
    cache: RowCache,
}

impl<'a> Smo<'a> {
    fn new(problem: Problem<'a>, cost: f64, cache_rows: usize) -> Self {
        let n = problem.x.len();
        let diag = (0..n)
            .map(|i| problem.kernel.eval_unchecked(problem.x[i].as_slice(), problem.x[i].as_slice()))
            .collect();
        Self {
            problem,
            cost,
            alpha: vec![0.0; n],
            grad: vec![-1.0; n],
            diag,
            cache: RowCache::new(cache_rows),
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        let problem = &self.problem;
        self.cache.get_or_compute(i, || problem.q_row(i))
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.cost
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Second-order working set selection. `None` once the maximal
    /// violation is within `tol`.
    fn select_pair(&mut self, tol: f64) -> Option<(usize, usize)> {
        let n = self.alpha.len();
        let y = &self.problem.y;

        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..n {
            let v = if y[t] > 0.0 {
                (!self.at_upper(t)).then(|| -self.grad[t])
            } else {
                (!self.at_lower(t)).then(|| self.grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let i = i?;
        let qi = self.row(i);
        let y = &self.problem.y;

        let mut gmax2 = f64::NEG_INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j = None;
        for t in 0..n {
            let (grad_diff, quad) = if y[t] > 0.0 {
                if self.at_lower(t) {
                    continue;
                }
                gmax2 = gmax2.max(self.grad[t]);
                (gmax + self.grad[t], self.diag[i] + self.diag[t] - 2.0 * y[i] * qi[t])
            } else {
                if self.at_upper(t) {
                    continue;
                }
                gmax2 = gmax2.max(-self.grad[t]);
                (gmax - self.grad[t], self.diag[i] + self.diag[t] + 2.0 * y[i] * qi[t])
            };
            if grad_diff > 0.0 {
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j = Some(t);
                }
            }
        }
        if gmax + gmax2 <= tol {
            return None;
        }
        j.map(|j| (i, j))
    }

    /// Analytic two-variable update with clipping to the box.
    fn update_pair(&mut self, i: usize, j: usize) {
        let qi = self.row(i);
        let qj = self.row(j);
        let c = self.cost;
        let y = &self.problem.y;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);

        if y[i] != y[j] {
            let quad = self.diag[i] + self.diag[j] + 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = self.diag[i] + self.diag[j] - 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }

        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in self.grad.iter_mut().enumerate() {
            *g += qi[t] * di + qj[t] * dj;
        }
    }

    /// Offset from free multipliers, or the midpoint of the feasible
    /// interval when every multiplier sits at a bound.
    fn bias(&self) -> f64 {
        let y = &self.problem.y;
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free) = (0.0, 0usize);
        for t in 0..self.alpha.len() {
            let yg = y[t] * self.grad[t];
            if self.at_upper(t) {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.at_lower(t) {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if ub.is_finite() {
            ub
        } else {
            lb
        };
        -rho
    }

    /// `Σα − ½αᵀQα`, the dual objective being maximized.
    fn objective(&self) -> f64 {
        0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (1.0 - g)).sum::<f64>()
    }
}

/// Trains a C-SVC on `x` with labels `y` (violent = +1).
///
/// Hitting `max_iterations` is not an error: the model is returned with
/// `metadata.converged == false`.
pub fn train(x: &[FeatureVector], y: &[Label], cfg: &SvmConfig) -> Result<SvmModel, SvmError> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(SvmError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(SvmError::TooFewSamples(x.len()));
    }
    if !(y.contains(&Label::Violent) && y.contains(&Label::Benign)) {
        return Err(SvmError::SingleClass);
    }
    let dim = x[0].dim();
    if let Some((index, v)) = x.iter().enumerate().find(|(_, v)| v.dim() != dim) {
        return Err(SvmError::DimMismatch { index, expected: dim, got: v.dim() });
    }

    let n = x.len();
    let cache_rows = cfg.cache_rows.unwrap_or_else(|| (CACHE_BYTES / (8 * n)).clamp(2, n));
    let problem = Problem {
        x,
        y: y.iter().map(|l| l.sign()).collect(),
        kernel: cfg.kernel,
        exec: cfg.execution,
    };
    let mut smo = Smo::new(problem, cfg.cost, cache_rows);

    let mut iterations = 0u64;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        match smo.select_pair(cfg.tolerance) {
            Some((i, j)) => {
                smo.update_pair(i, j);
                iterations += 1;
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    if !converged && smo.select_pair(cfg.tolerance).is_none() {
        converged = true;
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without reaching tolerance {}", cfg.tolerance);
    }

    let bias = smo.bias();
    let objective = smo.objective();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (t, &a) in smo.alpha.iter().enumerate() {
        if a > SV_THRESHOLD {
            support_vectors.push(x[t].clone());
            dual_coefs.push(a * smo.problem.y[t]);
        }
    }

    Ok(SvmModel {
        kernel: cfg.kernel,
        cost: cfg.cost,
        support_vectors,
        dual_coefs,
        bias,
        feature_dim: dim,
        featurizer: None,
        metadata: TrainingMetadata {
            seed: cfg.seed,
            date: None,
            corpus_hash: None,
            n_train: n,
            iterations,
            converged,
            objective,
            tolerance: cfg.tolerance,
        },
    })
}
