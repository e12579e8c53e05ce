use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("invalid kernel parameters: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `x·y`
    Linear,
    /// `exp(−γ‖x−y‖²)`
    Rbf { gamma: f64 },
    /// `(γ x·y + coef0)^degree`
    Poly { degree: u32, gamma: f64, coef0: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => check_gamma(gamma),
            KernelSpec::Poly { degree, gamma, coef0 } => {
                if degree == 0 {
                    return Err(KernelError::BadParameter("degree must be at least 1"));
                }
                if !coef0.is_finite() {
                    return Err(KernelError::BadParameter("coef0 must be finite"));
                }
                check_gamma(gamma)
            }
        }
    }

    /// Kernel value with a dimension check.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimMismatch(x.len(), y.len()));
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Poly { degree, gamma, coef0 } => {
                (gamma * dot(x, y) + coef0).powi(degree as i32)
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<(), KernelError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(KernelError::BadParameter("gamma must be positive and finite"))
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
