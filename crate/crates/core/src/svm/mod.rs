//! Soft-margin binary SVM trained with SMO.
//!
//! [`train`] solves the C-SVC dual
//!
//! ```text
//! max  Σ αᵢ − ½ Σᵢ Σⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ, xⱼ)
//! s.t. 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! with second-order working-pair selection and a maximal-violating-pair
//! stopping rule. Violent maps to `+1`, benign to `−1`.

mod cache;
mod kernel;
mod model;
mod solver;

pub use kernel::{KernelError, KernelSpec};
pub use model::{
    label_for, load_model, save_model, ModelError, SvmModel, TrainingMetadata, FORMAT_VERSION,
};
pub use solver::{train, SvmConfig, SvmError};
