//! Minimal feed-forward network substrate.
//!
//! Everything runs in `f64`. Two evaluation paths share one parameter layout:
//!
//! - a per-sample path generic over [`Scalar`], used by the small
//!   meta-learning models. Instantiated with [`Dual`] it yields exact
//!   Hessian-vector products (forward-over-reverse) without ever forming a
//!   Hessian.
//! - a batched `f64` path built on GEMM, used by the RL actor and critic
//!   networks where batch sizes and widths are larger.

mod data;
mod loss;
mod mlp;
mod model;
mod optim;
mod param;
mod scalar;

pub use data::{Example, Target};
pub use loss::LossKind;
pub use mlp::{Activation, BatchTrace, MlpSpec};
pub use model::{Classifier, Differentiable, MlpModel, QuadraticModel};
pub use optim::{optimizer_step, AdamState, OptimizerConfig, OptimizerState};
pub use param::{soft_blend, soft_blend_into, GradResult, ParamVector};
pub use scalar::{Dual, Scalar};
