//! Federated meta-learning: task data, the Hessian-corrected meta-gradient,
//! local rounds, server averaging and accuracy evaluation.

mod data;
mod engine;

pub use data::{
    dump_tasks, load_tasks, make_synthetic_tasks, read_tasks, write_tasks, BatchSampler, ClusterParams,
    SyntheticTaskConfig, TaskDataset,
};
pub use engine::{
    adapt, aggregate, evaluate_accuracy, local_round, meta_gradient, meta_gradient_on, GlobalRoundState,
    MetaBatches, MetaHyper,
};
