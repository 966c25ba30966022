//! Task-oriented federated meta-learning over a NOMA uplink.
//!
//! The crate simulates a synchronous federated meta-learning (FML) system in
//! which an edge server picks, every global round, which devices upload their
//! meta-updated models, at what transmit power and at what CPU frequency. The
//! per-round objective is the sum over scheduled devices of a task-level
//! weight times a "value of learning" (achieved accuracy against the task's
//! requirement, minus normalised time and energy). Schedulers range from a
//! parameterised deep Q-network with a hybrid action space down to random
//! and round-robin baselines.
//!
//! Module map:
//!
//! - [`nn`]: dense networks, reverse-mode gradients, exact Hessian-vector
//!   products via dual numbers, SGD/Adam.
//! - [`fml`]: synthetic non-IID tasks, meta-gradients, local rounds,
//!   aggregation and accuracy.
//! - [`radio`]: channel draws, SIC ordering, NOMA/OMA rates, time and energy.
//! - [`metrics`]: value of learning, age of update, task-level weights and
//!   the round objective.
//! - [`env`]: the MDP wrapped around one FML round per time slot.
//! - [`agents`]: PDQN, DDPG with rounding, random allocation and rotation.
//! - [`harness`]: configuration, seeding, experiment loops and result files.

pub mod agents;
pub mod env;
pub mod error;
pub mod fml;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod radio;
pub mod seed;

pub use error::{Error, Result};
