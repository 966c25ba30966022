use serde::{Deserialize, Serialize};

use super::param::{check_len, ParamVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Sgd { lr } | OptimizerConfig::Adam { lr, .. } => lr,
        }
    }

    pub fn init_state(&self, len: usize) -> OptimizerState {
        match self {
            OptimizerConfig::Sgd { .. } => OptimizerState::Sgd,
            OptimizerConfig::Adam { .. } => OptimizerState::Adam(AdamState {
                m: vec![0.0; len],
                v: vec![0.0; len],
                t: 0,
            }),
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    Sgd,
    Adam(AdamState),
}

/// Apply one descent step in place.
///
/// A learning rate of exactly zero is accepted and leaves the parameters
/// untouched (the moment estimates still advance).
pub fn optimizer_step(
    params: &mut ParamVector,
    grad: &[f64],
    state: &mut OptimizerState,
    config: &OptimizerConfig,
) -> Result<()> {
    check_len("optimizer gradient", params.len(), grad.len())?;
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::NonFinite("optimizer gradient"));
    }
    let lr = config.lr();
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate {lr}")));
    }
    match (config, state) {
        (OptimizerConfig::Sgd { .. }, OptimizerState::Sgd) => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        (
            &OptimizerConfig::Adam {
                beta1, beta2, eps, ..
            },
            OptimizerState::Adam(st),
        ) => {
            check_len("adam state", params.len(), st.m.len())?;
            st.t += 1;
            let c1 = 1.0 - beta1.powi(st.t as i32);
            let c2 = 1.0 - beta2.powi(st.t as i32);
            for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut st.m).zip(&mut st.v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                if lr > 0.0 {
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(
                "optimizer state does not match its config".into(),
            ))
        }
    }
    Ok(())
}
