use serde::{Deserialize, Serialize};

/// Supervision attached to one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    /// Class index for softmax cross-entropy.
    Class(usize),
    /// Regression target for squared error.
    Values(Vec<f64>),
}

impl Target {
    pub fn class(&self) -> Option<usize> {
        match self {
            Target::Class(c) => Some(*c),
            Target::Values(_) => None,
        }
    }
}

/// One labelled sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: Target,
}

impl Example {
    pub fn class(input: Vec<f64>, label: usize) -> Self {
        Self {
            input,
            target: Target::Class(label),
        }
    }

    pub fn values(input: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            input,
            target: Target::Values(values),
        }
    }
}
