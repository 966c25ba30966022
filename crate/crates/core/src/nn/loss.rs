use serde::{Deserialize, Serialize};

use super::data::Target;
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax over the outputs followed by negative log-likelihood.
    CrossEntropy,
    /// `½‖output − target‖²`.
    HalfSquared,
}

impl LossKind {
    /// Per-example loss and its derivative with respect to the network output.
    pub(crate) fn eval<S: Scalar>(self, out: &[S], target: &Target) -> Result<(S, Vec<S>)> {
        match (self, target) {
            (LossKind::CrossEntropy, Target::Class(label)) => {
                if *label >= out.len() {
                    return Err(Error::InvalidArgument(format!(
                        "class label {label} out of range for {} logits",
                        out.len()
                    )));
                }
                let mut m = out[0];
                for &z in &out[1..] {
                    if z.re() > m.re() {
                        m = z;
                    }
                }
                let exps: Vec<S> = out.iter().map(|&z| (z - m).exp()).collect();
                let mut sum = S::zero();
                for &e in &exps {
                    sum += e;
                }
                let lse = m + sum.ln();
                let loss = lse - out[*label];
                let mut d: Vec<S> = exps.iter().map(|&e| e / sum).collect();
                d[*label] = d[*label] - S::one();
                Ok((loss, d))
            }
            (LossKind::HalfSquared, Target::Values(t)) => {
                if t.len() != out.len() {
                    return Err(Error::dims("regression target", out.len(), t.len()));
                }
                let mut loss = S::zero();
                let mut d = Vec::with_capacity(out.len());
                for (&y, &t) in out.iter().zip(t) {
                    let r = y - S::from_f64(t);
                    loss += S::from_f64(0.5) * r * r;
                    d.push(r);
                }
                Ok((loss, d))
            }
            _ => Err(Error::InvalidArgument(format!(
                "target kind does not match loss {self:?}"
            ))),
        }
    }
}
