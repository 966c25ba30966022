use serde::{Deserialize, Serialize};

use super::data::Example;
use super::loss::LossKind;
use super::mlp::MlpSpec;
use super::param::{check_len, GradResult, ParamVector};
use super::scalar::{Dual, Scalar};
use crate::error::{Error, Result};

/// A scalar loss over a flat parameter vector with first and second order
/// information. This is the pluggable task-model interface the meta-learning
/// engine works against.
pub trait Differentiable {
    fn num_params(&self) -> usize;

    /// Batch-mean loss and gradient.
    fn loss_and_grad(&self, params: &ParamVector, batch: &[Example]) -> Result<GradResult>;

    /// `∇²l(params) · v` for the batch-mean loss.
    fn hessian_vector_product(
        &self,
        params: &ParamVector,
        batch: &[Example],
        v: &ParamVector,
    ) -> Result<ParamVector>;

    fn loss(&self, params: &ParamVector, batch: &[Example]) -> Result<f64> {
        Ok(self.loss_and_grad(params, batch)?.loss)
    }
}

/// Models that map an input to a class decision.
pub trait Classifier {
    /// Argmax class; ties go to the lowest index.
    fn predict(&self, params: &ParamVector, input: &[f64]) -> Result<usize>;
}

/// An [`MlpSpec`] paired with a loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub loss: LossKind,
}

impl MlpModel {
    pub fn new(spec: MlpSpec, loss: LossKind) -> Self {
        Self { spec, loss }
    }

    fn check(&self, params_len: usize, batch: &[Example]) -> Result<()> {
        check_len("model parameters", self.spec.param_count(), params_len)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for ex in batch {
            check_len("example input", self.spec.input_dim(), ex.input.len())?;
        }
        Ok(())
    }

    /// Batch-mean loss by forward passes only, for any scalar type.
    pub fn loss_with<S: Scalar>(&self, params: &[S], batch: &[Example]) -> Result<S> {
        self.check(params.len(), batch)?;
        let mut total = S::zero();
        for ex in batch {
            let acts = self.spec.forward_trace::<S>(params, &ex.input);
            let (l, _) = self.loss.eval(acts.last().expect("output"), &ex.target)?;
            total += l;
        }
        Ok(total / S::from_f64(batch.len() as f64))
    }

    fn loss_and_grad_with<S: Scalar>(&self, params: &[S], batch: &[Example]) -> Result<(S, Vec<S>)> {
        self.check(params.len(), batch)?;
        let mut total = S::zero();
        let mut grad = vec![S::zero(); params.len()];
        for ex in batch {
            let acts = self.spec.forward_trace::<S>(params, &ex.input);
            let (l, d_out) = self.loss.eval(acts.last().expect("output"), &ex.target)?;
            total += l;
            self.spec.backward_trace(params, &acts, &d_out, &mut grad, false);
        }
        let scale = S::from_f64(1.0 / batch.len() as f64);
        for g in grad.iter_mut() {
            *g = *g * scale;
        }
        Ok((total * scale, grad))
    }
}

impl Differentiable for MlpModel {
    fn num_params(&self) -> usize {
        self.spec.param_count()
    }

    fn loss_and_grad(&self, params: &ParamVector, batch: &[Example]) -> Result<GradResult> {
        let (loss, grad) = self.loss_and_grad_with::<f64>(params.as_slice(), batch)?;
        Ok(GradResult {
            loss,
            grad: ParamVector::new(grad),
        })
    }

    fn hessian_vector_product(
        &self,
        params: &ParamVector,
        batch: &[Example],
        v: &ParamVector,
    ) -> Result<ParamVector> {
        check_len("hessian-vector direction", params.len(), v.len())?;
        let dual: Vec<Dual> = params
            .iter()
            .zip(v.iter())
            .map(|(&p, &d)| Dual::new(p, d))
            .collect();
        let (_, grad) = self.loss_and_grad_with::<Dual>(&dual, batch)?;
        Ok(ParamVector::new(grad.into_iter().map(|g| g.eps).collect()))
    }
}

impl Classifier for MlpModel {
    fn predict(&self, params: &ParamVector, input: &[f64]) -> Result<usize> {
        let out = self.spec.forward(params, input)?;
        let mut best = 0;
        for (k, &z) in out.iter().enumerate().skip(1) {
            if z > out[best] {
                best = k;
            }
        }
        Ok(best)
    }
}

/// `l(ω) = mean_i ½·c·‖ω − x_i‖²` over the batch inputs `x_i`.
///
/// Closed-form gradient `c(ω − x̄)` and Hessian `c·I`; used to pin the
/// meta-learning arithmetic to analytic values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticModel {
    pub dim: usize,
    pub curvature: f64,
}

impl QuadraticModel {
    pub fn new(dim: usize, curvature: f64) -> Self {
        Self { dim, curvature }
    }

    fn check(&self, params_len: usize, batch: &[Example]) -> Result<()> {
        check_len("quadratic parameters", self.dim, params_len)?;
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for ex in batch {
            check_len("quadratic center", self.dim, ex.input.len())?;
        }
        Ok(())
    }
}

impl Differentiable for QuadraticModel {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn loss_and_grad(&self, params: &ParamVector, batch: &[Example]) -> Result<GradResult> {
        self.check(params.len(), batch)?;
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim];
        for ex in batch {
            for (i, (&w, &x)) in params.iter().zip(&ex.input).enumerate() {
                loss += 0.5 * self.curvature * (w - x) * (w - x);
                grad[i] += self.curvature * (w - x);
            }
        }
        Ok(GradResult {
            loss: loss / n,
            grad: ParamVector::new(grad.into_iter().map(|g| g / n).collect()),
        })
    }

    fn hessian_vector_product(
        &self,
        params: &ParamVector,
        batch: &[Example],
        v: &ParamVector,
    ) -> Result<ParamVector> {
        self.check(params.len(), batch)?;
        check_len("hessian-vector direction", self.dim, v.len())?;
        Ok(v.scaled(self.curvature))
    }
}
