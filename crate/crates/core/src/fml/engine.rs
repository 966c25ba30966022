use serde::{Deserialize, Serialize};

use super::data::{BatchSampler, TaskDataset};
use crate::error::{Error, Result};
use crate::nn::{Classifier, Differentiable, Example, GradResult, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaHyper {
    /// Inner (adaptation) step size.
    pub alpha: f64,
    /// Meta-learning rate.
    pub beta: f64,
    /// Meta-gradient steps per round.
    pub sgd_steps: usize,
    pub batch_size: usize,
}

impl Default for MetaHyper {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 1.0,
            sgd_steps: 1,
            batch_size: 32,
        }
    }
}

impl MetaHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if self.sgd_steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("sgd_steps and batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Largest-magnitude Hessian eigenvalue over the tasks' training sets,
    /// by power iteration on Hessian-vector products. Fails when
    /// `1 − α·λ` is not positive.
    pub fn check_curvature<M: Differentiable>(
        &self,
        model: &M,
        params: &ParamVector,
        tasks: &[TaskDataset],
        iterations: usize,
    ) -> Result<f64> {
        let d = model.num_params();
        let mut worst: f64 = 0.0;
        for task in tasks {
            let mut v = ParamVector::new(vec![1.0 / (d as f64).sqrt(); d]);
            let mut lambda = 0.0;
            for _ in 0..iterations {
                let hv = model.hessian_vector_product(params, &task.train, &v)?;
                lambda = v.dot(&hv)?;
                let norm = hv.norm();
                if norm == 0.0 {
                    break;
                }
                v = hv.scaled(1.0 / norm);
            }
            worst = worst.max(lambda.abs());
        }
        if 1.0 - self.alpha * worst <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha={} too large for observed curvature {worst:.4}",
                self.alpha
            )));
        }
        Ok(worst)
    }
}

/// The three independent batches one meta-gradient consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaBatches {
    /// Adaptation step batch.
    pub inner: Vec<Example>,
    /// Gradient at the adapted point.
    pub outer: Vec<Example>,
    /// Hessian correction batch.
    pub hessian: Vec<Example>,
}

impl MetaBatches {
    pub fn draw(sampler: &mut BatchSampler, data: &[Example], size: usize) -> Result<Self> {
        Ok(Self {
            inner: sampler.sample(data, size)?,
            outer: sampler.sample(data, size)?,
            hessian: sampler.sample(data, size)?,
        })
    }

    /// Deterministic full-batch variant.
    pub fn full(data: &[Example]) -> Self {
        Self {
            inner: data.to_vec(),
            outer: data.to_vec(),
            hessian: data.to_vec(),
        }
    }
}

/// One inner step `ω − α∇l(ω, batch)`.
pub fn adapt<M: Differentiable>(
    model: &M,
    params: &ParamVector,
    batch: &[Example],
    alpha: f64,
) -> Result<ParamVector> {
    let g = model.loss_and_grad(params, batch)?.grad;
    let mut out = params.clone();
    out.axpy(-alpha, &g)?;
    Ok(out)
}

/// `g − α·H(ω)·g` with `g = ∇l(ω − α∇l(ω))`. The returned loss is the
/// outer-batch loss at the adapted point.
pub fn meta_gradient_on<M: Differentiable>(
    model: &M,
    params: &ParamVector,
    batches: &MetaBatches,
    alpha: f64,
) -> Result<GradResult> {
    let adapted = adapt(model, params, &batches.inner, alpha)?;
    let GradResult { loss, grad: g_inner } = model.loss_and_grad(&adapted, &batches.outer)?;
    let hv = model.hessian_vector_product(params, &batches.hessian, &g_inner)?;
    let mut grad = g_inner;
    grad.axpy(-alpha, &hv)?;
    if !grad.is_finite() {
        return Err(Error::NonFinite("meta-gradient"));
    }
    Ok(GradResult { loss, grad })
}

pub fn meta_gradient<M: Differentiable>(
    model: &M,
    task: &TaskDataset,
    sampler: &mut BatchSampler,
    params: &ParamVector,
    hyper: &MetaHyper,
) -> Result<GradResult> {
    let batches = MetaBatches::draw(sampler, &task.train, hyper.batch_size)?;
    meta_gradient_on(model, params, &batches, hyper.alpha)
}

/// `sgd_steps` meta-gradient descent steps from `start`.
pub fn local_round<M: Differentiable>(
    model: &M,
    task: &TaskDataset,
    sampler: &mut BatchSampler,
    start: &ParamVector,
    hyper: &MetaHyper,
) -> Result<ParamVector> {
    if hyper.sgd_steps == 0 {
        return Err(Error::InvalidArgument("sgd_steps must be at least 1".into()));
    }
    let mut w = start.clone();
    for _ in 0..hyper.sgd_steps {
        let g = meta_gradient(model, task, sampler, &w, hyper)?;
        w.axpy(-hyper.beta, &g.grad)?;
    }
    Ok(w)
}

/// Elementwise mean of the scheduled models; `previous` when none were scheduled.
pub fn aggregate(models: &[ParamVector], previous: &ParamVector) -> Result<ParamVector> {
    let Some(first) = models.first() else {
        return Ok(previous.clone());
    };
    let mut sum = ParamVector::zeros(first.len());
    for m in models {
        sum.axpy(1.0, m)?;
    }
    Ok(sum.scaled(1.0 / models.len() as f64))
}

/// Fraction of test examples whose argmax prediction matches the label.
pub fn evaluate_accuracy<C: Classifier>(model: &C, params: &ParamVector, test: &[Example]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut hits = 0usize;
    for ex in test {
        let label = ex.target.class().ok_or_else(|| {
            Error::InvalidArgument("accuracy needs class-labelled examples".into())
        })?;
        if model.predict(params, &ex.input)? == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Global model plus the devices' latest local models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRoundState {
    pub round: usize,
    pub global_model: ParamVector,
    pub local_models: Vec<ParamVector>,
}

impl GlobalRoundState {
    pub fn new(init: ParamVector, devices: usize) -> Self {
        Self {
            round: 0,
            local_models: vec![init.clone(); devices],
            global_model: init,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fml::make_synthetic_tasks;
    use crate::nn::{Activation, LossKind, MlpModel, MlpSpec, QuadraticModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn origin_task() -> TaskDataset {
        let ex = vec![Example::values(vec![0.0], vec![])];
        TaskDataset {
            train: ex.clone(),
            test: ex,
            generator: crate::fml::ClusterParams {
                rotation: 0.0,
                means: vec![],
                spread: 1.0,
            },
        }
    }

    fn hyper(alpha: f64, beta: f64, steps: usize) -> MetaHyper {
        MetaHyper {
            alpha,
            beta,
            sgd_steps: steps,
            batch_size: 1,
        }
    }

    #[test]
    fn quadratic_meta_gradient() {
        let q = QuadraticModel::new(1, 1.0);
        let task = origin_task();
        let g = meta_gradient(&q, &task, &mut BatchSampler::new(0), &ParamVector::new(vec![2.0]), &hyper(0.5, 0.1, 1))
            .unwrap();
        assert!((g.grad[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_is_plain_gradient() {
        let spec = MlpSpec::new(vec![2, 4, 3], Activation::Tanh, Activation::Identity).unwrap();
        let model = MlpModel::new(spec.clone(), LossKind::CrossEntropy);
        let params = spec.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let task = &make_synthetic_tasks(1, 0, 0.0).unwrap()[0];
        let b = MetaBatches::full(&task.train[..10]);
        let meta = meta_gradient_on(&model, &params, &b, 0.0).unwrap();
        let plain = model.loss_and_grad(&params, &b.outer).unwrap();
        assert_eq!(meta.grad, plain.grad);
    }

    #[test]
    fn local_round_examples() {
        let q = QuadraticModel::new(1, 1.0);
        let task = origin_task();
        let w0 = ParamVector::new(vec![2.0]);
        let mut s = BatchSampler::new(0);
        let one = local_round(&q, &task, &mut s, &w0, &hyper(0.5, 0.1, 1)).unwrap();
        assert!((one[0] - 1.95).abs() < 1e-12);
        let still = local_round(&q, &task, &mut s, &w0, &hyper(0.5, 0.0, 1)).unwrap();
        assert_eq!(still, w0);
        let two = local_round(&q, &task, &mut s, &w0, &hyper(0.5, 0.1, 2)).unwrap();
        assert!((two[0] - 2.0 * 0.975f64.powi(2)).abs() < 1e-12);
        assert!(local_round(&q, &task, &mut s, &w0, &hyper(0.5, 0.1, 0)).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let prev = ParamVector::new(vec![9.0, 9.0]);
        let a = ParamVector::new(vec![1.0, 3.0]);
        let b = ParamVector::new(vec![3.0, 1.0]);
        assert_eq!(aggregate(&[a.clone(), b], &prev).unwrap().as_slice(), &[2.0, 2.0]);
        assert_eq!(aggregate(&[a.clone(), a.clone()], &prev).unwrap(), a);
        assert_eq!(aggregate(std::slice::from_ref(&a), &prev).unwrap(), a);
        assert_eq!(aggregate(&[], &prev).unwrap(), prev);
        assert!(aggregate(&[a, ParamVector::zeros(3)], &prev).is_err());
    }

    #[test]
    fn accuracy_counts() {
        // one-input, two-class linear net whose logits are (0, x)
        let spec = MlpSpec::new(vec![1, 2], Activation::Identity, Activation::Identity).unwrap();
        let model = MlpModel::new(spec, LossKind::CrossEntropy);
        let p = ParamVector::new(vec![0.0, 1.0, 0.0, 0.0]);
        let test: Vec<_> = (0..10)
            .map(|i| {
                let x = if i < 5 { -1.0 } else { 1.0 };
                let label = if i < 7 { usize::from(x > 0.0) } else { usize::from(x < 0.0) };
                Example::class(vec![x], label)
            })
            .collect();
        assert!((evaluate_accuracy(&model, &p, &test).unwrap() - 0.7).abs() < 1e-15);
        let constant = ParamVector::zeros(4);
        let balanced: Vec<_> = (0..4).map(|i| Example::class(vec![1.0], i % 2)).collect();
        assert_eq!(evaluate_accuracy(&model, &constant, &balanced).unwrap(), 0.5);
        assert!(evaluate_accuracy(&model, &p, &[]).is_err());
    }

    #[test]
    fn curvature_check_flags_large_alpha() {
        let q = QuadraticModel::new(2, 4.0);
        let task = TaskDataset {
            train: vec![Example::values(vec![0.0, 0.0], vec![])],
            ..origin_task()
        };
        let w = ParamVector::zeros(2);
        let c = hyper(0.1, 0.1, 1).check_curvature(&q, &w, std::slice::from_ref(&task), 10).unwrap();
        assert!((c - 4.0).abs() < 1e-12);
        assert!(hyper(0.3, 0.1, 1).check_curvature(&q, &w, &[task], 10).is_err());
    }
}
