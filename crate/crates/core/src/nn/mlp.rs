use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{check_len, ParamVector};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Element-wise nonlinearity applied after an affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, z: S) -> S {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z.re() > 0.0 {
                    z
                } else {
                    S::zero()
                }
            }
            Activation::Identity => z,
            Activation::Sigmoid => S::one() / (S::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    #[inline]
    fn derivative_from_output<S: Scalar>(self, a: S) -> S {
        match self {
            Activation::Tanh => S::one() - a * a,
            Activation::Relu => {
                if a.re() > 0.0 {
                    S::one()
                } else {
                    S::zero()
                }
            }
            Activation::Identity => S::one(),
            Activation::Sigmoid => a * (S::one() - a),
        }
    }
}

/// Fully connected network shape.
///
/// Parameters are laid out layer by layer; each layer stores its weight
/// matrix row-major with shape `(out, in)` followed by its `out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, hidden: Activation, output: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArgument(
                "an MLP needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden,
            output,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.num_layers() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(weight offset, bias offset, fan_in, fan_out)` of every layer.
    fn offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.num_layers());
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            out.push((off, off + fan_in * fan_out, fan_in, fan_out));
            off += fan_in * fan_out + fan_out;
        }
        out
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        for w in self.layer_sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                values.push(rng.random_range(-bound..=bound));
            }
        }
        ParamVector::new(values)
    }

    fn check_params(&self, len: usize) -> Result<()> {
        check_len("mlp parameters", self.param_count(), len)
    }

    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params.len())?;
        check_len("mlp input", self.input_dim(), input.len())?;
        let mut acts = self.forward_trace(params.as_slice(), input);
        Ok(acts.pop().expect("output layer"))
    }

    /// Per-sample forward pass returning every layer's post-activation,
    /// input first. Shapes are the caller's responsibility.
    pub fn forward_trace<S: Scalar>(&self, params: &[S], input: &[f64]) -> Vec<Vec<S>> {
        let mut acts: Vec<Vec<S>> = Vec::with_capacity(self.layer_sizes.len());
        acts.push(input.iter().map(|&x| S::from_f64(x)).collect());
        for (l, (w_off, b_off, fan_in, fan_out)) in self.offsets().into_iter().enumerate() {
            let act = self.activation(l);
            let prev = &acts[l];
            let mut next = Vec::with_capacity(fan_out);
            for j in 0..fan_out {
                let row = &params[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                let mut z = params[b_off + j];
                for (w, a) in row.iter().zip(prev) {
                    z += *w * *a;
                }
                next.push(act.apply(z));
            }
            acts.push(next);
        }
        acts
    }

    /// Reverse pass for one sample.
    ///
    /// `d_output` is dL/d(output). Parameter gradients are accumulated into
    /// `grad`; the gradient with respect to the input is returned when asked.
    pub fn backward_trace<S: Scalar>(
        &self,
        params: &[S],
        acts: &[Vec<S>],
        d_output: &[S],
        grad: &mut [S],
        want_input_grad: bool,
    ) -> Option<Vec<S>> {
        let offsets = self.offsets();
        let mut delta: Vec<S> = d_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (w_off, b_off, fan_in, fan_out) = offsets[l];
            let act = self.activation(l);
            let out = &acts[l + 1];
            let inp = &acts[l];
            for j in 0..fan_out {
                delta[j] = delta[j] * act.derivative_from_output(out[j]);
            }
            for j in 0..fan_out {
                let dz = delta[j];
                let row = &mut grad[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                for (g, a) in row.iter_mut().zip(inp) {
                    *g += dz * *a;
                }
                grad[b_off + j] += dz;
            }
            if l == 0 && !want_input_grad {
                return None;
            }
            let mut prev = vec![S::zero(); fan_in];
            for j in 0..fan_out {
                let dz = delta[j];
                let row = &params[w_off + j * fan_in..w_off + (j + 1) * fan_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += *w * dz;
                }
            }
            delta = prev;
        }
        Some(delta)
    }

    /// Batched forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, params: &[f64], inputs: &[f64], batch: usize) -> Result<BatchTrace> {
        self.check_params(params.len())?;
        check_len("mlp batch input", batch * self.input_dim(), inputs.len())?;
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(inputs.to_vec());
        for (l, (w_off, b_off, fan_in, fan_out)) in self.offsets().into_iter().enumerate() {
            let act = self.activation(l);
            let prev = &acts[l];
            let bias = &params[b_off..b_off + fan_out];
            let mut next = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                next.extend_from_slice(bias);
            }
            // next (batch x out) += prev (batch x in) * W^T (in x out)
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    fan_in,
                    fan_out,
                    1.0,
                    prev.as_ptr(),
                    fan_in as isize,
                    1,
                    params[w_off..].as_ptr(),
                    1,
                    fan_in as isize,
                    1.0,
                    next.as_mut_ptr(),
                    fan_out as isize,
                    1,
                );
            }
            if act != Activation::Identity {
                for z in next.iter_mut() {
                    *z = act.apply(*z);
                }
            }
            acts.push(next);
        }
        Ok(BatchTrace { batch, acts })
    }

    /// Batched reverse pass; `d_output` is `batch x output_dim` row-major.
    /// Accumulates into `grad` and optionally returns the input gradient.
    pub fn backward_batch(
        &self,
        params: &[f64],
        trace: &BatchTrace,
        d_output: &[f64],
        grad: &mut [f64],
        want_input_grad: bool,
    ) -> Result<Option<Vec<f64>>> {
        self.check_params(params.len())?;
        self.check_params(grad.len())?;
        let batch = trace.batch;
        check_len("mlp batch output gradient", batch * self.output_dim(), d_output.len())?;
        let offsets = self.offsets();
        let mut delta = d_output.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (w_off, b_off, fan_in, fan_out) = offsets[l];
            let act = self.activation(l);
            if act != Activation::Identity {
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    *d *= act.derivative_from_output(*a);
                }
            }
            let inp = &trace.acts[l];
            // dW (out x in) += delta^T (out x batch) * inp (batch x in)
            unsafe {
                matrixmultiply::dgemm(
                    fan_out,
                    batch,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    1,
                    fan_out as isize,
                    inp.as_ptr(),
                    fan_in as isize,
                    1,
                    1.0,
                    grad[w_off..].as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in grad[b_off..b_off + fan_out].iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 && !want_input_grad {
                return Ok(None);
            }
            // prev (batch x in) = delta (batch x out) * W (out x in)
            let mut prev = vec![0.0; batch * fan_in];
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    fan_out,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    fan_out as isize,
                    1,
                    params[w_off..].as_ptr(),
                    fan_in as isize,
                    1,
                    0.0,
                    prev.as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            delta = prev;
        }
        Ok(Some(delta))
    }
}

/// Post-activations of every layer for a batch, input first.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl BatchTrace {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// `batch x output_dim` row-major outputs.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("output layer")
    }

    pub fn output_row(&self, i: usize) -> &[f64] {
        let out = self.output();
        let width = out.len() / self.batch;
        &out[i * width..(i + 1) * width]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Tanh, Activation::Identity).unwrap();
        let params = ParamVector::zeros(spec.param_count());
        assert_eq!(spec.forward(&params, &[0.3, -2.0, 5.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_one_linear() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Identity, Activation::Identity).unwrap();
        let params = ParamVector::new(vec![2.0, 1.0]);
        assert_eq!(spec.forward(&params, &[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn tanh_net_at_origin_follows_bias_path() {
        let spec = MlpSpec::new(vec![2, 2, 1], Activation::Tanh, Activation::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = spec.init_params(&mut rng);
        // layout: W1 (2x2) = p[0..4], b1 = p[4..6], W2 (1x2) = p[6..8], b2 = p[8]
        let h0 = p[4].tanh();
        let h1 = p[5].tanh();
        let expected = p[6] * h0 + p[7] * h1 + p[8];
        let out = spec.forward(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let spec = MlpSpec::new(vec![2, 3], Activation::Relu, Activation::Identity).unwrap();
        let p = ParamVector::zeros(spec.param_count());
        assert!(matches!(spec.forward(&p, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(spec.forward(&ParamVector::zeros(4), &[1.0, 2.0]).is_err());
        assert!(MlpSpec::new(vec![3], Activation::Relu, Activation::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::Relu, Activation::Identity).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let spec = MlpSpec::new(vec![16, 4, 1], Activation::Relu, Activation::Identity).unwrap();
        let p = spec.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        assert!(p[..16 * 4 + 4].iter().all(|v| v.abs() <= 0.25));
        assert!(p[68..].iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn batched_path_matches_per_sample_path() {
        let spec = MlpSpec::new(vec![3, 5, 4, 2], Activation::Tanh, Activation::Sigmoid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = spec.init_params(&mut rng);
        let batch = 4;
        let inputs: Vec<f64> = (0..batch * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d_out: Vec<f64> = (0..batch * 2).map(|_| rng.random_range(-1.0..1.0)).collect();

        let trace = spec.forward_batch(&p, &inputs, batch).unwrap();
        let mut g_batch = vec![0.0; p.len()];
        let dx_batch = spec
            .backward_batch(&p, &trace, &d_out, &mut g_batch, true)
            .unwrap()
            .unwrap();

        let mut g_single = vec![0.0; p.len()];
        for i in 0..batch {
            let acts = spec.forward_trace::<f64>(&p, &inputs[i * 3..(i + 1) * 3]);
            for (a, b) in acts.last().unwrap().iter().zip(trace.output_row(i)) {
                assert!((a - b).abs() < 1e-13);
            }
            let dx = spec
                .backward_trace(&p, &acts, &d_out[i * 2..(i + 1) * 2], &mut g_single, true)
                .unwrap();
            for (a, b) in dx.iter().zip(&dx_batch[i * 3..(i + 1) * 3]) {
                assert!((a - b).abs() < 1e-13);
            }
        }
        for (a, b) in g_single.iter().zip(&g_batch) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let spec = MlpSpec::new(vec![4, 8, 3], Activation::Relu, Activation::Identity).unwrap();
        let p = spec.init_params(&mut ChaCha8Rng::seed_from_u64(11));
        let x = [0.1, -0.7, 2.5, 0.0];
        let a = spec.forward(&p, &x).unwrap();
        let b = spec.forward(&p, &x).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
