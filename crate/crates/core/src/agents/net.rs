use rand::Rng;

use crate::error::Result;
use crate::nn::{optimizer_step, soft_blend_into, BatchTrace, MlpSpec, OptimizerConfig, OptimizerState, ParamVector};

/// Online network, its slow-moving target copy and the online optimizer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TwinNet {
    pub spec: MlpSpec,
    pub online: ParamVector,
    pub target: ParamVector,
    pub opt: OptimizerState,
}

impl TwinNet {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, opt_cfg: &OptimizerConfig, rng: &mut R) -> Self {
        let online = spec.init_params(rng);
        Self {
            opt: opt_cfg.init_state(online.len()),
            target: online.clone(),
            online,
            spec,
        }
    }

    pub fn forward(&self, inputs: &[f64], batch: usize) -> Result<BatchTrace> {
        self.spec.forward_batch(&self.online, inputs, batch)
    }

    pub fn forward_target(&self, inputs: &[f64], batch: usize) -> Result<BatchTrace> {
        self.spec.forward_batch(&self.target, inputs, batch)
    }

    /// Gradient of the online parameters for a given output gradient, plus
    /// the input gradient when asked for.
    pub fn backward(&self, trace: &BatchTrace, d_out: &[f64], want_input: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let mut grad = vec![0.0; self.online.len()];
        let d_in = self.spec.backward_batch(&self.online, trace, d_out, &mut grad, want_input)?;
        Ok((grad, d_in))
    }

    pub fn step(&mut self, grad: &[f64], cfg: &OptimizerConfig) -> Result<()> {
        optimizer_step(&mut self.online, grad, &mut self.opt, cfg)
    }

    pub fn soft_update(&mut self, zeta: f64) -> Result<()> {
        soft_blend_into(&mut self.target, &self.online, zeta)
    }
}

/// Row-wise concatenation of two row-major blocks.
pub(crate) fn concat_rows(a: &[f64], a_width: usize, b: &[f64], b_width: usize) -> Vec<f64> {
    let rows = a.len() / a_width.max(1);
    let mut out = Vec::with_capacity(rows * (a_width + b_width));
    for (ra, rb) in a.chunks_exact(a_width).zip(b.chunks_exact(b_width)) {
        out.extend_from_slice(ra);
        out.extend_from_slice(rb);
    }
    out
}

/// Column block `[from, from+width)` of each row.
pub(crate) fn column_block(m: &[f64], row_width: usize, from: usize, width: usize) -> Vec<f64> {
    m.chunks_exact(row_width)
        .flat_map(|row| row[from..from + width].iter().copied())
        .collect()
}

/// Argmax with ties to the lowest index.
pub fn greedy_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}
