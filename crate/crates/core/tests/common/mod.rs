//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tofml::fml::{adapt, aggregate, evaluate_accuracy, local_round, BatchSampler};
use tofml::harness::ExperimentConfig;
use tofml::seed::{stream_seed, Stream};
use tofml::nn::{Activation, Differentiable, Example, LossKind, MlpModel, MlpSpec, ParamVector, Scalar};

/// Hyper-dual number `a + b·ε1 + c·ε2 + d·ε1ε2` with `ε1² = ε2² = 0`.
/// Seeding `ε1` on parameter i and `ε2` on parameter j makes `d` the exact
/// second partial `∂²f/∂ωi∂ωj`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HyperDual {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Applies a scalar function given its value and first two derivatives.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            a: f,
            b: df * self.b,
            c: df * self.c,
            d: df * self.d + d2f * self.b * self.c,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a,
            self.a * o.b + self.b * o.a,
            self.a * o.c + self.c * o.a,
            self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.chain(1.0 / o.a, -1.0 / (o.a * o.a), 2.0 / (o.a * o.a * o.a));
        self * inv
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b, -self.c, -self.d)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Scalar for HyperDual {
    fn from_f64(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }

    fn re(self) -> f64 {
        self.a
    }

    fn tanh(self) -> Self {
        let t = self.a.tanh();
        let dt = 1.0 - t * t;
        self.chain(t, dt, -2.0 * t * dt)
    }

    fn exp(self) -> Self {
        let e = self.a.exp();
        self.chain(e, e, e)
    }

    fn ln(self) -> Self {
        self.chain(self.a.ln(), 1.0 / self.a, -1.0 / (self.a * self.a))
    }
}

/// Dense Hessian of the batch-mean loss, one hyper-dual pass per entry of
/// the upper triangle.
pub fn explicit_hessian(model: &MlpModel, params: &ParamVector, batch: &[Example]) -> Vec<Vec<f64>> {
    let p = params.len();
    let mut h = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let seeded: Vec<HyperDual> = params
                .iter()
                .enumerate()
                .map(|(k, &w)| HyperDual::new(w, f64::from(k == i), f64::from(k == j), 0.0))
                .collect();
            let v = model.loss_with(&seeded, batch).unwrap().d;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Central finite-difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&ParamVector) -> f64, at: &ParamVector, h: f64) -> Vec<f64> {
    (0..at.len())
        .map(|i| {
            let mut plus = at.clone().into_inner();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            (f(&ParamVector::new(plus)) - f(&ParamVector::new(minus))) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(|b|_∞, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let scale = b.iter().fold(floor, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// A random tiny classifier and a batch of random labelled points.
pub fn random_tiny_net(seed: u64, max_params: usize) -> (MlpModel, ParamVector, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let input = rng.random_range(1..=3);
        let hidden = rng.random_range(2..=8);
        let classes = rng.random_range(2..=4);
        let spec = MlpSpec::new(vec![input, hidden, classes], Activation::Tanh, Activation::Identity).unwrap();
        if spec.param_count() > max_params {
            continue;
        }
        let params = spec.init_params(&mut rng);
        let batch = (0..rng.random_range(3..=8))
            .map(|_| {
                let x = (0..input).map(|_| rng.random_range(-2.0..2.0)).collect();
                Example::class(x, rng.random_range(0..classes))
            })
            .collect();
        return (MlpModel::new(spec, LossKind::CrossEntropy), params, batch);
    }
}

/// The composed meta-loss `l(ω − α∇l(ω))` on one full batch.
pub fn meta_loss<'a, M: Differentiable>(model: &'a M, batch: &'a [Example], alpha: f64) -> impl Fn(&ParamVector) -> f64 + 'a {
    move |w| {
        let g = model.loss_and_grad(w, batch).unwrap().grad;
        let mut adapted = w.clone();
        adapted.axpy(-alpha, &g).unwrap();
        model.loss(&adapted, batch).unwrap()
    }
}

/// Mean accuracy over all devices of the meta-trained global model, before
/// and after one local adaptation step. Every device takes part in every one
/// of `rounds` rounds.
pub fn fine_tuning_accuracies(cfg: &ExperimentConfig, seed: u64, rounds: usize) -> (f64, f64) {
    let scn = cfg.build_scenario(seed).unwrap();
    let mut sampler = BatchSampler::new(stream_seed(seed, Stream::Sampler));
    let mut w = scn.init_params.clone();
    for _ in 0..rounds {
        let locals: Vec<ParamVector> = scn
            .tasks
            .iter()
            .map(|t| local_round(&scn.model, t, &mut sampler, &w, &cfg.meta).unwrap())
            .collect();
        w = aggregate(&locals, &w).unwrap();
    }
    let n = scn.tasks.len() as f64;
    let (mut pre, mut post) = (0.0, 0.0);
    for t in &scn.tasks {
        pre += evaluate_accuracy(&scn.model, &w, &t.test).unwrap() / n;
        let adapted = adapt(&scn.model, &w, &t.train, cfg.meta.alpha).unwrap();
        post += evaluate_accuracy(&scn.model, &adapted, &t.test).unwrap() / n;
    }
    (pre, post)
}
