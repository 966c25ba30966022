use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat parameter vector of a model.
///
/// The length is fixed at construction; mutable access is only ever through
/// a slice, so it cannot grow or shrink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ParamVector) -> Result<()> {
        check_len("axpy", self.len(), other.len())?;
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> ParamVector {
        Self(self.0.iter().map(|v| a * v).collect())
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_len("dot", self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Loss value together with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub loss: f64,
    pub grad: ParamVector,
}

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::dims(context, expected, actual))
    }
}

/// Target-network blend: `zeta * online + (1 - zeta) * target`.
pub fn soft_blend(target: &ParamVector, online: &ParamVector, zeta: f64) -> Result<ParamVector> {
    let mut out = target.clone();
    soft_blend_into(&mut out, online, zeta)?;
    Ok(out)
}

/// In-place form of [`soft_blend`], overwriting `target`.
pub fn soft_blend_into(target: &mut ParamVector, online: &ParamVector, zeta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidArgument(format!(
            "soft-update rate {zeta} outside [0, 1]"
        )));
    }
    check_len("soft_blend", target.len(), online.len())?;
    if zeta == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, o) in target.iter_mut().zip(online.iter()) {
        *t = zeta * o + (1.0 - zeta) * *t;
    }
    Ok(())
}
