use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::param::{prefixed, Linear, Param, Parameterized};
use crate::error::NnError;

pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_DROPOUT: f64 = 0.1;
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Linear -> batch norm -> ReLU -> dropout.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnBlock {
    pub linear: Linear,
    pub bn_scale: Param,
    pub bn_shift: Param,
    pub running_mean: Array2<f64>,
    pub running_var: Array2<f64>,
    pub dropout: f64,
    pub mode: Mode,
}

/// Intermediates kept from a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct FnnCache {
    input: Array2<f64>,
    normalized: Array2<f64>,
    inv_std: Array2<f64>,
    pre_activation: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
    mode: Mode,
}

impl FnnBlock {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, hidden: usize, dropout: f64) -> Self {
        Self {
            linear: Linear::new(rng, in_dim, hidden),
            bn_scale: Param::filled(1, hidden, 1.0),
            bn_shift: Param::zeros(1, hidden),
            running_mean: Array2::zeros((1, hidden)),
            running_var: Array2::ones((1, hidden)),
            dropout,
            mode: Mode::Train,
        }
    }

    pub fn hidden(&self) -> usize {
        self.linear.out_dim()
    }

    pub fn in_dim(&self) -> usize {
        self.linear.in_dim()
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Array2<f64>,
        rng: &mut R,
    ) -> Result<(Array2<f64>, FnnCache), NnError> {
        let batch = x.nrows();
        if batch == 0 || (self.mode == Mode::Train && batch < 2) {
            return Err(NnError::BatchTooSmall(batch));
        }
        let z = self.linear.forward(x)?;
        let (normalized, inv_std) = match self.mode {
            Mode::Train => {
                let mean = z.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
                let centered = &z - &mean;
                let var = (&centered * &centered).mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                let unbiased = &var * (batch as f64 / (batch as f64 - 1.0));
                self.running_mean = &self.running_mean * (1.0 - BN_MOMENTUM) + &mean * BN_MOMENTUM;
                self.running_var = &self.running_var * (1.0 - BN_MOMENTUM) + &unbiased * BN_MOMENTUM;
                (centered * &inv_std, inv_std)
            }
            Mode::Eval => {
                let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                ((&z - &self.running_mean) * &inv_std, inv_std)
            }
        };
        let pre_activation = &normalized * &self.bn_scale.value + &self.bn_shift.value;
        let mut out = pre_activation.mapv(|v| v.max(0.0));
        let dropout_mask = if self.mode == Mode::Train && self.dropout > 0.0 {
            let keep = 1.0 - self.dropout;
            let mask =
                Array2::from_shape_fn(out.raw_dim(), |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
            out *= &mask;
            Some(mask)
        } else {
            None
        };
        let cache = FnnCache { input: x.clone(), normalized, inv_std, pre_activation, dropout_mask, mode: self.mode };
        Ok((out, cache))
    }

    /// Eval-mode forward without caching: running statistics, no dropout.
    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        let z = self.linear.forward(x)?;
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let y = (z - &self.running_mean) * &inv_std * &self.bn_scale.value + &self.bn_shift.value;
        Ok(y.mapv(|v| v.max(0.0)))
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &FnnCache, upstream: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        if upstream.dim() != cache.pre_activation.dim() {
            return Err(NnError::Shape(format!(
                "upstream gradient {:?} does not match block output {:?}",
                upstream.dim(),
                cache.pre_activation.dim()
            )));
        }
        let mut d = match &cache.dropout_mask {
            Some(mask) => upstream * mask,
            None => upstream.clone(),
        };
        ndarray::Zip::from(&mut d).and(&cache.pre_activation).for_each(|g, &y| {
            if y <= 0.0 {
                *g = 0.0;
            }
        });
        self.bn_scale.grad += &(&d * &cache.normalized).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.bn_shift.grad += &d.sum_axis(Axis(0)).insert_axis(Axis(0));
        let d_norm = &d * &self.bn_scale.value;
        let dz = match cache.mode {
            Mode::Train => {
                let n = d_norm.nrows() as f64;
                let sum = d_norm.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dot = (&d_norm * &cache.normalized).sum_axis(Axis(0)).insert_axis(Axis(0));
                (&d_norm * n - &sum - &cache.normalized * &dot) * &cache.inv_std / n
            }
            Mode::Eval => &d_norm * &cache.inv_std,
        };
        Ok(self.linear.backward(&cache.input, &dz))
    }
}

impl Parameterized for FnnBlock {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = prefixed("linear", self.linear.named_params());
        out.push(("bn.scale".into(), &self.bn_scale));
        out.push(("bn.shift".into(), &self.bn_shift));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.linear.params_mut();
        out.push(&mut self.bn_scale);
        out.push(&mut self.bn_shift);
        out
    }
}
