use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::param::Param;
use crate::error::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moments are created on the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Array2<f64>>,
    pub second_moment: Vec<Array2<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, first_moment: Vec::new(), second_moment: Vec::new(), step: 0 }
    }

    /// Apply one update from the accumulated gradients, then zero them.
    pub fn step(&mut self, params: Vec<&mut Param>) -> Result<(), NnError> {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect();
            self.second_moment = self.first_moment.clone();
        }
        if params.len() != self.first_moment.len() {
            return Err(NnError::ParamCount { expected: self.first_moment.len(), got: params.len() });
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2_sqrt = (1.0 - beta2.powi(t)).sqrt();
        let step_size = lr / correction1;
        for ((p, m), v) in params.into_iter().zip(&mut self.first_moment).zip(&mut self.second_moment) {
            if m.dim() != p.value.dim() {
                return Err(NnError::Shape(format!("moment {:?} vs parameter {:?}", m.dim(), p.value.dim())));
            }
            Zip::from(&mut p.value).and(&mut p.grad).and(m).and(v).for_each(|w, g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * *g;
                *v = beta2 * *v + (1.0 - beta2) * *g * *g;
                let denom = v.sqrt() / correction2_sqrt + eps;
                *w -= step_size * *m / denom;
                *g = 0.0;
            });
        }
        Ok(())
    }
}
