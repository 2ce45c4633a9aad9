use ndarray::{Array2, Axis};
use rand::Rng;

use crate::error::NnError;

/// A trainable tensor and its gradient accumulator. Vectors are stored as
/// `1 x n` rows so every parameter shares one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Array2::zeros((rows, cols)))
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Self::new(Array2::from_elem((rows, cols), v))
    }

    pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Self {
        Self::new(Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound)))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite()) && self.grad.iter().all(|v| v.is_finite())
    }
}

/// Anything that owns parameters. Both methods must yield tensors in the
/// same order; checkpoints and optimizer state rely on it.
pub trait Parameterized {
    fn named_params(&self) -> Vec<(String, &Param)>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.value.len()).sum()
    }
}

/// Fully connected layer, `y = x W + b` with `W: in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// He-uniform weights scaled by fan-in, zero bias.
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        let bound = (6.0 / in_dim as f64).sqrt();
        Self { weight: Param::uniform(rng, in_dim, out_dim, bound), bias: Param::zeros(1, out_dim) }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.in_dim() {
            return Err(NnError::Shape(format!("linear expects {} inputs, got {}", self.in_dim(), x.ncols())));
        }
        Ok(x.dot(&self.weight.value) + &self.bias.value)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.weight.grad += &x.t().dot(dy);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.weight.value.t())
    }
}

impl Parameterized for Linear {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub(crate) fn prefixed<'a>(prefix: &str, items: Vec<(String, &'a Param)>) -> Vec<(String, &'a Param)> {
    items.into_iter().map(|(n, p)| (format!("{prefix}.{n}"), p)).collect()
}
