//! Central finite-difference verification of analytic gradients.

use ndarray::Array2;

use super::param::Parameterized;

/// Relative error of one parameter group: `|analytic - numeric| / max(|analytic|, |numeric|)`
/// with Euclidean norms over the whole group. Below [`ABSOLUTE_FLOOR`] the
/// plain difference is returned, since a structurally zero gradient (a bias
/// feeding batch norm) leaves only finite-difference roundoff.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub relative_error: f64,
    pub analytic_norm: f64,
}

/// Compare the gradients currently stored in `model` against central
/// differences of `loss`. `loss` must be a deterministic function of the
/// parameters (fixed dropout masks, fixed batch).
pub fn check_gradients<M, F>(model: &mut M, mut loss: F, h: f64) -> Vec<GroupError>
where
    M: Parameterized,
    F: FnMut(&mut M) -> f64,
{
    let analytic: Vec<(String, Array2<f64>)> =
        model.named_params().into_iter().map(|(n, p)| (n, p.grad.clone())).collect();
    let mut out = Vec::with_capacity(analytic.len());
    for (g, (name, grad)) in analytic.into_iter().enumerate() {
        let shape = grad.dim();
        let mut numeric = Array2::<f64>::zeros(shape);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let orig = model.params_mut()[g].value[[i, j]];
                model.params_mut()[g].value[[i, j]] = orig + h;
                let plus = loss(model);
                model.params_mut()[g].value[[i, j]] = orig - h;
                let minus = loss(model);
                model.params_mut()[g].value[[i, j]] = orig;
                numeric[[i, j]] = (plus - minus) / (2.0 * h);
            }
        }
        out.push(GroupError { name, relative_error: relative_error(&grad, &numeric), analytic_norm: norm(&grad) });
    }
    out
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub const ABSOLUTE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = norm(&(analytic - numeric));
    let scale = norm(analytic).max(norm(numeric));
    if scale < ABSOLUTE_FLOOR {
        diff
    } else {
        diff / scale
    }
}
