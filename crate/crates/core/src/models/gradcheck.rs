//! Central-difference validation of tape gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{LstmLm, ModelError, Reconstructor, SemanticParser};
use crate::nn::{ParamStore, Tape, Var};

pub trait Differentiable {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
}

macro_rules! differentiable {
    ($($t:ty),*) => {$(
        impl Differentiable for $t {
            fn params(&self) -> &ParamStore {
                &self.params
            }
            fn params_mut(&mut self) -> &mut ParamStore {
                &mut self.params
            }
        }
    )*};
}

differentiable!(LstmLm, Reconstructor, SemanticParser);

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    pub max_rel_error: f64,
    /// `(parameter name, index, analytic, numeric)` of the worst coordinate.
    pub worst: (String, usize, f64, f64),
}

/// Compares analytic gradients of `loss` against central differences on
/// `n_coords` randomly chosen parameter coordinates (all of them if fewer).
///
/// The relative error of a coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn gradient_check<M, F>(
    model: &mut M,
    loss: F,
    eps: f64,
    n_coords: usize,
    seed: u64,
) -> Result<GradCheckReport, ModelError>
where
    M: Differentiable,
    F: Fn(&M, &mut Tape) -> Result<Var, ModelError>,
{
    let eval = |m: &M| -> Result<f64, ModelError> {
        let mut t = Tape::new(m.params());
        let v = loss(m, &mut t)?;
        let y = t.scalar(v);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(ModelError::NonFinite(format!("loss {y}")))
        }
    };
    let mut grads = model.params().zero_grads();
    {
        let mut t = Tape::new(model.params());
        let v = loss(model, &mut t)?;
        if !t.scalar(v).is_finite() {
            return Err(ModelError::NonFinite("loss".into()));
        }
        t.backward(v, 1.0, &mut grads);
    }
    let mut coords = Vec::new();
    for (p, g) in grads.data.iter().enumerate() {
        coords.extend((0..g.len()).map(|k| (p, k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: Vec<(usize, usize)> = if coords.len() <= n_coords {
        coords
    } else {
        let mut idx = sample(&mut rng, coords.len(), n_coords).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| coords[i]).collect()
    };
    let mut report = GradCheckReport {
        coordinates: picked.len(),
        max_rel_error: 0.0,
        worst: (String::new(), 0, 0.0, 0.0),
    };
    for (p, k) in picked {
        let orig = model.params().get(p).data[k];
        model.params_mut().get_mut(p).data[k] = orig + eps;
        let up = eval(model);
        model.params_mut().get_mut(p).data[k] = orig - eps;
        let down = eval(model);
        model.params_mut().get_mut(p).data[k] = orig;
        let num = (up? - down?) / (2.0 * eps);
        let ana = grads.data[p][k];
        let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-8);
        if rel > report.max_rel_error || report.worst.0.is_empty() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = (model.params().name(p).to_string(), k, ana, num);
        }
    }
    Ok(report)
}
