//! Input-dependent baselines b(x) for the learning signal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LstmLm, SemanticParser};
use crate::nn::{Adam, ParamStore, Tape, Tensor, Var};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Baseline {
    /// `b(x) = a * log p(x) + c` under a frozen utterance language model.
    Lm { lm: LstmLm, params: ParamStore },
    /// One hidden layer over the parser's final encoder state.
    Mlp { params: ParamStore, hidden: usize },
}

impl Baseline {
    pub fn lm(lm: LstmLm, a: f64, c: f64) -> Baseline {
        let mut p = ParamStore::new();
        p.add(
            "base.a",
            Tensor {
                rows: 1,
                cols: 1,
                data: vec![a],
            },
        );
        p.add(
            "base.c",
            Tensor {
                rows: 1,
                cols: 1,
                data: vec![c],
            },
        );
        Baseline::Lm { lm, params: p }
    }

    /// The output bias starts at `bias`.
    pub fn mlp(input_dim: usize, hidden: usize, bias: f64, seed: u64) -> Baseline {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        p.add_uniform("base.w1", hidden, input_dim, 0.1, &mut rng);
        p.add_zeros("base.b1", 1, hidden);
        p.add_uniform("base.w2", 1, hidden, 0.1, &mut rng);
        p.add(
            "base.b2",
            Tensor {
                rows: 1,
                cols: 1,
                data: vec![bias],
            },
        );
        Baseline::Mlp { params: p, hidden }
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Baseline::Lm { params, .. } | Baseline::Mlp { params, .. } => params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Baseline::Lm { params, .. } | Baseline::Mlp { params, .. } => params,
        }
    }

    /// `(a, c)` for the LM baseline.
    pub fn coefficients(&self) -> Option<(f64, f64)> {
        match self {
            Baseline::Lm { params, .. } => Some((params.get(0).data[0], params.get(1).data[0])),
            Baseline::Mlp { .. } => None,
        }
    }

    pub fn reindex(&mut self) {
        if let Baseline::Lm { lm, .. } = self {
            lm.reindex();
        }
        self.params_mut().reindex();
    }

    /// Inputs of b(x). They do not depend on the baseline's own parameters,
    /// so they can be computed once per utterance.
    pub fn features(&self, x: &[String], parser: &SemanticParser) -> Vec<f64> {
        match self {
            Baseline::Lm { lm, .. } => vec![lm.log_prob(x)],
            Baseline::Mlp { .. } => parser.encoder_summary(x),
        }
    }

    fn build(&self, t: &mut Tape, feats: &[f64]) -> Var {
        let x = t.input(feats.to_vec());
        match self {
            Baseline::Lm { .. } => t.affine(0, Some(1), x),
            Baseline::Mlp { .. } => {
                let h = t.affine(0, Some(1), x);
                let h = t.tanh(h);
                t.affine(2, Some(3), h)
            }
        }
    }

    pub fn value(&self, feats: &[f64]) -> f64 {
        let mut t = Tape::new(self.params());
        let v = self.build(&mut t, feats);
        t.scalar(v)
    }

    /// One optimizer step on the mean squared error between b(x) and the
    /// targets. Returns the loss before the step.
    pub fn regress(&mut self, opt: &mut Adam, data: &[(&[f64], f64)]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut grads = self.params().zero_grads();
        let mut loss = 0.0;
        {
            let mut t = Tape::new(self.params());
            let n = data.len() as f64;
            for (feats, target) in data {
                let b = self.build(&mut t, feats);
                let d = t.scalar(b) - target;
                loss += d * d / n;
                t.backward(b, 2.0 * d / n, &mut grads);
            }
        }
        opt.step(self.params_mut(), &grads);
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LmDims;

    #[test]
    fn lm_baseline_is_affine_in_log_px() {
        let lm = LstmLm::new(
            "a b".split(' '),
            1,
            LmDims {
                embed: 4,
                hidden: 4,
                dropout: 0.0,
            },
            1,
        );
        let b = Baseline::lm(lm, 0.5, -2.0);
        assert_eq!(b.value(&[-10.0]), -7.0);
        assert_eq!(b.coefficients(), Some((0.5, -2.0)));
    }

    #[test]
    fn regression_fits_a_line() {
        let lm = LstmLm::new(
            "a".split(' '),
            1,
            LmDims {
                embed: 2,
                hidden: 2,
                dropout: 0.0,
            },
            1,
        );
        let mut b = Baseline::lm(lm, 1.0, 0.0);
        let mut opt = Adam::new(b.params(), 0.05);
        let feats: Vec<[f64; 1]> = (0..20).map(|i| [-(i as f64)]).collect();
        let data: Vec<(&[f64], f64)> = feats.iter().map(|f| (&f[..], 0.3 * f[0] - 4.0)).collect();
        for _ in 0..3000 {
            b.regress(&mut opt, &data);
        }
        let (a, c) = b.coefficients().unwrap();
        assert!((a - 0.3).abs() < 1e-2 && (c + 4.0).abs() < 0.1, "{a} {c}");
    }

    #[test]
    fn mlp_starts_at_its_bias() {
        let b = Baseline::mlp(6, 4, -20.0, 3);
        let v = b.value(&[0.0; 6]);
        assert_eq!(v, -20.0);
    }
}
