//! The three learned distributions: prior p(z), reconstruction p(x|z) and
//! inference q(z|x), plus checkpoints and finite-difference checking.

pub mod baseline;
pub mod checkpoint;
pub mod gradcheck;
pub mod kn;
pub mod lm;
pub mod parser;
pub mod prior;
pub mod recon;

use thiserror::Error;

use crate::nn::{Tape, Var};
use crate::transition::TransitionError;

pub use baseline::Baseline;
pub use checkpoint::{Checkpoint, CheckpointError};
pub use kn::KnTrigram;
pub use lm::{LmDims, LmTrainConfig, LstmLm};
pub use parser::{Hypothesis, ParserDims, SemanticParser};
pub use prior::{PriorModel, TablePrior};
pub use recon::{ReconDims, Reconstructor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty token sequence")]
    EmptySequence,
    #[error("empty utterance")]
    EmptyUtterance,
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("no complete hypothesis within {0} steps")]
    NoHypothesis(usize),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

/// `log(sum_i exp(terms_i))` of scalar tape variables.
pub(crate) fn log_add(t: &mut Tape, terms: &[Var]) -> Var {
    match terms {
        [one] => *one,
        _ => {
            let v = t.concat(terms);
            let idx: Vec<usize> = (0..terms.len()).collect();
            t.log_sum_exp_idx(v, &idx)
        }
    }
}

/// Marginal log-probability of a token under a generate/copy mixture:
/// `p(gen) p(tok|gen) + p(copy) p(tok|copy)`. Absent channels contribute zero.
pub(crate) fn copy_marginal(
    t: &mut Tape,
    log_p_gen: Var,
    log_tok_gen: Option<Var>,
    log_p_copy: Var,
    log_tok_copy: Option<Var>,
) -> Option<Var> {
    let mut terms = Vec::with_capacity(2);
    if let Some(g) = log_tok_gen {
        terms.push(t.add(log_p_gen, g));
    }
    if let Some(c) = log_tok_copy {
        terms.push(t.add(log_p_copy, c));
    }
    if terms.is_empty() {
        None
    } else {
        Some(log_add(t, &terms))
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamStore;

    #[test]
    fn gen_copy_marginalization() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let g = t.constant(0.5f64.ln());
        let tg = t.constant(0.2f64.ln());
        let c = t.constant(0.5f64.ln());
        let tc = t.constant(0.6f64.ln());
        let p = copy_marginal(&mut t, g, Some(tg), c, Some(tc)).unwrap();
        assert!((t.scalar(p).exp() - 0.4).abs() < 1e-12);
        let only_copy = copy_marginal(&mut t, g, None, c, Some(tc)).unwrap();
        assert!((t.scalar(only_copy).exp() - 0.3).abs() < 1e-12);
        assert!(copy_marginal(&mut t, g, None, c, None).is_none());
    }
}
