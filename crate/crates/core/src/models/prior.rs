use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{KnTrigram, LstmLm, ModelError};
use crate::mr::LinearMR;

/// An explicit distribution over a finite set of token sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePrior {
    pub entries: Vec<(Vec<String>, f64)>,
}

impl TablePrior {
    pub fn point_mass(tokens: Vec<String>) -> TablePrior {
        TablePrior {
            entries: vec![(tokens, 1.0)],
        }
    }

    fn log_prob(&self, tokens: &[String]) -> f64 {
        let total: f64 = self.entries.iter().map(|e| e.1).sum();
        let p: f64 = self
            .entries
            .iter()
            .filter(|e| e.0 == tokens)
            .map(|e| e.1)
            .sum();
        (p / total).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<String> {
        let probs: Vec<f64> = self.entries.iter().map(|e| e.1).collect();
        self.entries[super::lm::sample_index(&probs, rng)].0.clone()
    }
}

/// The prior p(z) over linearized MRs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PriorModel {
    RecurrentLm(LstmLm),
    KnTrigram(KnTrigram),
    Table(TablePrior),
}

impl PriorModel {
    /// `log p(z^s)` in nats, including the end-of-sequence event.
    pub fn log_prob(&self, m: &LinearMR) -> Result<f64, ModelError> {
        if m.tokens.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        Ok(self.log_prob_tokens(&m.tokens))
    }

    pub fn log_prob_tokens(&self, tokens: &[String]) -> f64 {
        match self {
            PriorModel::RecurrentLm(lm) => lm.log_prob(tokens),
            PriorModel::KnTrigram(kn) => kn.log_prob(tokens),
            PriorModel::Table(t) => t.log_prob(tokens),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Vec<String> {
        match self {
            PriorModel::RecurrentLm(lm) => lm.sample(rng, max_len),
            PriorModel::KnTrigram(kn) => kn.sample(rng, max_len),
            PriorModel::Table(t) => t.sample(rng),
        }
    }

    pub fn reindex(&mut self) {
        if let PriorModel::RecurrentLm(lm) = self {
            lm.reindex();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::MrKind;

    #[test]
    fn point_mass_has_zero_log_prob() {
        let p = PriorModel::Table(TablePrior::point_mass(vec!["a".into()]));
        let m = LinearMR {
            tokens: vec!["a".into()],
            kind: MrKind::Toy,
        };
        assert_eq!(p.log_prob(&m).unwrap(), 0.0);
        let empty = LinearMR {
            tokens: vec![],
            kind: MrKind::Toy,
        };
        assert_eq!(p.log_prob(&empty), Err(ModelError::EmptySequence));
    }
}
