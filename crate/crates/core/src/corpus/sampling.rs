//! Utterances generated from the prior and the reconstruction model, with
//! rejection of ill-formed MRs.

use rand::Rng;
use serde::Serialize;

use super::DataError;
use crate::models::{PriorModel, Reconstructor};
use crate::mr::{render_tokens, syntax_check, LinearMR, MrKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedPair {
    pub mr: String,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub pairs: Vec<GeneratedPair>,
    pub draws: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
}

/// Draws MRs from the prior until `n` pass the syntax check, then samples an
/// utterance for each from the reconstruction model. `recon = None` only
/// measures the rejection rate.
#[allow(clippy::too_many_arguments)]
pub fn sample_utterances<R: Rng + ?Sized>(
    prior: &PriorModel,
    recon: Option<&Reconstructor>,
    kind: MrKind,
    n: usize,
    max_rejections: usize,
    max_len: usize,
    rng: &mut R,
) -> Result<SampleReport, DataError> {
    let mut pairs = Vec::with_capacity(n);
    let (mut draws, mut rejections) = (0, 0);
    while pairs.len() < n {
        let tokens = prior.sample(rng, max_len);
        draws += 1;
        let m = LinearMR { tokens, kind };
        if !syntax_check(&m) {
            rejections += 1;
            if rejections > max_rejections {
                return Err(DataError::Budget { rejections, draws });
            }
            continue;
        }
        let utterance = recon
            .map(|r| r.sample(&m.tokens, rng, max_len).join(" "))
            .unwrap_or_default();
        pairs.push(GeneratedPair {
            mr: render_tokens(&m),
            utterance,
        });
    }
    let rejection_rate = if draws == 0 {
        0.0
    } else {
        rejections as f64 / draws as f64
    };
    Ok(SampleReport {
        pairs,
        draws,
        rejections,
        rejection_rate,
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::models::TablePrior;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn point_mass_never_rejects() {
        let p = PriorModel::Table(TablePrior::point_mass(toks("( Fetch ( Thing box ) )")));
        let r = sample_utterances(
            &p,
            None,
            MrKind::Toy,
            50,
            0,
            30,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(r.rejection_rate, 0.0);
        assert!(r.pairs.iter().all(|q| q.mr == "(Fetch (Thing box))"));
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let p = PriorModel::Table(TablePrior::point_mass(toks("( Fetch (")));
        let r = sample_utterances(
            &p,
            None,
            MrKind::Toy,
            1,
            5,
            30,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(matches!(r, Err(DataError::Budget { rejections: 6, .. })));
    }
}
