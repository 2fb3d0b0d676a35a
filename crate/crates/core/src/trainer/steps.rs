use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::signal::{learning_signal, LearningSignalRecord};
use super::{Labeled, TrainError, TrainerConfig, VaeModels};
use crate::corpus::metrics::exact_match;
use crate::models::lm::mix_seed;
use crate::models::{Hypothesis, ModelError, SemanticParser};
use crate::mr::linearize;
use crate::nn::{Dropout, Grads, Tape};
use crate::par;
use crate::transition::{Action, Ast};

/// Samples S(x) drawn from the inference model, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub x: Vec<String>,
    /// `(AST, log q(z|x))`.
    pub samples: Vec<(Ast, f64)>,
    pub contains_gold: Option<bool>,
}

pub struct SupervisedOutput {
    /// `-sum(log q(z|x) + log p(x|z))` over the batch.
    pub loss: f64,
    /// Gradients of `loss`.
    pub parser: Grads,
    pub recon: Grads,
}

fn dropout(rate: f64, seed: u64) -> Dropout {
    if rate > 0.0 {
        Dropout::new(rate, ChaCha8Rng::seed_from_u64(seed))
    } else {
        Dropout::off()
    }
}

/// Gradients of the negated supervised log-likelihood of a batch.
pub fn supervised_step(
    models: &VaeModels,
    batch: &[Labeled],
    seed: u64,
) -> Result<SupervisedOutput, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyLabeled);
    }
    let parts = par::map(
        batch.len(),
        |i| -> Result<(f64, Grads, Grads), TrainError> {
            let (x, z) = &batch[i];
            let zs = linearize(z, models.kind)?;
            let mut pg = models.parser.params.zero_grads();
            let lq = {
                let mut t = Tape::new(&models.parser.params);
                let mut d = dropout(models.parser.dims.dropout, mix_seed(seed, 0, 0, i));
                let v = models.parser.build(&mut t, x, z, &mut d)?;
                t.backward(v, -1.0, &mut pg);
                t.scalar(v)
            };
            let mut rg = models.recon.params.zero_grads();
            let lp = {
                let mut t = Tape::new(&models.recon.params);
                let mut d = dropout(models.recon.dims.dropout, mix_seed(seed, 1, 0, i));
                let (v, _) = models.recon.build(&mut t, x, &zs.tokens, &mut d)?;
                t.backward(v, -1.0, &mut rg);
                t.scalar(v)
            };
            Ok((-(lq + lp), pg, rg))
        },
    );
    let mut loss = 0.0;
    let mut pgs = Vec::with_capacity(parts.len());
    let mut rgs = Vec::with_capacity(parts.len());
    for p in parts {
        let (l, pg, rg) = p?;
        loss += l;
        pgs.push(pg);
        rgs.push(rg);
    }
    if !loss.is_finite() {
        return Err(TrainError::NonFinite(format!("supervised loss {loss}")));
    }
    Ok(SupervisedOutput {
        loss,
        parser: Grads::sum_ordered(&models.parser.params, pgs),
        recon: Grads::sum_ordered(&models.recon.params, rgs),
    })
}

/// `sum_i coef_i * d log q(z_i | x) / d phi`, with `z_i` given as action
/// sequences. Dropout is applied when `drop_seed` is set.
pub fn score_function_gradient(
    parser: &SemanticParser,
    x: &[String],
    samples: &[(&[Action], f64)],
    drop_seed: Option<u64>,
) -> Result<Grads, ModelError> {
    let mut g = parser.params.zero_grads();
    for (k, (actions, coef)) in samples.iter().enumerate() {
        let mut t = Tape::new(&parser.params);
        let mut d = match drop_seed {
            Some(s) => dropout(parser.dims.dropout, mix_seed(s, 2, k, 0)),
            None => Dropout::off(),
        };
        let (lq, _) = parser.build_actions(&mut t, x, actions, &mut d)?;
        t.backward(lq, *coef, &mut g);
    }
    Ok(g)
}

/// Learning-signal records for hypotheses of `x`, without gradients.
/// Hypotheses whose linearization fails are dropped.
pub fn score_samples(
    models: &VaeModels,
    x: &[String],
    hyps: &[Hypothesis],
    baseline: f64,
    cfg: &TrainerConfig,
) -> Result<Vec<(usize, LearningSignalRecord)>, TrainError> {
    let prior = models.prior()?;
    let mut out = Vec::with_capacity(hyps.len());
    for (i, h) in hyps.iter().enumerate() {
        let Ok(zs) = linearize(&h.ast, models.kind) else {
            continue;
        };
        let lp = models.recon.log_prob(x, &zs.tokens)?;
        let lz = prior.log_prob(&zs)?;
        out.push((
            i,
            learning_signal(h.score, lp, lz, baseline, cfg.kl_weight, cfg.clip_threshold)?,
        ));
    }
    Ok(out)
}

pub struct UnsupervisedOutput {
    /// Gradient estimates of the negated unsupervised objective, summed over
    /// the batch.
    pub parser: Grads,
    pub recon: Grads,
    /// Signal records per utterance (empty when skipped).
    pub records: Vec<Vec<LearningSignalRecord>>,
    /// Gold flag per record, when gold ASTs were supplied.
    pub gold_flags: Vec<Vec<Option<bool>>>,
    pub sample_sets: Vec<SampleSet>,
    /// `(baseline features, l')` regression targets.
    pub baseline_targets: Vec<(Vec<f64>, f64)>,
    /// Utterances with an empty sample set.
    pub skipped: usize,
}

struct PerExample {
    pg: Grads,
    rg: Grads,
    records: Vec<LearningSignalRecord>,
    gold: Vec<Option<bool>>,
    set: SampleSet,
    feats: Vec<f64>,
}

/// One score-function estimate over a batch of unlabeled utterances.
///
/// For each `x`, S(x) is the top-`sample_size` beam. The parser gradient is
/// `(1/|S|) sum_i l(x, z_i) d log q(z_i|x)` and the reconstruction gradient is
/// `(1/|S|) sum_i d log p(x|z_i)`, both negated for minimization.
pub fn unsupervised_step(
    models: &VaeModels,
    batch: &[Vec<String>],
    golds: Option<&[Option<Ast>]>,
    cfg: &TrainerConfig,
    seed: u64,
) -> Result<UnsupervisedOutput, TrainError> {
    let prior = models.prior()?;
    let baseline = models.baseline()?;
    let parts = par::map(batch.len(), |i| -> Result<Option<PerExample>, TrainError> {
        let x = &batch[i];
        let hyps = match models
            .parser
            .beam_search(x, cfg.sample_size, cfg.max_decode_steps)
        {
            Ok(h) => h,
            Err(ModelError::NoHypothesis(_)) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let feats = baseline.features(x, &models.parser);
        let b = baseline.value(&feats);
        let mut kept = Vec::with_capacity(hyps.len());
        for h in hyps {
            if let Ok(zs) = linearize(&h.ast, models.kind) {
                kept.push((h, zs));
            }
        }
        if kept.is_empty() {
            return Ok(None);
        }
        let n = kept.len() as f64;
        let gold = golds.and_then(|g| g[i].as_ref());
        let mut rg = models.recon.params.zero_grads();
        let mut records = Vec::with_capacity(kept.len());
        let mut flags = Vec::with_capacity(kept.len());
        for (k, (h, zs)) in kept.iter().enumerate() {
            let mut t = Tape::new(&models.recon.params);
            let mut d = dropout(models.recon.dims.dropout, mix_seed(seed, 1, k, i));
            let (lp, _) = models.recon.build(&mut t, x, &zs.tokens, &mut d)?;
            t.backward(lp, -1.0 / n, &mut rg);
            let lz = prior.log_prob(zs)?;
            records.push(learning_signal(
                h.score,
                t.scalar(lp),
                lz,
                b,
                cfg.kl_weight,
                cfg.clip_threshold,
            )?);
            flags.push(gold.map(|g| exact_match(&h.ast, g, models.kind, cfg.canonicalize)));
        }
        let coefs: Vec<(&[Action], f64)> = kept
            .iter()
            .zip(&records)
            .map(|((h, _), r)| (h.actions.as_slice(), -r.signal / n))
            .collect();
        let pg = score_function_gradient(&models.parser, x, &coefs, Some(mix_seed(seed, 3, 0, i)))?;
        let set = SampleSet {
            x: x.clone(),
            contains_gold: gold.map(|_| flags.contains(&Some(true))),
            samples: kept.into_iter().map(|(h, _)| (h.ast, h.score)).collect(),
        };
        Ok(Some(PerExample {
            pg,
            rg,
            records,
            gold: flags,
            set,
            feats,
        }))
    });
    let mut out = UnsupervisedOutput {
        parser: models.parser.params.zero_grads(),
        recon: models.recon.params.zero_grads(),
        records: Vec::with_capacity(batch.len()),
        gold_flags: Vec::with_capacity(batch.len()),
        sample_sets: Vec::with_capacity(batch.len()),
        baseline_targets: Vec::new(),
        skipped: 0,
    };
    let mut pgs = Vec::new();
    let mut rgs = Vec::new();
    for (i, p) in parts.into_iter().enumerate() {
        match p? {
            None => {
                out.skipped += 1;
                out.records.push(Vec::new());
                out.gold_flags.push(Vec::new());
                out.sample_sets.push(SampleSet {
                    x: batch[i].clone(),
                    samples: Vec::new(),
                    contains_gold: None,
                });
            }
            Some(e) => {
                for r in &e.records {
                    out.baseline_targets.push((e.feats.clone(), r.raw_signal));
                }
                pgs.push(e.pg);
                rgs.push(e.rg);
                out.records.push(e.records);
                out.gold_flags.push(e.gold);
                out.sample_sets.push(e.set);
            }
        }
    }
    out.parser = Grads::sum_ordered(&models.parser.params, pgs);
    out.recon = Grads::sum_ordered(&models.recon.params, rgs);
    if !out.parser.is_finite() || !out.recon.is_finite() {
        return Err(TrainError::NonFinite("unsupervised gradient".into()));
    }
    Ok(out)
}
