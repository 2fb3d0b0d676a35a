use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::steps::{supervised_step, unsupervised_step};
use super::{Labeled, TrainError, TrainerConfig, Unlabeled, VaeModels};
use crate::corpus::metrics::{evaluate, predict};
use crate::models::lm::mix_seed;
use crate::nn::{Adam, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Supervised,
    SemiSupervised,
    SelfTraining,
}

impl Phase {
    fn id(self) -> usize {
        match self {
            Phase::Supervised => 11,
            Phase::SemiSupervised => 12,
            Phase::SelfTraining => 13,
        }
    }
}

/// One line of training history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub lr: f64,
    /// Mean supervised loss per labeled example seen this epoch.
    pub sup_loss: f64,
    /// Mean raw signal l' over all unsupervised samples.
    pub mean_raw_signal: Option<f64>,
    pub mean_signal_gold: Option<f64>,
    pub mean_signal_nongold: Option<f64>,
    /// Fraction of unlabeled utterances whose sample set holds the gold AST.
    pub gold_in_samples: Option<f64>,
    pub skipped: usize,
    pub dev_accuracy: f64,
    pub best_dev_accuracy: f64,
    /// The best model was reloaded and the learning rate decayed after this epoch.
    pub reloaded: bool,
    pub baseline_a: Option<f64>,
    pub baseline_c: Option<f64>,
}

impl EpochRecord {
    fn new(phase: Phase, epoch: usize, lr: f64) -> EpochRecord {
        EpochRecord {
            phase,
            epoch,
            lr,
            sup_loss: 0.0,
            mean_raw_signal: None,
            mean_signal_gold: None,
            mean_signal_nongold: None,
            gold_in_samples: None,
            skipped: 0,
            dev_accuracy: 0.0,
            best_dev_accuracy: 0.0,
            reloaded: false,
            baseline_a: None,
            baseline_c: None,
        }
    }
}

struct Optims {
    parser: Adam,
    recon: Adam,
}

impl Optims {
    fn new(m: &VaeModels, lr: f64) -> Optims {
        Optims {
            parser: Adam::new(&m.parser.params, lr),
            recon: Adam::new(&m.recon.params, lr),
        }
    }
}

struct Snapshot {
    parser: ParamStore,
    recon: ParamStore,
}

/// Early stopping on dev accuracy with reload-and-decay cycles.
///
/// Only epochs of the current phase compete for "best"; the model the phase
/// starts from does not.
fn run_phase<F>(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    dev: &[Labeled],
    phase: Phase,
    max_epochs: usize,
    mut epoch_fn: F,
) -> Result<Vec<EpochRecord>, TrainError>
where
    F: FnMut(&mut VaeModels, &mut Optims, &mut EpochRecord) -> Result<(), TrainError>,
{
    if dev.is_empty() {
        return Err(TrainError::NoDev);
    }
    let mut lr = cfg.lr;
    let mut opts = Optims::new(models, lr);
    let mut best: Option<(f64, Snapshot)> = None;
    let (mut stagnant, mut cycles) = (0, 0);
    let mut history = Vec::new();
    for epoch in 0..max_epochs {
        let mut rec = EpochRecord::new(phase, epoch, lr);
        epoch_fn(models, &mut opts, &mut rec)?;
        if !models.parser.params.all_finite() || !models.recon.params.all_finite() {
            return Err(TrainError::NonFinite(format!(
                "parameters after {phase:?} epoch {epoch}"
            )));
        }
        let acc = evaluate(
            &models.parser,
            models.kind,
            dev,
            cfg.max_decode_steps,
            cfg.canonicalize,
        )
        .accuracy;
        rec.dev_accuracy = acc;
        if best.as_ref().is_none_or(|b| acc > b.0) {
            best = Some((
                acc,
                Snapshot {
                    parser: models.parser.params.clone(),
                    recon: models.recon.params.clone(),
                },
            ));
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        rec.best_dev_accuracy = best.as_ref().map_or(acc, |b| b.0);
        if let Some((a, c)) = models.baseline.as_ref().and_then(|b| b.coefficients()) {
            rec.baseline_a = Some(a);
            rec.baseline_c = Some(c);
        }
        let stop = stagnant >= cfg.patience;
        if stop && cycles < cfg.reload_cycles {
            let snap = &best
                .as_ref()
                .expect("a best model exists after one epoch")
                .1;
            models.parser.params = snap.parser.clone();
            models.recon.params = snap.recon.clone();
            lr *= cfg.lr_decay;
            opts = Optims::new(models, lr);
            cycles += 1;
            stagnant = 0;
            rec.reloaded = true;
        }
        history.push(rec);
        if stop && !history.last().is_some_and(|r| r.reloaded) {
            break;
        }
    }
    if let Some((_, snap)) = best {
        models.parser.params = snap.parser;
        models.recon.params = snap.recon;
    }
    Ok(history)
}

fn sup_batch(
    models: &mut VaeModels,
    opts: &mut Optims,
    batch: &[Labeled],
    seed: u64,
) -> Result<f64, TrainError> {
    let mut out = supervised_step(models, batch, seed)?;
    let k = 1.0 / batch.len() as f64;
    out.parser.scale(k);
    out.recon.scale(k);
    opts.parser.step(&mut models.parser.params, &out.parser);
    opts.recon.step(&mut models.recon.params, &out.recon);
    Ok(out.loss)
}

fn supervised_epochs(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    data: &[Labeled],
    dev: &[Labeled],
    phase: Phase,
) -> Result<Vec<EpochRecord>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyLabeled);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, phase.id(), 0, 0));
    let mut order: Vec<usize> = (0..data.len()).collect();
    run_phase(
        models,
        cfg,
        dev,
        phase,
        cfg.max_epochs_sup,
        |m, opts, rec| {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_sup).enumerate() {
                let batch: Vec<Labeled> = chunk.iter().map(|i| data[*i].clone()).collect();
                total += sup_batch(
                    m,
                    opts,
                    &batch,
                    mix_seed(cfg.seed, phase.id(), rec.epoch, b),
                )?;
            }
            rec.sup_loss = total / data.len() as f64;
            Ok(())
        },
    )
}

/// Supervised training of the parser and reconstruction model on D_L.
pub fn train_supervised(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    labeled: &[Labeled],
    dev: &[Labeled],
) -> Result<Vec<EpochRecord>, TrainError> {
    cfg.validate()?;
    supervised_epochs(models, cfg, labeled, dev, Phase::Supervised)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Joint optimization of the supervised and unsupervised objectives from the
/// current models. Supervised and unsupervised batches alternate. With
/// `alpha = 0` the objective is purely supervised and nothing is run.
pub fn semisup_phase(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    labeled: &[Labeled],
    unlabeled: &[Unlabeled],
    dev: &[Labeled],
) -> Result<Vec<EpochRecord>, TrainError> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(TrainError::EmptyLabeled);
    }
    models.prior()?;
    models.baseline()?;
    if cfg.alpha == 0.0 || unlabeled.is_empty() {
        return Ok(Vec::new());
    }
    let phase = Phase::SemiSupervised;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, phase.id(), 0, 0));
    let mut u_order: Vec<usize> = (0..unlabeled.len()).collect();
    let mut l_order: Vec<usize> = (0..labeled.len()).collect();
    l_order.shuffle(&mut rng);
    let mut l_pos = 0;
    let mut base_opt = Adam::new(models.baseline()?.params(), cfg.baseline_lr);
    run_phase(
        models,
        cfg,
        dev,
        phase,
        cfg.max_epochs_unsup,
        |m, opts, rec| {
            u_order.shuffle(&mut rng);
            let (mut sup_total, mut sup_n) = (0.0, 0);
            let (mut raw, mut gold, mut nongold) = (Vec::new(), Vec::new(), Vec::new());
            let (mut with_gold, mut known) = (0usize, 0usize);
            for (b, chunk) in u_order.chunks(cfg.batch_unsup).enumerate() {
                let mut batch = Vec::with_capacity(cfg.batch_sup);
                while batch.len() < cfg.batch_sup.min(labeled.len()) {
                    if l_pos == l_order.len() {
                        l_order.shuffle(&mut rng);
                        l_pos = 0;
                    }
                    batch.push(labeled[l_order[l_pos]].clone());
                    l_pos += 1;
                }
                sup_total += sup_batch(
                    m,
                    opts,
                    &batch,
                    mix_seed(cfg.seed, phase.id(), rec.epoch, 2 * b),
                )?;
                sup_n += batch.len();

                let xs: Vec<Vec<String>> = chunk.iter().map(|i| unlabeled[*i].x.clone()).collect();
                let golds: Vec<_> = chunk.iter().map(|i| unlabeled[*i].gold.clone()).collect();
                let seed = mix_seed(cfg.seed, phase.id(), rec.epoch, 2 * b + 1);
                let mut out = unsupervised_step(m, &xs, Some(&golds), cfg, seed)?;
                let k = cfg.alpha / xs.len() as f64;
                out.parser.scale(k);
                out.recon.scale(k);
                opts.parser.step(&mut m.parser.params, &out.parser);
                opts.recon.step(&mut m.recon.params, &out.recon);
                let targets: Vec<(&[f64], f64)> = out
                    .baseline_targets
                    .iter()
                    .map(|(f, t)| (f.as_slice(), *t))
                    .collect();
                m.baseline
                    .as_mut()
                    .expect("checked above")
                    .regress(&mut base_opt, &targets);

                rec.skipped += out.skipped;
                for (recs, flags) in out.records.iter().zip(&out.gold_flags) {
                    for (r, f) in recs.iter().zip(flags) {
                        raw.push(r.raw_signal);
                        match f {
                            Some(true) => gold.push(r.signal),
                            Some(false) => nongold.push(r.signal),
                            None => {}
                        }
                    }
                }
                for s in &out.sample_sets {
                    if let Some(c) = s.contains_gold {
                        known += 1;
                        with_gold += c as usize;
                    }
                }
            }
            rec.sup_loss = sup_total / sup_n.max(1) as f64;
            rec.mean_raw_signal = mean(&raw);
            rec.mean_signal_gold = mean(&gold);
            rec.mean_signal_nongold = mean(&nongold);
            rec.gold_in_samples = (known > 0).then(|| with_gold as f64 / known as f64);
            Ok(())
        },
    )
}

/// Supervised pre-training followed by semi-supervised training. The prior
/// and the baseline must already be trained.
pub fn train_semisup(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    labeled: &[Labeled],
    unlabeled: &[Unlabeled],
    dev: &[Labeled],
) -> Result<Vec<EpochRecord>, TrainError> {
    models.prior()?;
    models.baseline()?;
    let mut history = train_supervised(models, cfg, labeled, dev)?;
    history.extend(semisup_phase(models, cfg, labeled, unlabeled, dev)?);
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTrainReport {
    /// Pseudo-labeled pairs added to the training data.
    pub added: usize,
    /// Unlabeled utterances without a prediction.
    pub skipped: usize,
    pub history: Vec<EpochRecord>,
}

/// Labels D_U - D_L with beam-1 predictions of the current parser and
/// fine-tunes on the union with D_L.
pub fn self_train(
    models: &mut VaeModels,
    cfg: &TrainerConfig,
    labeled: &[Labeled],
    unlabeled: &[Unlabeled],
    dev: &[Labeled],
) -> Result<SelfTrainReport, TrainError> {
    cfg.validate()?;
    let seen: HashSet<&[String]> = labeled.iter().map(|p| p.0.as_slice()).collect();
    let xs: Vec<&[String]> = unlabeled
        .iter()
        .map(|u| u.x.as_slice())
        .filter(|x| !seen.contains(x))
        .collect();
    let preds = predict(&models.parser, &xs, cfg.max_decode_steps);
    let mut data = labeled.to_vec();
    let mut skipped = 0;
    for (x, p) in xs.iter().zip(preds) {
        match p {
            Some(z) => data.push((x.to_vec(), z)),
            None => skipped += 1,
        }
    }
    let added = data.len() - labeled.len();
    if added == 0 {
        return Ok(SelfTrainReport {
            added,
            skipped,
            history: Vec::new(),
        });
    }
    let history = supervised_epochs(models, cfg, &data, dev, Phase::SelfTraining)?;
    Ok(SelfTrainReport {
        added,
        skipped,
        history,
    })
}
