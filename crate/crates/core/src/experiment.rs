//! One configured training run per seed: data loading, D_L/D_U split,
//! training in the requested mode and evaluation.

use serde::Serialize;
use thiserror::Error;

use crate::asdl::{parse_grammar, GrammarError};
use crate::config::{ConfigError, ExperimentConfig, Mode};
use crate::corpus::{evaluate, make_toy_task, subsample, DataError, Dataset, MetricsReport};
use crate::trainer::{
    fit_baseline, fit_prior, self_train, semisup_phase, train_supervised, EpochRecord, Labeled,
    TrainError, Unlabeled, VaeModels,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("grammar: {0}")]
    Grammar(#[from] GrammarError),
    #[error("grammar file does not match the bundled {0} grammar")]
    GrammarMismatch(String),
}

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Option<Dataset>,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<ExperimentData, ExperimentError> {
        let e = &cfg.experiment;
        if let Some(path) = &e.grammar {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let bundled = e.kind.grammar_ref();
            let g = parse_grammar(&text, bundled.root_type())?;
            if g.render() != bundled.render() {
                return Err(ExperimentError::GrammarMismatch(e.kind.name().into()));
            }
        }
        let Some(train) = &e.train else {
            let t = make_toy_task(e.toy_seed, e.toy_sizes);
            return Ok(ExperimentData {
                train: t.train,
                dev: t.dev,
                test: Some(t.test),
            });
        };
        let dev = e.dev.as_ref().expect("validated");
        Ok(ExperimentData {
            train: Dataset::load(train, e.kind, false)?,
            dev: Dataset::load(dev, e.kind, false)?,
            test: e
                .test
                .as_ref()
                .map(|p| Dataset::load(p, e.kind, false))
                .transpose()?,
        })
    }
}

/// Accuracy without the per-example flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub accuracy: f64,
    pub matches: usize,
    pub total: usize,
    pub failed: usize,
}

impl From<&MetricsReport> for Score {
    fn from(m: &MetricsReport) -> Score {
        Score {
            accuracy: m.accuracy,
            matches: m.matches,
            total: m.total,
            failed: m.failed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub mode: Mode,
    pub labeled: usize,
    pub unlabeled: usize,
    pub dev: MetricsReport,
    pub test: Option<MetricsReport>,
    pub pseudo_labeled: Option<usize>,
    #[serde(skip)]
    pub history: Vec<EpochRecord>,
    #[serde(skip)]
    pub models: Option<VaeModels>,
    /// Utterances of D_L, kept for diagnostics.
    #[serde(skip)]
    pub labeled_utterances: Vec<String>,
    /// D_U with gold ASTs where the training file had them.
    #[serde(skip)]
    pub unlabeled_data: Vec<Unlabeled>,
}

/// Trains and evaluates one seed in the configured mode.
pub fn run_seed(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    seed: u64,
) -> Result<SeedRun, ExperimentError> {
    Ok(run_seed_modes(cfg, data, seed, &[cfg.experiment.mode])?.remove(0))
}

/// Runs supervised pre-training once, then continues a copy of the models in
/// each requested mode. Runs come back in the order of `modes`.
pub fn run_seed_modes(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    seed: u64,
    modes: &[Mode],
) -> Result<Vec<SeedRun>, ExperimentError> {
    let e = &cfg.experiment;
    let kind = e.kind;
    let all = data.train.labeled().len();
    let k = e.labeled.unwrap_or(all);
    let split = subsample(&data.train, k, seed, e.disjoint)?;
    let dev: Vec<Labeled> = data.dev.labeled();
    if dev.is_empty() {
        return Err(TrainError::NoDev.into());
    }
    let test = data.test.as_ref().map(Dataset::labeled);
    let mut tcfg = cfg.trainer.clone();
    tcfg.seed = seed;
    let utterances = data.train.utterances();
    let mut pretrained = VaeModels::init(kind, &split.labeled, &utterances, &cfg.model, seed)?;
    let sup_history = train_supervised(&mut pretrained, &tcfg, &split.labeled, &dev)?;
    let mut runs = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut models = pretrained.clone();
        let mut history = sup_history.clone();
        let mut pseudo = None;
        match mode {
            Mode::Sup => {}
            Mode::Semisup => {
                models.prior = Some(fit_prior(kind, &split.labeled, &cfg.model, seed)?);
                models.baseline =
                    Some(fit_baseline(&models.parser, &utterances, &cfg.model, &tcfg));
                history.extend(semisup_phase(
                    &mut models,
                    &tcfg,
                    &split.labeled,
                    &split.unlabeled,
                    &dev,
                )?);
            }
            Mode::Selftrain => {
                let r = self_train(&mut models, &tcfg, &split.labeled, &split.unlabeled, &dev)?;
                pseudo = Some(r.added);
                history.extend(r.history);
            }
        }
        let steps = tcfg.max_decode_steps;
        let dev_report = evaluate(&models.parser, kind, &dev, steps, tcfg.canonicalize);
        let test_report = test
            .as_ref()
            .map(|t| evaluate(&models.parser, kind, t, steps, tcfg.canonicalize));
        runs.push(SeedRun {
            seed,
            mode,
            labeled: split.labeled.len(),
            unlabeled: split.unlabeled.len(),
            dev: dev_report,
            test: test_report,
            pseudo_labeled: pseudo,
            history,
            labeled_utterances: split.labeled.iter().map(|p| p.0.join(" ")).collect(),
            unlabeled_data: split.unlabeled.clone(),
            models: Some(models),
        });
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ToySizes;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.experiment.toy_sizes = ToySizes {
            train: 20,
            dev: 5,
            test: 5,
        };
        c.experiment.labeled = Some(10);
        c.experiment.mode = Mode::Sup;
        c.trainer.max_epochs_sup = 2;
        c.model.embed = 8;
        c.model.hidden = 8;
        c.model.field_embed = 4;
        c
    }

    #[test]
    fn supervised_run_is_reproducible() {
        let c = tiny();
        let data = ExperimentData::load(&c).unwrap();
        let a = run_seed(&c, &data, 3).unwrap();
        let b = run_seed(&c, &data, 3).unwrap();
        assert_eq!((a.labeled, a.unlabeled), (10, 20));
        assert_eq!(a.dev, b.dev);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 2);
    }

    #[test]
    fn modes_share_the_supervised_phase() {
        let mut c = tiny();
        c.trainer.max_epochs_unsup = 1;
        c.model.prior = crate::trainer::PriorKind::Kn;
        c.model.lm_epochs = 1;
        let data = ExperimentData::load(&c).unwrap();
        let runs =
            run_seed_modes(&c, &data, 2, &[Mode::Sup, Mode::Semisup, Mode::Selftrain]).unwrap();
        let sup = &runs[0];
        assert_eq!(sup.dev, run_seed(&c, &data, 2).unwrap().dev);
        for r in &runs[1..] {
            assert_eq!(r.history[..2], sup.history[..]);
        }
        assert_eq!(runs[2].pseudo_labeled, Some(10));
    }

    #[test]
    fn too_many_labeled_examples() {
        let mut c = tiny();
        c.experiment.labeled = Some(21);
        let data = ExperimentData::load(&c).unwrap();
        assert!(matches!(
            run_seed(&c, &data, 1),
            Err(ExperimentError::Data(DataError::TooLarge {
                k: 21,
                available: 20
            }))
        ));
    }
}
