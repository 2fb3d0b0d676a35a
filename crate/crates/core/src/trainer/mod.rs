//! Supervised pre-training, semi-supervised training through the variational
//! bound with a score-function gradient, and self-training.

pub mod elbo;
pub mod loops;
pub mod signal;
pub mod steps;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{
    Baseline, Checkpoint, KnTrigram, LmDims, LmTrainConfig, LstmLm, ModelError, ParserDims,
    PriorModel, ReconDims, Reconstructor, SemanticParser,
};
use crate::mr::{linearize, MrError, MrKind};
use crate::transition::Ast;

pub use elbo::{elbo_estimate, elbo_exact, exact_posterior, log_marginal_exact, Scored};
pub use loops::{
    self_train, semisup_phase, train_semisup, train_supervised, EpochRecord, Phase, SelfTrainReport,
};
pub use signal::{implied_baseline, learning_signal, raw_signal, LearningSignalRecord};
pub use steps::{
    score_function_gradient, score_samples, supervised_step, unsupervised_step, SampleSet,
};

/// A labeled pair `(utterance tokens, AST)`.
pub type Labeled = (Vec<String>, Ast);

/// An utterance from D_U. The gold AST, when known, is used only for
/// diagnostics and never for training.
#[derive(Debug, Clone, PartialEq)]
pub struct Unlabeled {
    pub x: Vec<String>,
    pub gold: Option<Ast>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mr(#[from] MrError),
    #[error("language model: {0}")]
    Kn(#[from] crate::models::kn::KnError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("no labeled examples")]
    EmptyLabeled,
    #[error("no development examples")]
    NoDev,
    #[error("missing component: {0}")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Lm,
    Mlp,
}

/// Starting values of `(a, c)` for the LM baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineInit {
    /// a = 0.5, c = -2.
    Atis,
    /// a = 0.9, c = 2.
    Django,
    /// a = 1, c = 0: the first stage of a two-stage run whose learned values
    /// seed the second stage through `custom`.
    TwoStage,
    /// `baseline_a`, `baseline_c`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Lstm,
    Kn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    /// Weight of the unsupervised objective.
    pub alpha: f64,
    /// Weight of the KL term in the learning signal.
    pub kl_weight: f64,
    /// Samples per unlabeled utterance.
    pub sample_size: usize,
    /// Learning signals below this value are clamped to it.
    pub clip_threshold: f64,
    pub batch_sup: usize,
    pub batch_unsup: usize,
    pub lr: f64,
    /// Learning-rate factor applied at each reload.
    pub lr_decay: f64,
    pub patience: usize,
    pub reload_cycles: usize,
    pub max_epochs_sup: usize,
    pub max_epochs_unsup: usize,
    pub max_decode_steps: usize,
    pub seed: u64,
    pub baseline: BaselineKind,
    pub baseline_init: BaselineInit,
    pub baseline_a: f64,
    pub baseline_c: f64,
    pub baseline_lr: f64,
    pub mlp_hidden: usize,
    pub mlp_bias: f64,
    /// Compare Lambda conjunctions order-insensitively.
    pub canonicalize: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            alpha: 0.1,
            kl_weight: 0.1,
            sample_size: 5,
            clip_threshold: -20.0,
            batch_sup: 10,
            batch_unsup: 25,
            lr: 0.001,
            lr_decay: 0.5,
            patience: 5,
            reload_cycles: 5,
            max_epochs_sup: 100,
            max_epochs_unsup: 30,
            max_decode_steps: 100,
            seed: 0,
            baseline: BaselineKind::Lm,
            baseline_init: BaselineInit::Atis,
            baseline_a: 1.0,
            baseline_c: 0.0,
            baseline_lr: 0.01,
            mlp_hidden: 32,
            mlp_bias: -20.0,
            canonicalize: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.alpha >= 0.0) {
            return bad("alpha must be >= 0");
        }
        if !(self.kl_weight >= 0.0) {
            return bad("kl_weight must be >= 0");
        }
        if self.sample_size == 0 {
            return bad("sample_size must be >= 1");
        }
        if self.batch_sup == 0 || self.batch_unsup == 0 {
            return bad("batch sizes must be >= 1");
        }
        if !(self.lr > 0.0) || !(self.baseline_lr > 0.0) {
            return bad("learning rates must be > 0");
        }
        if self.max_decode_steps == 0 {
            return bad("max_decode_steps must be >= 1");
        }
        Ok(())
    }

    pub fn baseline_coefficients(&self) -> (f64, f64) {
        match self.baseline_init {
            BaselineInit::Atis => (0.5, -2.0),
            BaselineInit::Django => (0.9, 2.0),
            BaselineInit::TwoStage => (1.0, 0.0),
            BaselineInit::Custom => (self.baseline_a, self.baseline_c),
        }
    }
}

/// Network sizes and auxiliary model training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed: usize,
    pub hidden: usize,
    pub field_embed: usize,
    pub dropout: f64,
    pub min_freq: usize,
    pub prior: PriorKind,
    pub prior_epochs: usize,
    pub kn_discount: f64,
    pub lm_embed: usize,
    pub lm_hidden: usize,
    pub lm_epochs: usize,
    pub lm_lr: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed: 32,
            hidden: 64,
            field_embed: 16,
            dropout: 0.2,
            min_freq: 1,
            prior: PriorKind::Lstm,
            prior_epochs: 30,
            kn_discount: 0.75,
            lm_embed: 32,
            lm_hidden: 64,
            lm_epochs: 20,
            lm_lr: 0.005,
        }
    }
}

/// Everything the semi-supervised objective needs.
#[derive(Debug, Clone)]
pub struct VaeModels {
    pub kind: MrKind,
    pub parser: SemanticParser,
    pub recon: Reconstructor,
    pub prior: Option<PriorModel>,
    pub baseline: Option<Baseline>,
}

impl VaeModels {
    /// Fresh parser and reconstruction model. Utterance vocabularies come from
    /// every training utterance, MR vocabularies from the labeled ASTs.
    pub fn init(
        kind: MrKind,
        labeled: &[Labeled],
        utterances: &[Vec<String>],
        cfg: &ModelConfig,
        seed: u64,
    ) -> Result<VaeModels, TrainError> {
        if labeled.is_empty() {
            return Err(TrainError::EmptyLabeled);
        }
        let g = std::sync::Arc::new(kind.grammar());
        let asts: Vec<Ast> = labeled.iter().map(|p| p.1.clone()).collect();
        let words = utterances
            .iter()
            .chain(labeled.iter().map(|p| &p.0))
            .flatten()
            .map(String::as_str);
        let parser = SemanticParser::from_corpus(
            g,
            words.clone(),
            &asts,
            cfg.min_freq,
            ParserDims {
                embed: cfg.embed,
                hidden: cfg.hidden,
                field_embed: cfg.field_embed,
                dropout: cfg.dropout,
            },
            crate::models::lm::mix_seed(seed, 1, 0, 0),
        );
        let mut mr_tokens = Vec::new();
        for z in &asts {
            mr_tokens.extend(linearize(z, kind)?.tokens);
        }
        let recon = Reconstructor::from_corpus(
            mr_tokens.iter().map(String::as_str),
            words,
            cfg.min_freq,
            ReconDims {
                embed: cfg.embed,
                hidden: cfg.hidden,
                dropout: cfg.dropout,
            },
            crate::models::lm::mix_seed(seed, 2, 0, 0),
        );
        Ok(VaeModels {
            kind,
            parser,
            recon,
            prior: None,
            baseline: None,
        })
    }

    pub fn prior(&self) -> Result<&PriorModel, TrainError> {
        self.prior.as_ref().ok_or(TrainError::Missing("prior"))
    }

    pub fn baseline(&self) -> Result<&Baseline, TrainError> {
        self.baseline
            .as_ref()
            .ok_or(TrainError::Missing("baseline"))
    }

    pub fn to_checkpoint(&self, config: serde_json::Value) -> Checkpoint {
        Checkpoint::new(
            self.kind,
            config,
            self.parser.clone(),
            self.recon.clone(),
            self.prior.clone(),
            self.baseline.clone(),
        )
    }

    pub fn from_checkpoint(ck: Checkpoint) -> VaeModels {
        VaeModels {
            kind: ck.kind,
            parser: ck.parser,
            recon: ck.recon,
            prior: ck.prior,
            baseline: ck.baseline,
        }
    }
}

/// Trains the prior p(z) on the linearized labeled MRs.
pub fn fit_prior(
    kind: MrKind,
    labeled: &[Labeled],
    cfg: &ModelConfig,
    seed: u64,
) -> Result<PriorModel, TrainError> {
    let mut corpus = Vec::with_capacity(labeled.len());
    for (_, z) in labeled {
        corpus.push(linearize(z, kind)?.tokens);
    }
    Ok(match cfg.prior {
        PriorKind::Kn => PriorModel::KnTrigram(KnTrigram::fit(&corpus, cfg.kn_discount)?),
        PriorKind::Lstm => {
            let mut lm = LstmLm::new(
                corpus.iter().flatten().map(String::as_str),
                1,
                LmDims {
                    embed: cfg.lm_embed,
                    hidden: cfg.lm_hidden,
                    dropout: cfg.dropout,
                },
                crate::models::lm::mix_seed(seed, 3, 0, 0),
            );
            lm.train(
                &corpus,
                &LmTrainConfig {
                    epochs: cfg.prior_epochs,
                    batch: 10,
                    lr: cfg.lm_lr,
                    seed,
                },
            );
            PriorModel::RecurrentLm(lm)
        }
    })
}

/// Trains the utterance language model and wraps it in the configured baseline.
pub fn fit_baseline(
    parser: &SemanticParser,
    utterances: &[Vec<String>],
    mcfg: &ModelConfig,
    tcfg: &TrainerConfig,
) -> Baseline {
    match tcfg.baseline {
        BaselineKind::Mlp => Baseline::mlp(
            parser.encoder_dim(),
            tcfg.mlp_hidden,
            tcfg.mlp_bias,
            crate::models::lm::mix_seed(tcfg.seed, 4, 0, 0),
        ),
        BaselineKind::Lm => {
            let mut lm = LstmLm::new(
                utterances.iter().flatten().map(String::as_str),
                mcfg.min_freq,
                LmDims {
                    embed: mcfg.lm_embed,
                    hidden: mcfg.lm_hidden,
                    dropout: mcfg.dropout,
                },
                crate::models::lm::mix_seed(tcfg.seed, 5, 0, 0),
            );
            lm.train(
                utterances,
                &LmTrainConfig {
                    epochs: mcfg.lm_epochs,
                    batch: 25,
                    lr: mcfg.lm_lr,
                    seed: tcfg.seed,
                },
            );
            let (a, c) = tcfg.baseline_coefficients();
            Baseline::lm(lm, a, c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = TrainerConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(
            (c.alpha, c.kl_weight, c.sample_size, c.clip_threshold),
            (0.1, 0.1, 5, -20.0)
        );
        assert_eq!(
            (c.batch_sup, c.batch_unsup, c.patience, c.reload_cycles),
            (10, 25, 5, 5)
        );
        assert_eq!(c.baseline_coefficients(), (0.5, -2.0));
        let bad = TrainerConfig {
            sample_size: 0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let bad = TrainerConfig {
            alpha: -1.0,
            ..c.clone()
        };
        assert!(bad.validate().is_err());
        let two = TrainerConfig {
            baseline_init: BaselineInit::TwoStage,
            ..c
        };
        assert_eq!(two.baseline_coefficients(), (1.0, 0.0));
    }
}
