//! Experiment configuration files: TOML with `[experiment]`, `[trainer]` and
//! `[model]` sections. Every field is optional and falls back to its default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ToySizes;
use crate::mr::MrKind;
use crate::trainer::{ModelConfig, TrainerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sup,
    Semisup,
    Selftrain,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sup" => Ok(Mode::Sup),
            "semisup" => Ok(Mode::Semisup),
            "selftrain" => Ok(Mode::Selftrain),
            other => Err(format!(
                "unknown mode `{other}` (expected sup, semisup or selftrain)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: MrKind,
    /// Training split. Without it a toy task is generated (toy kind only).
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Must describe the same grammar as the one bundled for `kind`.
    pub grammar: Option<PathBuf>,
    /// Labeled subsample size K; all labeled examples when absent.
    pub labeled: Option<usize>,
    pub seeds: Vec<u64>,
    pub mode: Mode,
    /// Build D_U from the training utterances outside D_L only.
    pub disjoint: bool,
    pub output: PathBuf,
    pub toy_seed: u64,
    pub toy_sizes: ToySizes,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: MrKind::Toy,
            train: None,
            dev: None,
            test: None,
            grammar: None,
            labeled: None,
            seeds: vec![1],
            mode: Mode::Semisup,
            disjoint: false,
            output: PathBuf::from("runs/default"),
            toy_seed: 0,
            toy_sizes: ToySizes::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub trainer: TrainerConfig,
    pub model: ModelConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = ExperimentConfig::parse(&text)?;
        // Relative data paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        let e = &mut cfg.experiment;
        for p in [&mut e.train, &mut e.dev, &mut e.test, &mut e.grammar]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.trainer
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let e = &self.experiment;
        if e.seeds.is_empty() {
            return Err(ConfigError::Invalid("experiment.seeds is empty".into()));
        }
        if e.train.is_none() && e.kind != MrKind::Toy {
            return Err(ConfigError::Invalid(
                "experiment.train is required unless kind = \"toy\"".into(),
            ));
        }
        if e.train.is_some() && e.dev.is_none() {
            return Err(ConfigError::Invalid(
                "experiment.dev is required with experiment.train".into(),
            ));
        }
        if e.labeled == Some(0) {
            return Err(ConfigError::Invalid(
                "experiment.labeled must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{BaselineInit, PriorKind};

    #[test]
    fn every_section_is_addressable() {
        let text = r#"
[experiment]
kind = "lambda"
train = "train.tsv"
dev = "dev.tsv"
labeled = 500
seeds = [1, 2]
mode = "selftrain"
disjoint = true

[trainer]
alpha = 0.3
kl_weight = 0.0
sample_size = 3
clip_threshold = -10.0
batch_sup = 4
batch_unsup = 8
lr = 0.002
patience = 2
reload_cycles = 1
baseline = "mlp"
baseline_init = "two_stage"

[model]
hidden = 16
prior = "kn"
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.experiment.kind, MrKind::Lambda);
        assert_eq!(c.experiment.labeled, Some(500));
        assert_eq!(c.experiment.mode, Mode::Selftrain);
        assert_eq!(
            (c.trainer.alpha, c.trainer.kl_weight, c.trainer.sample_size),
            (0.3, 0.0, 3)
        );
        assert_eq!(c.trainer.baseline_init, BaselineInit::TwoStage);
        assert_eq!(c.model.prior, PriorKind::Kn);
        assert_eq!(c.model.embed, ModelConfig::default().embed);
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::parse("[trainer]\nalhpa = 1\n"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("[trainer]\nsample_size = 0\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("[experiment]\nkind = \"pylite\"\n"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(ExperimentConfig::parse("").is_ok());
    }
}
