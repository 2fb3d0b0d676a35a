//! Versioned JSON checkpoints holding every trained component.
//!
//! Parameter stores serialize as parallel lists of names and shaped tensors,
//! and floats round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Baseline, PriorModel, Reconstructor, SemanticParser};
use crate::mr::MrKind;

pub const FORMAT: &str = "structvae-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a checkpoint (format `{0}`)")]
    Format(String),
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("embedded grammar: {0}")]
    Grammar(#[from] crate::asdl::GrammarError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: MrKind,
    /// Root type of the parser's grammar.
    pub root: String,
    /// Free-form configuration the models were trained with.
    pub config: serde_json::Value,
    pub parser: SemanticParser,
    pub recon: Reconstructor,
    pub prior: Option<PriorModel>,
    pub baseline: Option<Baseline>,
}

impl Checkpoint {
    pub fn new(
        kind: MrKind,
        config: serde_json::Value,
        parser: SemanticParser,
        recon: Reconstructor,
        prior: Option<PriorModel>,
        baseline: Option<Baseline>,
    ) -> Checkpoint {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            root: parser.grammar().root_type().to_string(),
            config,
            parser,
            recon,
            prior,
            baseline,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Checkpoint, CheckpointError> {
        let head: Header = serde_json::from_str(text)?;
        if head.format != FORMAT {
            return Err(CheckpointError::Format(head.format));
        }
        if head.version != VERSION {
            return Err(CheckpointError::Version(head.version));
        }
        let mut ck: Checkpoint = serde_json::from_str(text)?;
        ck.parser.reindex(&ck.root)?;
        ck.recon.reindex();
        if let Some(p) = ck.prior.as_mut() {
            p.reindex();
        }
        if let Some(b) = ck.baseline.as_mut() {
            b.reindex();
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Checkpoint::from_json(&text)
    }
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}
