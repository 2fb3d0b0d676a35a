//! TSV datasets: `utterance<TAB>MR` per labeled line, utterance alone for
//! unlabeled lines.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::DataError;
use crate::mr::{parse_mr, print_mr, MrKind};
use crate::trainer::{Labeled, Unlabeled};
use crate::transition::Ast;

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub utterance: Vec<String>,
    pub mr: Option<Ast>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: MrKind,
    /// Examples in file order.
    pub examples: Vec<Example>,
    /// Lines that were skipped.
    pub errors: Vec<LineError>,
}

impl Dataset {
    pub fn new(kind: MrKind, examples: Vec<Example>) -> Dataset {
        Dataset {
            kind,
            examples,
            errors: Vec::new(),
        }
    }

    /// Parses TSV text. Malformed lines are recorded in `errors`, or abort the
    /// load when `strict` is set. Blank lines are ignored.
    pub fn parse_str(text: &str, kind: MrKind, strict: bool) -> Result<Dataset, DataError> {
        let mut ds = Dataset::new(kind, Vec::new());
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (utt, mr) = match line.split_once('\t') {
                Some((u, m)) => (u, Some(m)),
                None => (line, None),
            };
            let utterance: Vec<String> = utt.split_whitespace().map(String::from).collect();
            let parsed = if utterance.is_empty() {
                Err("empty utterance".to_string())
            } else {
                mr.map(|m| parse_mr(kind, m.trim()))
                    .transpose()
                    .map_err(|e| e.to_string())
            };
            match parsed {
                Ok(mr) => ds.examples.push(Example { utterance, mr }),
                Err(message) if strict => {
                    return Err(DataError::Line {
                        line: i + 1,
                        message,
                    })
                }
                Err(message) => ds.errors.push(LineError {
                    line: i + 1,
                    message,
                }),
            }
        }
        Ok(ds)
    }

    pub fn load(path: &Path, kind: MrKind, strict: bool) -> Result<Dataset, DataError> {
        let text = fs::read_to_string(path)
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        Dataset::parse_str(&text, kind, strict)
    }

    /// Canonical TSV text; loading it back gives the same dataset.
    pub fn to_tsv(&self) -> Result<String, DataError> {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&ex.utterance.join(" "));
            if let Some(z) = &ex.mr {
                out.push('\t');
                out.push_str(&print_mr(self.kind, z).map_err(|e| DataError::Io(e.to_string()))?);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, self.to_tsv()?)
            .map_err(|e| DataError::Io(format!("{}: {e}", path.display())))
    }

    pub fn labeled(&self) -> Vec<Labeled> {
        self.examples
            .iter()
            .filter_map(|e| e.mr.as_ref().map(|z| (e.utterance.clone(), z.clone())))
            .collect()
    }

    pub fn utterances(&self) -> Vec<Vec<String>> {
        self.examples.iter().map(|e| e.utterance.clone()).collect()
    }
}

pub fn load_dataset(path: &Path, kind: MrKind) -> Result<Dataset, DataError> {
    Dataset::load(path, kind, false)
}

/// D_L and D_U for one semi-supervised run.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub labeled: Vec<Labeled>,
    pub unlabeled: Vec<Unlabeled>,
}

/// Draws `k` labeled examples as D_L. D_U is every training utterance, or,
/// with `disjoint`, only those outside D_L. Gold ASTs ride along in D_U for
/// diagnostics.
pub fn subsample(ds: &Dataset, k: usize, seed: u64, disjoint: bool) -> Result<Split, DataError> {
    let labeled_idx: Vec<usize> = (0..ds.examples.len())
        .filter(|i| ds.examples[*i].mr.is_some())
        .collect();
    if k > labeled_idx.len() {
        return Err(DataError::TooLarge {
            k,
            available: labeled_idx.len(),
        });
    }
    let mut pick = labeled_idx.clone();
    pick.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pick.truncate(k);
    pick.sort_unstable();
    let chosen: std::collections::HashSet<usize> = pick.iter().copied().collect();
    let labeled = pick
        .iter()
        .map(|i| {
            (
                ds.examples[*i].utterance.clone(),
                ds.examples[*i].mr.clone().expect("labeled"),
            )
        })
        .collect();
    let unlabeled = (0..ds.examples.len())
        .filter(|i| !(disjoint && chosen.contains(i)))
        .map(|i| Unlabeled {
            x: ds.examples[i].utterance.clone(),
            gold: ds.examples[i].mr.clone(),
        })
        .collect();
    Ok(Split { labeled, unlabeled })
}
