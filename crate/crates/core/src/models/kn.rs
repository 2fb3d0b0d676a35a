//! Interpolated Kneser-Ney trigram model.
//!
//! Sentences are padded with two `<s>` and one `</s>`. The highest order uses
//! raw counts; lower orders use continuation counts, and the unigram level
//! interpolates with a uniform distribution over the predicted vocabulary
//! (every observed non-`<s>` token plus `<unk>`).

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::vocab::{BOS, EOS, UNK};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnError {
    #[error("cannot fit a language model on an empty corpus")]
    EmptyCorpus,
    #[error("discount must lie in (0, 1), got {0}")]
    BadDiscount(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Level {
    /// Count of `w` after context.
    counts: BTreeMap<String, f64>,
    total: f64,
    types: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnTrigram {
    pub discount: f64,
    vocab: Vec<String>,
    tri: BTreeMap<String, Level>,
    bi: BTreeMap<String, Level>,
    uni: Level,
}

fn key2(u: &str, v: &str) -> String {
    format!("{u}\u{1}{v}")
}

impl Level {
    fn add(&mut self, w: &str, c: f64) {
        let e = self.counts.entry(w.to_string()).or_insert(0.0);
        if *e == 0.0 {
            self.types += 1;
        }
        *e += c;
        self.total += c;
    }

    /// Interpolates this level's discounted estimate with `lower`.
    fn prob(&self, w: &str, d: f64, lower: f64) -> f64 {
        if self.total == 0.0 {
            return lower;
        }
        let c = self.counts.get(w).copied().unwrap_or(0.0);
        (c - d).max(0.0) / self.total + d * self.types as f64 / self.total * lower
    }
}

impl KnTrigram {
    pub fn fit(corpus: &[Vec<String>], discount: f64) -> Result<KnTrigram, KnError> {
        if corpus.is_empty() {
            return Err(KnError::EmptyCorpus);
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(KnError::BadDiscount(discount.to_string()));
        }
        let mut trigrams: BTreeSet<(String, String, String)> = BTreeSet::new();
        let mut tri: BTreeMap<String, Level> = BTreeMap::new();
        let mut vocab: BTreeSet<String> = BTreeSet::new();
        vocab.insert(UNK.to_string());
        for s in corpus {
            let padded: Vec<&str> = [BOS, BOS]
                .into_iter()
                .chain(s.iter().map(String::as_str))
                .chain(std::iter::once(EOS))
                .collect();
            for w in padded.windows(3) {
                vocab.insert(w[2].to_string());
                tri.entry(key2(w[0], w[1])).or_default().add(w[2], 1.0);
                trigrams.insert((w[0].to_string(), w[1].to_string(), w[2].to_string()));
            }
        }
        // Continuation counts: distinct left extensions of each bigram / unigram.
        let mut bi: BTreeMap<String, Level> = BTreeMap::new();
        let mut bigram_types: BTreeSet<(String, String)> = BTreeSet::new();
        for (_, v, w) in &trigrams {
            bi.entry(v.clone()).or_default().add(w, 1.0);
            bigram_types.insert((v.clone(), w.clone()));
        }
        let mut uni = Level::default();
        for (_, w) in &bigram_types {
            uni.add(w, 1.0);
        }
        Ok(KnTrigram {
            discount,
            vocab: vocab.into_iter().collect(),
            tri,
            bi,
            uni,
        })
    }

    /// Predicted vocabulary, sorted.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn norm<'a>(&self, w: &'a str) -> &'a str {
        if self.vocab.binary_search_by(|v| v.as_str().cmp(w)).is_ok() {
            w
        } else {
            UNK
        }
    }

    pub fn prob_unigram(&self, w: &str) -> f64 {
        let w = self.norm(w);
        self.uni
            .prob(w, self.discount, 1.0 / self.vocab.len() as f64)
    }

    pub fn prob_bigram(&self, v: &str, w: &str) -> f64 {
        let w = self.norm(w);
        let lower = self.prob_unigram(w);
        match self.bi.get(self.norm_ctx(v)) {
            Some(level) => level.prob(w, self.discount, lower),
            None => lower,
        }
    }

    /// `P(w | u v)`.
    pub fn prob(&self, u: &str, v: &str, w: &str) -> f64 {
        let w = self.norm(w);
        let lower = self.prob_bigram(v, w);
        match self.tri.get(&key2(self.norm_ctx(u), self.norm_ctx(v))) {
            Some(level) => level.prob(w, self.discount, lower),
            None => lower,
        }
    }

    fn norm_ctx<'a>(&self, u: &'a str) -> &'a str {
        if u == BOS {
            u
        } else {
            self.norm(u)
        }
    }

    /// Log-probability including the `</s>` terminator.
    pub fn log_prob(&self, tokens: &[String]) -> f64 {
        let padded: Vec<&str> = [BOS, BOS]
            .into_iter()
            .chain(tokens.iter().map(String::as_str))
            .chain(std::iter::once(EOS))
            .collect();
        padded
            .windows(3)
            .map(|w| self.prob(w[0], w[1], w[2]).ln())
            .sum()
    }

    /// Full next-token distribution for a context.
    pub fn distribution(&self, u: &str, v: &str) -> BTreeMap<String, f64> {
        self.vocab
            .iter()
            .map(|w| (w.clone(), self.prob(u, v, w)))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Vec<String> {
        let (mut u, mut v) = (BOS.to_string(), BOS.to_string());
        let mut out = Vec::new();
        while out.len() < max_len {
            let dist = self.distribution(&u, &v);
            let probs: Vec<f64> = dist.values().copied().collect();
            let i = super::lm::sample_index(&probs, rng);
            let w = dist.keys().nth(i).expect("index in range").clone();
            if w == EOS {
                break;
            }
            out.push(w.clone());
            u = std::mem::replace(&mut v, w);
        }
        out
    }
}
