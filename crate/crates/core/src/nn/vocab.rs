use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Token inventory with fixed special tokens at the front.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Vocab {
    /// Specials first, then tokens seen at least `min_freq` times, most frequent
    /// first with ties broken alphabetically.
    pub fn build<'a>(
        specials: &[&str],
        corpus: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
    ) -> Vocab {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in corpus {
            *counts.entry(t).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_freq.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut v = Vocab::default();
        for s in specials {
            v.push(s);
        }
        for (t, _) in kept {
            v.push(t);
        }
        v
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut v = Vocab::default();
        for t in tokens {
            v.push(t);
        }
        v
    }

    fn push(&mut self, t: &str) {
        if !self.index.contains_key(t) {
            self.index.insert(t.to_string(), self.tokens.len());
            self.tokens.push(t.to_string());
        }
    }

    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, t: &str) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn contains(&self, t: &str) -> bool {
        self.index.contains_key(t)
    }

    /// Id of `t`, falling back to `<unk>`.
    pub fn id_or_unk(&self, t: &str) -> usize {
        self.id(t)
            .or_else(|| self.id(UNK))
            .expect("vocabulary has <unk>")
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_first_then_by_frequency() {
        let v = Vocab::build(&[UNK], "b a b c b a".split(' '), 2);
        assert_eq!(v.tokens(), [UNK, "b", "a"]);
        assert_eq!(v.id_or_unk("c"), 0);
        let mut w: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        w.reindex();
        assert_eq!(w.id("a"), Some(2));
    }
}
