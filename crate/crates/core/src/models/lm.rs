//! LSTM language model over token sequences, used for the MR prior and the
//! utterance model behind the learning-signal baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::vocab::{BOS, EOS, UNK};
use crate::nn::{Adam, Dropout, Lstm, ParamId, ParamStore, Tape, Var, Vocab};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmDims {
    pub embed: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for LmDims {
    fn default() -> Self {
        LmDims {
            embed: 32,
            hidden: 64,
            dropout: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmLm {
    pub params: ParamStore,
    pub vocab: Vocab,
    pub dims: LmDims,
    emb: ParamId,
    lstm: Lstm,
    out_w: ParamId,
    out_b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmTrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LmTrainConfig {
    fn default() -> Self {
        LmTrainConfig {
            epochs: 10,
            batch: 10,
            lr: 0.005,
            seed: 1,
        }
    }
}

impl LstmLm {
    /// The vocabulary gets `<unk>`, `<s>` and `</s>` at the front.
    pub fn new<'a>(
        corpus: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        dims: LmDims,
        seed: u64,
    ) -> LstmLm {
        let vocab = Vocab::build(&[UNK, BOS, EOS], corpus, min_freq);
        LstmLm::with_vocab(vocab, dims, seed)
    }

    pub fn with_vocab(vocab: Vocab, dims: LmDims, seed: u64) -> LstmLm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let emb = params.add_uniform("lm.emb", vocab.len(), dims.embed, 0.1, &mut rng);
        let lstm = Lstm::new(
            &mut params,
            "lm.lstm",
            dims.embed,
            dims.hidden,
            0.1,
            &mut rng,
        );
        let out_w = params.add_uniform("lm.out.w", vocab.len(), dims.hidden, 0.1, &mut rng);
        let out_b = params.add_zeros("lm.out.b", 1, vocab.len());
        LstmLm {
            params,
            vocab,
            dims,
            emb,
            lstm,
            out_w,
            out_b,
        }
    }

    /// Restores lookup tables after deserialization.
    pub fn reindex(&mut self) {
        self.params.reindex();
        self.vocab.reindex();
    }

    fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.vocab.id_or_unk(t)).collect()
    }

    /// Total log-probability of `tokens` followed by `</s>`, as a tape scalar.
    pub fn build(&self, t: &mut Tape, tokens: &[String], drop: &mut Dropout) -> Var {
        let ids = self.ids(tokens);
        let eos = self.vocab.id(EOS).expect("special");
        let mut state = self.lstm.zero_state(t);
        let mut prev = self.vocab.id(BOS).expect("special");
        let mut terms = Vec::with_capacity(ids.len() + 1);
        for &y in ids.iter().chain(std::iter::once(&eos)) {
            let x = t.row(self.emb, prev);
            state = self.lstm.step(t, x, state);
            let h = drop.apply(t, state.0);
            let logits = t.affine(self.out_w, Some(self.out_b), h);
            let lp = t.log_softmax(logits);
            terms.push(t.pick(lp, y));
            prev = y;
        }
        t.add_all(&terms)
    }

    pub fn log_prob(&self, tokens: &[String]) -> f64 {
        let mut t = Tape::new(&self.params);
        let v = self.build(&mut t, tokens, &mut Dropout::off());
        t.scalar(v)
    }

    /// Next-token distribution over the vocabulary after `prefix`.
    pub fn next_distribution(&self, prefix: &[String]) -> Vec<f64> {
        let mut t = Tape::new(&self.params);
        let mut state = self.lstm.zero_state(&mut t);
        let mut prev = self.vocab.id(BOS).expect("special");
        for id in self
            .ids(prefix)
            .into_iter()
            .chain(std::iter::once(usize::MAX))
        {
            let x = t.row(self.emb, prev);
            state = self.lstm.step(&mut t, x, state);
            if id == usize::MAX {
                break;
            }
            prev = id;
        }
        let logits = t.affine(self.out_w, Some(self.out_b), state.0);
        let p = t.softmax(logits);
        t.value(p).to_vec()
    }

    /// Ancestral sample, excluding the `</s>` terminator; `<s>` is never emitted.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_len: usize) -> Vec<String> {
        let bos = self.vocab.id(BOS).expect("special");
        let eos = self.vocab.id(EOS).expect("special");
        let mut t = Tape::new(&self.params);
        let mut state = self.lstm.zero_state(&mut t);
        let mut prev = bos;
        let mut out = Vec::new();
        while out.len() < max_len {
            let x = t.row(self.emb, prev);
            state = self.lstm.step(&mut t, x, state);
            let logits = t.affine(self.out_w, Some(self.out_b), state.0);
            let p = t.softmax(logits);
            let mut probs = t.value(p).to_vec();
            probs[bos] = 0.0;
            let y = sample_index(&probs, rng);
            if y == eos {
                break;
            }
            out.push(self.vocab.token(y).to_string());
            prev = y;
        }
        out
    }

    /// Maximum-likelihood training; returns mean negative log-likelihood per epoch.
    pub fn train(&mut self, corpus: &[Vec<String>], cfg: &LmTrainConfig) -> Vec<f64> {
        let mut opt = Adam::new(&self.params, cfg.lr);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut history = Vec::new();
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        for epoch in 0..cfg.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut total = 0.0;
            for (b, chunk) in order.chunks(cfg.batch.max(1)).enumerate() {
                let seeds: Vec<u64> = chunk
                    .iter()
                    .map(|i| mix_seed(cfg.seed, epoch, b, *i))
                    .collect();
                let this = &*self;
                let parts = par::map(chunk.len(), |k| {
                    let mut g = this.params.zero_grads();
                    let mut t = Tape::new(&this.params);
                    let mut drop =
                        Dropout::new(this.dims.dropout, ChaCha8Rng::seed_from_u64(seeds[k]));
                    let lp = this.build(&mut t, &corpus[chunk[k]], &mut drop);
                    t.backward(lp, -1.0 / chunk.len() as f64, &mut g);
                    (t.scalar(lp), g)
                });
                total -= parts.iter().map(|p| p.0).sum::<f64>();
                let g = crate::nn::Grads::sum_ordered(&self.params, parts.into_iter().map(|p| p.1));
                opt.step(&mut self.params, &g);
            }
            history.push(total / corpus.len().max(1) as f64);
        }
        history
    }
}

/// Deterministic per-example seed.
pub fn mix_seed(seed: u64, a: usize, b: usize, c: usize) -> u64 {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [a as u64, b as u64, c as u64] {
        x = x.wrapping_add(v).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 31;
    }
    x
}

pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn distributions_normalize() {
        let lm = LstmLm::new(
            "a b c d".split(' '),
            1,
            LmDims {
                embed: 8,
                hidden: 8,
                dropout: 0.0,
            },
            3,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let prefix = lm.sample(&mut rng, 4);
            let p = lm.next_distribution(&prefix);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_prob_matches_chain_of_conditionals() {
        let lm = LstmLm::new(
            "a b c".split(' '),
            1,
            LmDims {
                embed: 6,
                hidden: 5,
                dropout: 0.0,
            },
            9,
        );
        let x = toks("a c b");
        let mut acc = 0.0;
        for i in 0..=x.len() {
            let p = lm.next_distribution(&x[..i]);
            let y = if i < x.len() {
                lm.vocab.id(&x[i]).unwrap()
            } else {
                lm.vocab.id(EOS).unwrap()
            };
            acc += p[y].ln();
        }
        assert!((acc - lm.log_prob(&x)).abs() < 1e-10);
    }

    #[test]
    fn training_fits_a_tiny_corpus() {
        let corpus = vec![toks("a b"), toks("a b"), toks("a c")];
        let mut lm = LstmLm::new(
            ["a", "b", "c"],
            1,
            LmDims {
                embed: 8,
                hidden: 16,
                dropout: 0.0,
            },
            1,
        );
        let before = lm.log_prob(&toks("a b"));
        let hist = lm.train(
            &corpus,
            &LmTrainConfig {
                epochs: 60,
                batch: 3,
                lr: 0.02,
                seed: 4,
            },
        );
        assert!(hist.last().unwrap() < &hist[0]);
        assert!(lm.log_prob(&toks("a b")) > before);
        assert!(lm.log_prob(&toks("a b")) > lm.log_prob(&toks("b a")));
    }
}
