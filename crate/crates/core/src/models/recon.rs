//! Reconstruction model p(x | z^s): attentional encoder-decoder whose output
//! mixes generation from the utterance vocabulary with copying from z^s.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{copy_marginal, ModelError};
use crate::nn::vocab::{BOS, EOS, UNK};
use crate::nn::{BiLstm, Dropout, Encoded, Lstm, ParamId, ParamStore, Tape, Var, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconDims {
    pub embed: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for ReconDims {
    fn default() -> Self {
        ReconDims {
            embed: 32,
            hidden: 64,
            dropout: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reconstructor {
    pub params: ParamStore,
    /// Tokens of z^s.
    pub src_vocab: Vocab,
    /// Utterance tokens.
    pub tgt_vocab: Vocab,
    pub dims: ReconDims,
    src_emb: ParamId,
    tgt_emb: ParamId,
    enc: BiLstm,
    init_w: ParamId,
    init_b: ParamId,
    dec: Lstm,
    att_w: ParamId,
    comb_w: ParamId,
    gate_w: ParamId,
    gate_b: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    ptr_w: ParamId,
}

/// Per-step channel information from a scored pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconStep {
    pub token: String,
    pub log_prob: f64,
    pub p_gen: f64,
    /// The token was out of vocabulary and absent from z^s, so it was scored
    /// as a generated `<unk>`.
    pub unk_generated: bool,
}

struct DecState {
    h: Var,
    c: Var,
    s_tilde: Var,
}

struct StepOut {
    state: DecState,
    gate: Var,
    gen: Var,
    ptr: Var,
}

impl Reconstructor {
    pub fn new(src_vocab: Vocab, tgt_vocab: Vocab, dims: ReconDims, seed: u64) -> Reconstructor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, h) = (dims.embed, dims.hidden);
        let s = 0.1;
        let mut p = ParamStore::new();
        let src_emb = p.add_uniform("rec.src_emb", src_vocab.len(), e, s, &mut rng);
        let tgt_emb = p.add_uniform("rec.tgt_emb", tgt_vocab.len(), e, s, &mut rng);
        let enc = BiLstm::new(&mut p, "rec.enc", e, h, s, &mut rng);
        let init_w = p.add_uniform("rec.init.w", h, 2 * h, s, &mut rng);
        let init_b = p.add_zeros("rec.init.b", 1, h);
        let dec = Lstm::new(&mut p, "rec.dec", e + h, h, s, &mut rng);
        let att_w = p.add_uniform("rec.att.w", 2 * h, h, s, &mut rng);
        let comb_w = p.add_uniform("rec.comb.w", h, 3 * h, s, &mut rng);
        let gate_w = p.add_uniform("rec.gate.w", 2, h, s, &mut rng);
        let gate_b = p.add_zeros("rec.gate.b", 1, 2);
        let out_w = p.add_uniform("rec.out.w", tgt_vocab.len(), h, s, &mut rng);
        let out_b = p.add_zeros("rec.out.b", 1, tgt_vocab.len());
        let ptr_w = p.add_uniform("rec.ptr.w", 2 * h, h, s, &mut rng);
        Reconstructor {
            params: p,
            src_vocab,
            tgt_vocab,
            dims,
            src_emb,
            tgt_emb,
            enc,
            init_w,
            init_b,
            dec,
            att_w,
            comb_w,
            gate_w,
            gate_b,
            out_w,
            out_b,
            ptr_w,
        }
    }

    /// Builds vocabularies: z^s tokens get `<unk>`; utterances get `<unk>`, `<s>`, `</s>`.
    pub fn from_corpus<'a>(
        mr_tokens: impl IntoIterator<Item = &'a str>,
        utterance_tokens: impl IntoIterator<Item = &'a str>,
        min_freq: usize,
        dims: ReconDims,
        seed: u64,
    ) -> Reconstructor {
        let src = Vocab::build(&[UNK], mr_tokens, 1);
        let tgt = Vocab::build(&[UNK, BOS, EOS], utterance_tokens, min_freq);
        Reconstructor::new(src, tgt, dims, seed)
    }

    pub fn reindex(&mut self) {
        self.params.reindex();
        self.src_vocab.reindex();
        self.tgt_vocab.reindex();
    }

    fn encode(&self, t: &mut Tape, zs: &[String], drop: &mut Dropout) -> Encoded {
        let xs: Vec<Var> = zs
            .iter()
            .map(|z| t.row(self.src_emb, self.src_vocab.id_or_unk(z)))
            .collect();
        self.enc.encode(t, &xs, drop)
    }

    fn init_state(&self, t: &mut Tape, enc: &Encoded) -> DecState {
        let a = t.affine(self.init_w, Some(self.init_b), enc.last_h);
        let h = t.tanh(a);
        let c = t.zeros(self.dims.hidden);
        let s_tilde = t.zeros(self.dims.hidden);
        DecState { h, c, s_tilde }
    }

    fn step(
        &self,
        t: &mut Tape,
        enc: &Encoded,
        prev: usize,
        st: &DecState,
        drop: &mut Dropout,
    ) -> StepOut {
        let e = t.row(self.tgt_emb, prev);
        let inp = t.concat(&[e, st.s_tilde]);
        let (h, c) = self.dec.step(t, inp, (st.h, st.c));
        let hd = drop.apply(t, h);
        let u = t.affine(self.att_w, None, hd);
        let sc = t.scores(&enc.states, u);
        let att = t.softmax(sc);
        let ctx = t.mix(att, &enc.states);
        let cat = t.concat(&[ctx, hd]);
        let pre = t.affine(self.comb_w, None, cat);
        let s_tilde = t.tanh(pre);
        let gl = t.affine(self.gate_w, Some(self.gate_b), s_tilde);
        let gate = t.log_softmax(gl);
        let ol = t.affine(self.out_w, Some(self.out_b), s_tilde);
        let gen = t.log_softmax(ol);
        let q = t.affine(self.ptr_w, None, s_tilde);
        let pl = t.scores(&enc.states, q);
        let ptr = t.log_softmax(pl);
        StepOut {
            state: DecState { h, c, s_tilde },
            gate,
            gen,
            ptr,
        }
    }

    /// `log p(x | z^s)` as a tape scalar, with per-step details.
    pub fn build(
        &self,
        t: &mut Tape,
        x: &[String],
        zs: &[String],
        drop: &mut Dropout,
    ) -> Result<(Var, Vec<ReconStep>), ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        if zs.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let enc = self.encode(t, zs, drop);
        let mut st = self.init_state(t, &enc);
        let mut prev = self.tgt_vocab.id(BOS).expect("special");
        let mut terms = Vec::with_capacity(x.len() + 1);
        let mut steps = Vec::with_capacity(x.len() + 1);
        for tok in x.iter().map(String::as_str).chain(std::iter::once(EOS)) {
            let out = self.step(t, &enc, prev, &st, drop);
            let g = t.pick(out.gate, 0);
            let c = t.pick(out.gate, 1);
            let positions: Vec<usize> = zs
                .iter()
                .enumerate()
                .filter(|(_, z)| *z == tok)
                .map(|(j, _)| j)
                .collect();
            let in_vocab = self.tgt_vocab.id(tok);
            let unk_generated = in_vocab.is_none() && positions.is_empty();
            let gen_id = match in_vocab {
                Some(id) => Some(id),
                None if unk_generated => self.tgt_vocab.id(UNK),
                None => None,
            };
            let tg = gen_id.map(|id| t.pick(out.gen, id));
            let tc = (!positions.is_empty()).then(|| t.log_sum_exp_idx(out.ptr, &positions));
            let lp = copy_marginal(t, g, tg, c, tc).expect("at least one channel");
            steps.push(ReconStep {
                token: tok.to_string(),
                log_prob: t.scalar(lp),
                p_gen: t.scalar(g).exp(),
                unk_generated,
            });
            terms.push(lp);
            prev = self.tgt_vocab.id_or_unk(tok);
            st = out.state;
        }
        Ok((t.add_all(&terms), steps))
    }

    pub fn log_prob(&self, x: &[String], zs: &[String]) -> Result<f64, ModelError> {
        let mut t = Tape::new(&self.params);
        let (v, _) = self.build(&mut t, x, zs, &mut Dropout::off())?;
        Ok(t.scalar(v))
    }

    pub fn trace(&self, x: &[String], zs: &[String]) -> Result<Vec<ReconStep>, ModelError> {
        let mut t = Tape::new(&self.params);
        Ok(self.build(&mut t, x, zs, &mut Dropout::off())?.1)
    }

    /// Next-token distribution over candidate strings (vocabulary entries plus
    /// z^s tokens) given an utterance prefix.
    pub fn next_distribution(&self, zs: &[String], prefix: &[String]) -> Vec<(String, f64)> {
        let mut t = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut t, zs, &mut drop);
        let mut st = self.init_state(&mut t, &enc);
        let mut prev = self.tgt_vocab.id(BOS).expect("special");
        for tok in prefix {
            let out = self.step(&mut t, &enc, prev, &st, &mut drop);
            st = out.state;
            prev = self.tgt_vocab.id_or_unk(tok);
        }
        let out = self.step(&mut t, &enc, prev, &st, &mut drop);
        self.candidates(&t, &out, zs)
    }

    fn candidates(&self, t: &Tape, out: &StepOut, zs: &[String]) -> Vec<(String, f64)> {
        let gate = t.value(out.gate);
        let (pg, pc) = (gate[0].exp(), gate[1].exp());
        let gen = t.value(out.gen);
        let ptr = t.value(out.ptr);
        let mut dist: Vec<(String, f64)> = self
            .tgt_vocab
            .tokens()
            .iter()
            .zip(gen)
            .map(|(w, lp)| (w.clone(), pg * lp.exp()))
            .collect();
        for (z, lp) in zs.iter().zip(ptr) {
            match self.tgt_vocab.id(z) {
                Some(id) => dist[id].1 += pc * lp.exp(),
                None => match dist.iter_mut().find(|(w, _)| w == z) {
                    Some(e) => e.1 += pc * lp.exp(),
                    None => dist.push((z.clone(), pc * lp.exp())),
                },
            }
        }
        dist
    }

    /// Samples an utterance for `zs`; `<s>` is never produced.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        zs: &[String],
        rng: &mut R,
        max_len: usize,
    ) -> Vec<String> {
        let mut t = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut t, zs, &mut drop);
        let mut st = self.init_state(&mut t, &enc);
        let mut prev = self.tgt_vocab.id(BOS).expect("special");
        let mut out_toks = Vec::new();
        while out_toks.len() < max_len {
            let out = self.step(&mut t, &enc, prev, &st, &mut drop);
            let mut dist = self.candidates(&t, &out, zs);
            dist.retain(|(w, _)| w != BOS);
            let probs: Vec<f64> = dist.iter().map(|d| d.1).collect();
            let (w, _) = dist.swap_remove(super::lm::sample_index(&probs, rng));
            if w == EOS {
                break;
            }
            prev = self.tgt_vocab.id_or_unk(&w);
            out_toks.push(w);
            st = out.state;
        }
        out_toks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn small() -> Reconstructor {
        Reconstructor::from_corpus(
            "( Fetch ( Thing box ) )".split(' '),
            "fetch the box bring me".split(' '),
            1,
            ReconDims {
                embed: 6,
                hidden: 5,
                dropout: 0.0,
            },
            11,
        )
    }

    #[test]
    fn step_distributions_sum_to_one() {
        let r = small();
        let zs = toks("( Fetch ( Thing my_list ) )");
        for prefix in [vec![], toks("fetch"), toks("fetch the my_list")] {
            let d = r.next_distribution(&zs, &prefix);
            let s: f64 = d.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn log_prob_is_sum_of_step_probabilities() {
        let r = small();
        let zs = toks("( Fetch ( Thing my_list ) )");
        let x = toks("fetch my_list");
        let mut acc = 0.0;
        for i in 0..=x.len() {
            let d = r.next_distribution(&zs, &x[..i]);
            let want = if i < x.len() { x[i].as_str() } else { EOS };
            acc += d.iter().find(|e| e.0 == want).unwrap().1.ln();
        }
        assert!((acc - r.log_prob(&x, &zs).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn oov_token_in_source_is_copy_only() {
        let r = small();
        let zs = toks("( Fetch ( Thing my_list ) )");
        let steps = r.trace(&toks("fetch my_list"), &zs).unwrap();
        assert!(!steps[1].unk_generated);
        // p = p(copy) * pointer mass on the single matching position.
        let mut t = Tape::new(&r.params);
        let mut drop = Dropout::off();
        let enc = r.encode(&mut t, &zs, &mut drop);
        let st = r.init_state(&mut t, &enc);
        let o1 = r.step(&mut t, &enc, r.tgt_vocab.id(BOS).unwrap(), &st, &mut drop);
        let o2 = r.step(
            &mut t,
            &enc,
            r.tgt_vocab.id("fetch").unwrap(),
            &o1.state,
            &mut drop,
        );
        let expected = t.value(o2.gate)[1].exp() * t.value(o2.ptr)[4].exp();
        assert!((steps[1].log_prob.exp() - expected).abs() < 1e-12);
        let unk = r.trace(&toks("fetch zebra"), &zs).unwrap();
        assert!(unk[1].unk_generated);
    }

    #[test]
    fn repeated_source_tokens_sum_pointer_mass() {
        let r = small();
        let zs = toks("box box");
        let mut t = Tape::new(&r.params);
        let mut drop = Dropout::off();
        let enc = r.encode(&mut t, &zs, &mut drop);
        let st = r.init_state(&mut t, &enc);
        let o = r.step(&mut t, &enc, r.tgt_vocab.id(BOS).unwrap(), &st, &mut drop);
        let ptr: f64 = t.value(o.ptr).iter().map(|v| v.exp()).sum();
        let g = t.value(o.gate).to_vec();
        let id = r.tgt_vocab.id("box").unwrap();
        let expected = g[0].exp() * t.value(o.gen)[id].exp() + g[1].exp() * ptr;
        let first = r.trace(&toks("box"), &zs).unwrap()[0].log_prob.exp();
        assert!((first - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_inputs() {
        let r = small();
        assert_eq!(
            r.log_prob(&[], &toks("box")),
            Err(ModelError::EmptyUtterance)
        );
        assert_eq!(
            r.log_prob(&toks("box"), &[]),
            Err(ModelError::EmptySequence)
        );
    }
}
