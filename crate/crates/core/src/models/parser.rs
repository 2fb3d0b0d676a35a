//! Inference model q(z | x): a transition-based parser with parent feeding.
//!
//! A BiLSTM encodes the utterance. The decoder LSTM consumes, at each step,
//! the previous action embedding, the previous attentional state, embeddings of
//! the frontier field and its type, the decoder state at the step that created
//! the parent node, and the parent constructor embedding. Action scores are
//! restricted to the actions the transition system allows before
//! normalization. Primitive tokens come from a gate over generating, copying
//! from the utterance, or closing the field.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{copy_marginal, log_sum_exp, ModelError};
use crate::asdl::{parse_grammar, AsdlGrammar};
use crate::nn::vocab::UNK;
use crate::nn::{BiLstm, Dropout, Encoded, Lstm, ParamId, ParamStore, Tape, Var, Vocab};
use crate::transition::{ast_to_actions, Action, Ast, DerivationState, END_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParserDims {
    pub embed: usize,
    pub hidden: usize,
    pub field_embed: usize,
    pub dropout: f64,
}

impl Default for ParserDims {
    fn default() -> Self {
        ParserDims {
            embed: 32,
            hidden: 64,
            field_embed: 16,
            dropout: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticParser {
    pub params: ParamStore,
    pub src_vocab: Vocab,
    /// Primitive tokens that can be generated; contains `<unk>`.
    pub prim_vocab: Vocab,
    pub dims: ParserDims,
    grammar_text: String,
    #[serde(skip, default = "placeholder_grammar")]
    grammar: Arc<AsdlGrammar>,
    src_emb: ParamId,
    enc: BiLstm,
    init_w: ParamId,
    init_b: ParamId,
    act_emb: ParamId,
    field_emb: ParamId,
    type_emb: ParamId,
    dec: Lstm,
    att_w: ParamId,
    comb_w: ParamId,
    act_w: ParamId,
    act_b: ParamId,
    gate_w: ParamId,
    gate_b: ParamId,
    tok_w: ParamId,
    tok_b: ParamId,
    ptr_w: ParamId,
}

fn placeholder_grammar() -> Arc<AsdlGrammar> {
    Arc::new(crate::grammars::toy())
}

/// A complete derivation returned by beam search or sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub ast: Ast,
    pub actions: Vec<Action>,
    /// `log q(z | x)`.
    pub score: f64,
}

#[derive(Clone)]
struct DecState {
    h: Var,
    c: Var,
    s_tilde: Var,
    /// Decoder hidden state at every step so far (for parent feeding).
    history: Vec<Var>,
    prev_row: usize,
}

/// Normalized scores at one step.
enum StepScores {
    Composite {
        /// Legal constructor ids, then the reduce slot if legal.
        slots: Vec<usize>,
        lp: Var,
    },
    Primitive {
        /// Log-probabilities of `[gen, copy, reduce?]`.
        gate: Var,
        /// Generatable vocabulary ids.
        gen_ids: Vec<usize>,
        gen: Var,
        ptr: Var,
    },
}

struct Encoding {
    enc: Encoded,
    x: Vec<String>,
}

impl SemanticParser {
    pub fn new(
        grammar: Arc<AsdlGrammar>,
        src_vocab: Vocab,
        prim_vocab: Vocab,
        dims: ParserDims,
        seed: u64,
    ) -> SemanticParser {
        assert!(prim_vocab.contains(UNK), "primitive vocabulary needs <unk>");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, h, f) = (dims.embed, dims.hidden, dims.field_embed);
        let s = 0.1;
        let n_ctor = grammar.constructors().len();
        let mut p = ParamStore::new();
        let src_emb = p.add_uniform("par.src_emb", src_vocab.len(), e, s, &mut rng);
        let enc = BiLstm::new(&mut p, "par.enc", e, h, s, &mut rng);
        let init_w = p.add_uniform("par.init.w", h, 2 * h, s, &mut rng);
        let init_b = p.add_zeros("par.init.b", 1, h);
        let act_emb = p.add_uniform("par.act_emb", n_ctor + 2 + prim_vocab.len(), e, s, &mut rng);
        let field_emb = p.add_uniform("par.field_emb", grammar.num_fields(), f, s, &mut rng);
        let type_emb = p.add_uniform("par.type_emb", grammar.types().len(), f, s, &mut rng);
        let dec = Lstm::new(&mut p, "par.dec", 2 * e + 2 * h + 2 * f, h, s, &mut rng);
        let att_w = p.add_uniform("par.att.w", 2 * h, h, s, &mut rng);
        let comb_w = p.add_uniform("par.comb.w", h, 3 * h, s, &mut rng);
        let act_w = p.add_uniform("par.act.w", n_ctor + 1, h, s, &mut rng);
        let act_b = p.add_zeros("par.act.b", 1, n_ctor + 1);
        let gate_w = p.add_uniform("par.gate.w", 3, h, s, &mut rng);
        let gate_b = p.add_zeros("par.gate.b", 1, 3);
        let tok_w = p.add_uniform("par.tok.w", prim_vocab.len(), h, s, &mut rng);
        let tok_b = p.add_zeros("par.tok.b", 1, prim_vocab.len());
        let ptr_w = p.add_uniform("par.ptr.w", 2 * h, h, s, &mut rng);
        SemanticParser {
            params: p,
            src_vocab,
            prim_vocab,
            dims,
            grammar_text: grammar.render(),
            grammar,
            src_emb,
            enc,
            init_w,
            init_b,
            act_emb,
            field_emb,
            type_emb,
            dec,
            att_w,
            comb_w,
            act_w,
            act_b,
            gate_w,
            gate_b,
            tok_w,
            tok_b,
            ptr_w,
        }
    }

    /// Source vocabulary from utterances (with `min_freq`), primitive
    /// vocabulary from every token in the training ASTs.
    pub fn from_corpus<'a>(
        grammar: Arc<AsdlGrammar>,
        utterance_tokens: impl IntoIterator<Item = &'a str>,
        asts: &[Ast],
        min_freq: usize,
        dims: ParserDims,
        seed: u64,
    ) -> SemanticParser {
        let src = Vocab::build(&[UNK], utterance_tokens, min_freq);
        let mut prims = Vec::new();
        let mut has_multi = false;
        for a in asts {
            if let Ok(acts) = ast_to_actions(&grammar, a) {
                for act in acts {
                    if let Action::GenToken(tok) = act {
                        has_multi |= tok == END_TOKEN;
                        if tok != END_TOKEN {
                            prims.push(tok);
                        }
                    }
                }
            }
        }
        let specials: Vec<&str> = if has_multi {
            vec![UNK, END_TOKEN]
        } else {
            vec![UNK]
        };
        let prim = Vocab::build(&specials, prims.iter().map(String::as_str), 1);
        SemanticParser::new(grammar, src, prim, dims, seed)
    }

    pub fn grammar(&self) -> &Arc<AsdlGrammar> {
        &self.grammar
    }

    /// Restores lookup tables and the grammar after deserialization.
    pub fn reindex(&mut self, root: &str) -> Result<(), crate::asdl::GrammarError> {
        self.params.reindex();
        self.src_vocab.reindex();
        self.prim_vocab.reindex();
        self.grammar = Arc::new(parse_grammar(&self.grammar_text, root)?);
        Ok(())
    }

    fn n_ctor(&self) -> usize {
        self.grammar.constructors().len()
    }

    fn reduce_row(&self) -> usize {
        self.n_ctor()
    }

    fn start_row(&self) -> usize {
        self.n_ctor() + 1
    }

    fn action_row(&self, a: &Action) -> usize {
        match a {
            Action::ApplyConstr(c) => self.grammar.ctor_id(c).expect("legal action"),
            Action::Reduce => self.reduce_row(),
            Action::GenToken(tok) => self.n_ctor() + 2 + self.prim_vocab.id_or_unk(tok),
        }
    }

    fn encode(&self, t: &mut Tape, x: &[String], drop: &mut Dropout) -> Encoding {
        let xs: Vec<Var> = x
            .iter()
            .map(|w| t.row(self.src_emb, self.src_vocab.id_or_unk(w)))
            .collect();
        Encoding {
            enc: self.enc.encode(t, &xs, drop),
            x: x.to_vec(),
        }
    }

    fn init_state(&self, t: &mut Tape, enc: &Encoding) -> DecState {
        let a = t.affine(self.init_w, Some(self.init_b), enc.enc.last_h);
        let h = t.tanh(a);
        DecState {
            h,
            c: t.zeros(self.dims.hidden),
            s_tilde: t.zeros(self.dims.hidden),
            history: Vec::new(),
            prev_row: self.start_row(),
        }
    }

    /// Advances the decoder at the frontier of `state` and scores the legal actions.
    fn step(
        &self,
        t: &mut Tape,
        enc: &Encoding,
        state: &DerivationState,
        st: &DecState,
        drop: &mut Dropout,
    ) -> (DecState, StepScores) {
        let fr = state.frontier().expect("derivation not complete");
        let legal = state.legal().expect("derivation not complete");
        let a_prev = t.row(self.act_emb, st.prev_row);
        let n_f = t.row(self.field_emb, fr.field_id);
        let e_f = t.row(self.type_emb, fr.type_id);
        let s_p = match fr.parent_step {
            Some(k) => st.history[k],
            None => t.zeros(self.dims.hidden),
        };
        let c_p = t.row(self.act_emb, fr.parent_ctor_id.unwrap_or(self.start_row()));
        let inp = t.concat(&[a_prev, st.s_tilde, n_f, e_f, s_p, c_p]);
        let (h, c) = self.dec.step(t, inp, (st.h, st.c));
        let hd = drop.apply(t, h);
        let u = t.affine(self.att_w, None, hd);
        let sc = t.scores(&enc.enc.states, u);
        let att = t.softmax(sc);
        let ctx = t.mix(att, &enc.enc.states);
        let cat = t.concat(&[ctx, hd]);
        let pre = t.affine(self.comb_w, None, cat);
        let s_tilde = t.tanh(pre);
        let mut history = st.history.clone();
        history.push(h);
        let next = DecState {
            h,
            c,
            s_tilde,
            history,
            prev_row: st.prev_row,
        };
        let scores = if fr.primitive {
            let gl = t.affine(self.gate_w, Some(self.gate_b), s_tilde);
            let gidx: Vec<usize> = if legal.reduce {
                vec![0, 1, 2]
            } else {
                vec![0, 1]
            };
            let gg = t.gather(gl, &gidx);
            let gate = t.log_softmax(gg);
            let end = self.prim_vocab.id(END_TOKEN);
            let gen_ids: Vec<usize> = (0..self.prim_vocab.len())
                .filter(|&i| legal.end_token || Some(i) != end)
                .collect();
            let tl = t.affine(self.tok_w, Some(self.tok_b), s_tilde);
            let tg = t.gather(tl, &gen_ids);
            let gen = t.log_softmax(tg);
            let q = t.affine(self.ptr_w, None, s_tilde);
            let pl = t.scores(&enc.enc.states, q);
            let ptr = t.log_softmax(pl);
            StepScores::Primitive {
                gate,
                gen_ids,
                gen,
                ptr,
            }
        } else {
            let logits = t.affine(self.act_w, Some(self.act_b), s_tilde);
            let mut slots = legal.constructors.to_vec();
            if legal.reduce {
                slots.push(self.reduce_row());
            }
            let g = t.gather(logits, &slots);
            let lp = t.log_softmax(g);
            StepScores::Composite { slots, lp }
        };
        (next, scores)
    }

    fn copy_positions(x: &[String], tok: &str) -> Vec<usize> {
        if tok == END_TOKEN {
            return Vec::new();
        }
        x.iter()
            .enumerate()
            .filter(|(_, w)| *w == tok)
            .map(|(j, _)| j)
            .collect()
    }

    /// Tape scalar for `log p(action)` at this step; `None` if impossible.
    fn action_log_prob(
        &self,
        t: &mut Tape,
        enc: &Encoding,
        scores: &StepScores,
        a: &Action,
    ) -> Option<Var> {
        match (scores, a) {
            (StepScores::Composite { slots, lp }, _) => {
                let slot = match a {
                    Action::ApplyConstr(c) => self.grammar.ctor_id(c)?,
                    Action::Reduce => self.reduce_row(),
                    Action::GenToken(_) => return None,
                };
                let k = slots.iter().position(|s| *s == slot)?;
                Some(t.pick(*lp, k))
            }
            (StepScores::Primitive { gate, .. }, Action::Reduce) => {
                (t.len(*gate) == 3).then(|| t.pick(*gate, 2))
            }
            (
                StepScores::Primitive {
                    gate,
                    gen_ids,
                    gen,
                    ptr,
                },
                Action::GenToken(tok),
            ) => {
                let positions = Self::copy_positions(&enc.x, tok);
                let vocab_id = match self.prim_vocab.id(tok) {
                    Some(id) => Some(id),
                    None if positions.is_empty() => self.prim_vocab.id(UNK),
                    None => None,
                };
                let gen_slot = vocab_id.and_then(|id| gen_ids.iter().position(|g| *g == id));
                let g = t.pick(*gate, 0);
                let c = t.pick(*gate, 1);
                let tg = gen_slot.map(|k| t.pick(*gen, k));
                let tc = (!positions.is_empty()).then(|| t.log_sum_exp_idx(*ptr, &positions));
                copy_marginal(t, g, tg, c, tc)
            }
            (StepScores::Primitive { .. }, Action::ApplyConstr(_)) => None,
        }
    }

    /// All actions possible at this step with their log-probabilities.
    fn candidates(&self, t: &Tape, enc: &Encoding, scores: &StepScores) -> Vec<(Action, f64)> {
        match scores {
            StepScores::Composite { slots, lp } => slots
                .iter()
                .zip(t.value(*lp))
                .map(|(&s, &l)| {
                    let a = if s == self.reduce_row() {
                        Action::Reduce
                    } else {
                        Action::ApplyConstr(self.grammar.constructors()[s].name.clone())
                    };
                    (a, l)
                })
                .collect(),
            StepScores::Primitive {
                gate,
                gen_ids,
                gen,
                ptr,
            } => {
                let gv = t.value(*gate);
                let (pg, pc) = (gv[0].exp(), gv[1].exp());
                let ptr = t.value(*ptr);
                let gen = t.value(*gen);
                let copy_mass = |tok: &str| -> f64 {
                    Self::copy_positions(&enc.x, tok)
                        .iter()
                        .map(|&j| ptr[j].exp())
                        .sum()
                };
                let mut out: Vec<(Action, f64)> = gen_ids
                    .iter()
                    .zip(gen)
                    .map(|(&id, &l)| {
                        let tok = self.prim_vocab.token(id);
                        let p = pg * l.exp() + pc * copy_mass(tok);
                        (Action::GenToken(tok.to_string()), p.ln())
                    })
                    .collect();
                let mut seen = std::collections::BTreeSet::new();
                for w in &enc.x {
                    if w != END_TOKEN && !self.prim_vocab.contains(w) && seen.insert(w.as_str()) {
                        out.push((Action::GenToken(w.clone()), (pc * copy_mass(w)).ln()));
                    }
                }
                if gv.len() == 3 {
                    out.push((Action::Reduce, gv[2]));
                }
                out
            }
        }
    }

    /// `log q(actions | x)` as a tape scalar, plus the per-step terms.
    pub fn build_actions(
        &self,
        t: &mut Tape,
        x: &[String],
        actions: &[Action],
        drop: &mut Dropout,
    ) -> Result<(Var, Vec<Var>), ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        let enc = self.encode(t, x, drop);
        let mut st = self.init_state(t, &enc);
        let mut state = DerivationState::initial(Arc::clone(&self.grammar));
        let mut terms = Vec::with_capacity(actions.len());
        for a in actions {
            if state.is_complete() {
                return Err(crate::transition::TransitionError::Complete.into());
            }
            if !state.is_legal(a) {
                state.apply_action(a)?;
            }
            let (mut next, scores) = self.step(t, &enc, &state, &st, drop);
            let lp = match self.action_log_prob(t, &enc, &scores, a) {
                Some(v) => v,
                None => t.constant(f64::NEG_INFINITY),
            };
            terms.push(lp);
            next.prev_row = self.action_row(a);
            st = next;
            state.apply_in_place(a)?;
        }
        if !state.is_complete() {
            return Err(crate::transition::TransitionError::Incomplete(actions.len()).into());
        }
        Ok((t.add_all(&terms), terms))
    }

    pub fn build(
        &self,
        t: &mut Tape,
        x: &[String],
        z: &Ast,
        drop: &mut Dropout,
    ) -> Result<Var, ModelError> {
        let actions = ast_to_actions(&self.grammar, z)?;
        Ok(self.build_actions(t, x, &actions, drop)?.0)
    }

    pub fn log_prob(&self, x: &[String], z: &Ast) -> Result<f64, ModelError> {
        let mut t = Tape::new(&self.params);
        let v = self.build(&mut t, x, z, &mut Dropout::off())?;
        Ok(t.scalar(v))
    }

    /// Per-step distributions along the oracle derivation of `z`, as
    /// `(action taken, all candidates)`.
    pub fn step_distributions(
        &self,
        x: &[String],
        z: &Ast,
    ) -> Result<Vec<(Action, Vec<(Action, f64)>)>, ModelError> {
        let actions = ast_to_actions(&self.grammar, z)?;
        let mut t = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut t, x, &mut drop);
        let mut st = self.init_state(&mut t, &enc);
        let mut state = DerivationState::initial(Arc::clone(&self.grammar));
        let mut out = Vec::new();
        for a in actions {
            let (mut next, scores) = self.step(&mut t, &enc, &state, &st, &mut drop);
            out.push((a.clone(), self.candidates(&t, &enc, &scores)));
            next.prev_row = self.action_row(&a);
            st = next;
            state.apply_in_place(&a)?;
        }
        Ok(out)
    }

    /// Top-`beam` complete derivations, best first.
    pub fn beam_search(
        &self,
        x: &[String],
        beam: usize,
        max_steps: usize,
    ) -> Result<Vec<Hypothesis>, ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        let beam = beam.max(1);
        let mut t = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut t, x, &mut drop);
        let init = self.init_state(&mut t, &enc);
        let mut live = vec![(
            DerivationState::initial(Arc::clone(&self.grammar)),
            init,
            0.0f64,
        )];
        let mut finished: Vec<(DerivationState, f64)> = Vec::new();
        for _ in 0..max_steps {
            if live.is_empty() {
                break;
            }
            let mut expansions: Vec<(usize, Action, f64, DecState)> = Vec::new();
            for (i, (state, st, score)) in live.iter().enumerate() {
                let (next, scores) = self.step(&mut t, &enc, state, st, &mut drop);
                for (a, lp) in self.candidates(&t, &enc, &scores) {
                    if lp.is_finite() {
                        expansions.push((i, a, score + lp, next.clone()));
                    }
                }
            }
            expansions.sort_by(|a, b| b.2.total_cmp(&a.2));
            let mut new_live = Vec::with_capacity(beam);
            for (i, a, score, mut st) in expansions {
                if new_live.len() >= beam {
                    break;
                }
                let mut state = live[i].0.clone();
                st.prev_row = self.action_row(&a);
                state.apply_in_place(&a)?;
                if state.is_complete() {
                    finished.push((state, score));
                } else {
                    new_live.push((state, st, score));
                }
            }
            live = new_live;
            finished.sort_by(|a, b| b.1.total_cmp(&a.1));
            if finished.len() >= beam {
                let worst = finished[beam - 1].1;
                if live.iter().all(|l| l.2 <= worst) {
                    break;
                }
            }
        }
        if finished.is_empty() {
            return Err(ModelError::NoHypothesis(max_steps));
        }
        finished.truncate(beam);
        Ok(finished
            .into_iter()
            .map(|(s, score)| Hypothesis {
                actions: s.history().to_vec(),
                ast: s.to_ast().expect("complete"),
                score,
            })
            .collect())
    }

    /// Ancestral sample from q(z | x).
    pub fn sample<R: Rng + ?Sized>(
        &self,
        x: &[String],
        rng: &mut R,
        max_steps: usize,
    ) -> Result<Hypothesis, ModelError> {
        if x.is_empty() {
            return Err(ModelError::EmptyUtterance);
        }
        let mut t = Tape::new(&self.params);
        let mut drop = Dropout::off();
        let enc = self.encode(&mut t, x, &mut drop);
        let mut st = self.init_state(&mut t, &enc);
        let mut state = DerivationState::initial(Arc::clone(&self.grammar));
        let mut score = 0.0;
        for _ in 0..max_steps {
            if state.is_complete() {
                return Ok(Hypothesis {
                    actions: state.history().to_vec(),
                    ast: state.to_ast().expect("complete"),
                    score,
                });
            }
            let (mut next, scores) = self.step(&mut t, &enc, &state, &st, &mut drop);
            let cands = self.candidates(&t, &enc, &scores);
            let probs: Vec<f64> = cands.iter().map(|c| c.1.exp()).collect();
            let (a, lp) = &cands[super::lm::sample_index(&probs, rng)];
            score += lp;
            next.prev_row = self.action_row(a);
            st = next;
            state.apply_in_place(a)?;
        }
        Err(ModelError::NoHypothesis(max_steps))
    }

    /// Final encoder state, used as the input of the MLP baseline.
    pub fn encoder_summary(&self, x: &[String]) -> Vec<f64> {
        let mut t = Tape::new(&self.params);
        let enc = self.encode(&mut t, x, &mut Dropout::off());
        t.value(enc.enc.last_h).to_vec()
    }

    pub fn encoder_dim(&self) -> usize {
        2 * self.dims.hidden
    }

    /// Sum over a step's candidates (should be 1).
    pub fn candidate_mass(cands: &[(Action, f64)]) -> f64 {
        log_sum_exp(&cands.iter().map(|c| c.1).collect::<Vec<_>>()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammars;
    use crate::mr::pylite_parse;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn fig2_parser() -> (SemanticParser, Vec<String>, Ast) {
        let g = Arc::new(grammars::pylite());
        let z = pylite_parse("sorted(my_list, reverse=True)").unwrap();
        let x = toks("sort my_list in descending order");
        let p = SemanticParser::from_corpus(
            g,
            x.iter().map(String::as_str),
            std::slice::from_ref(&z),
            1,
            ParserDims {
                embed: 6,
                hidden: 5,
                field_embed: 3,
                dropout: 0.0,
            },
            5,
        );
        (p, x, z)
    }

    #[test]
    fn every_step_distribution_sums_to_one() {
        let (p, x, z) = fig2_parser();
        let steps = p.step_distributions(&x, &z).unwrap();
        assert_eq!(steps.len(), 12);
        for (a, cands) in &steps {
            assert!((SemanticParser::candidate_mass(cands) - 1.0).abs() < 1e-9);
            assert!(
                cands.iter().any(|(c, _)| c == a),
                "taken action is a candidate"
            );
        }
        let total: f64 = steps
            .iter()
            .map(|(a, c)| c.iter().find(|e| &e.0 == a).unwrap().1)
            .sum();
        assert!((total - p.log_prob(&x, &z).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn illegal_actions_get_no_mass() {
        let (p, x, z) = fig2_parser();
        let steps = p.step_distributions(&x, &z).unwrap();
        let mut state = DerivationState::initial(Arc::clone(p.grammar()));
        for (a, cands) in steps {
            for (c, _) in &cands {
                assert!(state.is_legal(c), "{c} offered at step {}", state.step());
            }
            state.apply_in_place(&a).unwrap();
        }
    }

    #[test]
    fn beam_scores_recompute_and_descend() {
        let (p, x, _) = fig2_parser();
        let hyps = p.beam_search(&x, 5, 60).unwrap();
        assert!(!hyps.is_empty() && hyps.len() <= 5);
        for w in hyps.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
        for h in &hyps {
            let lp = p.log_prob(&x, &h.ast).unwrap();
            assert!((lp - h.score).abs() < 1e-6, "{lp} vs {}", h.score);
        }
    }

    #[test]
    fn forced_grammar_has_zero_log_prob() {
        let g = Arc::new(parse_grammar("t = Only(u a, u b)\nu = Leaf", "t").unwrap());
        let p = SemanticParser::new(
            g,
            Vocab::build(&[UNK], ["hi"], 1),
            Vocab::build(&[UNK], [], 1),
            ParserDims {
                embed: 4,
                hidden: 3,
                field_embed: 2,
                dropout: 0.0,
            },
            1,
        );
        let hyps = p.beam_search(&toks("hi"), 3, 20).unwrap();
        assert_eq!(hyps.len(), 1);
        assert_eq!(hyps[0].score, 0.0);
        assert_eq!(p.log_prob(&toks("hi"), &hyps[0].ast).unwrap(), 0.0);
    }

    #[test]
    fn samples_conform() {
        let (p, x, _) = fig2_parser();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            if let Ok(h) = p.sample(&x, &mut rng, 200) {
                crate::transition::check_ast(p.grammar(), &h.ast).unwrap();
                assert!((p.log_prob(&x, &h.ast).unwrap() - h.score).abs() < 1e-6);
            }
        }
    }
}
