//! Tree-construction transition system over ASDL grammars.
//!
//! An AST is built by a sequence of actions applied to the *frontier field*,
//! the leftmost unfilled field under a top-down, left-to-right traversal.
//! `ApplyConstr` expands a composite field, `Reduce` closes an optional or
//! sequential field, and `GenToken` fills a primitive field. Multi-token
//! primitives accumulate tokens until `GenToken("</f>")`.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::asdl::{AsdlGrammar, Cardinality, CtorId, Field, TypeId};

/// Terminates a multi-token primitive field.
pub const END_TOKEN: &str = "</f>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    ApplyConstr(String),
    Reduce,
    GenToken(String),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::ApplyConstr(c) => write!(f, "APPLY {c}"),
            Action::Reduce => write!(f, "REDUCE"),
            Action::GenToken(t) => write!(f, "GEN {}", escape_token(t)),
        }
    }
}

/// Action kinds legal at a frontier; `GenToken` stands for any token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionTemplate {
    ApplyConstr(String),
    Reduce,
    GenToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AstNode {
    Composite(Composite),
    /// Value of a primitive field. Single-token primitives hold exactly one token.
    Primitive(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Composite {
    pub constructor: String,
    /// One entry per constructor field, holding zero, one or many values.
    pub fields: Vec<Vec<AstNode>>,
}

impl AstNode {
    pub fn composite(constructor: &str, fields: Vec<Vec<AstNode>>) -> AstNode {
        AstNode::Composite(Composite {
            constructor: constructor.to_string(),
            fields,
        })
    }

    pub fn token(t: &str) -> AstNode {
        AstNode::Primitive(vec![t.to_string()])
    }

    pub fn as_composite(&self) -> Option<&Composite> {
        match self {
            AstNode::Composite(c) => Some(c),
            AstNode::Primitive(_) => None,
        }
    }
}

/// A complete abstract syntax tree rooted at the grammar's root type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ast {
    pub root: AstNode,
}

impl Ast {
    pub fn new(root: AstNode) -> Ast {
        Ast { root }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("illegal action `{action}` at step {step}; expected one of {expected:?}")]
    IllegalAction {
        step: usize,
        action: Action,
        expected: Vec<ActionTemplate>,
    },
    #[error("derivation is already complete")]
    Complete,
    #[error("action sequence ends before the derivation is complete ({0} actions)")]
    Incomplete(usize),
    #[error("AST does not conform to the grammar: {0}")]
    Nonconforming(String),
    #[error("cannot parse action line {line}: {message}")]
    BadActionText { line: usize, message: String },
}

#[derive(Debug, Clone)]
enum Child {
    Node(usize),
    Prim(Vec<String>),
}

#[derive(Debug, Clone)]
struct PartialNode {
    ctor: CtorId,
    fields: Vec<Vec<Child>>,
}

#[derive(Debug, Clone)]
struct Entry {
    /// Arena index of the node owning this field; `None` for the root field.
    owner: Option<usize>,
    field_idx: usize,
    field_id: usize,
    type_id: TypeId,
    cardinality: Cardinality,
    primitive: bool,
    multitoken: bool,
    parent_ctor: Option<CtorId>,
    parent_step: Option<usize>,
    depth: usize,
    filled: usize,
    pending: Vec<String>,
}

/// Read-only view of the frontier field.
#[derive(Debug, Clone, Copy)]
pub struct FrontierField<'a> {
    pub field: &'a Field,
    /// `None` for the synthetic root field.
    pub parent_constructor: Option<&'a str>,
    pub parent_ctor_id: Option<CtorId>,
    /// Step at which the parent constructor was applied.
    pub parent_step: Option<usize>,
    pub filled_count: usize,
    pub field_id: usize,
    pub type_id: TypeId,
    pub depth: usize,
    pub primitive: bool,
    pub multitoken: bool,
    pub pending_tokens: usize,
}

impl FrontierField<'_> {
    /// Frontier signature as `type name`, e.g. `expr* args`.
    pub fn signature(&self) -> String {
        let suffix = match self.field.cardinality {
            Cardinality::Single => "",
            Cardinality::Optional => "?",
            Cardinality::Sequential => "*",
        };
        format!("{}{} {}", self.field.type_name, suffix, self.field.name)
    }
}

/// Legal actions at a frontier in index form, used by the models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Legal<'a> {
    pub constructors: &'a [CtorId],
    pub reduce: bool,
    pub gen_token: bool,
    /// `</f>` may be generated (multi-token field).
    pub end_token: bool,
}

/// A partial derivation. Transitions return new values; nothing is shared mutably.
#[derive(Debug, Clone)]
pub struct DerivationState {
    grammar: Arc<AsdlGrammar>,
    root_field: Arc<Field>,
    nodes: Vec<PartialNode>,
    root_child: Option<Child>,
    stack: Vec<Entry>,
    history: Vec<Action>,
}

impl DerivationState {
    /// Derivation containing only the root field of the grammar's root type.
    pub fn initial(grammar: Arc<AsdlGrammar>) -> DerivationState {
        let root_type = grammar.root_type().to_string();
        let type_id = grammar
            .type_id(&root_type)
            .expect("validated grammar has its root type");
        let root_field = Arc::new(Field {
            name: "root".into(),
            type_name: root_type.clone(),
            cardinality: Cardinality::Single,
        });
        let entry = Entry {
            owner: None,
            field_idx: 0,
            field_id: 0,
            type_id,
            cardinality: Cardinality::Single,
            primitive: grammar.is_primitive(&root_type),
            multitoken: grammar.is_multitoken(&root_type),
            parent_ctor: None,
            parent_step: None,
            depth: 0,
            filled: 0,
            pending: Vec::new(),
        };
        DerivationState {
            grammar,
            root_field,
            nodes: Vec::new(),
            root_child: None,
            stack: vec![entry],
            history: Vec::new(),
        }
    }

    pub fn grammar(&self) -> &Arc<AsdlGrammar> {
        &self.grammar
    }

    pub fn is_complete(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn history(&self) -> &[Action] {
        &self.history
    }

    /// Number of actions applied so far; the index of the next step.
    pub fn step(&self) -> usize {
        self.history.len()
    }

    pub fn frontier(&self) -> Option<FrontierField<'_>> {
        let e = self.stack.last()?;
        let field = match e.owner {
            None => &*self.root_field,
            Some(o) => &self.grammar.constructors()[self.nodes[o].ctor].fields[e.field_idx],
        };
        Some(FrontierField {
            field,
            parent_constructor: e
                .parent_ctor
                .map(|c| self.grammar.constructors()[c].name.as_str()),
            parent_ctor_id: e.parent_ctor,
            parent_step: e.parent_step,
            filled_count: e.filled,
            field_id: e.field_id,
            type_id: e.type_id,
            depth: e.depth,
            primitive: e.primitive,
            multitoken: e.multitoken,
            pending_tokens: e.pending.len(),
        })
    }

    pub fn legal(&self) -> Option<Legal<'_>> {
        let e = self.stack.last()?;
        let can_close = e.pending.is_empty()
            && match e.cardinality {
                Cardinality::Single => false,
                Cardinality::Optional => e.filled == 0,
                Cardinality::Sequential => true,
            };
        if e.primitive {
            Some(Legal {
                constructors: &[],
                reduce: can_close,
                gen_token: true,
                end_token: e.multitoken,
            })
        } else {
            Some(Legal {
                constructors: self.grammar.ctor_ids_of(e.type_id),
                reduce: can_close,
                gen_token: false,
                end_token: false,
            })
        }
    }

    pub fn valid_actions(&self) -> Result<Vec<ActionTemplate>, TransitionError> {
        let legal = self.legal().ok_or(TransitionError::Complete)?;
        let mut out: Vec<ActionTemplate> = legal
            .constructors
            .iter()
            .map(|&c| ActionTemplate::ApplyConstr(self.grammar.constructors()[c].name.clone()))
            .collect();
        if legal.gen_token {
            out.push(ActionTemplate::GenToken);
        }
        if legal.reduce {
            out.push(ActionTemplate::Reduce);
        }
        Ok(out)
    }

    pub fn is_legal(&self, action: &Action) -> bool {
        let Some(legal) = self.legal() else {
            return false;
        };
        match action {
            Action::ApplyConstr(name) => self
                .grammar
                .ctor_id(name)
                .is_some_and(|id| legal.constructors.contains(&id)),
            Action::Reduce => legal.reduce,
            Action::GenToken(t) => {
                legal.gen_token && !t.is_empty() && (t != END_TOKEN || legal.end_token)
            }
        }
    }

    pub fn apply_action(&self, action: &Action) -> Result<DerivationState, TransitionError> {
        let mut next = self.clone();
        next.apply_in_place(action)?;
        Ok(next)
    }

    pub fn apply_in_place(&mut self, action: &Action) -> Result<(), TransitionError> {
        if self.is_complete() {
            return Err(TransitionError::Complete);
        }
        if !self.is_legal(action) {
            return Err(TransitionError::IllegalAction {
                step: self.step(),
                action: action.clone(),
                expected: self.valid_actions()?,
            });
        }
        let step = self.step();
        let grammar = Arc::clone(&self.grammar);
        let top = self.stack.len() - 1;
        match action {
            Action::ApplyConstr(name) => {
                let ctor_id = grammar.ctor_id(name).expect("checked legal");
                let ctor = &grammar.constructors()[ctor_id];
                let node = self.nodes.len();
                self.nodes.push(PartialNode {
                    ctor: ctor_id,
                    fields: vec![Vec::new(); ctor.fields.len()],
                });
                self.attach(Child::Node(node));
                let e = &mut self.stack[top];
                e.filled += 1;
                let depth = e.depth + 1;
                if e.cardinality != Cardinality::Sequential {
                    self.stack.pop();
                }
                for (fi, f) in ctor.fields.iter().enumerate().rev() {
                    let type_id = grammar.type_id(&f.type_name).expect("validated grammar");
                    self.stack.push(Entry {
                        owner: Some(node),
                        field_idx: fi,
                        field_id: grammar.field_id(ctor_id, fi),
                        type_id,
                        cardinality: f.cardinality,
                        primitive: grammar.is_primitive(&f.type_name),
                        multitoken: grammar.is_multitoken(&f.type_name),
                        parent_ctor: Some(ctor_id),
                        parent_step: Some(step),
                        depth,
                        filled: 0,
                        pending: Vec::new(),
                    });
                }
            }
            Action::Reduce => {
                self.stack.pop();
            }
            Action::GenToken(tok) => {
                let e = &mut self.stack[top];
                let finished = if e.multitoken {
                    if tok == END_TOKEN {
                        Some(std::mem::take(&mut e.pending))
                    } else {
                        e.pending.push(tok.clone());
                        None
                    }
                } else {
                    Some(vec![tok.clone()])
                };
                if let Some(tokens) = finished {
                    self.attach(Child::Prim(tokens));
                    let e = &mut self.stack[top];
                    e.filled += 1;
                    if e.cardinality != Cardinality::Sequential {
                        self.stack.pop();
                    }
                }
            }
        }
        self.history.push(action.clone());
        Ok(())
    }

    fn attach(&mut self, child: Child) {
        let e = self.stack.last().expect("frontier exists");
        match e.owner {
            None => self.root_child = Some(child),
            Some(o) => self.nodes[o].fields[e.field_idx].push(child),
        }
    }

    /// The tree built so far; unfilled fields appear empty.
    pub fn partial_ast(&self) -> Option<Ast> {
        self.root_child
            .as_ref()
            .map(|c| Ast::new(self.materialize(c)))
    }

    /// The finished AST, once the derivation is complete.
    pub fn to_ast(&self) -> Option<Ast> {
        if self.is_complete() {
            self.partial_ast()
        } else {
            None
        }
    }

    fn materialize(&self, child: &Child) -> AstNode {
        match child {
            Child::Prim(t) => AstNode::Primitive(t.clone()),
            Child::Node(i) => {
                let n = &self.nodes[*i];
                AstNode::Composite(Composite {
                    constructor: self.grammar.constructors()[n.ctor].name.clone(),
                    fields: n
                        .fields
                        .iter()
                        .map(|vals| vals.iter().map(|c| self.materialize(c)).collect())
                        .collect(),
                })
            }
        }
    }
}

/// Checks that `ast` conforms to `g` with the root at `g.root_type()`.
pub fn check_ast(g: &AsdlGrammar, ast: &Ast) -> Result<(), TransitionError> {
    check_node(g, &ast.root, g.root_type())
}

fn check_node(g: &AsdlGrammar, node: &AstNode, type_name: &str) -> Result<(), TransitionError> {
    let bad = |m: String| Err(TransitionError::Nonconforming(m));
    if g.is_primitive(type_name) {
        let AstNode::Primitive(tokens) = node else {
            return bad(format!(
                "expected a `{type_name}` value, found a constructor"
            ));
        };
        if !g.is_multitoken(type_name) && tokens.len() != 1 {
            return bad(format!(
                "`{type_name}` value must be exactly one token, got {tokens:?}"
            ));
        }
        if tokens.iter().any(|t| t.is_empty() || t == END_TOKEN) {
            return bad(format!("reserved or empty token in `{type_name}` value"));
        }
        return Ok(());
    }
    let AstNode::Composite(c) = node else {
        return bad(format!(
            "expected a `{type_name}` constructor, found a primitive"
        ));
    };
    let Some(ctor) = g.constructor(&c.constructor) else {
        return bad(format!("unknown constructor `{}`", c.constructor));
    };
    if ctor.result_type != type_name {
        return bad(format!(
            "constructor `{}` has type `{}`, expected `{type_name}`",
            ctor.name, ctor.result_type
        ));
    }
    if ctor.fields.len() != c.fields.len() {
        return bad(format!(
            "`{}` takes {} fields, got {}",
            ctor.name,
            ctor.fields.len(),
            c.fields.len()
        ));
    }
    for (f, vals) in ctor.fields.iter().zip(&c.fields) {
        let ok = match f.cardinality {
            Cardinality::Single => vals.len() == 1,
            Cardinality::Optional => vals.len() <= 1,
            Cardinality::Sequential => true,
        };
        if !ok {
            return bad(format!(
                "field `{}` of `{}` has {} values",
                f.name,
                ctor.name,
                vals.len()
            ));
        }
        for v in vals {
            check_node(g, v, &f.type_name)?;
        }
    }
    Ok(())
}

/// The oracle action sequence that builds `ast`.
pub fn ast_to_actions(g: &AsdlGrammar, ast: &Ast) -> Result<Vec<Action>, TransitionError> {
    check_ast(g, ast)?;
    let mut out = Vec::new();
    emit(g, &ast.root, g.root_type(), &mut out);
    Ok(out)
}

fn emit(g: &AsdlGrammar, node: &AstNode, type_name: &str, out: &mut Vec<Action>) {
    match node {
        AstNode::Primitive(tokens) => {
            out.extend(tokens.iter().map(|t| Action::GenToken(t.clone())));
            if g.is_multitoken(type_name) {
                out.push(Action::GenToken(END_TOKEN.to_string()));
            }
        }
        AstNode::Composite(c) => {
            out.push(Action::ApplyConstr(c.constructor.clone()));
            let ctor = g.constructor(&c.constructor).expect("checked");
            for (f, vals) in ctor.fields.iter().zip(&c.fields) {
                for v in vals {
                    emit(g, v, &f.type_name, out);
                }
                match f.cardinality {
                    Cardinality::Sequential => out.push(Action::Reduce),
                    Cardinality::Optional if vals.is_empty() => out.push(Action::Reduce),
                    _ => {}
                }
            }
        }
    }
}

/// Replays `actions` from the initial state.
pub fn actions_to_ast(g: &Arc<AsdlGrammar>, actions: &[Action]) -> Result<Ast, TransitionError> {
    let mut state = DerivationState::initial(Arc::clone(g));
    for a in actions {
        if state.is_complete() {
            return Err(TransitionError::IllegalAction {
                step: state.step(),
                action: a.clone(),
                expected: Vec::new(),
            });
        }
        state.apply_in_place(a)?;
    }
    state
        .to_ast()
        .ok_or(TransitionError::Incomplete(actions.len()))
}

// ---------------------------------------------------------------------------
// Text form: one action per line.

pub fn escape_token(t: &str) -> String {
    let mut out = String::with_capacity(t.len());
    for c in t.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            ' ' => out.push_str("\\s"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_token(t: &str) -> Option<String> {
    let mut out = String::with_capacity(t.len());
    let mut chars = t.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            's' => ' ',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

pub fn format_actions(actions: &[Action]) -> String {
    let mut s = String::new();
    for a in actions {
        s.push_str(&a.to_string());
        s.push('\n');
    }
    s
}

pub fn parse_actions(text: &str) -> Result<Vec<Action>, TransitionError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| TransitionError::BadActionText {
            line: i + 1,
            message: message.into(),
        };
        let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
        let action = match head {
            "REDUCE" if rest.is_empty() => Action::Reduce,
            "APPLY" if !rest.is_empty() && !rest.contains(' ') => {
                Action::ApplyConstr(rest.to_string())
            }
            "GEN" if !rest.is_empty() && !rest.contains(' ') => {
                Action::GenToken(unescape_token(rest).ok_or_else(|| bad("bad escape"))?)
            }
            _ => return Err(bad("expected `APPLY <ctor>`, `REDUCE` or `GEN <token>`")),
        };
        out.push(action);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
/// Every complete derivation of at most `max_steps` actions whose generated
/// tokens come from `tokens` (plus `</f>` where legal), in depth-first order.
/// Returns `None` if there are more than `limit`.
pub fn enumerate_derivations(
    grammar: &Arc<AsdlGrammar>,
    tokens: &[String],
    limit: usize,
    max_steps: usize,
) -> Option<Vec<Vec<Action>>> {
    fn go(
        st: &DerivationState,
        tokens: &[String],
        limit: usize,
        max_steps: usize,
        out: &mut Vec<Vec<Action>>,
    ) -> bool {
        if st.is_complete() {
            out.push(st.history().to_vec());
            return out.len() <= limit;
        }
        if st.step() >= max_steps {
            return true;
        }
        let legal = st.legal().expect("incomplete state has a frontier");
        let mut acts: Vec<Action> = legal
            .constructors
            .iter()
            .map(|&c| Action::ApplyConstr(st.grammar().constructors()[c].name.clone()))
            .collect();
        if legal.gen_token {
            acts.extend(
                tokens
                    .iter()
                    .filter(|t| t.as_str() != END_TOKEN)
                    .map(|t| Action::GenToken(t.clone())),
            );
            if legal.end_token {
                acts.push(Action::GenToken(END_TOKEN.into()));
            }
        }
        if legal.reduce {
            acts.push(Action::Reduce);
        }
        for a in acts {
            let next = st.apply_action(&a).expect("legal action applies");
            if !go(&next, tokens, limit, max_steps, out) {
                return false;
            }
        }
        true
    }
    let mut out = Vec::new();
    go(
        &DerivationState::initial(Arc::clone(grammar)),
        tokens,
        limit,
        max_steps,
        &mut out,
    )
    .then_some(out)
}

// Random masked rollouts.

/// Minimal derivation height per type id; `usize::MAX` for unproductive types.
pub fn min_heights(g: &AsdlGrammar) -> Vec<usize> {
    let mut h = vec![usize::MAX; g.types().len()];
    for (i, t) in g.types().iter().enumerate() {
        if t.is_primitive() {
            h[i] = 0;
        }
    }
    loop {
        let mut changed = false;
        for (ti, _) in g.types().iter().enumerate() {
            for &c in g.ctor_ids_of(ti) {
                let ch = ctor_height(g, c, &h);
                if ch < h[ti] {
                    h[ti] = ch;
                    changed = true;
                }
            }
        }
        if !changed {
            return h;
        }
    }
}

fn ctor_height(g: &AsdlGrammar, c: CtorId, h: &[usize]) -> usize {
    let mut m = 0;
    for f in &g.constructors()[c].fields {
        if f.cardinality != Cardinality::Single {
            continue;
        }
        let fh = h[g.type_id(&f.type_name).expect("validated")];
        if fh == usize::MAX {
            return usize::MAX;
        }
        m = m.max(fh);
    }
    m + 1
}

/// Samples a derivation by picking among legal actions at random.
///
/// At each step the action kind (constructor, reduce, token) is drawn
/// uniformly, then a member of that kind. Beyond `depth_cap` the rollout
/// closes fields when it can and otherwise applies a constructor of minimal
/// height, so every rollout terminates.
pub fn random_rollout<R: Rng + ?Sized>(
    g: &Arc<AsdlGrammar>,
    rng: &mut R,
    depth_cap: usize,
    tokens: &[&str],
) -> DerivationState {
    let heights = min_heights(g);
    let mut state = DerivationState::initial(Arc::clone(g));
    while let Some(frontier) = state.frontier() {
        let deep = frontier.depth >= depth_cap;
        let pending = frontier.pending_tokens;
        let legal = state.legal().expect("not complete");
        let action = if legal.gen_token {
            let want_end = legal.end_token && (deep || pending >= 3 || rng.gen_bool(0.4));
            if legal.reduce && (deep || rng.gen_bool(0.5)) {
                Action::Reduce
            } else if want_end {
                Action::GenToken(END_TOKEN.into())
            } else {
                Action::GenToken(tokens.choose(rng).copied().unwrap_or("tok").to_string())
            }
        } else if legal.reduce && (deep || rng.gen_bool(0.5)) {
            Action::Reduce
        } else {
            let ctor = if deep {
                *legal
                    .constructors
                    .iter()
                    .min_by_key(|&&c| ctor_height(g, c, &heights))
                    .expect("composite type has constructors")
            } else {
                *legal
                    .constructors
                    .choose(rng)
                    .expect("composite type has constructors")
            };
            Action::ApplyConstr(g.constructors()[ctor].name.clone())
        };
        state
            .apply_in_place(&action)
            .expect("rollout picks legal actions");
    }
    state
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::asdl::parse_grammar;
    use crate::grammars;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pylite() -> Arc<AsdlGrammar> {
        Arc::new(grammars::pylite())
    }

    pub(crate) fn fig2_ast() -> Ast {
        let name = |id: &str| AstNode::composite("Name", vec![vec![AstNode::token(id)]]);
        Ast::new(AstNode::composite(
            "Expr",
            vec![vec![AstNode::composite(
                "Call",
                vec![
                    vec![name("sorted")],
                    vec![name("my_list")],
                    vec![AstNode::composite(
                        "keyword",
                        vec![vec![AstNode::token("reverse")], vec![name("True")]],
                    )],
                ],
            )]],
        ))
    }

    fn fig2_actions() -> Vec<Action> {
        parse_actions(
            "APPLY Expr\nAPPLY Call\nAPPLY Name\nGEN sorted\nAPPLY Name\nGEN my_list\nREDUCE\n\
             APPLY keyword\nGEN reverse\nAPPLY Name\nGEN True\nREDUCE\n",
        )
        .unwrap()
    }

    #[test]
    fn fig2_oracle_sequence() {
        let g = pylite();
        let actions = ast_to_actions(&g, &fig2_ast()).unwrap();
        assert_eq!(actions, fig2_actions());
        assert_eq!(actions_to_ast(&g, &actions).unwrap(), fig2_ast());
    }

    #[test]
    fn fig2_frontier_signatures() {
        let g = pylite();
        let expected = [
            "stmt root",
            "expr value",
            "expr func",
            "identifier id",
            "expr* args",
            "identifier id",
            "expr* args",
            "keyword* keywords",
            "identifier arg",
            "expr value",
            "identifier id",
            "keyword* keywords",
        ];
        let mut s = DerivationState::initial(Arc::clone(&g));
        for (a, sig) in fig2_actions().iter().zip(expected) {
            assert_eq!(s.frontier().unwrap().signature(), sig);
            s = s.apply_action(a).unwrap();
        }
        assert!(s.is_complete());
    }

    #[test]
    fn initial_frontiers() {
        let s = DerivationState::initial(pylite());
        assert_eq!(s.frontier().unwrap().signature(), "stmt root");
        let atis = Arc::new(grammars::atis());
        assert_eq!(
            DerivationState::initial(atis)
                .frontier()
                .unwrap()
                .signature(),
            "expr root"
        );
    }

    #[test]
    fn call_expands_three_fields() {
        let g = pylite();
        let s = DerivationState::initial(Arc::clone(&g))
            .apply_action(&Action::ApplyConstr("Expr".into()))
            .unwrap()
            .apply_action(&Action::ApplyConstr("Call".into()))
            .unwrap();
        let sigs: Vec<String> = s
            .stack
            .iter()
            .rev()
            .take(3)
            .map(|e| {
                let f = &g.constructors()[s.nodes[e.owner.unwrap()].ctor].fields[e.field_idx];
                f.name.clone()
            })
            .collect();
        assert_eq!(sigs, ["func", "args", "keywords"]);
        assert_eq!(s.frontier().unwrap().parent_constructor, Some("Call"));
        assert_eq!(s.frontier().unwrap().parent_step, Some(1));
    }

    #[test]
    fn valid_action_sets() {
        let g = pylite();
        let actions = fig2_actions();
        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in &actions[..6] {
            s.apply_in_place(a).unwrap();
        }
        // t7: expr* args with one element filled.
        let v = s.valid_actions().unwrap();
        assert!(v.contains(&ActionTemplate::Reduce));
        assert_eq!(v.len(), g.constructors_of("expr").unwrap().len() + 1);

        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in &actions[..3] {
            s.apply_in_place(a).unwrap();
        }
        assert_eq!(s.valid_actions().unwrap(), vec![ActionTemplate::GenToken]);
        assert!(!s.is_legal(&Action::GenToken(END_TOKEN.into())));

        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in &actions[..2] {
            s.apply_in_place(a).unwrap();
        }
        let v = s.valid_actions().unwrap();
        assert!(!v.contains(&ActionTemplate::Reduce));
        assert!(v
            .iter()
            .all(|t| matches!(t, ActionTemplate::ApplyConstr(_))));
    }

    #[test]
    fn gen_token_on_composite_is_illegal() {
        let s = DerivationState::initial(pylite());
        let err = s.apply_action(&Action::GenToken("x".into())).unwrap_err();
        assert!(matches!(
            err,
            TransitionError::IllegalAction { step: 0, .. }
        ));
    }

    #[test]
    fn complete_state_rejects_actions() {
        let g = pylite();
        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in fig2_actions() {
            s.apply_in_place(&a).unwrap();
        }
        assert_eq!(s.valid_actions().unwrap_err(), TransitionError::Complete);
        assert!(s.frontier().is_none());
    }

    #[test]
    fn prefix_is_incomplete() {
        let g = pylite();
        let err = actions_to_ast(&g, &fig2_actions()[..5]).unwrap_err();
        assert_eq!(err, TransitionError::Incomplete(5));
    }

    #[test]
    fn nullary_root() {
        let g = Arc::new(parse_grammar("cmp_op = Equal | LessThan", "cmp_op").unwrap());
        let ast = Ast::new(AstNode::composite("Equal", vec![]));
        assert_eq!(
            ast_to_actions(&g, &ast).unwrap(),
            vec![Action::ApplyConstr("Equal".into())]
        );
    }

    #[test]
    fn empty_sequence_closes_immediately() {
        let g = pylite();
        let ast = Ast::new(AstNode::composite(
            "Expr",
            vec![vec![AstNode::composite(
                "Call",
                vec![
                    vec![AstNode::composite("Name", vec![vec![AstNode::token("f")]])],
                    vec![],
                    vec![],
                ],
            )]],
        ));
        let actions = ast_to_actions(&g, &ast).unwrap();
        assert_eq!(&actions[4..], &[Action::Reduce, Action::Reduce]);
        assert_eq!(actions_to_ast(&g, &actions).unwrap(), ast);
    }

    #[test]
    fn multitoken_fields_end_with_terminator() {
        let g = pylite();
        let ast = Ast::new(AstNode::composite(
            "Expr",
            vec![vec![AstNode::composite(
                "Str",
                vec![vec![AstNode::Primitive(vec![
                    "hello".into(),
                    "world".into(),
                ])]],
            )]],
        ));
        let actions = ast_to_actions(&g, &ast).unwrap();
        assert_eq!(actions.last(), Some(&Action::GenToken(END_TOKEN.into())));
        assert_eq!(actions_to_ast(&g, &actions).unwrap(), ast);
        // Reduce is not legal in the middle of a string.
        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in &actions[..3] {
            s.apply_in_place(a).unwrap();
        }
        assert!(!s.is_legal(&Action::Reduce));
        assert!(s.is_legal(&Action::GenToken(END_TOKEN.into())));
    }

    #[test]
    fn optional_field_protocol() {
        let g = pylite();
        let none = Ast::new(AstNode::composite("Return", vec![vec![]]));
        assert_eq!(
            ast_to_actions(&g, &none).unwrap(),
            vec![Action::ApplyConstr("Return".into()), Action::Reduce]
        );
        let some = Ast::new(AstNode::composite(
            "Return",
            vec![vec![AstNode::composite(
                "Name",
                vec![vec![AstNode::token("x")]],
            )]],
        ));
        let actions = ast_to_actions(&g, &some).unwrap();
        assert_eq!(actions.len(), 3);
        assert_eq!(actions_to_ast(&g, &actions).unwrap(), some);
    }

    #[test]
    fn nonconforming_ast_rejected() {
        let g = pylite();
        let ast = Ast::new(AstNode::composite("Name", vec![vec![AstNode::token("x")]]));
        assert!(matches!(
            ast_to_actions(&g, &ast),
            Err(TransitionError::Nonconforming(_))
        ));
        let two_tokens = Ast::new(AstNode::composite(
            "Expr",
            vec![vec![AstNode::composite(
                "Name",
                vec![vec![AstNode::Primitive(vec!["a".into(), "b".into()])]],
            )]],
        ));
        assert!(check_ast(&g, &two_tokens).is_err());
    }

    #[test]
    fn action_text_escapes_whitespace() {
        let actions = vec![
            Action::ApplyConstr("Str".into()),
            Action::GenToken("a b\\c".into()),
            Action::GenToken(END_TOKEN.into()),
            Action::Reduce,
        ];
        let text = format_actions(&actions);
        assert_eq!(text, "APPLY Str\nGEN a\\sb\\\\c\nGEN </f>\nREDUCE\n");
        assert_eq!(parse_actions(&text).unwrap(), actions);
        assert!(parse_actions("JUMP x").is_err());
    }

    #[test]
    fn replay_reproduces_partial_ast() {
        let g = pylite();
        let mut s = DerivationState::initial(Arc::clone(&g));
        for a in &fig2_actions()[..8] {
            s.apply_in_place(a).unwrap();
        }
        let mut replay = DerivationState::initial(Arc::clone(&g));
        for a in s.history().to_vec() {
            replay.apply_in_place(&a).unwrap();
        }
        assert_eq!(replay.partial_ast(), s.partial_ast());
    }

    #[test]
    fn rollouts_terminate_and_conform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [grammars::atis(), grammars::pylite(), grammars::toy()] {
            let g = Arc::new(g);
            for _ in 0..300 {
                let s = random_rollout(&g, &mut rng, 20, &["a", "b"]);
                let ast = s.to_ast().unwrap();
                check_ast(&g, &ast).unwrap();
                assert_eq!(ast_to_actions(&g, &ast).unwrap(), s.history());
            }
        }
    }

    #[test]
    fn enumeration_counts_toy_derivations() {
        let g = Arc::new(crate::grammars::toy());
        let one = enumerate_derivations(&g, &["box".to_string()], 100, 50).unwrap();
        assert_eq!(one.len(), 12);
        let two =
            enumerate_derivations(&g, &["box".to_string(), "hall".to_string()], 100, 50).unwrap();
        assert_eq!(two.len(), 32);
        assert!(
            enumerate_derivations(&g, &["box".to_string(), "hall".to_string()], 31, 50).is_none()
        );
        for acts in &two {
            actions_to_ast(&g, acts).unwrap();
        }
    }
}
