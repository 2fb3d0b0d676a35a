//! Surface meaning representations and their linearized token form.

pub mod generic;
pub mod lambda;
pub mod pylite;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asdl::AsdlGrammar;
use crate::grammars;
use crate::transition::{check_ast, Ast};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MrError {
    #[error("unbalanced input: {0}")]
    Unbalanced(String),
    #[error("`{head}` expects {expected} arguments, got {found}")]
    Arity {
        head: String,
        expected: usize,
        found: usize,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("outside the supported subset: {0}")]
    OutOfSubset(String),
    #[error("AST does not conform: {0}")]
    Nonconforming(String),
    #[error("empty token sequence")]
    Empty,
}

/// Surface format of a meaning representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MrKind {
    /// λ-calculus s-expressions under the ATIS grammar.
    Lambda,
    /// One line of restricted Python under the PyLite grammar.
    PyLite,
    /// Generic constructor s-expressions under the toy grammar.
    Toy,
}

impl MrKind {
    pub fn grammar(self) -> AsdlGrammar {
        self.grammar_ref().clone()
    }

    /// Shared parsed copy of the bundled grammar.
    pub fn grammar_ref(self) -> &'static AsdlGrammar {
        static CACHE: [OnceLock<AsdlGrammar>; 3] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        match self {
            MrKind::Lambda => CACHE[0].get_or_init(grammars::atis),
            MrKind::PyLite => CACHE[1].get_or_init(grammars::pylite),
            MrKind::Toy => CACHE[2].get_or_init(grammars::toy),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MrKind::Lambda => "lambda",
            MrKind::PyLite => "pylite",
            MrKind::Toy => "toy",
        }
    }

    /// Guesses the format from a surface string.
    pub fn infer(text: &str) -> MrKind {
        let t = text.trim_start();
        if t.starts_with("(lambda")
            || t.starts_with("(argmax")
            || t.starts_with("(argmin")
            || t.starts_with('$')
        {
            return MrKind::Lambda;
        }
        let toy = grammars::toy();
        if generic::parse(&toy, t).is_ok() {
            return MrKind::Toy;
        }
        if t.starts_with('(') && lambda::lf_parse(t).is_ok() {
            return MrKind::Lambda;
        }
        MrKind::PyLite
    }
}

impl fmt::Display for MrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MrKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" | "atis" => Ok(MrKind::Lambda),
            "pylite" | "python" | "django" => Ok(MrKind::PyLite),
            "toy" => Ok(MrKind::Toy),
            other => Err(format!(
                "unknown MR kind `{other}` (expected lambda, pylite or toy)"
            )),
        }
    }
}

/// Linearized surface form of an MR, the sequence z^s seen by the prior and
/// reconstruction models.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearMR {
    pub tokens: Vec<String>,
    pub kind: MrKind,
}

pub fn lf_parse(text: &str) -> Result<Ast, MrError> {
    lambda::lf_parse(text)
}

pub fn lf_print(z: &Ast) -> Result<String, MrError> {
    lambda::lf_print(z)
}

pub fn pylite_parse(code: &str) -> Result<Ast, MrError> {
    pylite::parse(code)
}

pub fn pylite_print(z: &Ast) -> Result<String, MrError> {
    pylite::print(z)
}

fn conform(g: &AsdlGrammar, z: &Ast) -> Result<(), MrError> {
    check_ast(g, z).map_err(|e| MrError::Nonconforming(e.to_string()))
}

/// Parses surface text of the given kind into a conforming AST.
pub fn parse_mr(kind: MrKind, text: &str) -> Result<Ast, MrError> {
    let g = kind.grammar_ref();
    let z = match kind {
        MrKind::Lambda => lambda::lf_parse(text)?,
        MrKind::PyLite => pylite::parse(text)?,
        MrKind::Toy => return generic::parse(g, text),
    };
    conform(g, &z)?;
    Ok(z)
}

/// Canonical surface text for an AST.
pub fn print_mr(kind: MrKind, z: &Ast) -> Result<String, MrError> {
    match kind {
        MrKind::Lambda => lambda::lf_print(z),
        MrKind::PyLite => pylite::print(z),
        MrKind::Toy => generic::print(kind.grammar_ref(), z),
    }
}

pub fn linearize(z: &Ast, kind: MrKind) -> Result<LinearMR, MrError> {
    let tokens = match kind {
        MrKind::Lambda => lambda::to_tokens(z)?,
        MrKind::PyLite => pylite::tokenize(&pylite::print(z)?)?,
        MrKind::Toy => generic::to_tokens(kind.grammar_ref(), z)?,
    };
    Ok(LinearMR { tokens, kind })
}

pub fn delinearize(m: &LinearMR) -> Result<Ast, MrError> {
    if m.tokens.is_empty() {
        return Err(MrError::Empty);
    }
    let g = m.kind.grammar_ref();
    let z = match m.kind {
        MrKind::Lambda => lambda::parse_tokens(&m.tokens)?,
        MrKind::PyLite => pylite::parse_tokens(&m.tokens)?,
        MrKind::Toy => return generic::parse_tokens(g, &m.tokens),
    };
    conform(g, &z)?;
    Ok(z)
}

/// True iff the token sequence delinearizes to a conforming AST.
pub fn syntax_check(m: &LinearMR) -> bool {
    delinearize(m).is_ok()
}

/// Surface text rendering of a token sequence (used for display and exact match).
pub fn render_tokens(m: &LinearMR) -> String {
    match m.kind {
        MrKind::Lambda => lambda::join_tokens(&m.tokens),
        MrKind::Toy => generic::join_tokens(&m.tokens),
        MrKind::PyLite => match delinearize(m).and_then(|z| pylite::print(&z)) {
            Ok(s) => s,
            Err(_) => m.tokens.join(" "),
        },
    }
}
