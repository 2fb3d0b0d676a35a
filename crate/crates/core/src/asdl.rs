//! ASDL grammars: typed constructors with named, typed, cardinality-annotated
//! fields.
//!
//! Concrete syntax accepted by [`parse_grammar`]:
//!
//! ```text
//! # comment
//! primitives: identifier, string
//! multitoken: string
//! stmt = Expr(expr value) | Assign(expr* targets, expr value)
//! expr = Name(identifier id) | Call(expr func, expr* args, keyword* keywords)
//! cmp_op = Equal | LessThan
//! ```
//!
//! The text is newline-insensitive: a production ends when the next token
//! is not `|`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub type TypeId = usize;
pub type CtorId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cardinality {
    Single,
    Optional,
    Sequential,
}

impl Cardinality {
    fn suffix(self) -> &'static str {
        match self {
            Cardinality::Single => "",
            Cardinality::Optional => "?",
            Cardinality::Sequential => "*",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    pub name: String,
    pub type_name: String,
    pub cardinality: Cardinality,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constructor {
    pub name: String,
    pub result_type: String,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeKind {
    Primitive { multitoken: bool },
    Composite { constructors: Vec<CtorId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDef {
    pub name: String,
    pub kind: TypeKind,
}

impl TypeDef {
    pub fn is_primitive(&self) -> bool {
        matches!(self.kind, TypeKind::Primitive { .. })
    }
}

/// An ASDL grammar. Immutable once built; share it behind an `Arc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsdlGrammar {
    types: Vec<TypeDef>,
    constructors: Vec<Constructor>,
    root_type: String,
    type_index: HashMap<String, TypeId>,
    ctor_index: HashMap<String, CtorId>,
    /// Offset of each constructor's first field in the global field numbering.
    field_offsets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(Diagnostic),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{0}` is primitive and has no constructors")]
    PrimitiveType(String),
    #[error("unknown constructor `{0}`")]
    UnknownConstructor(String),
}

/// One violated grammar invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnresolvedType {
        constructor: String,
        field: String,
        type_name: String,
    },
    DuplicateConstructor(String),
    DuplicateType(String),
    DuplicateField {
        constructor: String,
        field: String,
    },
    MissingRoot(String),
    RootIsPrimitive(String),
    UnknownMultitoken(String),
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnresolvedType {
                constructor,
                field,
                type_name,
            } => write!(
                f,
                "unresolved type `{type_name}` in field `{field}` of constructor `{constructor}`"
            ),
            Diagnostic::DuplicateConstructor(c) => write!(f, "duplicate constructor name `{c}`"),
            Diagnostic::DuplicateType(t) => write!(f, "type `{t}` declared more than once"),
            Diagnostic::DuplicateField { constructor, field } => {
                write!(
                    f,
                    "duplicate field `{field}` in constructor `{constructor}`"
                )
            }
            Diagnostic::MissingRoot(t) => write!(f, "root type `{t}` is not declared"),
            Diagnostic::RootIsPrimitive(t) => write!(f, "root type `{t}` is primitive"),
            Diagnostic::UnknownMultitoken(t) => {
                write!(f, "multitoken type `{t}` is not a declared primitive")
            }
        }
    }
}

impl AsdlGrammar {
    pub fn root_type(&self) -> &str {
        &self.root_type
    }

    pub fn types(&self) -> &[TypeDef] {
        &self.types
    }

    pub fn constructors(&self) -> &[Constructor] {
        &self.constructors
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.type_index.get(name).copied()
    }

    pub fn type_def(&self, name: &str) -> Option<&TypeDef> {
        self.type_id(name).map(|i| &self.types[i])
    }

    pub fn ctor_id(&self, name: &str) -> Option<CtorId> {
        self.ctor_index.get(name).copied()
    }

    pub fn constructor(&self, name: &str) -> Option<&Constructor> {
        self.ctor_id(name).map(|i| &self.constructors[i])
    }

    pub fn is_primitive(&self, type_name: &str) -> bool {
        self.type_def(type_name).is_some_and(TypeDef::is_primitive)
    }

    pub fn is_multitoken(&self, type_name: &str) -> bool {
        matches!(
            self.type_def(type_name).map(|t| &t.kind),
            Some(TypeKind::Primitive { multitoken: true })
        )
    }

    /// Number of distinct fields, counting the synthetic root field as id 0.
    pub fn num_fields(&self) -> usize {
        1 + self
            .constructors
            .iter()
            .map(|c| c.fields.len())
            .sum::<usize>()
    }

    /// Global id of field `field_idx` of constructor `ctor`; 0 is the root field.
    pub fn field_id(&self, ctor: CtorId, field_idx: usize) -> usize {
        1 + self.field_offsets[ctor] + field_idx
    }

    /// Constructors whose result type is `type_name`, in declaration order.
    pub fn constructors_of(&self, type_name: &str) -> Result<Vec<&Constructor>, GrammarError> {
        let def = self
            .type_def(type_name)
            .ok_or_else(|| GrammarError::UnknownType(type_name.to_string()))?;
        match &def.kind {
            TypeKind::Primitive { .. } => Err(GrammarError::PrimitiveType(type_name.to_string())),
            TypeKind::Composite { constructors } => Ok(constructors
                .iter()
                .map(|&i| &self.constructors[i])
                .collect()),
        }
    }

    pub(crate) fn ctor_ids_of(&self, type_id: TypeId) -> &[CtorId] {
        match &self.types[type_id].kind {
            TypeKind::Composite { constructors } => constructors,
            TypeKind::Primitive { .. } => &[],
        }
    }

    /// Renders the grammar back to concrete syntax.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let prims: Vec<&str> = self
            .types
            .iter()
            .filter(|t| t.is_primitive())
            .map(|t| t.name.as_str())
            .collect();
        if !prims.is_empty() {
            out.push_str(&format!("primitives: {}\n", prims.join(", ")));
        }
        let multi: Vec<&str> = self
            .types
            .iter()
            .filter(|t| matches!(t.kind, TypeKind::Primitive { multitoken: true }))
            .map(|t| t.name.as_str())
            .collect();
        if !multi.is_empty() {
            out.push_str(&format!("multitoken: {}\n", multi.join(", ")));
        }
        for t in &self.types {
            let TypeKind::Composite { constructors } = &t.kind else {
                continue;
            };
            let alts: Vec<String> = constructors
                .iter()
                .map(|&c| render_ctor(&self.constructors[c]))
                .collect();
            out.push_str(&format!("{} = {}\n", t.name, alts.join("\n    | ")));
        }
        out
    }
}

fn render_ctor(c: &Constructor) -> String {
    if c.fields.is_empty() {
        return c.name.clone();
    }
    let fields: Vec<String> = c
        .fields
        .iter()
        .map(|f| format!("{}{} {}", f.type_name, f.cardinality.suffix(), f.name))
        .collect();
    format!("{}({})", c.name, fields.join(", "))
}

/// Parses and validates a grammar. Fails on the first invariant violation.
pub fn parse_grammar(text: &str, root_type: &str) -> Result<AsdlGrammar, GrammarError> {
    let g = parse_grammar_unchecked(text, root_type)?;
    match validate_grammar(&g).into_iter().next() {
        Some(d) => Err(GrammarError::Invalid(d)),
        None => Ok(g),
    }
}

/// Like [`parse_grammar`] with the root defaulting to the first composite type.
pub fn parse_grammar_default_root(text: &str) -> Result<AsdlGrammar, GrammarError> {
    let g = parse_grammar_unchecked(text, "")?;
    let root = g
        .types
        .iter()
        .find(|t| !t.is_primitive())
        .map(|t| t.name.clone())
        .ok_or(GrammarError::Syntax {
            line: 1,
            column: 1,
            message: "grammar declares no productions".into(),
        })?;
    parse_grammar(text, &root)
}

/// Checks every grammar invariant; one diagnostic per violation.
pub fn validate_grammar(g: &AsdlGrammar) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen_types = HashSet::new();
    for t in &g.types {
        if !seen_types.insert(t.name.as_str()) {
            out.push(Diagnostic::DuplicateType(t.name.clone()));
        }
    }
    let mut seen_ctors = HashSet::new();
    for c in &g.constructors {
        if !seen_ctors.insert(c.name.as_str()) {
            out.push(Diagnostic::DuplicateConstructor(c.name.clone()));
        }
        let mut seen_fields = HashSet::new();
        for f in &c.fields {
            if !seen_fields.insert(f.name.as_str()) {
                out.push(Diagnostic::DuplicateField {
                    constructor: c.name.clone(),
                    field: f.name.clone(),
                });
            }
            if !g.type_index.contains_key(&f.type_name) {
                out.push(Diagnostic::UnresolvedType {
                    constructor: c.name.clone(),
                    field: f.name.clone(),
                    type_name: f.type_name.clone(),
                });
            }
        }
    }
    match g.type_def(&g.root_type) {
        None => out.push(Diagnostic::MissingRoot(g.root_type.clone())),
        Some(t) if t.is_primitive() => out.push(Diagnostic::RootIsPrimitive(g.root_type.clone())),
        Some(_) => {}
    }
    out
}

// ---------------------------------------------------------------------------
// Lexing and parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Eq,
    Bar,
    LParen,
    RParen,
    Comma,
    Star,
    Question,
    Colon,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, GrammarError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let simple = match c {
                '#' => break,
                '=' => Some(Tok::Eq),
                '|' => Some(Tok::Bar),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '*' => Some(Tok::Star),
                '?' => Some(Tok::Question),
                ':' => Some(Tok::Colon),
                _ => None,
            };
            if let Some(tok) = simple {
                out.push(Spanned {
                    tok,
                    line: li + 1,
                    column,
                });
                i += 1;
            } else if c.is_whitespace() {
                i += 1;
            } else if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: li + 1,
                    column,
                });
            } else {
                return Err(GrammarError::Syntax {
                    line: li + 1,
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn err(&self, message: impl Into<String>) -> GrammarError {
        let (line, column) = match self.toks.get(self.pos) {
            Some(s) => (s.line, s.column),
            None => (self.last_line, 1),
        };
        GrammarError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, GrammarError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), GrammarError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn name_list(&mut self) -> Result<Vec<String>, GrammarError> {
        let mut names = vec![self.ident("a type name")?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            names.push(self.ident("a type name")?);
        }
        Ok(names)
    }

    fn field(&mut self) -> Result<Field, GrammarError> {
        let type_name = self.ident("a field type")?;
        let cardinality = match self.peek() {
            Some(Tok::Star) => {
                self.pos += 1;
                Cardinality::Sequential
            }
            Some(Tok::Question) => {
                self.pos += 1;
                Cardinality::Optional
            }
            _ => Cardinality::Single,
        };
        let name = self.ident("a field name")?;
        Ok(Field {
            name,
            type_name,
            cardinality,
        })
    }

    fn constructor(&mut self, result_type: &str) -> Result<Constructor, GrammarError> {
        let name = self.ident("a constructor name")?;
        let mut fields = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            if self.peek() != Some(&Tok::RParen) {
                fields.push(self.field()?);
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    fields.push(self.field()?);
                }
            }
            self.expect(Tok::RParen, "`)` or `,`")?;
        }
        Ok(Constructor {
            name,
            result_type: result_type.to_string(),
            fields,
        })
    }
}

/// Parses concrete syntax without enforcing grammar invariants.
pub fn parse_grammar_unchecked(text: &str, root_type: &str) -> Result<AsdlGrammar, GrammarError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let mut p = Parser {
        toks,
        pos: 0,
        last_line,
    };

    let mut primitives: Vec<String> = Vec::new();
    let mut multitoken: Vec<String> = Vec::new();
    let mut productions: Vec<(String, Vec<Constructor>)> = Vec::new();

    while p.peek().is_some() {
        let head = p.ident("a type name or header")?;
        match (head.as_str(), p.peek()) {
            ("primitives", Some(Tok::Colon)) => {
                p.pos += 1;
                primitives.extend(p.name_list()?);
            }
            ("multitoken", Some(Tok::Colon)) => {
                p.pos += 1;
                multitoken.extend(p.name_list()?);
            }
            (_, Some(Tok::Eq)) => {
                p.pos += 1;
                let mut ctors = vec![p.constructor(&head)?];
                while p.peek() == Some(&Tok::Bar) {
                    p.pos += 1;
                    ctors.push(p.constructor(&head)?);
                }
                // A stray token that is not the start of the next production.
                if let Some(tok) = p.peek() {
                    let next_is_production = matches!(tok, Tok::Ident(_))
                        && matches!(p.peek2(), Some(Tok::Eq) | Some(Tok::Colon));
                    if !next_is_production {
                        return Err(p.err("expected `|` or a new production"));
                    }
                }
                productions.push((head, ctors));
            }
            _ => return Err(p.err("expected `=` after type name")),
        }
    }

    let mut types = Vec::new();
    let mut constructors = Vec::new();
    for name in &primitives {
        types.push(TypeDef {
            name: name.clone(),
            kind: TypeKind::Primitive {
                multitoken: multitoken.contains(name),
            },
        });
    }
    for (name, ctors) in productions {
        let mut ids = Vec::new();
        for c in ctors {
            ids.push(constructors.len());
            constructors.push(c);
        }
        types.push(TypeDef {
            name,
            kind: TypeKind::Composite { constructors: ids },
        });
    }
    let mut g = build(types, constructors, root_type.to_string());
    for m in multitoken {
        if !primitives.contains(&m) {
            // Recorded as a syntax-level problem: the header names a non-primitive.
            return Err(GrammarError::Invalid(Diagnostic::UnknownMultitoken(m)));
        }
    }
    g.root_type = root_type.to_string();
    Ok(g)
}

fn build(types: Vec<TypeDef>, constructors: Vec<Constructor>, root_type: String) -> AsdlGrammar {
    let mut type_index = HashMap::new();
    for (i, t) in types.iter().enumerate() {
        type_index.entry(t.name.clone()).or_insert(i);
    }
    let mut ctor_index = HashMap::new();
    for (i, c) in constructors.iter().enumerate() {
        ctor_index.entry(c.name.clone()).or_insert(i);
    }
    let mut field_offsets = Vec::with_capacity(constructors.len());
    let mut acc = 0;
    for c in &constructors {
        field_offsets.push(acc);
        acc += c.fields.len();
    }
    AsdlGrammar {
        types,
        constructors,
        root_type,
        type_index,
        ctor_index,
        field_offsets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const ATIS: &str = include_str!("../data/grammars/atis.asdl");
    const FIG4: &str = "
        primitives: identifier
        stmt = Expr(expr value)
        expr = Call(expr func, expr* args, keyword* keywords)
             | Name(identifier id)
        keyword = keyword(identifier arg, expr value)
    ";

    #[test]
    fn atis_constructor_counts() {
        let g = parse_grammar(ATIS, "expr").unwrap();
        assert_eq!(g.constructors_of("expr").unwrap().len(), 17);
        let cmp: Vec<&str> = g
            .constructors_of("cmp_op")
            .unwrap()
            .iter()
            .map(|c| c.name.as_str())
            .collect();
        assert_eq!(cmp, ["Equal", "LessThan", "GreaterThan"]);
        let expr = g.constructors_of("expr").unwrap();
        assert_eq!(expr[0].name, "Variable");
        assert_eq!(expr[16].name, "Compare");
        assert!(validate_grammar(&g).is_empty());
    }

    #[test]
    fn call_fields_from_fig4_excerpt() {
        let g = parse_grammar(FIG4, "stmt").unwrap();
        let call = g.constructor("Call").unwrap();
        let got: Vec<(&str, &str, Cardinality)> = call
            .fields
            .iter()
            .map(|f| (f.name.as_str(), f.type_name.as_str(), f.cardinality))
            .collect();
        assert_eq!(
            got,
            [
                ("func", "expr", Cardinality::Single),
                ("args", "expr", Cardinality::Sequential),
                ("keywords", "keyword", Cardinality::Sequential),
            ]
        );
    }

    #[test]
    fn unresolved_type_is_an_error() {
        let err = parse_grammar("expr = Foo(bar baz)", "expr").unwrap_err();
        assert!(matches!(
            err,
            GrammarError::Invalid(Diagnostic::UnresolvedType { ref type_name, .. }) if type_name == "bar"
        ));
    }

    #[test]
    fn duplicate_constructor_diagnostic() {
        let g = parse_grammar_unchecked(
            "primitives: pred\nexpr = Apply(pred p) | Apply(pred q)",
            "expr",
        )
        .unwrap();
        assert_eq!(
            validate_grammar(&g),
            vec![Diagnostic::DuplicateConstructor("Apply".into())]
        );
        assert!(parse_grammar(
            "primitives: pred\nexpr = Apply(pred p) | Apply(pred q)",
            "expr"
        )
        .is_err());
    }

    #[test]
    fn missing_root_diagnostic() {
        let g = parse_grammar_unchecked("expr = A | B", "stmt").unwrap();
        assert_eq!(
            validate_grammar(&g),
            vec![Diagnostic::MissingRoot("stmt".into())]
        );
    }

    #[test]
    fn constructors_of_errors() {
        let g = parse_grammar(ATIS, "expr").unwrap();
        assert!(matches!(
            g.constructors_of("var"),
            Err(GrammarError::PrimitiveType(_))
        ));
        assert!(matches!(
            g.constructors_of("nope"),
            Err(GrammarError::UnknownType(_))
        ));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_grammar("expr = A(\n  expr )", "expr").unwrap_err();
        match err {
            GrammarError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn render_is_stable() {
        let g = parse_grammar(ATIS, "expr").unwrap();
        let again = parse_grammar(&g.render(), "expr").unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn multitoken_header() {
        let g = parse_grammar(
            "primitives: identifier, string\nmultitoken: string\nexpr = Str(string s) | Name(identifier id)",
            "expr",
        )
        .unwrap();
        assert!(g.is_multitoken("string"));
        assert!(!g.is_multitoken("identifier"));
        assert!(g.is_primitive("identifier"));
    }

    #[test]
    fn field_ids_are_dense() {
        let g = parse_grammar(FIG4, "stmt").unwrap();
        let mut ids = vec![0];
        for (ci, c) in g.constructors().iter().enumerate() {
            for fi in 0..c.fields.len() {
                ids.push(g.field_id(ci, fi));
            }
        }
        assert_eq!(ids, (0..g.num_fields()).collect::<Vec<_>>());
    }
}
