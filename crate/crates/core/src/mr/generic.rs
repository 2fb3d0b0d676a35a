//! Grammar-driven s-expression surface form usable with any ASDL grammar.
//!
//! A constructor prints as `(Name field ...)`. Optional and sequential fields
//! are bracketed `[v ...]`; multi-token primitive values are braced `{t ...}`.

use super::MrError;
use crate::asdl::{AsdlGrammar, Cardinality};
use crate::transition::{check_ast, Ast, AstNode};

const DELIMS: [char; 6] = ['(', ')', '[', ']', '{', '}'];

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_whitespace() || DELIMS.contains(&c) {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

struct Reader<'a> {
    g: &'a AsdlGrammar,
    toks: &'a [String],
    pos: usize,
}

impl Reader<'_> {
    fn next(&mut self) -> Result<&str, MrError> {
        let t = self
            .toks
            .get(self.pos)
            .ok_or_else(|| MrError::Unbalanced("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<&str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn expect(&mut self, t: &str) -> Result<(), MrError> {
        let got = self.next()?;
        if got == t {
            Ok(())
        } else {
            Err(MrError::Syntax(format!("expected `{t}`, found `{got}`")))
        }
    }

    fn value(&mut self, type_name: &str) -> Result<AstNode, MrError> {
        if self.g.is_primitive(type_name) {
            if self.g.is_multitoken(type_name) {
                self.expect("{")?;
                let mut toks = Vec::new();
                loop {
                    match self.next()? {
                        "}" => return Ok(AstNode::Primitive(toks)),
                        t if DELIMS.iter().any(|d| t.starts_with(*d)) => {
                            return Err(MrError::Syntax(format!("unexpected `{t}` in token list")))
                        }
                        t => toks.push(t.to_string()),
                    }
                }
            }
            let t = self.next()?;
            if DELIMS.iter().any(|d| t.starts_with(*d)) {
                return Err(MrError::Syntax(format!(
                    "expected a `{type_name}` token, found `{t}`"
                )));
            }
            return Ok(AstNode::token(t));
        }
        self.expect("(")?;
        let name = self.next()?.to_string();
        let ctor = self
            .g
            .constructor(&name)
            .ok_or_else(|| MrError::Syntax(format!("unknown constructor `{name}`")))?;
        let mut fields = Vec::with_capacity(ctor.fields.len());
        for f in &ctor.fields {
            if f.cardinality == Cardinality::Single {
                fields.push(vec![self.value(&f.type_name)?]);
                continue;
            }
            self.expect("[")?;
            let mut vals = Vec::new();
            while self.peek() != Some("]") {
                if self.peek().is_none() {
                    return Err(MrError::Unbalanced("missing `]`".into()));
                }
                vals.push(self.value(&f.type_name)?);
            }
            self.pos += 1;
            fields.push(vals);
        }
        match self.next()? {
            ")" => Ok(AstNode::composite(&name, fields)),
            t => Err(MrError::Arity {
                head: format!("{name} (extra `{t}`)"),
                expected: ctor.fields.len(),
                found: ctor.fields.len() + 1,
            }),
        }
    }
}

pub fn parse_tokens(g: &AsdlGrammar, toks: &[String]) -> Result<Ast, MrError> {
    let mut r = Reader { g, toks, pos: 0 };
    let root = r.value(g.root_type())?;
    if r.pos != toks.len() {
        return Err(MrError::Syntax("trailing tokens".into()));
    }
    let ast = Ast::new(root);
    check_ast(g, &ast).map_err(|e| MrError::Nonconforming(e.to_string()))?;
    Ok(ast)
}

pub fn parse(g: &AsdlGrammar, text: &str) -> Result<Ast, MrError> {
    parse_tokens(g, &tokenize(text))
}

fn emit(g: &AsdlGrammar, node: &AstNode, type_name: &str, out: &mut Vec<String>) {
    match node {
        AstNode::Primitive(toks) if g.is_multitoken(type_name) => {
            out.push("{".into());
            out.extend(toks.iter().cloned());
            out.push("}".into());
        }
        AstNode::Primitive(toks) => out.extend(toks.iter().cloned()),
        AstNode::Composite(c) => {
            out.push("(".into());
            out.push(c.constructor.clone());
            let ctor = g.constructor(&c.constructor).expect("checked");
            for (f, vals) in ctor.fields.iter().zip(&c.fields) {
                let bracket = f.cardinality != Cardinality::Single;
                if bracket {
                    out.push("[".into());
                }
                for v in vals {
                    emit(g, v, &f.type_name, out);
                }
                if bracket {
                    out.push("]".into());
                }
            }
            out.push(")".into());
        }
    }
}

pub fn to_tokens(g: &AsdlGrammar, ast: &Ast) -> Result<Vec<String>, MrError> {
    check_ast(g, ast).map_err(|e| MrError::Nonconforming(e.to_string()))?;
    let mut prim_ok = true;
    visit_tokens(&ast.root, &mut |t| {
        prim_ok &= !t.chars().any(|c| c.is_whitespace() || DELIMS.contains(&c));
    });
    if !prim_ok {
        return Err(MrError::Nonconforming(
            "token holds whitespace or a bracket".into(),
        ));
    }
    let mut out = Vec::new();
    emit(g, &ast.root, g.root_type(), &mut out);
    Ok(out)
}

fn visit_tokens(n: &AstNode, f: &mut impl FnMut(&str)) {
    match n {
        AstNode::Primitive(t) => t.iter().for_each(|t| f(t)),
        AstNode::Composite(c) => c.fields.iter().flatten().for_each(|v| visit_tokens(v, f)),
    }
}

/// Joins tokens with single spaces, none just inside brackets.
pub fn join_tokens(toks: &[String]) -> String {
    let mut s = String::new();
    let mut prev_open = true;
    for t in toks {
        let close = matches!(t.as_str(), ")" | "]" | "}");
        if !prev_open && !close {
            s.push(' ');
        }
        s.push_str(t);
        prev_open = matches!(t.as_str(), "(" | "[" | "{");
    }
    s
}

pub fn print(g: &AsdlGrammar, ast: &Ast) -> Result<String, MrError> {
    Ok(join_tokens(&to_tokens(g, ast)?))
}
