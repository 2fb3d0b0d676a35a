//! A small Python subset (single-line statements) <-> ASTs under the PyLite grammar.
//!
//! Supported: expression statements, assignments (including chained and tuple
//! targets), `return`, `if <expr>: pass`, `for <target> in <expr>: pass` and
//! `pass`. Expressions cover names, numbers, string literals, attribute access,
//! calls with keyword arguments, subscripts, tuples, `+ - * / %` and a single
//! comparison. Everything else is out of subset.

use super::MrError;
use crate::transition::{Ast, AstNode};

/// Placeholder for string literals in anonymized code; printed bare.
pub const STR_PLACEHOLDER: &str = "_STR_";

const OUT_OF_SUBSET: &[&str] = &[
    "class", "def", "while", "lambda", "import", "from", "else", "elif", "try", "except",
    "finally", "with", "yield", "del", "global", "nonlocal", "raise", "assert", "break",
    "continue", "and", "or", "async", "await",
];

const RESERVED: &[&str] = &["return", "if", "for", "in", "pass", "not", "is"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(String),
    Str(String),
    Op(&'static str),
}

const OPS: &[&str] = &[
    "==", "!=", "<=", ">=", "(", ")", "[", "]", ",", ".", "=", ":", "+", "-", "*", "/", "%", "<",
    ">",
];

fn lex(text: &str) -> Result<Vec<Tok>, MrError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Name(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Tok::Num(chars[start..i].iter().collect()));
        } else if c == '\'' || c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    return Err(MrError::OutOfSubset("escape sequences in strings".into()));
                }
                i += 1;
            }
            if i == chars.len() {
                return Err(MrError::Syntax("unterminated string literal".into()));
            }
            i += 1;
            out.push(Tok::Str(chars[start..i].iter().collect()));
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let op = OPS
                .iter()
                .find(|op| rest.starts_with(**op))
                .ok_or_else(|| MrError::OutOfSubset(format!("character `{c}`")))?;
            out.push(Tok::Op(op));
            i += op.len();
        }
    }
    Ok(out)
}

fn tok_text(t: &Tok) -> String {
    match t {
        Tok::Name(s) | Tok::Num(s) | Tok::Str(s) => s.clone(),
        Tok::Op(o) => o.to_string(),
    }
}

/// Splits code into surface tokens; string literals stay whole, quotes included.
pub fn tokenize(code: &str) -> Result<Vec<String>, MrError> {
    Ok(lex(code)?.iter().map(tok_text).collect())
}

fn classify(t: &str) -> Tok {
    if let Some(op) = OPS.iter().find(|o| **o == t) {
        return Tok::Op(op);
    }
    match t.chars().next() {
        Some('\'') | Some('"') => Tok::Str(t.to_string()),
        Some(c) if c.is_ascii_digit() => Tok::Num(t.to_string()),
        _ => Tok::Name(t.to_string()),
    }
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

fn name(id: &str) -> AstNode {
    AstNode::composite("Name", vec![vec![AstNode::token(id)]])
}

fn binop(l: AstNode, op: &str, r: AstNode) -> AstNode {
    AstNode::composite(
        "BinOp",
        vec![vec![l], vec![AstNode::composite(op, vec![])], vec![r]],
    )
}

fn tuple(elts: Vec<AstNode>) -> AstNode {
    AstNode::composite("Tuple", vec![elts])
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k)
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Name(n)) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), MrError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{op}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), MrError> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn unexpected(&self, want: &str) -> MrError {
        match self.peek() {
            Some(Tok::Name(n)) if OUT_OF_SUBSET.contains(&n.as_str()) => {
                MrError::OutOfSubset(format!("`{n}`"))
            }
            Some(t) => MrError::Syntax(format!("expected {want}, found `{}`", tok_text(t))),
            None => MrError::Syntax(format!("expected {want} at end of input")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }

    fn statement(&mut self) -> Result<AstNode, MrError> {
        if let Some(Tok::Name(n)) = self.peek() {
            if OUT_OF_SUBSET.contains(&n.as_str()) {
                return Err(MrError::OutOfSubset(format!("`{n}`")));
            }
        }
        let stmt = if self.is_kw("pass") {
            self.pos += 1;
            AstNode::composite("Pass", vec![])
        } else if self.is_kw("return") {
            self.pos += 1;
            let value = if self.at_end() {
                vec![]
            } else {
                vec![self.expr_list()?]
            };
            AstNode::composite("Return", vec![value])
        } else if self.is_kw("if") {
            self.pos += 1;
            let test = self.expr()?;
            self.expect_op(":")?;
            self.expect_kw("pass")?;
            AstNode::composite("If", vec![vec![test]])
        } else if self.is_kw("for") {
            self.pos += 1;
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.expr_list()?;
            self.expect_op(":")?;
            self.expect_kw("pass")?;
            AstNode::composite("For", vec![vec![target], vec![iter]])
        } else {
            let mut parts = vec![self.expr_list()?];
            while self.eat_op("=") {
                parts.push(self.expr_list()?);
            }
            if parts.len() == 1 {
                AstNode::composite("Expr", vec![parts])
            } else {
                let value = parts.pop().expect("two or more parts");
                AstNode::composite("Assign", vec![parts, vec![value]])
            }
        };
        if !self.at_end() {
            return Err(self.unexpected("end of statement"));
        }
        Ok(stmt)
    }

    /// `a, b` in a `for` header; stops before `in`, which would otherwise parse as a comparison.
    fn target_list(&mut self) -> Result<AstNode, MrError> {
        let mut elts = vec![self.arith()?];
        let mut comma = false;
        while self.eat_op(",") {
            comma = true;
            if self.is_kw("in") {
                break;
            }
            elts.push(self.arith()?);
        }
        Ok(if comma {
            tuple(elts)
        } else {
            elts.pop().expect("one element")
        })
    }

    fn starts_expr(&self) -> bool {
        match self.peek() {
            Some(Tok::Name(n)) => !RESERVED.contains(&n.as_str()) || n == "not",
            Some(Tok::Num(_)) | Some(Tok::Str(_)) => true,
            Some(Tok::Op(o)) => *o == "(",
            None => false,
        }
    }

    fn expr_list(&mut self) -> Result<AstNode, MrError> {
        let mut elts = vec![self.expr()?];
        let mut comma = false;
        while self.eat_op(",") {
            comma = true;
            if !self.starts_expr() {
                break;
            }
            elts.push(self.expr()?);
        }
        Ok(if comma {
            tuple(elts)
        } else {
            elts.pop().expect("one element")
        })
    }

    fn cmp_op(&mut self) -> Option<&'static str> {
        let op = match self.peek()? {
            Tok::Op("==") => "Eq",
            Tok::Op("!=") => "NotEq",
            Tok::Op("<") => "Lt",
            Tok::Op(">") => "Gt",
            Tok::Name(n) if n == "in" => "In",
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_at(1), Some(Tok::Name(m)) if m == "not") {
                    self.pos += 1;
                    "IsNot"
                } else {
                    "Is"
                }
            }
            Tok::Name(n)
                if n == "not" && matches!(self.peek_at(1), Some(Tok::Name(m)) if m == "in") =>
            {
                self.pos += 1;
                "NotIn"
            }
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn expr(&mut self) -> Result<AstNode, MrError> {
        if matches!(self.peek(), Some(Tok::Op("<=")) | Some(Tok::Op(">="))) {
            return Err(MrError::OutOfSubset("`<=`/`>=`".into()));
        }
        let left = self.arith()?;
        match self.peek() {
            Some(Tok::Op("<=")) | Some(Tok::Op(">=")) => {
                return Err(MrError::OutOfSubset("`<=`/`>=` comparisons".into()))
            }
            Some(Tok::Name(n))
                if n == "not" && !matches!(self.peek_at(1), Some(Tok::Name(m)) if m == "in") =>
            {
                return Err(self.unexpected("an operator"))
            }
            _ => {}
        }
        let Some(op) = self.cmp_op() else {
            return Ok(left);
        };
        let right = self.arith()?;
        if self.cmp_op().is_some() {
            return Err(MrError::OutOfSubset("chained comparisons".into()));
        }
        Ok(AstNode::composite(
            "Compare",
            vec![
                vec![left],
                vec![AstNode::composite(op, vec![])],
                vec![right],
            ],
        ))
    }

    fn arith(&mut self) -> Result<AstNode, MrError> {
        let mut left = self.term()?;
        loop {
            let op = if self.eat_op("+") {
                "Add"
            } else if self.eat_op("-") {
                "Sub"
            } else {
                return Ok(left);
            };
            left = binop(left, op, self.term()?);
        }
    }

    fn term(&mut self) -> Result<AstNode, MrError> {
        let mut left = self.postfix()?;
        loop {
            let op = if self.eat_op("*") {
                "Mult"
            } else if self.eat_op("/") {
                "Div"
            } else if self.eat_op("%") {
                "Mod"
            } else {
                return Ok(left);
            };
            left = binop(left, op, self.postfix()?);
        }
    }

    fn postfix(&mut self) -> Result<AstNode, MrError> {
        let mut node = self.atom()?;
        loop {
            if self.eat_op(".") {
                let attr = match self.peek() {
                    Some(Tok::Name(n)) if !RESERVED.contains(&n.as_str()) => n.clone(),
                    _ => return Err(self.unexpected("an attribute name")),
                };
                self.pos += 1;
                node =
                    AstNode::composite("Attribute", vec![vec![node], vec![AstNode::token(&attr)]]);
            } else if self.eat_op("(") {
                let (args, keywords) = self.call_args()?;
                node = AstNode::composite("Call", vec![vec![node], args, keywords]);
            } else if self.eat_op("[") {
                let slice = self.expr_list()?;
                self.expect_op("]")?;
                node = AstNode::composite("Subscript", vec![vec![node], vec![slice]]);
            } else {
                return Ok(node);
            }
        }
    }

    fn call_args(&mut self) -> Result<(Vec<AstNode>, Vec<AstNode>), MrError> {
        let mut args = Vec::new();
        let mut keywords = Vec::new();
        loop {
            if self.eat_op(")") {
                return Ok((args, keywords));
            }
            let is_kw = matches!(self.peek(), Some(Tok::Name(_)))
                && matches!(self.peek_at(1), Some(Tok::Op("=")));
            if is_kw {
                let Some(Tok::Name(arg)) = self.peek().cloned() else {
                    unreachable!()
                };
                self.pos += 2;
                let value = self.expr()?;
                keywords.push(AstNode::composite(
                    "keyword",
                    vec![vec![AstNode::token(&arg)], vec![value]],
                ));
            } else {
                if !keywords.is_empty() {
                    return Err(MrError::Syntax(
                        "positional argument follows keyword argument".into(),
                    ));
                }
                args.push(self.expr()?);
            }
            if !self.eat_op(",") {
                self.expect_op(")")?;
                return Ok((args, keywords));
            }
        }
    }

    fn atom(&mut self) -> Result<AstNode, MrError> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| self.unexpected("an expression"))?;
        self.pos += 1;
        match tok {
            Tok::Name(n) if n == STR_PLACEHOLDER => Ok(AstNode::composite(
                "Str",
                vec![vec![AstNode::Primitive(vec![n])]],
            )),
            Tok::Name(n) if OUT_OF_SUBSET.contains(&n.as_str()) => {
                Err(MrError::OutOfSubset(format!("`{n}`")))
            }
            Tok::Name(n) if RESERVED.contains(&n.as_str()) => {
                self.pos -= 1;
                Err(self.unexpected("an expression"))
            }
            Tok::Name(n) => Ok(name(&n)),
            Tok::Num(n) => Ok(AstNode::composite("Num", vec![vec![AstNode::token(&n)]])),
            Tok::Str(s) => {
                let body = &s[1..s.len() - 1];
                let words = body.split_whitespace().map(String::from).collect();
                Ok(AstNode::composite(
                    "Str",
                    vec![vec![AstNode::Primitive(words)]],
                ))
            }
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(tuple(vec![]));
                }
                let inner = self.expr_list()?;
                self.expect_op(")")?;
                Ok(inner)
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.unexpected("an expression"))
            }
        }
    }
}

fn parse_toks(toks: Vec<Tok>) -> Result<Ast, MrError> {
    if toks.is_empty() {
        return Err(MrError::Syntax("empty statement".into()));
    }
    let mut p = Parser { toks, pos: 0 };
    Ok(Ast::new(p.statement()?))
}

/// Parses one line of code.
pub fn parse(code: &str) -> Result<Ast, MrError> {
    parse_toks(lex(code)?)
}

/// Parses a surface token sequence as produced by [`tokenize`].
pub fn parse_tokens(tokens: &[String]) -> Result<Ast, MrError> {
    parse_toks(tokens.iter().map(|t| classify(t)).collect())
}

// ---------------------------------------------------------------------------
// Printing

const PREC_CMP: u8 = 1;
const PREC_ADD: u8 = 2;
const PREC_MUL: u8 = 3;
const PREC_ATOM: u8 = 4;

fn nc(m: impl Into<String>) -> MrError {
    MrError::Nonconforming(m.into())
}

fn composite(n: &AstNode) -> Result<&crate::transition::Composite, MrError> {
    n.as_composite().ok_or_else(|| nc("expected a constructor"))
}

fn one<'a>(vals: &'a [AstNode], what: &str) -> Result<&'a AstNode, MrError> {
    match vals {
        [v] => Ok(v),
        _ => Err(nc(format!("field `{what}` must hold one value"))),
    }
}

fn ident(n: &AstNode) -> Result<&str, MrError> {
    match n {
        AstNode::Primitive(t) if t.len() == 1 => Ok(&t[0]),
        _ => Err(nc("expected a single-token identifier")),
    }
}

fn fields(c: &crate::transition::Composite, n: usize) -> Result<&[Vec<AstNode>], MrError> {
    if c.fields.len() == n {
        Ok(&c.fields)
    } else {
        Err(nc(format!("`{}` expects {n} fields", c.constructor)))
    }
}

fn op_symbol(n: &AstNode) -> Result<(&'static str, u8), MrError> {
    let c = composite(n)?;
    Ok(match c.constructor.as_str() {
        "Add" => ("+", PREC_ADD),
        "Sub" => ("-", PREC_ADD),
        "Mult" => ("*", PREC_MUL),
        "Div" => ("/", PREC_MUL),
        "Mod" => ("%", PREC_MUL),
        "Eq" => ("==", PREC_CMP),
        "NotEq" => ("!=", PREC_CMP),
        "Lt" => ("<", PREC_CMP),
        "Gt" => (">", PREC_CMP),
        "In" => ("in", PREC_CMP),
        "NotIn" => ("not in", PREC_CMP),
        "Is" => ("is", PREC_CMP),
        "IsNot" => ("is not", PREC_CMP),
        other => return Err(nc(format!("unknown operator `{other}`"))),
    })
}

fn prec(n: &AstNode) -> u8 {
    match n.as_composite().map(|c| c.constructor.as_str()) {
        Some("Compare") => PREC_CMP,
        Some("BinOp") => n
            .as_composite()
            .and_then(|c| c.fields.get(1))
            .and_then(|f| f.first())
            .and_then(|op| op_symbol(op).ok())
            .map_or(PREC_ADD, |(_, p)| p),
        _ => PREC_ATOM,
    }
}

fn string_literal(tokens: &[String]) -> Result<String, MrError> {
    if tokens.len() == 1 && tokens[0] == STR_PLACEHOLDER {
        return Ok(STR_PLACEHOLDER.to_string());
    }
    let body = tokens.join(" ");
    let quote = if !body.contains('\'') {
        '\''
    } else if !body.contains('"') {
        '"'
    } else {
        return Err(nc("string holds both quote characters"));
    };
    if body.contains('\\') {
        return Err(nc("string holds a backslash"));
    }
    Ok(format!("{quote}{body}{quote}"))
}

/// Prints an expression; bare tuples are allowed only when `top` is set.
fn expr(n: &AstNode, min_prec: u8, top: bool) -> Result<String, MrError> {
    let s = expr_inner(n, top)?;
    Ok(if prec(n) < min_prec {
        format!("({s})")
    } else {
        s
    })
}

fn expr_inner(n: &AstNode, top: bool) -> Result<String, MrError> {
    let c = composite(n)?;
    let f = &c.fields;
    Ok(match c.constructor.as_str() {
        "Name" => ident(one(&fields(c, 1)?[0], "id")?)?.to_string(),
        "Num" => ident(one(&fields(c, 1)?[0], "n")?)?.to_string(),
        "Str" => match one(&fields(c, 1)?[0], "s")? {
            AstNode::Primitive(t) => string_literal(t)?,
            _ => return Err(nc("string value")),
        },
        "Attribute" => {
            let f = fields(c, 2)?;
            let value = one(&f[0], "value")?;
            let mut v = expr(value, PREC_ATOM, false)?;
            if composite(value)?.constructor == "Num" {
                v = format!("({v})");
            }
            format!("{v}.{}", ident(one(&f[1], "attr")?)?)
        }
        "Subscript" => {
            let f = fields(c, 2)?;
            format!(
                "{}[{}]",
                expr(one(&f[0], "value")?, PREC_ATOM, false)?,
                expr(one(&f[1], "slice")?, 0, true)?
            )
        }
        "Call" => {
            let f = fields(c, 3)?;
            let mut parts = Vec::new();
            for a in &f[1] {
                parts.push(expr(a, 0, false)?);
            }
            for k in &f[2] {
                let kc = composite(k)?;
                if kc.constructor != "keyword" {
                    return Err(nc("expected a keyword"));
                }
                let kf = fields(kc, 2)?;
                parts.push(format!(
                    "{}={}",
                    ident(one(&kf[0], "arg")?)?,
                    expr(one(&kf[1], "value")?, 0, false)?
                ));
            }
            format!(
                "{}({})",
                expr(one(&f[0], "func")?, PREC_ATOM, false)?,
                parts.join(", ")
            )
        }
        "Tuple" => {
            let elts = f.first().ok_or_else(|| nc("tuple elements"))?;
            let parts = elts
                .iter()
                .map(|e| expr(e, 0, false))
                .collect::<Result<Vec<_>, _>>()?;
            match parts.len() {
                0 => "()".to_string(),
                1 => format!("({},)", parts[0]),
                _ if top => parts.join(", "),
                _ => format!("({})", parts.join(", ")),
            }
        }
        "BinOp" => {
            let f = fields(c, 3)?;
            let (sym, p) = op_symbol(one(&f[1], "op")?)?;
            if p == PREC_CMP {
                return Err(nc("comparison operator in BinOp"));
            }
            format!(
                "{} {sym} {}",
                expr(one(&f[0], "left")?, p, false)?,
                expr(one(&f[2], "right")?, p + 1, false)?
            )
        }
        "Compare" => {
            let f = fields(c, 3)?;
            let (sym, p) = op_symbol(one(&f[1], "op")?)?;
            if p != PREC_CMP {
                return Err(nc("arithmetic operator in Compare"));
            }
            format!(
                "{} {sym} {}",
                expr(one(&f[0], "left")?, PREC_ADD, false)?,
                expr(one(&f[2], "right")?, PREC_ADD, false)?
            )
        }
        other => return Err(nc(format!("`{other}` is not an expression"))),
    })
}

/// Prints a statement AST as one line of code.
pub fn print(ast: &Ast) -> Result<String, MrError> {
    let c = composite(&ast.root)?;
    let f = &c.fields;
    Ok(match c.constructor.as_str() {
        "Expr" => expr(one(&fields(c, 1)?[0], "value")?, 0, true)?,
        "Assign" => {
            let f = fields(c, 2)?;
            if f[0].is_empty() {
                return Err(nc("assignment without targets"));
            }
            let mut parts = f[0]
                .iter()
                .map(|t| expr(t, 0, true))
                .collect::<Result<Vec<_>, _>>()?;
            parts.push(expr(one(&f[1], "value")?, 0, true)?);
            parts.join(" = ")
        }
        "Return" => match fields(c, 1)?[0].as_slice() {
            [] => "return".to_string(),
            [v] => format!("return {}", expr(v, 0, true)?),
            _ => return Err(nc("return holds one value")),
        },
        "If" => format!(
            "if {}: pass",
            expr(one(&fields(c, 1)?[0], "test")?, 0, false)?
        ),
        "For" => {
            let f = fields(c, 2)?;
            let target = one(&f[0], "target")?;
            // Comparisons in the target would swallow the `in` keyword.
            let t = expr(target, PREC_ADD, true)?;
            format!("for {t} in {}: pass", expr(one(&f[1], "iter")?, 0, true)?)
        }
        "Pass" => {
            if !f.is_empty() {
                return Err(nc("`Pass` takes no fields"));
            }
            "pass".to_string()
        }
        other => return Err(nc(format!("`{other}` is not a statement"))),
    })
}
