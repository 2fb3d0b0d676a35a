//! Lambda-calculus logical forms (ATIS style) <-> ASTs under the ATIS grammar.

use super::MrError;
use crate::transition::{Ast, AstNode};

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

/// Splits on whitespace and parentheses; parentheses are tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c == '(' || c == ')' || c.is_whitespace() {
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

fn read_sexp(tokens: &[String]) -> Result<Sexp, MrError> {
    let mut pos = 0;
    let sexp = read_one(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(MrError::Syntax(format!(
            "trailing tokens after position {pos}"
        )));
    }
    Ok(sexp)
}

fn read_one(tokens: &[String], pos: &mut usize) -> Result<Sexp, MrError> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| MrError::Unbalanced("unexpected end of input".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    None => return Err(MrError::Unbalanced("missing `)`".into())),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read_one(tokens, pos)?),
                }
            }
        }
        ")" => Err(MrError::Unbalanced("unexpected `)`".into())),
        atom => Ok(Sexp::Atom(atom.to_string())),
    }
}

fn is_number(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.parse::<f64>().is_ok()
}

fn var_atom(s: &Sexp, head: &str) -> Result<AstNode, MrError> {
    match s {
        Sexp::Atom(a) if a.starts_with('$') => Ok(AstNode::token(a)),
        _ => Err(MrError::Syntax(format!(
            "`{head}` expects a variable like $0"
        ))),
    }
}

fn atom(s: &Sexp, head: &str) -> Result<AstNode, MrError> {
    match s {
        Sexp::Atom(a) => Ok(AstNode::token(a)),
        Sexp::List(_) => Err(MrError::Syntax(format!("`{head}` expects an atom"))),
    }
}

fn arity(head: &str, args: &[Sexp], n: usize) -> Result<(), MrError> {
    if args.len() == n {
        Ok(())
    } else {
        Err(MrError::Arity {
            head: head.to_string(),
            expected: n,
            found: args.len(),
        })
    }
}

fn to_node(s: &Sexp) -> Result<AstNode, MrError> {
    let items = match s {
        Sexp::Atom(a) if a.starts_with('$') => {
            return Ok(AstNode::composite(
                "Variable",
                vec![vec![AstNode::token(a)]],
            ))
        }
        Sexp::Atom(a) if is_number(a) => {
            return Ok(AstNode::composite("Number", vec![vec![AstNode::token(a)]]))
        }
        Sexp::Atom(a) => return Ok(AstNode::composite("Entity", vec![vec![AstNode::token(a)]])),
        Sexp::List(items) => items,
    };
    let (head, args) = match items.split_first() {
        Some((Sexp::Atom(h), rest)) => (h.as_str(), rest),
        Some((Sexp::List(_), _)) => {
            return Err(MrError::Syntax("list head must be an atom".into()))
        }
        None => return Err(MrError::Syntax("empty list".into())),
    };
    let one = |x: &Sexp| -> Result<Vec<AstNode>, MrError> { Ok(vec![to_node(x)?]) };
    let node = match head {
        "lambda" => {
            arity(head, args, 3)?;
            AstNode::composite(
                "Lambda",
                vec![
                    vec![var_atom(&args[0], head)?],
                    vec![atom(&args[1], head)?],
                    one(&args[2])?,
                ],
            )
        }
        "argmax" | "argmin" | "sum" => {
            arity(head, args, 3)?;
            let ctor = match head {
                "argmax" => "Argmax",
                "argmin" => "Argmin",
                _ => "Sum",
            };
            AstNode::composite(
                ctor,
                vec![
                    vec![var_atom(&args[0], head)?],
                    one(&args[1])?,
                    one(&args[2])?,
                ],
            )
        }
        "count" | "exists" | "max" | "min" | "the" => {
            arity(head, args, 2)?;
            let ctor = match head {
                "count" => "Count",
                "exists" => "Exists",
                "max" => "Max",
                "min" => "Min",
                _ => "The",
            };
            AstNode::composite(ctor, vec![vec![var_atom(&args[0], head)?], one(&args[1])?])
        }
        "not" => {
            arity(head, args, 1)?;
            AstNode::composite("Not", vec![one(&args[0])?])
        }
        "and" | "or" => {
            let ctor = if head == "and" { "And" } else { "Or" };
            let children = args.iter().map(to_node).collect::<Result<Vec<_>, _>>()?;
            AstNode::composite(ctor, vec![children])
        }
        "=" | "<" | ">" => {
            arity(head, args, 2)?;
            let op = match head {
                "=" => "Equal",
                "<" => "LessThan",
                _ => "GreaterThan",
            };
            AstNode::composite(
                "Compare",
                vec![
                    vec![AstNode::composite(op, vec![])],
                    one(&args[0])?,
                    one(&args[1])?,
                ],
            )
        }
        pred => {
            let children = args.iter().map(to_node).collect::<Result<Vec<_>, _>>()?;
            AstNode::composite("Apply", vec![vec![AstNode::token(pred)], children])
        }
    };
    Ok(node)
}

pub fn parse_tokens(tokens: &[String]) -> Result<Ast, MrError> {
    if tokens.is_empty() {
        return Err(MrError::Syntax("empty logical form".into()));
    }
    Ok(Ast::new(to_node(&read_sexp(tokens)?)?))
}

/// Parses an s-expression logical form into an AST.
pub fn lf_parse(text: &str) -> Result<Ast, MrError> {
    parse_tokens(&tokenize(text))
}

fn token_of(n: &AstNode) -> Result<&str, MrError> {
    match n {
        AstNode::Primitive(t) if t.len() == 1 => Ok(&t[0]),
        _ => Err(MrError::Nonconforming(
            "expected a single-token primitive".into(),
        )),
    }
}

fn single<'a>(vals: &'a [AstNode], what: &str) -> Result<&'a AstNode, MrError> {
    match vals {
        [v] => Ok(v),
        _ => Err(MrError::Nonconforming(format!(
            "field `{what}` must hold one value"
        ))),
    }
}

fn emit(n: &AstNode, out: &mut Vec<String>) -> Result<(), MrError> {
    let c = n
        .as_composite()
        .ok_or_else(|| MrError::Nonconforming("expected an expression".into()))?;
    let f = &c.fields;
    let open = |out: &mut Vec<String>, head: &str| {
        out.push("(".into());
        out.push(head.to_string());
    };
    let need = |k: usize| -> Result<(), MrError> {
        if f.len() == k {
            Ok(())
        } else {
            Err(MrError::Nonconforming(format!(
                "`{}` expects {k} fields",
                c.constructor
            )))
        }
    };
    match c.constructor.as_str() {
        "Variable" | "Entity" | "Number" => {
            need(1)?;
            out.push(token_of(single(&f[0], "value")?)?.to_string());
            return Ok(());
        }
        "Apply" => {
            need(2)?;
            open(out, token_of(single(&f[0], "predicate")?)?);
            for a in &f[1] {
                emit(a, out)?;
            }
        }
        "Lambda" => {
            need(3)?;
            open(out, "lambda");
            out.push(token_of(single(&f[0], "variable")?)?.to_string());
            out.push(token_of(single(&f[1], "type")?)?.to_string());
            emit(single(&f[2], "body")?, out)?;
        }
        ctor @ ("Argmax" | "Argmin" | "Sum") => {
            need(3)?;
            open(out, &ctor.to_lowercase());
            out.push(token_of(single(&f[0], "variable")?)?.to_string());
            emit(single(&f[1], "domain")?, out)?;
            emit(single(&f[2], "body")?, out)?;
        }
        ctor @ ("Count" | "Exists" | "Max" | "Min" | "The") => {
            need(2)?;
            open(out, &ctor.to_lowercase());
            out.push(token_of(single(&f[0], "variable")?)?.to_string());
            emit(single(&f[1], "body")?, out)?;
        }
        "Not" => {
            need(1)?;
            open(out, "not");
            emit(single(&f[0], "argument")?, out)?;
        }
        ctor @ ("And" | "Or") => {
            need(1)?;
            open(out, &ctor.to_lowercase());
            for a in &f[0] {
                emit(a, out)?;
            }
        }
        "Compare" => {
            need(3)?;
            let op = single(&f[0], "op")?
                .as_composite()
                .ok_or_else(|| MrError::Nonconforming("comparison operator".into()))?;
            let sym = match op.constructor.as_str() {
                "Equal" => "=",
                "LessThan" => "<",
                "GreaterThan" => ">",
                other => {
                    return Err(MrError::Nonconforming(format!(
                        "unknown operator `{other}`"
                    )))
                }
            };
            open(out, sym);
            emit(single(&f[1], "left")?, out)?;
            emit(single(&f[2], "right")?, out)?;
        }
        other => {
            return Err(MrError::Nonconforming(format!(
                "unknown constructor `{other}`"
            )))
        }
    }
    out.push(")".into());
    Ok(())
}

pub fn to_tokens(ast: &Ast) -> Result<Vec<String>, MrError> {
    let mut out = Vec::new();
    emit(&ast.root, &mut out)?;
    Ok(out)
}

/// Joins s-expression tokens with single spaces, none inside parentheses.
pub fn join_tokens(tokens: &[String]) -> String {
    let mut s = String::new();
    let mut prev_open = true;
    for t in tokens {
        if !prev_open && t != ")" {
            s.push(' ');
        }
        s.push_str(t);
        prev_open = t == "(";
    }
    s
}

/// Canonical single-space s-expression for an AST.
pub fn lf_print(ast: &Ast) -> Result<String, MrError> {
    Ok(join_tokens(&to_tokens(ast)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEEKDAY: &str = "(lambda $0 e (and (flight $0) (from $0 ci0) (to $0 ci1) (weekday $0)))";

    fn var(v: &str) -> AstNode {
        AstNode::composite("Variable", vec![vec![AstNode::token(v)]])
    }

    fn ent(v: &str) -> AstNode {
        AstNode::composite("Entity", vec![vec![AstNode::token(v)]])
    }

    fn apply(p: &str, args: Vec<AstNode>) -> AstNode {
        AstNode::composite("Apply", vec![vec![AstNode::token(p)], args])
    }

    #[test]
    fn weekday_flight_structure() {
        let expected = Ast::new(AstNode::composite(
            "Lambda",
            vec![
                vec![AstNode::token("$0")],
                vec![AstNode::token("e")],
                vec![AstNode::composite(
                    "And",
                    vec![vec![
                        apply("flight", vec![var("$0")]),
                        apply("from", vec![var("$0"), ent("ci0")]),
                        apply("to", vec![var("$0"), ent("ci1")]),
                        apply("weekday", vec![var("$0")]),
                    ]],
                )],
            ],
        ));
        assert_eq!(lf_parse(WEEKDAY).unwrap(), expected);
        assert_eq!(lf_print(&expected).unwrap(), WEEKDAY);
    }

    #[test]
    fn compare_prints_operator_shape() {
        let ast = Ast::new(AstNode::composite(
            "Compare",
            vec![
                vec![AstNode::composite("Equal", vec![])],
                vec![apply("fare", vec![var("$1")])],
                vec![var("$0")],
            ],
        ));
        assert_eq!(lf_print(&ast).unwrap(), "(= (fare $1) $0)");
        assert_eq!(lf_parse("(= (fare $1) $0)").unwrap(), ast);
    }

    #[test]
    fn single_atom_entity() {
        let ast = lf_parse("ci0").unwrap();
        assert_eq!(ast, Ast::new(ent("ci0")));
        assert_eq!(lf_print(&ast).unwrap(), "ci0");
        assert_eq!(to_tokens(&ast).unwrap(), ["ci0"]);
    }

    #[test]
    fn numbers_and_variables() {
        let ast = lf_parse("(< (arrival_time $0) 1200)").unwrap();
        let c = ast.root.as_composite().unwrap();
        assert_eq!(c.fields[2][0].as_composite().unwrap().constructor, "Number");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            lf_parse("(lambda $0)"),
            Err(MrError::Arity { .. })
        ));
        assert!(matches!(
            lf_parse("(flight $0"),
            Err(MrError::Unbalanced(_))
        ));
        assert!(matches!(lf_parse("(flight $0))"), Err(MrError::Syntax(_))));
        assert!(matches!(lf_parse(")"), Err(MrError::Unbalanced(_))));
        assert!(lf_parse("()").is_err());
        assert!(lf_parse("(exists ci0 (flight $0))").is_err());
    }

    #[test]
    fn tokenizer_splits_parens() {
        assert_eq!(
            tokenize(WEEKDAY)[..6],
            ["(", "lambda", "$0", "e", "(", "and"].map(String::from)
        );
    }
}
