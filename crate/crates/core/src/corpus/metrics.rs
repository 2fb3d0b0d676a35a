use serde::Serialize;

use crate::models::SemanticParser;
use crate::mr::{lambda, MrKind};
use crate::par;
use crate::transition::{Ast, AstNode, Composite};

/// Sorts the arguments of every `And`/`Or` by their printed form, bottom-up.
pub fn canonicalize(z: &Ast, kind: MrKind) -> Ast {
    match kind {
        MrKind::Lambda => Ast::new(sort_conjuncts(&z.root)),
        MrKind::PyLite | MrKind::Toy => z.clone(),
    }
}

fn sort_conjuncts(n: &AstNode) -> AstNode {
    let AstNode::Composite(c) = n else {
        return n.clone();
    };
    let mut fields: Vec<Vec<AstNode>> = c
        .fields
        .iter()
        .map(|f| f.iter().map(sort_conjuncts).collect())
        .collect();
    if c.constructor == "And" || c.constructor == "Or" {
        for f in &mut fields {
            let mut keyed: Vec<(String, AstNode)> = f.drain(..).map(|a| (printed(&a), a)).collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            f.extend(keyed.into_iter().map(|k| k.1));
        }
    }
    AstNode::Composite(Composite {
        constructor: c.constructor.clone(),
        fields,
    })
}

fn printed(n: &AstNode) -> String {
    lambda::lf_print(&Ast::new(n.clone())).unwrap_or_else(|_| format!("{n:?}"))
}

/// Equality of canonical forms. With `canonical` off, Lambda ASTs are
/// compared as stored.
pub fn exact_match(pred: &Ast, gold: &Ast, kind: MrKind, canonical: bool) -> bool {
    if pred == gold {
        return true;
    }
    canonical && kind == MrKind::Lambda && canonicalize(pred, kind) == canonicalize(gold, kind)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub matches: usize,
    pub total: usize,
    /// Utterances for which decoding produced no hypothesis.
    pub failed: usize,
    pub flags: Vec<bool>,
}

impl MetricsReport {
    pub fn from_flags(flags: Vec<bool>, failed: usize) -> MetricsReport {
        let matches = flags.iter().filter(|f| **f).count();
        let total = flags.len();
        let accuracy = if total == 0 {
            0.0
        } else {
            matches as f64 / total as f64
        };
        MetricsReport {
            accuracy,
            matches,
            total,
            failed,
            flags,
        }
    }
}

/// Beam-1 predictions for each utterance (`None` when decoding fails).
pub fn predict(parser: &SemanticParser, xs: &[&[String]], max_steps: usize) -> Vec<Option<Ast>> {
    par::map(xs.len(), |i| {
        parser
            .beam_search(xs[i], 1, max_steps)
            .ok()
            .map(|mut h| h.remove(0).ast)
    })
}

/// Exact-match accuracy of beam-1 predictions against gold ASTs.
pub fn evaluate(
    parser: &SemanticParser,
    kind: MrKind,
    data: &[(Vec<String>, Ast)],
    max_steps: usize,
    canonical: bool,
) -> MetricsReport {
    let xs: Vec<&[String]> = data.iter().map(|p| p.0.as_slice()).collect();
    let preds = predict(parser, &xs, max_steps);
    let failed = preds.iter().filter(|p| p.is_none()).count();
    let flags = preds
        .iter()
        .zip(data)
        .map(|(p, (_, g))| {
            p.as_ref()
                .is_some_and(|p| exact_match(p, g, kind, canonical))
        })
        .collect();
    MetricsReport::from_flags(flags, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mr::{lf_parse, pylite_parse};

    #[test]
    fn conjunct_order_is_ignored_when_canonical() {
        let a = lf_parse("(and (flight $0) (weekday $0))").unwrap();
        let b = lf_parse("(and (weekday $0) (flight $0))").unwrap();
        assert!(exact_match(&a, &b, MrKind::Lambda, true));
        assert!(exact_match(&b, &a, MrKind::Lambda, true));
        assert!(!exact_match(&a, &b, MrKind::Lambda, false));
        assert!(exact_match(&a, &a, MrKind::Lambda, false));
    }

    #[test]
    fn nested_conjunctions_are_sorted() {
        let a = lf_parse("(lambda $0 e (or (and (to $0 ci1) (from $0 ci0)) (flight $0)))").unwrap();
        let b = lf_parse("(lambda $0 e (or (flight $0) (and (from $0 ci0) (to $0 ci1))))").unwrap();
        assert!(exact_match(&a, &b, MrKind::Lambda, true));
        let c = lf_parse("(lambda $0 e (or (flight $0) (and (from $0 ci1) (to $0 ci0))))").unwrap();
        assert!(!exact_match(&a, &c, MrKind::Lambda, true));
    }

    #[test]
    fn wrong_program_does_not_match() {
        let gold = pylite_parse("f = os.path.join(p, cmd)").unwrap();
        let pred = pylite_parse("p = path.join(p, cmd)").unwrap();
        assert!(!exact_match(&pred, &gold, MrKind::PyLite, true));
        assert!(exact_match(&gold, &gold.clone(), MrKind::PyLite, true));
    }

    #[test]
    fn report_accuracy() {
        let r = MetricsReport::from_flags(vec![true, false, true, true], 1);
        assert_eq!((r.matches, r.total, r.accuracy), (3, 4, 0.75));
        assert_eq!(MetricsReport::from_flags(vec![], 0).accuracy, 0.0);
    }
}
