//! Semi-supervised semantic parsing with tree-structured latent variables.
//!
//! Meaning representations are ASTs under an ASDL grammar, built by a
//! transition system. A parser q(z|x), a reconstruction model p(x|z) and a
//! prior p(z) are trained jointly from labeled and unlabeled utterances.

pub mod asdl;
pub mod config;
pub mod corpus;
pub mod experiment;
pub mod models;
pub mod mr;
pub mod nn;
pub mod par;
pub mod trainer;
pub mod transition;

/// Grammars bundled with the crate.
pub mod grammars {
    use crate::asdl::{parse_grammar, AsdlGrammar};

    pub const ATIS: &str = include_str!("../data/grammars/atis.asdl");
    pub const PYLITE: &str = include_str!("../data/grammars/pylite.asdl");
    pub const TOY: &str = include_str!("../data/grammars/toy.asdl");

    pub fn atis() -> AsdlGrammar {
        parse_grammar(ATIS, "expr").expect("bundled grammar is valid")
    }

    pub fn pylite() -> AsdlGrammar {
        parse_grammar(PYLITE, "stmt").expect("bundled grammar is valid")
    }

    pub fn toy() -> AsdlGrammar {
        parse_grammar(TOY, "cmd").expect("bundled grammar is valid")
    }
}
