//! Synthetic household-command corpus over the toy grammar.
//!
//! Utterances come from verb templates filled with object and place phrases.
//! Each utterance mentions at most two nouns, so with primitive values drawn
//! from those nouns its latent space has at most 32 derivations.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Example};
use crate::mr::MrKind;
use crate::transition::{Ast, AstNode};

const OBJECTS: [&str; 40] = [
    "box", "cup", "book", "lamp", "key", "phone", "mug", "plate", "bowl", "towel", "pillow",
    "blanket", "shoe", "sock", "hat", "bag", "bottle", "jar", "spoon", "fork", "knife", "pan",
    "pot", "kettle", "remote", "charger", "wallet", "umbrella", "ball", "toy", "vase", "candle",
    "brush", "comb", "folder", "pen", "notebook", "basket", "chair", "stool",
];

const PLACES: [&str; 12] = [
    "kitchen", "garage", "bedroom", "hall", "office", "attic", "basement", "porch", "garden",
    "bathroom", "closet", "shelf",
];

const COLORS: [(&str, &str); 3] = [("Red", "red"), ("Blue", "blue"), ("Green", "green")];

const MOVE_VERBS: [&str; 5] = ["move", "put", "bring", "carry", "take"];
const FETCH_VERBS: [&str; 4] = ["fetch", "get", "grab", "retrieve"];
const FIND_VERBS: [&str; 3] = ["find", "locate", "spot"];

/// `(command, template)`; `{v}` is a verb of the command, `{o}` the object
/// phrase and `{p}` the place.
const TEMPLATES: [(&str, &str); 16] = [
    ("Move", "{v} the {o} to the {p}"),
    ("Move", "{v} the {o} into the {p}"),
    ("Move", "please {v} the {o} to the {p}"),
    ("Move", "{v} the {o} over to the {p}"),
    ("Move", "the {o} goes to the {p}"),
    ("Fetch", "{v} the {o}"),
    ("Fetch", "{v} me the {o}"),
    ("Fetch", "please {v} the {o}"),
    ("Fetch", "can you {v} the {o}"),
    ("Fetch", "i need the {o}"),
    ("Find", "{v} the {o}"),
    ("Find", "where is the {o}"),
    ("Find", "look for the {o}"),
    ("Find", "search for the {o}"),
    ("Find", "can you {v} the {o}"),
    ("Find", "help me {v} the {o}"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl Default for ToySizes {
    fn default() -> Self {
        ToySizes {
            train: 400,
            dev: 100,
            test: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

fn generate<R: Rng + ?Sized>(rng: &mut R) -> (String, Ast) {
    let (cmd, template) = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
    let noun = *OBJECTS.choose(rng).expect("nonempty");
    let (obj, phrase) = if rng.gen_bool(0.5) {
        let (ctor, word) = COLORS[rng.gen_range(0..COLORS.len())];
        (
            AstNode::composite(
                "Colored",
                vec![
                    vec![AstNode::composite(ctor, vec![])],
                    vec![AstNode::token(noun)],
                ],
            ),
            format!("{word} {noun}"),
        )
    } else {
        (
            AstNode::composite("Thing", vec![vec![AstNode::token(noun)]]),
            noun.to_string(),
        )
    };
    let verbs: &[&str] = match cmd {
        "Move" => &MOVE_VERBS,
        "Fetch" => &FETCH_VERBS,
        _ => &FIND_VERBS,
    };
    let verb = *verbs.choose(rng).expect("nonempty");
    let mut text = template.replace("{v}", verb).replace("{o}", &phrase);
    let root = if cmd == "Move" {
        let place = *PLACES.choose(rng).expect("nonempty");
        text = text.replace("{p}", place);
        AstNode::composite(
            "Move",
            vec![
                vec![obj],
                vec![AstNode::composite(
                    "Place",
                    vec![vec![AstNode::token(place)]],
                )],
            ],
        )
    } else {
        AstNode::composite(cmd, vec![vec![obj]])
    };
    (text, Ast::new(root))
}

/// Deterministic train/dev/test splits with no utterance shared between them.
pub fn make_toy_task(seed: u64, sizes: ToySizes) -> ToyTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut split = |n: usize| {
        let mut examples = Vec::with_capacity(n);
        while examples.len() < n {
            let (text, ast) = generate(&mut rng);
            if seen.insert(text.clone()) {
                examples.push(Example {
                    utterance: text.split(' ').map(String::from).collect(),
                    mr: Some(ast),
                });
            }
        }
        Dataset::new(MrKind::Toy, examples)
    };
    let train = split(sizes.train);
    let dev = split(sizes.dev);
    let test = split(sizes.test);
    ToyTask { train, dev, test }
}

/// Primitive values of an AST, in order of appearance.
pub fn primitive_values(z: &Ast) -> Vec<String> {
    fn walk(n: &AstNode, out: &mut Vec<String>) {
        match n {
            AstNode::Primitive(toks) => out.extend(toks.iter().cloned()),
            AstNode::Composite(c) => c.fields.iter().flatten().for_each(|m| walk(m, out)),
        }
    }
    let mut out = Vec::new();
    walk(&z.root, &mut out);
    out
}
