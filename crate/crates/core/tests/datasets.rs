use std::path::Path;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structvae::corpus::{exact_match, Dataset};
use structvae::grammars;
use structvae::mr::{lf_parse, parse_mr, print_mr, MrKind};
use structvae::transition::random_rollout;

fn bundled(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

#[test]
fn bundled_files_reserialize_byte_for_byte() {
    for (kind, rel) in [
        (MrKind::Lambda, "atis/sample.tsv"),
        (MrKind::Lambda, "atis/reference.tsv"),
        (MrKind::PyLite, "pylite/sample.tsv"),
        (MrKind::PyLite, "pylite/reference.tsv"),
        (MrKind::Toy, "toy/train.tsv"),
        (MrKind::Toy, "toy/dev.tsv"),
        (MrKind::Toy, "toy/test.tsv"),
    ] {
        let text = std::fs::read_to_string(bundled(rel)).unwrap();
        let ds = Dataset::parse_str(&text, kind, true).unwrap();
        assert_eq!(ds.to_tsv().unwrap(), text, "{rel}");
    }
}

#[test]
fn out_of_subset_programs_are_rejected() {
    let text = std::fs::read_to_string(bundled("pylite/out_of_subset.tsv")).unwrap();
    let ds = Dataset::parse_str(&text, MrKind::PyLite, false).unwrap();
    assert!(ds.examples.is_empty());
    assert_eq!(
        ds.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
        vec![1, 2]
    );
}

#[test]
fn toy_corpus_sizes() {
    let n = |rel| {
        Dataset::load(&bundled(rel), MrKind::Toy, true)
            .unwrap()
            .labeled()
            .len()
    };
    assert_eq!(
        (n("toy/train.tsv"), n("toy/dev.tsv"), n("toy/test.tsv")),
        (300, 100, 100)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_lambda_forms_are_stable(seed in any::<u64>()) {
        let g = std::sync::Arc::new(grammars::atis());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Variable slots only accept variables, so every primitive is one.
        let z = random_rollout(&g, &mut rng, 6, &["$0"]).to_ast().unwrap();
        // A bare variable may come back as Variable or Entity depending on
        // context, so compare surface forms.
        let text = print_mr(MrKind::Lambda, &z).unwrap();
        let back = parse_mr(MrKind::Lambda, &text).unwrap();
        prop_assert_eq!(print_mr(MrKind::Lambda, &back).unwrap(), text);
    }

    #[test]
    fn exact_match_ignores_conjunct_order(perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let parts = ["(flight $0)", "(from $0 ci0)", "(to $0 ci1)"];
        let shuffled: Vec<&str> = perm.iter().map(|i| parts[*i]).collect();
        let a = lf_parse(&format!("(lambda $0 e (and {}))", parts.join(" "))).unwrap();
        let b = lf_parse(&format!("(lambda $0 e (and {}))", shuffled.join(" "))).unwrap();
        prop_assert!(exact_match(&a, &b, MrKind::Lambda, true));
        prop_assert!(exact_match(&b, &a, MrKind::Lambda, true));
    }
}
