//! Hand-written Mermaid fixtures with locked parse outputs.
//!
//! Each `NN-name.mmd` has a `NN-name.json` holding the expected model and a
//! `NN-name.mermaidjs.json` holding what the mermaid.js class-diagram parser
//! reported for the same text (classes, members, relation types,
//! cardinalities, labels). Set `LEIA_BLESS=1` to rewrite the model goldens.

use std::path::{Path, PathBuf};

use leia_core::mermaid::parse;
use leia_core::model::{AssociationKind, ClassModel};
use leia_core::testkit::oracle::{check_fixture, fixtures, golden_text};

fn corpus() -> Vec<PathBuf> {
    fixtures(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")).unwrap()
}

#[test]
fn corpus_matches_locked_outputs() {
    let files = corpus();
    assert!(files.len() >= 20, "corpus has {} fixtures", files.len());
    if std::env::var_os("LEIA_BLESS").is_some() {
        for mmd in &files {
            let model = parse(&std::fs::read_to_string(mmd).unwrap()).unwrap();
            std::fs::write(mmd.with_extension("json"), golden_text(&model)).unwrap();
        }
    }
    let failures: Vec<String> = files
        .iter()
        .filter_map(|mmd| check_fixture(mmd).err().map(|e| format!("{}: {e}", mmd.display())))
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn corpus_covers_every_operator_and_multiplicity() {
    let models: Vec<ClassModel> = corpus()
        .iter()
        .map(|p| parse(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect();
    let assocs = || models.iter().flat_map(|m| m.associations());
    for kind in AssociationKind::ALL {
        assert!(assocs().any(|a| a.kind() == kind), "{kind:?}");
    }
    for token in leia_core::model::Multiplicity::TOKENS {
        assert!(
            assocs().any(|a| a.source_mult().raw() == token || a.target_mult().raw() == token),
            "{token:?}"
        );
    }
    assert!(assocs().any(|a| a.is_reflexive()));
}
