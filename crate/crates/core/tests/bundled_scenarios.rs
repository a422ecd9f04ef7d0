use std::path::PathBuf;

use chrono::Utc;
use leia_core::client_sim::{leak_scan, parse_transcript, Role};
use leia_core::model::{AssociationKind, ClassModel};
use leia_core::scenario::{check_complexity, load_scenario, serialize_scenario, Constraint, Scenario};
use leia_core::{evaluate, Submission};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenarios_dir().join(name)).unwrap();
    load_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn bundled() -> [Scenario; 2] {
    [load("session1-grooming.json"), load("session2-bikes.json")]
}

/// Independent traversal of the reference: counts by kind, reflexive count.
fn census(m: &ClassModel) -> (usize, Vec<usize>, usize, usize, usize, usize) {
    let attrs = m.entities().map(|e| e.attributes().len()).collect();
    let kind = |k| m.associations().iter().filter(|a| a.kind() == k).count();
    let reflexive = m.associations().iter().filter(|a| a.source() == a.target()).count();
    (
        m.entities().count(),
        attrs,
        m.associations().len(),
        kind(AssociationKind::Composition),
        kind(AssociationKind::Inheritance),
        reflexive,
    )
}

#[test]
fn warm_up_fixture_counts() {
    let [s1, _] = bundled();
    let (n, attrs, assoc, comp, inh, refl) = census(&s1.reference);
    assert!((5..=6).contains(&n));
    assert!(attrs.iter().all(|a| (1..=4).contains(a)));
    assert!((4..=5).contains(&assoc));
    assert!(comp >= 1 && inh >= 1 && refl >= 1);
    assert_eq!(s1.open_questions.len(), 2);
    assert!(s1.complexity_report().unwrap().passed());
}

#[test]
fn main_exercise_fixture_counts() {
    let [_, s2] = bundled();
    let (n, attrs, assoc, comp, inh, refl) = census(&s2.reference);
    assert!((8..=9).contains(&n));
    assert!(attrs.iter().all(|a| (2..=3).contains(a)));
    assert!((6..=7).contains(&assoc));
    assert!(comp >= 2 && inh >= 1 && refl >= 1);
    assert_eq!(s2.open_questions.len(), 4);
    let report = s2.complexity_report().unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn reference_and_empty_anchor_the_scale() {
    for s in bundled() {
        let own = Submission {
            mermaid_text: s.reference_mermaid.clone(),
            ..Default::default()
        };
        assert_eq!(evaluate(&s, &own).unwrap().score.value, 10.0, "{}", s.id);
        let empty = Submission {
            mermaid_text: "classDiagram".into(),
            ..Default::default()
        };
        assert_eq!(evaluate(&s, &empty).unwrap().score.value, 1.0, "{}", s.id);
    }
}

#[test]
fn scenario_documents_round_trip() {
    for s in bundled() {
        let again = load_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(again, s);
        assert_eq!(serialize_scenario(&again), serialize_scenario(&s));
    }
}

#[test]
fn dropping_an_entity_names_the_entity_constraint() {
    let [_, s2] = bundled();
    let smaller = s2.reference.without_entity("Accessory").without_entity("Store");
    let report = check_complexity(&smaller, s2.complexity.as_ref().unwrap(), &s2.open_questions);
    assert!(!report.passed());
    assert!(report.failures().any(|c| c.constraint == Constraint::EntityCount));
}

#[test]
fn cached_transcript_is_clean_and_alternating() {
    let [_, s2] = bundled();
    let text = std::fs::read_to_string(scenarios_dir().join("session2-bikes.transcript.txt")).unwrap();
    let turns = parse_transcript(&text, Utc::now()).unwrap();
    assert_eq!(turns.len(), 24);
    for (i, t) in turns.iter().enumerate() {
        let expected = if i % 2 == 0 { Role::Engineer } else { Role::Client };
        assert_eq!(t.role, expected);
        if t.role == Role::Client {
            assert!(leak_scan(&t.text, &s2.jargon_blocklist).is_empty(), "{}", t.text);
        }
    }
}
