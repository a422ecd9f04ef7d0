//! Golden Mermaid fixtures checked against locked parses and against what
//! the mermaid.js class-diagram parser reported for the same text.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::mermaid::{parse, serialize};
use crate::model::{AssociationKind, ClassModel};

#[derive(Debug, Deserialize)]
pub struct OracleClass {
    pub members: Vec<String>,
    pub methods: Vec<String>,
}

#[derive(Debug, Deserialize)]
pub struct OracleRelation {
    pub source: String,
    pub target: String,
    pub kind: String,
    pub source_mult: String,
    pub target_mult: String,
    pub label: String,
}

/// Output of `tools/mermaid-oracle` for one fixture.
#[derive(Debug, Deserialize)]
pub struct OracleOutput {
    pub classes: BTreeMap<String, OracleClass>,
    pub relations: Vec<OracleRelation>,
}

/// `*.mmd` files in `dir`, sorted.
pub fn fixtures(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mmd"))
        .collect();
    files.sort();
    Ok(files)
}

fn kind_name(k: AssociationKind) -> &'static str {
    match k {
        AssociationKind::Plain => "PLAIN",
        AssociationKind::Directed => "DIRECTED",
        AssociationKind::Composition => "COMPOSITION",
        AssociationKind::Aggregation => "AGGREGATION",
        AssociationKind::Inheritance => "INHERITANCE",
    }
}

pub fn agrees_with_oracle(model: &ClassModel, oracle: &OracleOutput) -> Result<(), String> {
    let names: Vec<&str> = model.entities().map(|e| e.name()).collect();
    let oracle_names: Vec<&str> = oracle.classes.keys().map(String::as_str).collect();
    if names != oracle_names {
        return Err(format!("classes {names:?} vs {oracle_names:?}"));
    }
    for e in model.entities() {
        let o = &oracle.classes[e.name()];
        let attrs: Vec<&str> = e.attributes().iter().map(|a| a.name()).collect();
        // mermaid.js keeps the raw member text; the name is its last token
        let o_attrs: Vec<&str> = o
            .members
            .iter()
            .map(|m| m.split_whitespace().last().unwrap_or("").trim_start_matches(['+', '-', '#', '~']))
            .collect();
        if attrs != o_attrs {
            return Err(format!("{} attributes {attrs:?} vs {o_attrs:?}", e.name()));
        }
        if e.methods().len() != o.methods.len() {
            return Err(format!("{} methods {:?} vs {:?}", e.name(), e.methods(), o.methods));
        }
    }
    if model.associations().len() != oracle.relations.len() {
        return Err("relation count differs".into());
    }
    for (a, o) in model.associations().iter().zip(&oracle.relations) {
        let mine = (
            a.source(),
            a.target(),
            kind_name(a.kind()),
            a.source_mult().raw(),
            a.target_mult().raw(),
            a.label().unwrap_or(""),
        );
        let theirs = (
            o.source.as_str(),
            o.target.as_str(),
            o.kind.as_str(),
            o.source_mult.as_str(),
            o.target_mult.as_str(),
            o.label.as_str(),
        );
        if mine != theirs {
            return Err(format!("{mine:?} vs {theirs:?}"));
        }
    }
    Ok(())
}

/// Canonical golden text for a parsed fixture.
pub fn golden_text(model: &ClassModel) -> String {
    serde_json::to_string_pretty(model).expect("models always serialize") + "\n"
}

/// Parses one fixture and checks it against `NN.json`, `NN.mermaidjs.json`
/// and its own canonical round trip.
pub fn check_fixture(mmd: &Path) -> Result<ClassModel, String> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let model = parse(&read(mmd)?).map_err(|e| e.to_string())?;
    if golden_text(&model) != read(&mmd.with_extension("json"))? {
        return Err("differs from golden".into());
    }
    let oracle: OracleOutput =
        serde_json::from_str(&read(&mmd.with_extension("mermaidjs.json"))?).map_err(|e| e.to_string())?;
    agrees_with_oracle(&model, &oracle)?;
    let text = serialize(&model);
    let reparsed = parse(&text).map_err(|e| format!("canonical text: {e}"))?;
    if serialize(&reparsed) != text {
        return Err("canonical serialization is not idempotent".into());
    }
    Ok(model)
}
