//! Scenario documents: business brief, persona, reference solution, open
//! questions and the complexity envelope the reference must satisfy.
//!
//! A scenario is one JSON file. Only `id`, `brief` and `reference_mermaid`
//! are required; everything else has a default.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client_sim::default_blocklist;
use crate::grader::GradingConfig;
use crate::mermaid::{self, ParseError};
use crate::model::{AssociationKind, ClassModel};

/// Model used when neither the scenario nor the environment names one.
pub const DEFAULT_MODEL: &str = "gpt-4o-2024-08-06";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Temperament {
    #[default]
    Collaborative,
    Vague,
    Combative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verbosity {
    #[default]
    Concise,
    Rambling,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaProfile {
    #[serde(default)]
    pub temperament: Temperament,
    #[serde(default)]
    pub verbosity: Verbosity,
    #[serde(default)]
    pub extra_guidelines: Vec<String>,
}

/// Information deliberately left out of the brief that a good interviewer
/// should notice is missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenQuestion {
    pub id: String,
    pub summary: String,
    pub keywords: Vec<String>,
}

/// Inclusive integer interval, written as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.min <= v && v <= self.max
    }

    fn is_valid(&self) -> bool {
        self.min <= self.max
    }
}

impl From<[usize; 2]> for IntRange {
    fn from([min, max]: [usize; 2]) -> Self {
        Self { min, max }
    }
}

impl From<IntRange> for [usize; 2] {
    fn from(r: IntRange) -> Self {
        [r.min, r.max]
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexitySpec {
    pub entities: IntRange,
    pub attributes_per_entity: IntRange,
    pub associations: IntRange,
    /// Minimum number of associations of each listed kind.
    #[serde(default)]
    pub required_kinds: BTreeMap<AssociationKind, usize>,
    #[serde(default)]
    pub requires_reflexive: bool,
    #[serde(default)]
    pub open_questions: usize,
}

impl ComplexitySpec {
    /// Warm-up interview task: 5-6 entities, 4-5 associations with one
    /// composition, a reflexive and a subclass relationship, two open
    /// questions.
    pub fn warm_up() -> Self {
        Self {
            entities: IntRange::new(5, 6),
            attributes_per_entity: IntRange::new(1, 4),
            associations: IntRange::new(4, 5),
            required_kinds: BTreeMap::from([
                (AssociationKind::Composition, 1),
                (AssociationKind::Inheritance, 1),
            ]),
            requires_reflexive: true,
            open_questions: 2,
        }
    }

    /// Main exercise: 8-9 entities with 2-3 attributes each, 6-7
    /// associations including two compositions, reflexive and subclass
    /// relationships, four open questions.
    pub fn main_exercise() -> Self {
        Self {
            entities: IntRange::new(8, 9),
            attributes_per_entity: IntRange::new(2, 3),
            associations: IntRange::new(6, 7),
            required_kinds: BTreeMap::from([
                (AssociationKind::Composition, 2),
                (AssociationKind::Inheritance, 1),
            ]),
            requires_reflexive: true,
            open_questions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Overrides `LEIA_MODEL` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_reply_tokens")]
    pub max_reply_tokens: u32,
}

fn default_temperature() -> f64 {
    1.0
}

fn default_max_reply_tokens() -> u32 {
    512
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model_name: None,
            temperature: default_temperature(),
            max_reply_tokens: default_max_reply_tokens(),
        }
    }
}

/// On-disk shape of a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDocument {
    id: String,
    brief: String,
    reference_mermaid: String,
    #[serde(default)]
    persona: PersonaProfile,
    #[serde(default)]
    open_questions: Vec<OpenQuestion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    complexity: Option<ComplexitySpec>,
    #[serde(default)]
    synonyms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    model_params: ModelParams,
    #[serde(default)]
    grading: GradingConfig,
    #[serde(default = "default_blocklist")]
    jargon_blocklist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub brief: String,
    pub reference_mermaid: String,
    pub reference: ClassModel,
    pub persona: PersonaProfile,
    pub open_questions: Vec<OpenQuestion>,
    pub complexity: Option<ComplexitySpec>,
    pub synonyms: BTreeMap<String, Vec<String>>,
    pub model_params: ModelParams,
    pub grading: GradingConfig,
    pub jargon_blocklist: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{path}: {message}")]
pub struct ValidationError {
    /// Dotted path to the offending field, e.g. `open_questions[1].keywords`.
    pub path: String,
    pub message: String,
    /// Set when the reference diagram failed to parse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<ParseError>,
}

impl ValidationError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
            parse_error: None,
        }
    }
}

pub fn is_scenario_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

fn is_lower_term(s: &str) -> bool {
    !s.trim().is_empty() && s == s.to_lowercase() && s.trim() == s
}

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario, ValidationError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: ScenarioDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ValidationError::at(
            if path == "." { String::new() } else { path },
            e.into_inner().to_string(),
        )
    })?;

    if !is_scenario_id(&doc.id) {
        return Err(ValidationError::at(
            "id",
            "must be non-empty ASCII letters, digits, '-' or '_'",
        ));
    }
    if doc.brief.trim().is_empty() {
        return Err(ValidationError::at("brief", "must not be empty"));
    }
    let reference = mermaid::parse(&doc.reference_mermaid).map_err(|e| ValidationError {
        path: "reference_mermaid".into(),
        message: e.to_string(),
        parse_error: Some(e),
    })?;

    let mut ids = HashSet::new();
    for (i, q) in doc.open_questions.iter().enumerate() {
        if q.id.trim().is_empty() {
            return Err(ValidationError::at(format!("open_questions[{i}].id"), "must not be empty"));
        }
        if !ids.insert(q.id.as_str()) {
            return Err(ValidationError::at(
                format!("open_questions[{i}].id"),
                format!("duplicate id {:?}", q.id),
            ));
        }
        if q.summary.trim().is_empty() {
            return Err(ValidationError::at(
                format!("open_questions[{i}].summary"),
                "must not be empty",
            ));
        }
        if q.keywords.is_empty() {
            return Err(ValidationError::at(
                format!("open_questions[{i}].keywords"),
                "must list at least one keyword",
            ));
        }
        if let Some((j, _)) = q.keywords.iter().enumerate().find(|(_, k)| !is_lower_term(k)) {
            return Err(ValidationError::at(
                format!("open_questions[{i}].keywords[{j}]"),
                "keywords must be non-empty lowercase strings",
            ));
        }
    }

    if let Some(c) = &doc.complexity {
        for (name, r) in [
            ("entities", c.entities),
            ("attributes_per_entity", c.attributes_per_entity),
            ("associations", c.associations),
        ] {
            if !r.is_valid() {
                return Err(ValidationError::at(
                    format!("complexity.{name}"),
                    format!("lower bound {} exceeds upper bound {}", r.min, r.max),
                ));
            }
        }
    }

    for (key, alternatives) in &doc.synonyms {
        let known = reference.entity(key).is_some()
            || reference
                .entities()
                .any(|e| e.attributes().iter().any(|a| a.name() == key));
        if !known {
            return Err(ValidationError::at(
                format!("synonyms.{key}"),
                "key must name an entity or attribute of the reference",
            ));
        }
        if alternatives.iter().any(|a| a.trim().is_empty()) {
            return Err(ValidationError::at(
                format!("synonyms.{key}"),
                "alternatives must not be empty",
            ));
        }
    }

    let t = doc.model_params.temperature;
    if !(0.0..=2.0).contains(&t) {
        return Err(ValidationError::at(
            "model_params.temperature",
            format!("{t} is outside [0, 2]"),
        ));
    }
    if doc.model_params.max_reply_tokens == 0 {
        return Err(ValidationError::at(
            "model_params.max_reply_tokens",
            "must be positive",
        ));
    }
    if let Some(name) = &doc.model_params.model_name {
        if name.trim().is_empty() {
            return Err(ValidationError::at("model_params.model_name", "must not be empty"));
        }
    }
    doc.grading
        .validate()
        .map_err(|(field, msg)| ValidationError::at(format!("grading.{field}"), msg))?;
    if let Some((i, _)) = doc
        .jargon_blocklist
        .iter()
        .enumerate()
        .find(|(_, t)| !is_lower_term(t))
    {
        return Err(ValidationError::at(
            format!("jargon_blocklist[{i}]"),
            "terms must be non-empty lowercase strings",
        ));
    }

    Ok(Scenario {
        id: doc.id,
        brief: doc.brief,
        reference_mermaid: doc.reference_mermaid,
        reference,
        persona: doc.persona,
        open_questions: doc.open_questions,
        complexity: doc.complexity,
        synonyms: doc.synonyms,
        model_params: doc.model_params,
        grading: doc.grading,
        jargon_blocklist: doc.jargon_blocklist,
    })
}

/// Writes a scenario back to its document form with every field explicit.
pub fn serialize_scenario(s: &Scenario) -> String {
    let doc = ScenarioDocument {
        id: s.id.clone(),
        brief: s.brief.clone(),
        reference_mermaid: s.reference_mermaid.clone(),
        persona: s.persona.clone(),
        open_questions: s.open_questions.clone(),
        complexity: s.complexity.clone(),
        synonyms: s.synonyms.clone(),
        model_params: s.model_params.clone(),
        grading: s.grading.clone(),
        jargon_blocklist: s.jargon_blocklist.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("scenario documents always serialize");
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    EntityCount,
    AttributesPerEntity,
    AssociationCount,
    RequiredKinds,
    Reflexive,
    OpenQuestionCount,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::EntityCount => "entity_count",
            Constraint::AttributesPerEntity => "attributes_per_entity",
            Constraint::AssociationCount => "association_count",
            Constraint::RequiredKinds => "required_kinds",
            Constraint::Reflexive => "reflexive",
            Constraint::OpenQuestionCount => "open_question_count",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ComplexityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, constraint: Constraint) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.constraint == constraint)
    }
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{mark}  {:<22} {}", c.constraint.to_string(), c.detail)?;
        }
        Ok(())
    }
}

pub fn check_complexity(
    reference: &ClassModel,
    spec: &ComplexitySpec,
    open_questions: &[OpenQuestion],
) -> ComplexityReport {
    let mut checks = Vec::new();
    let n = reference.entities().len();
    checks.push(ConstraintCheck {
        constraint: Constraint::EntityCount,
        passed: spec.entities.contains(n),
        detail: format!("{n} entities, expected {}", spec.entities),
    });

    let offenders: Vec<String> = reference
        .entities()
        .filter(|e| !spec.attributes_per_entity.contains(e.attributes().len()))
        .map(|e| format!("{} ({})", e.name(), e.attributes().len()))
        .collect();
    checks.push(ConstraintCheck {
        constraint: Constraint::AttributesPerEntity,
        passed: offenders.is_empty(),
        detail: if offenders.is_empty() {
            format!("all entities have {} attributes", spec.attributes_per_entity)
        } else {
            format!(
                "outside {}: {}",
                spec.attributes_per_entity,
                offenders.join(", ")
            )
        },
    });

    let m = reference.associations().len();
    checks.push(ConstraintCheck {
        constraint: Constraint::AssociationCount,
        passed: spec.associations.contains(m),
        detail: format!("{m} associations, expected {}", spec.associations),
    });

    let mut short = Vec::new();
    for (kind, &needed) in &spec.required_kinds {
        let have = reference
            .associations()
            .iter()
            .filter(|a| a.kind() == *kind)
            .count();
        if have < needed {
            short.push(format!("{kind}: {have} < {needed}"));
        }
    }
    checks.push(ConstraintCheck {
        constraint: Constraint::RequiredKinds,
        passed: short.is_empty(),
        detail: if short.is_empty() {
            "required association kinds present".into()
        } else {
            short.join(", ")
        },
    });

    let has_reflexive = reference.associations().iter().any(|a| a.is_reflexive());
    checks.push(ConstraintCheck {
        constraint: Constraint::Reflexive,
        passed: !spec.requires_reflexive || has_reflexive,
        detail: match (spec.requires_reflexive, has_reflexive) {
            (true, true) => "reflexive association present".into(),
            (true, false) => "no reflexive association".into(),
            (false, _) => "not required".into(),
        },
    });

    let q = open_questions.len();
    checks.push(ConstraintCheck {
        constraint: Constraint::OpenQuestionCount,
        passed: q == spec.open_questions,
        detail: format!("{q} open questions, expected {}", spec.open_questions),
    });

    ComplexityReport { checks }
}

impl Scenario {
    /// Complexity report against the scenario's own envelope, if it has one.
    pub fn complexity_report(&self) -> Option<ComplexityReport> {
        self.complexity
            .as_ref()
            .map(|spec| check_complexity(&self.reference, spec, &self.open_questions))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mermaid::ParseErrorKind;
    use crate::model::{Association, Attribute, Entity};

    const MINIMAL: &str = r#"{
        "id": "tiny",
        "brief": "A single shop.",
        "reference_mermaid": "classDiagram\nclass Shop {\n  name\n}\n"
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.persona.temperament, Temperament::Collaborative);
        assert_eq!(s.persona.verbosity, Verbosity::Concise);
        assert!(s.persona.extra_guidelines.is_empty());
        assert_eq!(s.model_params.temperature, 1.0);
        assert_eq!(s.reference.entities().len(), 1);
        assert_eq!(s.jargon_blocklist, default_blocklist());
    }

    #[test]
    fn missing_header_cites_parse_error() {
        let doc = MINIMAL.replace("classDiagram\\n", "");
        let e = load_scenario(&doc).unwrap_err();
        assert_eq!(e.path, "reference_mermaid");
        assert_eq!(e.parse_error.unwrap().kind, ParseErrorKind::MissingHeader);
        assert!(e.message.contains("MISSING_HEADER"));
    }

    #[test]
    fn schema_errors_carry_paths() {
        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            "\"id\": \"tiny\", \"persona\": {\"temperament\": \"GRUMPY\"},",
        );
        let e = load_scenario(&doc).unwrap_err();
        assert_eq!(e.path, "persona.temperament");

        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            "\"id\": \"tiny\", \"model_params\": {\"temperature\": 2.5},",
        );
        assert_eq!(load_scenario(&doc).unwrap_err().path, "model_params.temperature");

        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            "\"id\": \"tiny\", \"synonyms\": {\"Ghost\": [\"spirit\"]},",
        );
        assert_eq!(load_scenario(&doc).unwrap_err().path, "synonyms.Ghost");

        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            "\"id\": \"tiny\", \"open_questions\": [{\"id\":\"a\",\"summary\":\"s\",\"keywords\":[\"Up\"]}],",
        );
        assert_eq!(
            load_scenario(&doc).unwrap_err().path,
            "open_questions[0].keywords[0]"
        );

        let doc = MINIMAL.replace("\"id\": \"tiny\",", "\"id\": \"tiny\", \"extra\": 1,");
        assert!(load_scenario(&doc).is_err());
        assert!(load_scenario("{ not json").is_err());
    }

    #[test]
    fn duplicate_open_question_ids_rejected() {
        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            r#""id": "tiny", "open_questions": [
                {"id":"a","summary":"s","keywords":["x"]},
                {"id":"a","summary":"t","keywords":["y"]}],"#,
        );
        assert_eq!(load_scenario(&doc).unwrap_err().path, "open_questions[1].id");
    }

    #[test]
    fn synonyms_may_key_attributes() {
        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            "\"id\": \"tiny\", \"synonyms\": {\"name\": [\"title\"], \"Shop\": [\"store\"]},",
        );
        assert!(load_scenario(&doc).is_ok());
    }

    #[test]
    fn serialize_then_load_is_identity() {
        let s = load_scenario(MINIMAL).unwrap();
        let again = load_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, again);
    }

    fn entity(name: &str, attrs: usize) -> Entity {
        Entity::new(
            name,
            (0..attrs)
                .map(|i| Attribute::named(format!("a{i}")).unwrap())
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn questions(n: usize) -> Vec<OpenQuestion> {
        (0..n)
            .map(|i| OpenQuestion {
                id: format!("q{i}"),
                summary: "s".into(),
                keywords: vec!["k".into()],
            })
            .collect()
    }

    #[test]
    fn main_exercise_shape_passes() {
        let names = ["A", "B", "C", "D", "E", "F", "G", "H", "I"];
        let entities: Vec<_> = names
            .iter()
            .enumerate()
            .map(|(i, n)| entity(n, 2 + i % 2))
            .collect();
        use AssociationKind::*;
        let associations = vec![
            Association::simple(Composition, "A", "B"),
            Association::simple(Composition, "C", "D"),
            Association::simple(Inheritance, "E", "F"),
            Association::simple(Plain, "G", "G"),
            Association::simple(Plain, "A", "H"),
            Association::simple(Directed, "H", "I"),
            Association::simple(Aggregation, "I", "C"),
        ];
        let model = ClassModel::new(entities, associations).unwrap();
        let report = check_complexity(&model, &ComplexitySpec::main_exercise(), &questions(4));
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn empty_model_fails_entity_count() {
        let report = check_complexity(
            &ClassModel::empty(),
            &ComplexitySpec::main_exercise(),
            &questions(4),
        );
        assert!(!report.check(Constraint::EntityCount).unwrap().passed);
    }

    #[test]
    fn single_association_fails_warm_up_count() {
        let entities: Vec<_> = ["A", "B", "C", "D", "E"]
            .iter()
            .map(|n| entity(n, 2))
            .collect();
        let model = ClassModel::new(
            entities,
            vec![Association::simple(AssociationKind::Plain, "A", "A")],
        )
        .unwrap();
        let report = check_complexity(&model, &ComplexitySpec::warm_up(), &questions(2));
        assert!(report.check(Constraint::EntityCount).unwrap().passed);
        assert!(report.check(Constraint::Reflexive).unwrap().passed);
        assert!(!report.check(Constraint::AssociationCount).unwrap().passed);
        assert_eq!(report.check(Constraint::AssociationCount), report.failures().find(|c| c.constraint == Constraint::AssociationCount));
    }

    #[test]
    fn complexity_check_is_pure() {
        let model = ClassModel::new([entity("A", 1)], vec![]).unwrap();
        let spec = ComplexitySpec::warm_up();
        assert_eq!(
            check_complexity(&model, &spec, &[]),
            check_complexity(&model, &spec, &[])
        );
    }

    #[test]
    fn inverted_range_is_rejected() {
        let doc = MINIMAL.replace(
            "\"id\": \"tiny\",",
            r#""id": "tiny", "complexity": {"entities":[3,1],"attributes_per_entity":[0,1],"associations":[0,1]},"#,
        );
        assert_eq!(load_scenario(&doc).unwrap_err().path, "complexity.entities");
    }
}
