//! Canonical in-memory UML class-diagram model.
//!
//! The types here carry no Mermaid syntax; [`crate::mermaid`] converts to and
//! from text. Every constructor validates its invariants, so a value of any of
//! these types is always well formed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid name {0:?}")]
    InvalidName(String),
    #[error("duplicate attribute {attribute:?} in entity {entity:?}")]
    DuplicateAttribute { entity: String, attribute: String },
    #[error("duplicate entity {0:?}")]
    DuplicateEntity(String),
    #[error("association endpoint {0:?} is not a declared entity")]
    UnknownEndpoint(String),
    #[error("unknown multiplicity token {0:?}")]
    UnknownMultiplicity(String),
    #[error("inheritance from {source_name:?} to {target:?} must not carry multiplicities")]
    InheritanceMultiplicity { source_name: String, target: String },
}

/// Identifier rule shared by entity and attribute names: non-empty, made of
/// alphanumerics and underscores.
pub fn is_identifier(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Visibility {
    Public,
    Private,
    Protected,
}

impl Visibility {
    pub fn marker(self) -> char {
        match self {
            Visibility::Public => '+',
            Visibility::Private => '-',
            Visibility::Protected => '#',
        }
    }

    pub fn from_marker(c: char) -> Option<Self> {
        match c {
            '+' => Some(Visibility::Public),
            '-' => Some(Visibility::Private),
            '#' => Some(Visibility::Protected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attribute {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    declared_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    visibility: Option<Visibility>,
}

impl Attribute {
    pub fn new(
        name: impl Into<String>,
        declared_type: Option<String>,
        visibility: Option<Visibility>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if let Some(t) = &declared_type {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(ModelError::InvalidName(t.clone()));
            }
        }
        Ok(Self {
            name,
            declared_type,
            visibility,
        })
    }

    /// Name-only attribute.
    pub fn named(name: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(name, None, None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared_type(&self) -> Option<&str> {
        self.declared_type.as_deref()
    }

    pub fn visibility(&self) -> Option<Visibility> {
        self.visibility
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    name: String,
    attributes: Vec<Attribute>,
    /// Method signatures, kept verbatim. Never graded.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    methods: Vec<String>,
}

impl Entity {
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<Attribute>,
        methods: Vec<String>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(ModelError::InvalidName(name));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name()) {
                return Err(ModelError::DuplicateAttribute {
                    entity: name,
                    attribute: a.name().to_string(),
                });
            }
        }
        Ok(Self {
            name,
            attributes,
            methods,
        })
    }

    /// Entity with no attributes or methods.
    pub fn empty(name: impl Into<String>) -> Result<Self, ModelError> {
        Self::new(name, Vec::new(), Vec::new())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cardinality {
    One,
    OptionalOne,
    Many,
    OneOrMore,
    Unspecified,
}

/// Multiplicity on one association end. The raw token is kept so that
/// serialization reproduces exactly what was written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Multiplicity {
    raw: String,
    normalized: Cardinality,
}

impl Multiplicity {
    pub const TOKENS: [&'static str; 7] = ["1", "0..1", "*", "0..*", "1..*", "n", ""];

    pub fn parse(raw: &str) -> Result<Self, ModelError> {
        let normalized = match raw {
            "1" => Cardinality::One,
            "0..1" => Cardinality::OptionalOne,
            "*" | "0..*" | "n" => Cardinality::Many,
            "1..*" => Cardinality::OneOrMore,
            "" => Cardinality::Unspecified,
            other => return Err(ModelError::UnknownMultiplicity(other.to_string())),
        };
        Ok(Self {
            raw: raw.to_string(),
            normalized,
        })
    }

    pub fn unspecified() -> Self {
        Self {
            raw: String::new(),
            normalized: Cardinality::Unspecified,
        }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn normalized(&self) -> Cardinality {
        self.normalized
    }

    pub fn is_unspecified(&self) -> bool {
        self.normalized == Cardinality::Unspecified
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Self::unspecified()
    }
}

impl TryFrom<String> for Multiplicity {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::parse(&value)
    }
}

impl From<Multiplicity> for String {
    fn from(m: Multiplicity) -> Self {
        m.raw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AssociationKind {
    Plain,
    Directed,
    Composition,
    Aggregation,
    Inheritance,
}

impl AssociationKind {
    pub const ALL: [AssociationKind; 5] = [
        AssociationKind::Plain,
        AssociationKind::Directed,
        AssociationKind::Composition,
        AssociationKind::Aggregation,
        AssociationKind::Inheritance,
    ];
}

impl fmt::Display for AssociationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssociationKind::Plain => "PLAIN",
            AssociationKind::Directed => "DIRECTED",
            AssociationKind::Composition => "COMPOSITION",
            AssociationKind::Aggregation => "AGGREGATION",
            AssociationKind::Inheritance => "INHERITANCE",
        };
        f.write_str(s)
    }
}

/// A relationship between two entities.
///
/// For composition and aggregation the source is the whole; for inheritance
/// the source is the parent and the target the child.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Association {
    kind: AssociationKind,
    source: String,
    target: String,
    #[serde(default)]
    source_mult: Multiplicity,
    #[serde(default)]
    target_mult: Multiplicity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Association {
    pub fn new(
        kind: AssociationKind,
        source: impl Into<String>,
        target: impl Into<String>,
        source_mult: Multiplicity,
        target_mult: Multiplicity,
        label: Option<String>,
    ) -> Result<Self, ModelError> {
        let source = source.into();
        let target = target.into();
        if kind == AssociationKind::Inheritance
            && !(source_mult.is_unspecified() && target_mult.is_unspecified())
        {
            return Err(ModelError::InheritanceMultiplicity {
                source_name: source,
                target,
            });
        }
        let label = label.map(|l| l.trim().to_string()).filter(|l| !l.is_empty());
        Ok(Self {
            kind,
            source,
            target,
            source_mult,
            target_mult,
            label,
        })
    }

    /// Association with no multiplicities or label.
    pub fn simple(
        kind: AssociationKind,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self::new(
            kind,
            source,
            target,
            Multiplicity::unspecified(),
            Multiplicity::unspecified(),
            None,
        )
        .expect("unspecified multiplicities are valid for every kind")
    }

    pub fn kind(&self) -> AssociationKind {
        self.kind
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn source_mult(&self) -> &Multiplicity {
        &self.source_mult
    }

    pub fn target_mult(&self) -> &Multiplicity {
        &self.target_mult
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn is_reflexive(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawClassModel", into = "RawClassModel")]
pub struct ClassModel {
    entities: BTreeMap<String, Entity>,
    associations: Vec<Association>,
}

#[derive(Serialize, Deserialize)]
struct RawClassModel {
    entities: Vec<Entity>,
    associations: Vec<Association>,
}

impl TryFrom<RawClassModel> for ClassModel {
    type Error = ModelError;

    fn try_from(raw: RawClassModel) -> Result<Self, Self::Error> {
        // derived Deserialize skips the constructors, so rebuild through them
        let entities = raw
            .entities
            .into_iter()
            .map(|e| {
                let attributes = e
                    .attributes
                    .into_iter()
                    .map(|a| Attribute::new(a.name, a.declared_type, a.visibility))
                    .collect::<Result<Vec<_>, _>>()?;
                Entity::new(e.name, attributes, e.methods)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let associations = raw
            .associations
            .into_iter()
            .map(|a| {
                Association::new(a.kind, a.source, a.target, a.source_mult, a.target_mult, a.label)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ClassModel::new(entities, associations)
    }
}

impl From<ClassModel> for RawClassModel {
    fn from(m: ClassModel) -> Self {
        RawClassModel {
            entities: m.entities.into_values().collect(),
            associations: m.associations,
        }
    }
}

impl ClassModel {
    pub fn new(
        entities: impl IntoIterator<Item = Entity>,
        associations: Vec<Association>,
    ) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for e in entities {
            let name = e.name().to_string();
            if map.insert(name.clone(), e).is_some() {
                return Err(ModelError::DuplicateEntity(name));
            }
        }
        for a in &associations {
            for end in [a.source(), a.target()] {
                if !map.contains_key(end) {
                    return Err(ModelError::UnknownEndpoint(end.to_string()));
                }
            }
        }
        Ok(Self {
            entities: map,
            associations,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Entities in name order.
    pub fn entities(&self) -> impl ExactSizeIterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.get(name)
    }

    pub fn associations(&self) -> &[Association] {
        &self.associations
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Returns a copy without the named entity and every association touching it.
    pub fn without_entity(&self, name: &str) -> Self {
        let mut entities = self.entities.clone();
        entities.remove(name);
        let associations = self
            .associations
            .iter()
            .filter(|a| a.source() != name && a.target() != name)
            .cloned()
            .collect();
        Self {
            entities,
            associations,
        }
    }
}

/// Size metrics compared between study groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub class_count: usize,
    pub total_attribute_count: usize,
}

pub fn model_metrics(model: &ClassModel) -> ModelMetrics {
    ModelMetrics {
        class_count: model.entities.len(),
        total_attribute_count: model.entities().map(|e| e.attributes().len()).sum(),
    }
}

/// Structural equality: same entities with the same attribute sequences, and
/// the same associations as a multiset. Association order and methods are
/// ignored.
pub fn structural_equal(a: &ClassModel, b: &ClassModel) -> bool {
    if a.entities.len() != b.entities.len() || a.associations.len() != b.associations.len() {
        return false;
    }
    let entities_equal = a.entities.iter().all(|(name, ea)| {
        b.entities
            .get(name)
            .is_some_and(|eb| ea.attributes() == eb.attributes())
    });
    if !entities_equal {
        return false;
    }
    let mut counts: HashMap<&Association, isize> = HashMap::new();
    for x in &a.associations {
        *counts.entry(x).or_default() += 1;
    }
    for x in &b.associations {
        *counts.entry(x).or_default() -= 1;
    }
    counts.values().all(|&c| c == 0)
}
