//! Parser and serializer for the Mermaid `classDiagram` subset used in
//! submissions.
//!
//! ```text
//! classDiagram
//! %% comment
//! class Customer {
//!     +String name
//!     email
//!     placeOrder()
//! }
//! Customer "1" -- "0..*" Order : places
//! Product <|-- Plant
//! Order *-- "1..*" OrderLine
//! ```
//!
//! Relation operators: `<|--` inheritance (left is the parent), `*--`
//! composition and `o--` aggregation (left is the whole), `--` plain and
//! `-->` directed. Classes referenced only by relations are declared
//! implicitly. Parsing stops at the first error.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    is_identifier, Association, AssociationKind, Attribute, ClassModel, Entity, Multiplicity,
    Visibility,
};

pub const HEADER: &str = "classDiagram";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseErrorKind {
    MissingHeader,
    BadStatement,
    BadMultiplicity,
    DuplicateClass,
    UnclosedBlock,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::MissingHeader => "MISSING_HEADER",
            ParseErrorKind::BadStatement => "BAD_STATEMENT",
            ParseErrorKind::BadMultiplicity => "BAD_MULTIPLICITY",
            ParseErrorKind::DuplicateClass => "DUPLICATE_CLASS",
            ParseErrorKind::UnclosedBlock => "UNCLOSED_BLOCK",
        };
        f.write_str(s)
    }
}

/// First error found in a diagram. Line and column are 1-based and count
/// characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(kind: ParseErrorKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
            kind,
        }
    }
}

const OPERATORS: [(&str, AssociationKind); 5] = [
    ("<|--", AssociationKind::Inheritance),
    ("*--", AssociationKind::Composition),
    ("o--", AssociationKind::Aggregation),
    ("-->", AssociationKind::Directed),
    ("--", AssociationKind::Plain),
];

fn operator(kind: AssociationKind) -> &'static str {
    OPERATORS
        .iter()
        .find(|(_, k)| *k == kind)
        .map(|(op, _)| *op)
        .expect("every kind has an operator")
}

#[derive(Default)]
struct PendingEntity {
    attributes: Vec<Attribute>,
    methods: Vec<String>,
    explicit: bool,
}

struct OpenBlock {
    name: String,
    line: usize,
    column: usize,
}

#[derive(Default)]
struct Builder {
    order: Vec<String>,
    entities: HashMap<String, PendingEntity>,
    associations: Vec<Association>,
}

impl Builder {
    fn touch(&mut self, name: &str) -> &mut PendingEntity {
        if !self.entities.contains_key(name) {
            self.order.push(name.to_string());
        }
        self.entities.entry(name.to_string()).or_default()
    }
}

/// Character cursor over one trimmed line; `offset` is the number of
/// characters trimmed from the left so columns refer to the raw line.
struct Cursor {
    chars: Vec<char>,
    pos: usize,
    offset: usize,
    line: usize,
}

impl Cursor {
    fn new(text: &str, offset: usize, line: usize) -> Self {
        Self {
            chars: text.chars().collect(),
            pos: 0,
            offset,
            line,
        }
    }

    fn column(&self) -> usize {
        self.offset + self.pos + 1
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .enumerate()
            .all(|(k, c)| self.chars.get(self.pos + k) == Some(&c))
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError::new(kind, self.line, self.column(), message)
    }

    /// Optional `"..."` multiplicity token.
    fn multiplicity(&mut self) -> Result<Option<(Multiplicity, usize)>, ParseError> {
        if self.peek() != Some('"') {
            return Ok(None);
        }
        let column = self.column();
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c != '"') {
            self.pos += 1;
        }
        if self.at_end() {
            return Err(ParseError::new(
                ParseErrorKind::BadStatement,
                self.line,
                column,
                "unterminated multiplicity quote",
            ));
        }
        let raw: String = self.chars[start..self.pos].iter().collect();
        self.pos += 1;
        let mult = Multiplicity::parse(&raw).map_err(|_| {
            ParseError::new(
                ParseErrorKind::BadMultiplicity,
                self.line,
                column,
                format!("unknown multiplicity \"{raw}\""),
            )
        })?;
        Ok(Some((mult, column)))
    }
}

fn leading_ws(line: &str) -> usize {
    line.chars().take_while(|c| c.is_whitespace()).count()
}

/// Parses a diagram into a validated [`ClassModel`].
pub fn parse(src: &str) -> Result<ClassModel, ParseError> {
    let lines: Vec<&str> = src
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .collect();

    let mut builder = Builder::default();
    let mut header_seen = false;
    let mut block: Option<OpenBlock> = None;

    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with("%%") {
            continue;
        }
        let offset = leading_ws(raw);

        if !header_seen {
            if text != HEADER {
                return Err(ParseError::new(
                    ParseErrorKind::MissingHeader,
                    line_no,
                    offset + 1,
                    format!("expected `{HEADER}` as the first statement"),
                ));
            }
            header_seen = true;
            continue;
        }

        if let Some(open) = &block {
            if text == "}" {
                block = None;
                continue;
            }
            if text.starts_with("class ") || text == HEADER {
                return Err(ParseError::new(
                    ParseErrorKind::UnclosedBlock,
                    open.line,
                    open.column,
                    format!("block for class {} is not closed", open.name),
                ));
            }
            let name = open.name.clone();
            parse_member(&mut builder, &name, text, offset, line_no)?;
            continue;
        }

        let mut cur = Cursor::new(text, offset, line_no);
        if text == HEADER {
            return Err(cur.error(ParseErrorKind::BadStatement, "repeated header"));
        }
        if text.starts_with("class") && text[5..].starts_with(char::is_whitespace) {
            cur.pos = 5;
            cur.skip_ws();
            let column = cur.column();
            let name = cur
                .ident()
                .ok_or_else(|| cur.error(ParseErrorKind::BadStatement, "expected class name"))?;
            cur.skip_ws();
            if cur.peek() == Some('{') {
                let brace_col = cur.column();
                cur.pos += 1;
                cur.skip_ws();
                if cur.peek() == Some('}') {
                    cur.pos += 1;
                    cur.skip_ws();
                } else {
                    block = Some(OpenBlock {
                        name: name.clone(),
                        line: line_no,
                        column: brace_col,
                    });
                }
            }
            if !cur.at_end() {
                return Err(cur.error(
                    ParseErrorKind::BadStatement,
                    "unexpected text after class declaration",
                ));
            }
            let entry = builder.touch(&name);
            if entry.explicit {
                return Err(ParseError::new(
                    ParseErrorKind::DuplicateClass,
                    line_no,
                    column,
                    format!("class {name} is declared more than once"),
                ));
            }
            entry.explicit = true;
            continue;
        }

        let association = parse_relation(&mut cur)?;
        builder.touch(association.source());
        builder.touch(association.target());
        builder.associations.push(association);
    }

    if !header_seen {
        let (line, column) = lines
            .iter()
            .enumerate()
            .find(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, leading_ws(l) + 1))
            .unwrap_or((1, 1));
        return Err(ParseError::new(
            ParseErrorKind::MissingHeader,
            line,
            column,
            format!("missing `{HEADER}` header"),
        ));
    }
    if let Some(open) = block {
        return Err(ParseError::new(
            ParseErrorKind::UnclosedBlock,
            open.line,
            open.column,
            format!("block for class {} is not closed", open.name),
        ));
    }

    let Builder {
        order,
        mut entities,
        associations,
    } = builder;
    let entities = order
        .into_iter()
        .map(|name| {
            let pending = entities.remove(&name).unwrap_or_default();
            Entity::new(name, pending.attributes, pending.methods)
        })
        .collect::<Result<Vec<_>, _>>()
        .expect("names and attributes were validated while parsing");
    Ok(ClassModel::new(entities, associations).expect("endpoints are declared while parsing"))
}

fn parse_member(
    builder: &mut Builder,
    entity: &str,
    text: &str,
    offset: usize,
    line: usize,
) -> Result<(), ParseError> {
    let bad = |column: usize, msg: String| {
        ParseError::new(ParseErrorKind::BadStatement, line, column, msg)
    };
    if let Some(open) = text.find('(') {
        if text[open..].contains(')') {
            builder.touch(entity).methods.push(text.to_string());
            return Ok(());
        }
    }

    let mut rest = text;
    let mut column = offset + 1;
    let mut visibility = None;
    if let Some(v) = rest.chars().next().and_then(Visibility::from_marker) {
        visibility = Some(v);
        rest = &rest[1..];
        column += 1 + leading_ws(rest);
        rest = rest.trim_start();
    }
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    let (declared_type, name) = match tokens.as_slice() {
        [name] => (None, *name),
        [ty, name] => (Some(ty.to_string()), *name),
        [] => return Err(bad(column, "empty attribute".into())),
        _ => {
            return Err(bad(
                column,
                "attribute must be `[visibility] [type] name`".into(),
            ))
        }
    };
    if let Some(ty) = &declared_type {
        if ty.chars().any(|c| matches!(c, '{' | '}' | '"' | ':')) {
            return Err(bad(column, format!("invalid attribute type {ty:?}")));
        }
    }
    let name_column = offset + 1 + char_index_of_last_token(text);
    if !is_identifier(name) {
        return Err(bad(name_column, format!("invalid attribute name {name:?}")));
    }
    let entry = builder.touch(entity);
    if entry.attributes.iter().any(|a| a.name() == name) {
        return Err(bad(
            name_column,
            format!("attribute {name} repeated in class {entity}"),
        ));
    }
    let attribute = Attribute::new(name, declared_type, visibility)
        .map_err(|e| bad(column, e.to_string()))?;
    entry.attributes.push(attribute);
    Ok(())
}

fn char_index_of_last_token(text: &str) -> usize {
    let trimmed = text.trim_end();
    let start = trimmed
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace() || Visibility::from_marker(*c).is_some())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    trimmed[..start].chars().count()
}

fn parse_relation(cur: &mut Cursor) -> Result<Association, ParseError> {
    let source = cur
        .ident()
        .ok_or_else(|| cur.error(ParseErrorKind::BadStatement, "unrecognized statement"))?;
    cur.skip_ws();
    let source_mult = cur.multiplicity()?;
    cur.skip_ws();
    let op_column = cur.column();
    let kind = OPERATORS
        .iter()
        .find(|(op, _)| cur.starts_with(op))
        .map(|(op, kind)| {
            cur.pos += op.chars().count();
            *kind
        })
        .ok_or_else(|| cur.error(ParseErrorKind::BadStatement, "expected relation operator"))?;
    cur.skip_ws();
    let target_mult = cur.multiplicity()?;
    cur.skip_ws();
    let target = cur.ident().ok_or_else(|| {
        cur.error(
            ParseErrorKind::BadStatement,
            "expected class name after relation operator",
        )
    })?;
    cur.skip_ws();
    let label = if cur.peek() == Some(':') {
        cur.pos += 1;
        let label: String = cur.chars[cur.pos..].iter().collect();
        let label = label.trim().to_string();
        if label.is_empty() {
            return Err(cur.error(ParseErrorKind::BadStatement, "empty relation label"));
        }
        cur.pos = cur.chars.len();
        Some(label)
    } else {
        None
    };
    if !cur.at_end() {
        return Err(cur.error(
            ParseErrorKind::BadStatement,
            "unexpected text after relation",
        ));
    }

    if kind == AssociationKind::Inheritance {
        for (m, column) in [&source_mult, &target_mult].into_iter().flatten() {
            if !m.is_unspecified() {
                return Err(ParseError::new(
                    ParseErrorKind::BadMultiplicity,
                    cur.line,
                    *column,
                    "inheritance does not take multiplicities",
                ));
            }
        }
    }
    Association::new(
        kind,
        source,
        target,
        source_mult.map(|(m, _)| m).unwrap_or_default(),
        target_mult.map(|(m, _)| m).unwrap_or_default(),
        label,
    )
    .map_err(|e| ParseError::new(ParseErrorKind::BadStatement, cur.line, op_column, e.to_string()))
}

/// Canonical text for a model: classes in name order, each as a block, then
/// relations in model order. Always ends with a newline.
pub fn serialize(model: &ClassModel) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for entity in model.entities() {
        out.push_str("class ");
        out.push_str(entity.name());
        out.push_str(" {\n");
        for a in entity.attributes() {
            out.push_str("    ");
            if let Some(v) = a.visibility() {
                out.push(v.marker());
            }
            if let Some(t) = a.declared_type() {
                out.push_str(t);
                out.push(' ');
            }
            out.push_str(a.name());
            out.push('\n');
        }
        for m in entity.methods() {
            out.push_str("    ");
            out.push_str(m);
            out.push('\n');
        }
        out.push_str("}\n");
    }
    for a in model.associations() {
        out.push_str(&relation_line(a));
        out.push('\n');
    }
    out
}

pub fn relation_line(a: &Association) -> String {
    let mut line = String::from(a.source());
    if !a.source_mult().raw().is_empty() {
        line.push_str(&format!(" \"{}\"", a.source_mult().raw()));
    }
    line.push(' ');
    line.push_str(operator(a.kind()));
    if !a.target_mult().raw().is_empty() {
        line.push_str(&format!(" \"{}\"", a.target_mult().raw()));
    }
    line.push(' ');
    line.push_str(a.target());
    if let Some(label) = a.label() {
        line.push_str(" : ");
        line.push_str(label);
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{structural_equal, Cardinality};

    fn err(src: &str) -> ParseError {
        parse(src).unwrap_err()
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse("classDiagram").unwrap().is_empty());
        assert!(parse("\n%% note\n  classDiagram  \n\n").unwrap().is_empty());
    }

    #[test]
    fn customer_order_example() {
        let src = "classDiagram\nclass Customer {\n  name\n  email\n}\nCustomer \"1\" -- \"0..*\" Order : places";
        let m = parse(src).unwrap();
        let customer = m.entity("Customer").unwrap();
        let names: Vec<_> = customer.attributes().iter().map(|a| a.name()).collect();
        assert_eq!(names, ["name", "email"]);
        assert!(m.entity("Order").unwrap().attributes().is_empty());
        let a = &m.associations()[0];
        assert_eq!(a.kind(), AssociationKind::Plain);
        assert_eq!((a.source(), a.target()), ("Customer", "Order"));
        assert_eq!(a.source_mult().normalized(), Cardinality::One);
        assert_eq!(a.target_mult().normalized(), Cardinality::Many);
        assert_eq!(a.label(), Some("places"));
    }

    #[test]
    fn inheritance_parent_is_source() {
        let m = parse("classDiagram\nA <|-- B").unwrap();
        let a = &m.associations()[0];
        assert_eq!(a.kind(), AssociationKind::Inheritance);
        assert_eq!((a.source(), a.target()), ("A", "B"));
        assert!(serialize(&m).lines().any(|l| l == "A <|-- B"));
    }

    #[test]
    fn empty_model_serializes_to_header() {
        assert_eq!(serialize(&ClassModel::empty()), "classDiagram\n");
    }

    #[test]
    fn crlf_is_accepted() {
        let m = parse("classDiagram\r\nclass A {\r\n  x\r\n}\r\nA -- A\r\n").unwrap();
        assert_eq!(m.entity("A").unwrap().attributes()[0].name(), "x");
        assert!(m.associations()[0].is_reflexive());
    }

    #[test]
    fn members_with_visibility_types_and_methods() {
        let src = "classDiagram\nclass A {\n    +String name\n    -int age\n    #flag\n    +total() double\n}\n";
        let m = parse(src).unwrap();
        let e = m.entity("A").unwrap();
        let a = &e.attributes()[0];
        assert_eq!(a.visibility(), Some(Visibility::Public));
        assert_eq!(a.declared_type(), Some("String"));
        assert_eq!(a.name(), "name");
        assert_eq!(e.attributes()[1].visibility(), Some(Visibility::Private));
        assert_eq!(e.attributes()[2].declared_type(), None);
        assert_eq!(e.methods(), ["+total() double"]);
        let again = parse(&serialize(&m)).unwrap();
        assert_eq!(again.entity("A").unwrap().methods(), e.methods());
        assert!(structural_equal(&m, &again));
    }

    #[test]
    fn missing_header_position() {
        let e = err("\n\n   class A\n");
        assert_eq!(e.kind, ParseErrorKind::MissingHeader);
        assert_eq!((e.line, e.column), (3, 4));
        let e = err("");
        assert_eq!((e.kind, e.line, e.column), (ParseErrorKind::MissingHeader, 1, 1));
    }

    #[test]
    fn bad_multiplicity_points_at_quote() {
        let e = err("classDiagram\nA \"2..5\" -- B");
        assert_eq!(e.kind, ParseErrorKind::BadMultiplicity);
        assert_eq!((e.line, e.column), (2, 3));
        let e = err("classDiagram\nA \"1\" <|-- B");
        assert_eq!(e.kind, ParseErrorKind::BadMultiplicity);
    }

    #[test]
    fn duplicate_class_is_an_error() {
        let e = err("classDiagram\nclass A\nclass A {\n}\n");
        assert_eq!(e.kind, ParseErrorKind::DuplicateClass);
        assert_eq!((e.line, e.column), (3, 7));
        // implicit first, explicit later is fine
        let m = parse("classDiagram\nA -- B\nclass A {\n  x\n}\n").unwrap();
        assert_eq!(m.entity("A").unwrap().attributes().len(), 1);
    }

    #[test]
    fn unclosed_block() {
        let e = err("classDiagram\nclass A {\n  x\n");
        assert_eq!(e.kind, ParseErrorKind::UnclosedBlock);
        assert_eq!((e.line, e.column), (2, 9));
        let e = err("classDiagram\nclass A {\n  x\nclass B {\n}\n");
        assert_eq!(e.kind, ParseErrorKind::UnclosedBlock);
        assert_eq!(e.line, 2);
    }

    #[test]
    fn bad_statements() {
        for src in [
            "classDiagram\ndirection LR",
            "classDiagram\nA ..> B",
            "classDiagram\nA --|> B",
            "classDiagram\nA -- ",
            "classDiagram\nA -- B :",
            "classDiagram\nclass A {\n  a b c\n}",
            "classDiagram\nclass A {\n  x\n  x\n}",
            "classDiagram\n}",
            "classDiagram\nclassDiagram",
            "classDiagram\nA \"1 -- B",
        ] {
            assert_eq!(err(src).kind, ParseErrorKind::BadStatement, "{src:?}");
        }
    }

    #[test]
    fn stops_at_first_error() {
        let e = err("classDiagram\nA ..> B\nC \"9\" -- D");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn relation_without_spaces_and_all_operators() {
        let m = parse(
            "classDiagram\nA\"1\"--\"*\"B\nA *-- C\nA o-- D\nA --> E\nA <|-- F\nA -- A",
        )
        .unwrap();
        let kinds: Vec<_> = m.associations().iter().map(|a| a.kind()).collect();
        assert_eq!(
            kinds,
            [
                AssociationKind::Plain,
                AssociationKind::Composition,
                AssociationKind::Aggregation,
                AssociationKind::Directed,
                AssociationKind::Inheritance,
                AssociationKind::Plain,
            ]
        );
        assert_eq!(m.associations()[0].target_mult().raw(), "*");
    }

    #[test]
    fn error_positions_count_characters() {
        let e = err("classDiagram\nÁrbol \"x\" -- B");
        assert_eq!((e.line, e.column), (2, 7));
    }
}
