//! Deterministic comparison of a submitted class diagram against the
//! scenario's reference solution.
//!
//! Entities are paired by a maximum-weight bipartite matching over name
//! similarity; attributes are paired the same way inside each entity pair;
//! associations match when their endpoints map through entity pairs and their
//! kinds agree. Each layer yields an F1 value and the three are combined into a
//! score between 1 and 10.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::matching::max_weight_matching;
use crate::mermaid::relation_line;
use crate::model::{Association, AssociationKind, ClassModel};
use crate::scenario::OpenQuestion;
use crate::text::find_terms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub entities: f64,
    pub attributes: f64,
    pub associations: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            entities: 0.4,
            attributes: 0.3,
            associations: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingConfig {
    #[serde(default)]
    pub weights: ScoreWeights,
    /// Minimum name similarity for two elements to be paired.
    #[serde(default = "default_threshold")]
    pub match_threshold: f64,
    /// Credit for an association whose kind matches but multiplicities differ.
    #[serde(default = "default_mult_credit")]
    pub multiplicity_mismatch_credit: f64,
}

fn default_threshold() -> f64 {
    0.8
}

fn default_mult_credit() -> f64 {
    0.5
}

impl Default for GradingConfig {
    fn default() -> Self {
        Self {
            weights: ScoreWeights::default(),
            match_threshold: default_threshold(),
            multiplicity_mismatch_credit: default_mult_credit(),
        }
    }
}

impl GradingConfig {
    /// Returns the offending field and a message.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let w = &self.weights;
        for (name, v) in [
            ("weights.entities", w.entities),
            ("weights.attributes", w.attributes),
            ("weights.associations", w.associations),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err((name, format!("{v} is outside [0, 1]")));
            }
        }
        let sum = w.entities + w.attributes + w.associations;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(("weights", format!("weights sum to {sum}, expected 1")));
        }
        if !(self.match_threshold > 0.0 && self.match_threshold <= 1.0) {
            return Err((
                "match_threshold",
                format!("{} is outside (0, 1]", self.match_threshold),
            ));
        }
        if !(0.0..=1.0).contains(&self.multiplicity_mismatch_credit) {
            return Err((
                "multiplicity_mismatch_credit",
                format!("{} is outside [0, 1]", self.multiplicity_mismatch_credit),
            ));
        }
        Ok(())
    }
}

/// Lowercase, drop everything but letters and digits, then strip one
/// trailing `s`.
pub fn normalize_name(name: &str) -> String {
    let mut n: String = name
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    if n.chars().count() > 1 && n.ends_with('s') {
        n.pop();
    }
    n
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Accepted alternative names, keyed and stored in normalized form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymTable {
    table: HashMap<String, HashSet<String>>,
}

impl SynonymTable {
    pub fn new(map: &BTreeMap<String, Vec<String>>) -> Self {
        let mut table: HashMap<String, HashSet<String>> = HashMap::new();
        for (canonical, alternatives) in map {
            table
                .entry(normalize_name(canonical))
                .or_default()
                .extend(alternatives.iter().map(|a| normalize_name(a)));
        }
        Self { table }
    }

    fn accepts(&self, reference_norm: &str, student_norm: &str) -> bool {
        self.table
            .get(reference_norm)
            .is_some_and(|alts| alts.contains(student_norm))
    }
}

/// Similarity in `[0, 1]` between a submitted name and a reference name.
pub fn name_similarity(student: &str, reference: &str, synonyms: &SynonymTable) -> f64 {
    let s = normalize_name(student);
    let r = normalize_name(reference);
    if s == r || synonyms.accepts(&r, &s) {
        return 1.0;
    }
    let longest = s.chars().count().max(r.chars().count());
    1.0 - levenshtein(&s, &r) as f64 / longest as f64
}

/// Pairs names by maximum total similarity over pairs at or above the
/// threshold. Inputs must be sorted; output is ordered by student name.
fn pair_names(
    students: &[&str],
    references: &[&str],
    synonyms: &SynonymTable,
    threshold: f64,
) -> Vec<(usize, usize, f64)> {
    let weights: Vec<Vec<Option<f64>>> = students
        .iter()
        .map(|s| {
            references
                .iter()
                .map(|r| {
                    let sim = name_similarity(s, r, synonyms);
                    (sim >= threshold).then_some(sim)
                })
                .collect()
        })
        .collect();
    max_weight_matching(&weights, references.len())
        .into_iter()
        .map(|(i, j)| (i, j, weights[i][j].expect("matched pairs are allowed")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamePair {
    pub student: String,
    pub reference: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatch {
    pub student_entity: String,
    pub reference_entity: String,
    pub matched: Vec<NamePair>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AssociationQuality {
    Exact,
    KindOkMultWrong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationPair {
    pub student: Association,
    pub reference: Association,
    pub quality: AssociationQuality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub entity_pairs: Vec<NamePair>,
    pub missing_entities: Vec<String>,
    pub extra_entities: Vec<String>,
    pub attribute_matches: Vec<AttributeMatch>,
    pub association_matches: Vec<AssociationPair>,
    pub missing_associations: Vec<Association>,
    pub extra_associations: Vec<Association>,
}

impl MatchReport {
    pub fn matched_attribute_count(&self) -> usize {
        self.attribute_matches.iter().map(|m| m.matched.len()).sum()
    }

    pub fn has_differences(&self) -> bool {
        !(self.missing_entities.is_empty()
            && self.extra_entities.is_empty()
            && self
                .attribute_matches
                .iter()
                .all(|m| m.missing.is_empty() && m.extra.is_empty())
            && self.missing_associations.is_empty()
            && self.extra_associations.is_empty()
            && self
                .association_matches
                .iter()
                .all(|p| p.quality == AssociationQuality::Exact))
    }
}

fn kind_class(kind: AssociationKind) -> AssociationKind {
    match kind {
        AssociationKind::Directed => AssociationKind::Plain,
        k => k,
    }
}

/// Quality of matching a (mapped) student association against a reference
/// one, or `None` if they do not correspond.
fn association_quality(
    student: &Association,
    mapped_source: &str,
    mapped_target: &str,
    reference: &Association,
) -> Option<AssociationQuality> {
    if kind_class(student.kind()) != kind_class(reference.kind())
        || student.is_reflexive() != reference.is_reflexive()
    {
        return None;
    }
    let same_card = |a: &Association, b: &Association, swapped: bool| {
        let (bs, bt) = if swapped {
            (b.target_mult(), b.source_mult())
        } else {
            (b.source_mult(), b.target_mult())
        };
        a.source_mult().normalized() == bs.normalized()
            && a.target_mult().normalized() == bt.normalized()
    };
    let mut best = None;
    let orientations: &[bool] = if kind_class(reference.kind()) == AssociationKind::Plain {
        &[false, true]
    } else {
        &[false]
    };
    for &swapped in orientations {
        let (rs, rt) = if swapped {
            (reference.target(), reference.source())
        } else {
            (reference.source(), reference.target())
        };
        if mapped_source == rs && mapped_target == rt {
            let q = if same_card(student, reference, swapped) {
                AssociationQuality::Exact
            } else {
                AssociationQuality::KindOkMultWrong
            };
            if best != Some(AssociationQuality::Exact) {
                best = Some(q);
            }
        }
    }
    best
}

/// Compares a submission with the reference solution.
pub fn match_models(
    student: &ClassModel,
    reference: &ClassModel,
    synonyms: &SynonymTable,
    config: &GradingConfig,
) -> MatchReport {
    let student_names: Vec<&str> = student.entities().map(|e| e.name()).collect();
    let reference_names: Vec<&str> = reference.entities().map(|e| e.name()).collect();
    let pairs = pair_names(
        &student_names,
        &reference_names,
        synonyms,
        config.match_threshold,
    );

    let mut entity_map: HashMap<&str, &str> = HashMap::new();
    let mut entity_pairs = Vec::new();
    let mut attribute_matches = Vec::new();
    let mut used_ref = vec![false; reference_names.len()];
    let mut used_student = vec![false; student_names.len()];
    for &(i, j, sim) in &pairs {
        let (s_name, r_name) = (student_names[i], reference_names[j]);
        used_student[i] = true;
        used_ref[j] = true;
        entity_map.insert(s_name, r_name);
        entity_pairs.push(NamePair {
            student: s_name.into(),
            reference: r_name.into(),
            similarity: sim,
        });

        let mut s_attrs: Vec<&str> = student
            .entity(s_name)
            .map(|e| e.attributes().iter().map(|a| a.name()).collect())
            .unwrap_or_default();
        let mut r_attrs: Vec<&str> = reference
            .entity(r_name)
            .map(|e| e.attributes().iter().map(|a| a.name()).collect())
            .unwrap_or_default();
        s_attrs.sort_unstable();
        r_attrs.sort_unstable();
        let attr_pairs = pair_names(&s_attrs, &r_attrs, synonyms, config.match_threshold);
        let mut s_used = vec![false; s_attrs.len()];
        let mut r_used = vec![false; r_attrs.len()];
        let matched = attr_pairs
            .iter()
            .map(|&(a, b, sim)| {
                s_used[a] = true;
                r_used[b] = true;
                NamePair {
                    student: s_attrs[a].into(),
                    reference: r_attrs[b].into(),
                    similarity: sim,
                }
            })
            .collect();
        attribute_matches.push(AttributeMatch {
            student_entity: s_name.into(),
            reference_entity: r_name.into(),
            matched,
            missing: unused(&r_attrs, &r_used),
            extra: unused(&s_attrs, &s_used),
        });
    }

    let mut s_assocs: Vec<&Association> = student.associations().iter().collect();
    let mut r_assocs: Vec<&Association> = reference.associations().iter().collect();
    s_assocs.sort();
    r_assocs.sort();
    let weights: Vec<Vec<Option<f64>>> = s_assocs
        .iter()
        .map(|s| {
            let mapped = entity_map
                .get(s.source())
                .zip(entity_map.get(s.target()));
            r_assocs
                .iter()
                .map(|r| {
                    let (ms, mt) = mapped?;
                    association_quality(s, ms, mt, r).map(|q| match q {
                        AssociationQuality::Exact => 2.0,
                        AssociationQuality::KindOkMultWrong => 1.0,
                    })
                })
                .collect()
        })
        .collect();
    let assoc_pairs = max_weight_matching(&weights, r_assocs.len());
    let mut s_used = vec![false; s_assocs.len()];
    let mut r_used = vec![false; r_assocs.len()];
    let association_matches = assoc_pairs
        .into_iter()
        .map(|(a, b)| {
            s_used[a] = true;
            r_used[b] = true;
            AssociationPair {
                student: s_assocs[a].clone(),
                reference: r_assocs[b].clone(),
                quality: if weights[a][b] == Some(2.0) {
                    AssociationQuality::Exact
                } else {
                    AssociationQuality::KindOkMultWrong
                },
            }
        })
        .collect();

    MatchReport {
        entity_pairs,
        missing_entities: unused(&reference_names, &used_ref),
        extra_entities: unused(&student_names, &used_student),
        attribute_matches,
        association_matches,
        missing_associations: r_assocs
            .iter()
            .zip(&r_used)
            .filter(|(_, u)| !**u)
            .map(|(a, _)| (*a).clone())
            .collect(),
        extra_associations: s_assocs
            .iter()
            .zip(&s_used)
            .filter(|(_, u)| !**u)
            .map(|(a, _)| (*a).clone())
            .collect(),
    }
}

fn unused(names: &[&str], used: &[bool]) -> Vec<String> {
    names
        .iter()
        .zip(used)
        .filter(|(_, u)| !**u)
        .map(|(n, _)| n.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreComponents {
    pub entities: f64,
    pub attributes: f64,
    pub associations: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// 1.0 to 10.0, one decimal place.
    pub value: f64,
    pub components: ScoreComponents,
}

/// `2·matched / (submitted + expected)`, or 1 when both are empty.
pub fn f1(matched: f64, submitted: usize, expected: usize) -> f64 {
    if submitted + expected == 0 {
        1.0
    } else {
        2.0 * matched / (submitted + expected) as f64
    }
}

pub fn round_1dp(x: f64) -> f64 {
    // nudge so exact halves survive representation error
    ((x * 10.0) + 1e-9).round() / 10.0
}

pub fn score(
    report: &MatchReport,
    student: &ClassModel,
    reference: &ClassModel,
    config: &GradingConfig,
) -> Score {
    let attr_total = |m: &ClassModel| m.entities().map(|e| e.attributes().len()).sum::<usize>();
    let entities = f1(
        report.entity_pairs.len() as f64,
        student.entities().len(),
        reference.entities().len(),
    );
    let attributes = f1(
        report.matched_attribute_count() as f64,
        attr_total(student),
        attr_total(reference),
    );
    let credit: f64 = report
        .association_matches
        .iter()
        .map(|p| match p.quality {
            AssociationQuality::Exact => 1.0,
            AssociationQuality::KindOkMultWrong => config.multiplicity_mismatch_credit,
        })
        .sum();
    let associations = f1(
        credit,
        student.associations().len(),
        reference.associations().len(),
    );
    let w = &config.weights;
    let raw = 1.0 + 9.0 * (w.entities * entities + w.attributes * attributes + w.associations * associations);
    let mut value = round_1dp(raw).clamp(1.0, 10.0);
    let perfect = entities == 1.0 && attributes == 1.0 && associations == 1.0;
    if !perfect && value >= 10.0 {
        // a perfect mark is reserved for a perfect match
        value = 9.9;
    }
    Score {
        value,
        components: ScoreComponents {
            entities,
            attributes,
            associations,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionCoverage {
    pub id: String,
    pub summary: String,
    pub matched: bool,
    /// Index of the first note that raised this question.
    pub note_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenQuestionCoverage {
    pub questions: Vec<QuestionCoverage>,
    pub coverage_fraction: f64,
}

/// A question counts as raised when some note contains one of its keywords
/// as a whole word or phrase.
pub fn cover_open_questions(notes: &[String], questions: &[OpenQuestion]) -> OpenQuestionCoverage {
    let per_question: Vec<QuestionCoverage> = questions
        .iter()
        .map(|q| {
            let note_index = notes
                .iter()
                .position(|n| !find_terms(&n.to_lowercase(), &q.keywords).is_empty());
            QuestionCoverage {
                id: q.id.clone(),
                summary: q.summary.clone(),
                matched: note_index.is_some(),
                note_index,
            }
        })
        .collect();
    let coverage_fraction = if questions.is_empty() {
        1.0
    } else {
        per_question.iter().filter(|q| q.matched).count() as f64 / questions.len() as f64
    };
    OpenQuestionCoverage {
        questions: per_question,
        coverage_fraction,
    }
}

pub const CAVEAT: &str = "Note: this automated evaluation is approximate and may miss valid alternative designs; it is intended only for information purposes.";

fn section<I: IntoIterator<Item = String>>(out: &mut String, title: &str, items: I) {
    let _ = writeln!(out, "{title}:");
    let mut any = false;
    for item in items {
        any = true;
        let _ = writeln!(out, "  - {item}");
    }
    if !any {
        let _ = writeln!(out, "  (none)");
    }
}

/// Plain-text feedback for a graded submission.
pub fn render_feedback(
    report: &MatchReport,
    score: &Score,
    coverage: &OpenQuestionCoverage,
    low_priority_notes: &[String],
) -> String {
    let mut out = String::new();
    let c = &score.components;
    let _ = writeln!(out, "Score: {:.1} / 10", score.value);
    let _ = writeln!(out, "  entities      {:.2}", c.entities);
    let _ = writeln!(out, "  attributes    {:.2}", c.attributes);
    let _ = writeln!(out, "  associations  {:.2}", c.associations);
    out.push('\n');

    section(&mut out, "Missing entities", report.missing_entities.iter().cloned());
    section(&mut out, "Extra entities", report.extra_entities.iter().cloned());
    section(
        &mut out,
        "Renamed entities",
        report
            .entity_pairs
            .iter()
            .filter(|p| p.student != p.reference)
            .map(|p| format!("{} matched to {}", p.student, p.reference)),
    );
    section(
        &mut out,
        "Missing attributes",
        report.attribute_matches.iter().flat_map(|m| {
            m.missing
                .iter()
                .map(move |a| format!("{}.{}", m.reference_entity, a))
        }),
    );
    section(
        &mut out,
        "Extra attributes",
        report.attribute_matches.iter().flat_map(|m| {
            m.extra
                .iter()
                .map(move |a| format!("{}.{}", m.student_entity, a))
        }),
    );
    section(
        &mut out,
        "Missing associations",
        report.missing_associations.iter().map(relation_line),
    );
    section(
        &mut out,
        "Extra associations",
        report.extra_associations.iter().map(relation_line),
    );
    section(
        &mut out,
        "Multiplicity mismatches",
        report
            .association_matches
            .iter()
            .filter(|p| p.quality == AssociationQuality::KindOkMultWrong)
            .map(|p| {
                format!(
                    "yours `{}`, expected `{}`",
                    relation_line(&p.student),
                    relation_line(&p.reference)
                )
            }),
    );
    out.push('\n');

    let raised = coverage.questions.iter().filter(|q| q.matched).count();
    let _ = writeln!(
        out,
        "Open questions noted: {raised} of {} ({:.0}%)",
        coverage.questions.len(),
        coverage.coverage_fraction * 100.0
    );
    section(
        &mut out,
        "Open questions not noted",
        coverage
            .questions
            .iter()
            .filter(|q| !q.matched)
            .map(|q| format!("{}: {}", q.id, q.summary)),
    );
    if !low_priority_notes.is_empty() {
        section(
            &mut out,
            "Lower-priority notes (recorded, not graded)",
            low_priority_notes.iter().cloned(),
        );
    }
    out.push('\n');
    out.push_str(CAVEAT);
    out.push('\n');
    out
}
