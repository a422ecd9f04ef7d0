//! A student's three deliverables and the report produced from them.

use serde::{Deserialize, Serialize};

use crate::grader::{
    cover_open_questions, match_models, render_feedback, score, MatchReport,
    OpenQuestionCoverage, Score, SynonymTable,
};
use crate::mermaid::{self, ParseError};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub mermaid_text: String,
    #[serde(default)]
    pub open_question_notes: Vec<String>,
    #[serde(default)]
    pub low_priority_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub score: Score,
    #[serde(rename = "match")]
    pub match_report: MatchReport,
    pub coverage: OpenQuestionCoverage,
    pub feedback: String,
}

/// Parses and grades a submission against the scenario's reference.
pub fn evaluate(scenario: &Scenario, submission: &Submission) -> Result<EvaluationReport, ParseError> {
    let student = mermaid::parse(&submission.mermaid_text)?;
    let synonyms = SynonymTable::new(&scenario.synonyms);
    let report = match_models(&student, &scenario.reference, &synonyms, &scenario.grading);
    let s = score(&report, &student, &scenario.reference, &scenario.grading);
    let coverage = cover_open_questions(&submission.open_question_notes, &scenario.open_questions);
    let feedback = render_feedback(&report, &s, &coverage, &submission.low_priority_notes);
    Ok(EvaluationReport {
        score: s,
        match_report: report,
        coverage,
        feedback,
    })
}
