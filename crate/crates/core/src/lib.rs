//! Core of the elicitation trainer: the class-diagram model and its Mermaid
//! form, scenarios, the simulated client, grading and group analytics.

pub mod analytics;
pub mod client_sim;
pub mod clock;
pub mod evaluation;
pub mod grader;
pub mod matching;
pub mod mermaid;
pub mod model;
pub mod prompt;
pub mod scenario;
pub mod text;
#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use evaluation::{evaluate, EvaluationReport, Submission};
pub use mermaid::{parse, serialize, ParseError, ParseErrorKind};
pub use model::ClassModel;
pub use scenario::{load_scenario, Scenario};

pub type DescriptiveStats64 = analytics::DescriptiveStats<f64>;
pub type Histogram64 = analytics::Histogram<f64>;
pub type GroupSummary64 = analytics::GroupSummary<f64>;
