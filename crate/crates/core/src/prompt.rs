//! System prompts that condition the chat model to play the client, or to
//! write a whole two-party interview.
//!
//! The reference solution reaches the model only as a list of plain business
//! facts produced by [`business_digest`]; no diagram syntax or modelling
//! vocabulary is embedded.

use std::fmt::Write;

use crate::model::{AssociationKind, Cardinality, ClassModel, Multiplicity};
use crate::scenario::{Scenario, Temperament, Verbosity};

/// Behaviour rules every simulated client follows.
pub const GUIDELINES: [&str; 5] = [
    "Never say or hint that you are an AI, a language model or a program. You are a real person who owns this business.",
    "You have no technical knowledge of software engineering, so you cannot answer technical questions from the interviewer or confirm technical choices they suggest; say you would leave that to them.",
    "Keep your replies natural, concise, and conversational, the way people talk. Do not answer with lists or long explanations.",
    "Do not guide the conversation: answer only what you are asked, never offer more information than was requested, and stay away from technical terms and technical topics.",
    "When a question is vague or very broad, give a general answer and request clarification, as someone without technical background would.",
];

pub const DIGEST_HEADING: &str = "WHAT YOU KNOW ABOUT YOUR BUSINESS";
pub const WITHHOLD_HEADING: &str = "THINGS YOU ONLY MENTION IF ASKED DIRECTLY";

const COLLABORATIVE: &str = "Temperament: you are friendly and cooperative. You are glad someone is helping you and you try to answer each question honestly, even when you are unsure.";
const VAGUE: &str = "Temperament: you are a little scattered. Your first answer to a question is often vague or incomplete, and you only get specific when the interviewer asks a follow-up question.";
const COMBATIVE: &str = "Temperament: you are busy and somewhat impatient. You push back on questions that seem pointless, you sometimes complain about past software that did not work, and you need convincing before you give details.";

const CONCISE: &str = "Style: keep answers short, one to three sentences, with the occasional filler word (\"well\", \"you know\").";
const RAMBLING: &str = "Style: you tend to ramble, wandering into anecdotes about your day before getting to the point, with plenty of filler words.";

pub fn temperament_directive(t: Temperament) -> &'static str {
    match t {
        Temperament::Collaborative => COLLABORATIVE,
        Temperament::Vague => VAGUE,
        Temperament::Combative => COMBATIVE,
    }
}

pub fn verbosity_directive(v: Verbosity) -> &'static str {
    match v {
        Verbosity::Concise => CONCISE,
        Verbosity::Rambling => RAMBLING,
    }
}

/// `OrderLine` -> `order line`, `gift_card` -> `gift card`.
pub fn humanize(identifier: &str) -> String {
    let mut out = String::new();
    let mut prev: Option<char> = None;
    for c in identifier.chars() {
        if c == '_' {
            if !out.ends_with(' ') && !out.is_empty() {
                out.push(' ');
            }
            prev = Some(c);
            continue;
        }
        if c.is_uppercase()
            && prev.is_some_and(|p| p.is_lowercase() || p.is_ascii_digit())
            && !out.ends_with(' ')
        {
            out.push(' ');
        }
        out.extend(c.to_lowercase());
        prev = Some(c);
    }
    out.trim().to_string()
}

fn plural(noun: &str) -> String {
    if noun.ends_with('s') || noun.ends_with('x') || noun.ends_with("ch") || noun.ends_with("sh") {
        format!("{noun}es")
    } else if noun.ends_with('y')
        && !noun.ends_with("ay")
        && !noun.ends_with("ey")
        && !noun.ends_with("oy")
    {
        format!("{}ies", &noun[..noun.len() - 1])
    } else {
        format!("{noun}s")
    }
}

/// Quantity phrase for how many `noun`s sit on one end.
fn quantity(m: &Multiplicity, noun: &str) -> String {
    match m.normalized() {
        Cardinality::One => format!("exactly one {noun}"),
        Cardinality::OptionalOne => format!("at most one {noun}"),
        Cardinality::Many => format!("any number of {}", plural(noun)),
        Cardinality::OneOrMore => format!("at least one {noun}"),
        Cardinality::Unspecified => format!("some {}", plural(noun)),
    }
}

fn list_phrase(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

/// Re-words the reference solution as plain statements about the business.
pub fn business_digest(model: &ClassModel) -> Vec<String> {
    let mut facts = Vec::new();
    for e in model.entities() {
        let noun = humanize(e.name());
        if e.attributes().is_empty() {
            facts.push(format!("You keep track of {}.", plural(&noun)));
        } else {
            let details: Vec<String> = e.attributes().iter().map(|a| humanize(a.name())).collect();
            facts.push(format!(
                "For every {noun} you need to know its {}.",
                list_phrase(&details)
            ));
        }
    }
    for a in model.associations() {
        let src = humanize(a.source());
        let tgt = humanize(a.target());
        let how = a
            .label()
            .map(|l| format!(" (in your words: \"{}\")", l))
            .unwrap_or_default();
        let fact = match a.kind() {
            AssociationKind::Plain | AssociationKind::Directed if a.is_reflexive() => format!(
                "A {src} can be linked to {} of the same sort{how}.",
                quantity(a.target_mult(), "other one")
            ),
            AssociationKind::Plain | AssociationKind::Directed => format!(
                "Each {src} goes with {}{how}, and each {tgt} goes with {}.",
                quantity(a.target_mult(), &tgt),
                quantity(a.source_mult(), &src)
            ),
            AssociationKind::Composition => format!(
                "A {src} is made up of {}{how}; those only exist as part of their {src} and go away with it.",
                quantity(a.target_mult(), &tgt)
            ),
            AssociationKind::Aggregation => format!(
                "A {src} brings together {}{how}, but they also exist on their own.",
                quantity(a.target_mult(), &tgt)
            ),
            AssociationKind::Inheritance => format!(
                "A {tgt} is a particular kind of {src}: it has everything a {src} has, plus its own details."
            ),
        };
        facts.push(fact);
    }
    facts
}

/// System prompt for the live interview.
pub fn build_client_prompt(s: &Scenario) -> String {
    let mut p = String::new();
    p.push_str(
        "You are role-playing the owner of a small business who wants software built to support how the business works. \
         A software engineer is about to interview you to understand your needs.\n\n",
    );
    p.push_str("ABOUT YOUR BUSINESS\n");
    p.push_str(s.brief.trim());
    p.push_str("\n\n");

    p.push_str("HOW YOU BEHAVE\n");
    for g in GUIDELINES {
        let _ = writeln!(p, "- {g}");
    }
    let _ = writeln!(p, "- {}", temperament_directive(s.persona.temperament));
    let _ = writeln!(p, "- {}", verbosity_directive(s.persona.verbosity));
    for extra in &s.persona.extra_guidelines {
        let _ = writeln!(p, "- {extra}");
    }
    p.push('\n');

    p.push_str(DIGEST_HEADING);
    p.push_str(
        "\nThese are facts about how your business works. Share them a little at a time, only as the interviewer asks about them, and in your own everyday words.\n",
    );
    for fact in business_digest(&s.reference) {
        let _ = writeln!(p, "- {fact}");
    }
    p.push('\n');

    if !s.open_questions.is_empty() {
        p.push_str(WITHHOLD_HEADING);
        p.push_str(
            "\nDo not bring these up yourself. Only share one when the interviewer asks a question whose intent clearly matches it; a loosely related question gets a general answer.\n",
        );
        for q in &s.open_questions {
            let _ = writeln!(p, "- {}", q.summary.trim());
        }
        p.push('\n');
    }

    p.push_str("Stay in character for the whole conversation.\n");
    p
}

/// System prompt asking for a complete engineer/client interview in one
/// completion.
pub fn build_transcript_prompt(s: &Scenario) -> String {
    let mut p = String::new();
    p.push_str(
        "Write the complete transcript of a requirements interview between a software engineer and the owner of a small business. \
         You play both parties.\n\n",
    );
    p.push_str("ABOUT THE BUSINESS\n");
    p.push_str(s.brief.trim());
    p.push_str("\n\n");

    p.push_str("THE CLIENT\n");
    for g in GUIDELINES.iter().skip(1) {
        let _ = writeln!(p, "- {g}");
    }
    let _ = writeln!(p, "- {}", temperament_directive(s.persona.temperament));
    let _ = writeln!(p, "- {}", verbosity_directive(s.persona.verbosity));
    p.push('\n');

    p.push_str("FACTS THE INTERVIEW MUST BRING OUT\n");
    p.push_str(
        "By the end of the interview the engineer must have heard every one of these facts from the client, in everyday words.\n",
    );
    for fact in business_digest(&s.reference) {
        let _ = writeln!(p, "- {fact}");
    }
    p.push('\n');

    if !s.open_questions.is_empty() {
        p.push_str("FACTS THAT MUST NOT APPEAR\n");
        p.push_str(
            "Neither party may ask about or mention the following; leave them out of the transcript entirely.\n",
        );
        for q in &s.open_questions {
            let _ = writeln!(p, "- {}", q.summary.trim());
        }
        p.push('\n');
    }

    p.push_str("FORMAT\n");
    p.push_str(
        "Write one turn per line. Every line starts with `Engineer:` or `Client:` followed by what that person says. \
         The engineer speaks first and the two alternate strictly. Do not add headings, narration or blank commentary.\n",
    );
    p
}

/// The user message that accompanies [`build_transcript_prompt`].
pub const TRANSCRIPT_REQUEST: &str = "Write the full interview transcript now.";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client_sim::default_blocklist;
    use crate::scenario::{load_scenario, OpenQuestion};
    use crate::text::find_terms;

    fn scenario(persona: &str, questions: &str) -> Scenario {
        let doc = format!(
            r#"{{
            "id": "shop",
            "brief": "We run a garden centre selling plants and pots.",
            "reference_mermaid": "classDiagram\nclass Customer {{\n  name\n  email\n}}\nclass OrderLine {{\n  quantity\n}}\nCustomer \"1\" -- \"0..*\" Order : places\nOrder *-- \"1..*\" OrderLine\nProduct <|-- Plant\nEmployee -- Employee : supervises\nShelf o-- Product",
            "persona": {persona},
            "open_questions": {questions}
        }}"#
        );
        load_scenario(&doc).unwrap()
    }

    #[test]
    fn required_guideline_phrases_are_present() {
        let p = build_client_prompt(&scenario("{}", "[]"));
        for needle in [
            "no technical knowledge of software engineering",
            "natural, concise, and conversational",
            "guide the conversation",
            "request clarification",
            "AI",
        ] {
            assert!(p.contains(needle), "missing {needle:?}");
        }
        assert!(p.contains("We run a garden centre"));
    }

    #[test]
    fn temperament_branch_selection() {
        let p = build_client_prompt(&scenario(r#"{"temperament":"COMBATIVE"}"#, "[]"));
        assert!(p.contains(COMBATIVE));
        assert!(!p.contains(COLLABORATIVE));
        let p = build_client_prompt(&scenario("{}", "[]"));
        assert!(p.contains(COLLABORATIVE));
        assert!(p.contains(CONCISE));
    }

    #[test]
    fn open_questions_are_withheld() {
        let s = scenario(
            "{}",
            r#"[{"id":"oq1","summary":"Whether plants can be reserved before they arrive","keywords":["reserve"]}]"#,
        );
        let p = build_client_prompt(&s);
        let section = p.split(WITHHOLD_HEADING).nth(1).unwrap();
        assert!(section.contains(&s.open_questions[0].summary));
        let no_q = build_client_prompt(&scenario("{}", "[]"));
        assert!(!no_q.contains(WITHHOLD_HEADING));
    }

    #[test]
    fn digest_has_no_jargon() {
        let s = scenario("{}", "[]");
        let digest = business_digest(&s.reference).join("\n");
        assert!(find_terms(&digest, &default_blocklist()).is_empty(), "{digest}");
        assert!(digest.contains("order line"));
        assert!(digest.contains("a particular kind of product"));
        assert!(digest.contains("exactly one customer"));
    }

    #[test]
    fn transcript_prompt_lists_each_omitted_fact() {
        let qs: Vec<OpenQuestion> = (0..4)
            .map(|i| OpenQuestion {
                id: format!("q{i}"),
                summary: format!("hidden fact number {i}"),
                keywords: vec!["x".into()],
            })
            .collect();
        let mut s = scenario("{}", "[]");
        s.open_questions = qs;
        let p = build_transcript_prompt(&s);
        assert!(p.contains("Engineer:") && p.contains("Client:"));
        let omitted = p
            .split("FACTS THAT MUST NOT APPEAR")
            .nth(1)
            .unwrap()
            .split("FORMAT")
            .next()
            .unwrap();
        assert_eq!(omitted.lines().filter(|l| l.starts_with("- ")).count(), 4);
        assert_eq!(s.model_params.temperature, 1.0);
    }

    #[test]
    fn humanize_identifiers() {
        assert_eq!(humanize("OrderLine"), "order line");
        assert_eq!(humanize("gift_card"), "gift card");
        assert_eq!(humanize("customer"), "customer");
        assert_eq!(humanize("HTTPServer"), "httpserver");
    }
}
