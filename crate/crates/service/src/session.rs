//! Session records and the events they are rebuilt from.

use chrono::{DateTime, Duration, Utc};
use leia_core::analytics::Group;
use leia_core::client_sim::{ConversationThread, LeakReport, Turn};
use leia_core::{EvaluationReport, Submission};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Interview,
    Transcript,
}

impl Mode {
    /// Interviewing is the experimental condition; reading a transcript the
    /// control.
    pub fn for_group(group: Group) -> Self {
        match group {
            Group::EG => Mode::Interview,
            Group::CG => Mode::Transcript,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    Open,
    Submitted,
    Expired,
}

/// Transcript handed to a reading-mode session, kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadingMaterial {
    pub text: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakRecord {
    /// Index of the client turn in the thread.
    pub turn_index: usize,
    pub report: LeakReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub scenario_id: String,
    pub participant_id: String,
    pub group: Group,
    pub mode: Mode,
    pub state: SessionState,
    pub started_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub late: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread: Option<ConversationThread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<ReadingMaterial>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leak_reports: Vec<LeakRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submission: Option<Submission>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationReport>,
}

impl Session {
    pub fn turns(&self) -> &[Turn] {
        match (&self.thread, &self.transcript) {
            (Some(t), _) => t.turns(),
            (None, Some(r)) => &r.turns,
            (None, None) => &[],
        }
    }

    pub fn is_past_deadline(&self, now: DateTime<Utc>) -> bool {
        now > self.deadline
    }

    /// Time on task in hours, once submitted.
    pub fn duration_hours(&self) -> Option<f64> {
        self.submitted_at
            .map(|s| (s - self.started_at).num_milliseconds() as f64 / 3_600_000.0)
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        SessionDescriptor {
            id: self.id.clone(),
            scenario_id: self.scenario_id.clone(),
            participant_id: self.participant_id.clone(),
            group: self.group,
            mode: self.mode,
            state: self.state,
            started_at: self.started_at,
            deadline: self.deadline,
            submitted_at: self.submitted_at,
            late: self.late,
            turn_count: self.turns().len(),
            awaiting_reply: self
                .thread
                .as_ref()
                .is_some_and(|t| t.pending_question().is_some()),
        }
    }
}

/// What clients see of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub scenario_id: String,
    pub participant_id: String,
    pub group: Group,
    pub mode: Mode,
    pub state: SessionState,
    pub started_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<DateTime<Utc>>,
    pub late: bool,
    pub turn_count: usize,
    pub awaiting_reply: bool,
}

/// One line of a session's log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Event {
    Created {
        id: String,
        scenario_id: String,
        participant_id: String,
        group: Group,
        started_at: DateTime<Utc>,
        time_limit_ms: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        system_prompt: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transcript: Option<ReadingMaterial>,
    },
    Question {
        turn: Turn,
    },
    Reply {
        turn: Turn,
        leak: LeakReport,
    },
    Expired {
        at: DateTime<Utc>,
    },
    Submitted {
        at: DateTime<Utc>,
        late: bool,
        submission: Submission,
        evaluation: EvaluationReport,
    },
}

#[derive(Debug, thiserror::Error)]
#[error("event {index}: {message}")]
pub struct ReplayError {
    pub index: usize,
    pub message: String,
}

/// Folds a log into a session.
pub fn replay(events: &[Event]) -> Result<Session, ReplayError> {
    let err = |index: usize, message: &str| ReplayError {
        index,
        message: message.to_string(),
    };
    let mut session = match events.first() {
        Some(Event::Created {
            id,
            scenario_id,
            participant_id,
            group,
            started_at,
            time_limit_ms,
            system_prompt,
            transcript,
        }) => {
            let mode = Mode::for_group(*group);
            let thread = match (mode, system_prompt) {
                (Mode::Interview, Some(p)) => Some(ConversationThread::new(scenario_id, p)),
                (Mode::Interview, None) => return Err(err(0, "interview without a system prompt")),
                (Mode::Transcript, _) => None,
            };
            if mode == Mode::Transcript && transcript.is_none() {
                return Err(err(0, "reading session without a transcript"));
            }
            Session {
                id: id.clone(),
                scenario_id: scenario_id.clone(),
                participant_id: participant_id.clone(),
                group: *group,
                mode,
                state: SessionState::Open,
                started_at: *started_at,
                deadline: *started_at + Duration::milliseconds(*time_limit_ms),
                submitted_at: None,
                late: false,
                thread,
                transcript: transcript.clone(),
                leak_reports: Vec::new(),
                submission: None,
                evaluation: None,
            }
        }
        _ => return Err(err(0, "log must start with CREATED")),
    };
    for (i, event) in events.iter().enumerate().skip(1) {
        apply(&mut session, event).map_err(|m| err(i, &m))?;
    }
    Ok(session)
}

/// Applies one event after the first.
pub fn apply(session: &mut Session, event: &Event) -> Result<(), String> {
    match event {
        Event::Created { .. } => return Err("duplicate CREATED".into()),
        Event::Question { turn } | Event::Reply { turn, .. } => {
            if session.state == SessionState::Submitted {
                return Err("conversation after submission".into());
            }
            let thread = session
                .thread
                .as_mut()
                .ok_or_else(|| "conversation in a reading session".to_string())?;
            let mut turns = thread.turns().to_vec();
            turns.push(turn.clone());
            let rebuilt =
                ConversationThread::from_turns(&thread.scenario_id, &thread.system_prompt, turns)
                    .map_err(|e| e.to_string())?;
            if let Event::Reply { leak, .. } = event {
                session.leak_reports.push(LeakRecord {
                    turn_index: rebuilt.turns().len() - 1,
                    report: leak.clone(),
                });
            }
            *thread = rebuilt;
        }
        Event::Expired { .. } => {
            if session.state != SessionState::Open {
                return Err("only open sessions expire".into());
            }
            session.state = SessionState::Expired;
        }
        Event::Submitted {
            at,
            late,
            submission,
            evaluation,
        } => {
            if session.state == SessionState::Submitted {
                return Err("already submitted".into());
            }
            session.state = SessionState::Submitted;
            session.submitted_at = Some(*at);
            session.late = *late;
            session.submission = Some(submission.clone());
            session.evaluation = Some(evaluation.clone());
        }
    }
    Ok(())
}
