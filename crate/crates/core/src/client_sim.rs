//! Turn-based conversation with the simulated client.
//!
//! History lives in [`ConversationThread`] and is replayed in full on every
//! provider call, so providers are stateless. A thread is mutated only through
//! `&mut`, which keeps at most one provider call in flight per thread.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::clock::Clock;
use crate::prompt::{build_client_prompt, build_transcript_prompt, TRANSCRIPT_REQUEST};
use crate::scenario::{ModelParams, Scenario, DEFAULT_MODEL};
use crate::text::find_terms;

/// Terms a nontechnical client should never use.
pub const DEFAULT_BLOCKLIST: [&str; 18] = [
    "uml",
    "class",
    "class diagram",
    "entity",
    "attribute",
    "association",
    "multiplicity",
    "composition",
    "inheritance",
    "subclass",
    "database",
    "schema",
    "table",
    "foreign key",
    "primary key",
    "api",
    "backend",
    "frontend",
];

pub fn default_blocklist() -> Vec<String> {
    DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect()
}

/// Matches of blocklist terms in `text`: case-insensitive, whole words,
/// multi-word terms as phrases, in text order without duplicates.
pub fn leak_scan(text: &str, blocklist: &[String]) -> Vec<String> {
    find_terms(text, blocklist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Interviewer,
    Client,
    Engineer,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Interviewer => "Interviewer",
            Role::Client => "Client",
            Role::Engineer => "Engineer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationThread {
    pub scenario_id: String,
    pub system_prompt: String,
    turns: Vec<Turn>,
}

impl ConversationThread {
    pub fn new(scenario_id: impl Into<String>, system_prompt: impl Into<String>) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            system_prompt: system_prompt.into(),
            turns: Vec::new(),
        }
    }

    pub fn for_scenario(s: &Scenario) -> Self {
        Self::new(&s.id, build_client_prompt(s))
    }

    /// Rebuilds a stored thread; the turns must pass [`Self::validate`].
    pub fn from_turns(
        scenario_id: impl Into<String>,
        system_prompt: impl Into<String>,
        turns: Vec<Turn>,
    ) -> Result<Self, SimError> {
        let thread = Self {
            scenario_id: scenario_id.into(),
            system_prompt: system_prompt.into(),
            turns,
        };
        thread.validate()?;
        Ok(thread)
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    /// Interviewer text still waiting for a client reply, after a failed
    /// provider call.
    pub fn pending_question(&self) -> Option<&str> {
        match self.turns.last() {
            Some(t) if t.role == Role::Interviewer => Some(&t.text),
            _ => None,
        }
    }

    /// Drops an unanswered interviewer turn.
    pub fn withdraw_pending(&mut self) -> Option<Turn> {
        if self.pending_question().is_some() {
            self.turns.pop()
        } else {
            None
        }
    }

    /// Checks strict INTERVIEWER/CLIENT alternation, non-empty texts and
    /// non-decreasing timestamps.
    pub fn validate(&self) -> Result<(), SimError> {
        for (i, t) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 {
                Role::Interviewer
            } else {
                Role::Client
            };
            if t.role != expected {
                return Err(SimError::Alternation(format!(
                    "turn {i} is {:?}, expected {expected:?}",
                    t.role
                )));
            }
            if t.text.trim().is_empty() {
                return Err(SimError::EmptyMessage);
            }
            if i > 0 && t.at < self.turns[i - 1].at {
                return Err(SimError::Alternation(format!("turn {i} goes back in time")));
            }
        }
        Ok(())
    }

    fn next_time(&self, now: DateTime<Utc>) -> DateTime<Utc> {
        self.turns.last().map_or(now, |t| t.at.max(now))
    }

    fn history(&self) -> Vec<ChatMessage> {
        self.turns
            .iter()
            .map(|t| ChatMessage {
                role: match t.role {
                    Role::Client => ChatRole::Assistant,
                    Role::Interviewer | Role::Engineer => ChatRole::User,
                },
                content: t.text.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderReply {
    pub text: String,
    pub finish_reason: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("scripted provider has no replies left")]
    Exhausted,
    #[error("provider configuration: {0}")]
    Config(String),
}

/// A chat-completion backend. Implementations receive the full history on
/// every call and keep no conversation state of their own.
pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError>;
}

/// Replays canned replies in order. Used by tests and offline demos.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<ProviderRequest>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// Fixture format: a JSON array of reply strings.
    pub fn from_fixture(json: &str) -> Result<Self, ProviderError> {
        let replies: Vec<String> = serde_json::from_str(json)
            .map_err(|e| ProviderError::Config(format!("scripted fixture: {e}")))?;
        Ok(Self::new(replies))
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_fixture(&text)
    }

    pub fn push(&self, reply: impl Into<String>) {
        self.replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push_back(reply.into());
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Every request received so far.
    pub fn requests(&self) -> Vec<ProviderRequest> {
        self.requests
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }
}

impl ChatProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError> {
        self.requests
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.clone());
        let text = self
            .replies
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or(ProviderError::Exhausted)?;
        Ok(ProviderReply {
            text,
            finish_reason: "stop".into(),
            latency_ms: 0,
        })
    }
}

pub const ENV_API_BASE: &str = "LEIA_API_BASE";
pub const ENV_API_KEY: &str = "LEIA_API_KEY";
pub const ENV_MODEL: &str = "LEIA_MODEL";
const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

/// OpenAI-compatible `/chat/completions` client.
pub struct RemoteProvider {
    http: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    default_model: String,
}

impl fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("base_url", &self.base_url)
            .field("default_model", &self.default_model)
            .finish_non_exhaustive()
    }
}

impl RemoteProvider {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        default_model: impl Into<String>,
    ) -> Result<Self, ProviderError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Self {
            http,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            default_model: default_model.into(),
        })
    }

    /// Reads `LEIA_API_BASE`, `LEIA_API_KEY` and `LEIA_MODEL`.
    pub fn from_env() -> Result<Self, ProviderError> {
        let base = std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_API_BASE.into());
        let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        let model = std::env::var(ENV_MODEL)
            .ok()
            .filter(|m| !m.is_empty())
            .unwrap_or_else(|| DEFAULT_MODEL.into());
        Self::new(base, key, model)
    }

    pub fn request_body(&self, request: &ProviderRequest) -> serde_json::Value {
        let model = request
            .params
            .model_name
            .clone()
            .unwrap_or_else(|| self.default_model.clone());
        let mut messages = vec![json!({"role": "system", "content": request.system_prompt})];
        messages.extend(
            request
                .messages
                .iter()
                .map(|m| json!({"role": m.role, "content": m.content})),
        );
        json!({
            "model": model,
            "messages": messages,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_reply_tokens,
        })
    }
}

impl ChatProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderReply, ProviderError> {
        let started = Instant::now();
        let mut call = self
            .http
            .post(format!("{}/chat/completions", self.base_url))
            .json(&self.request_body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body,
            });
        }
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let choice = &value["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?
            .to_string();
        let finish_reason = choice["finish_reason"].as_str().unwrap_or("unknown").to_string();
        Ok(ProviderReply {
            text,
            finish_reason,
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LeakAction {
    Clean,
    Regenerated,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakReport {
    /// Blocklist terms seen across all attempts, in order of discovery.
    pub matched_terms: Vec<String>,
    /// Provider calls made for this reply.
    pub attempt_count: usize,
    pub final_action: LeakAction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakGuard {
    pub blocklist: Vec<String>,
    pub max_regenerations: usize,
}

impl Default for LeakGuard {
    fn default() -> Self {
        Self {
            blocklist: default_blocklist(),
            max_regenerations: 2,
        }
    }
}

fn reminder(terms: &[String]) -> String {
    format!(
        "Reminder: you are the business owner and know nothing about software. Your last answer used technical words ({}). \
         Answer the same question again in plain everyday language without them.",
        terms.join(", ")
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub reply: Turn,
    pub leak: LeakReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("turn order violated: {0}")]
    Alternation(String),
    #[error("message text is empty")]
    EmptyMessage,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

/// Drives a thread against a provider, applying the jargon guard.
#[derive(Clone)]
pub struct ClientSimulator {
    provider: Arc<dyn ChatProvider>,
    clock: Arc<dyn Clock>,
    guard: LeakGuard,
    params: ModelParams,
}

impl ClientSimulator {
    pub fn new(provider: Arc<dyn ChatProvider>, clock: Arc<dyn Clock>) -> Self {
        Self {
            provider,
            clock,
            guard: LeakGuard::default(),
            params: ModelParams::default(),
        }
    }

    /// Takes the blocklist and model parameters from the scenario.
    pub fn for_scenario(
        provider: Arc<dyn ChatProvider>,
        clock: Arc<dyn Clock>,
        scenario: &Scenario,
    ) -> Self {
        Self {
            provider,
            clock,
            guard: LeakGuard {
                blocklist: scenario.jargon_blocklist.clone(),
                ..LeakGuard::default()
            },
            params: scenario.model_params.clone(),
        }
    }

    pub fn with_guard(mut self, guard: LeakGuard) -> Self {
        self.guard = guard;
        self
    }

    pub fn guard(&self) -> &LeakGuard {
        &self.guard
    }

    /// Appends the interviewer turn, asks the provider for the client's reply,
    /// screens it for jargon and appends the final client turn.
    ///
    /// On provider failure the interviewer turn stays in the thread; use
    /// [`Self::retry_reply`] or [`ConversationThread::withdraw_pending`].
    pub fn post_interviewer_message(
        &self,
        thread: &mut ConversationThread,
        text: &str,
    ) -> Result<Exchange, SimError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(SimError::EmptyMessage);
        }
        if thread.pending_question().is_some() {
            return Err(SimError::Alternation(
                "the previous question has not been answered".into(),
            ));
        }
        let at = thread.next_time(self.clock.now());
        thread.turns.push(Turn {
            role: Role::Interviewer,
            text: text.to_string(),
            at,
        });
        self.answer(thread)
    }

    /// Requests a reply for an interviewer turn left unanswered by a failed
    /// call.
    pub fn retry_reply(&self, thread: &mut ConversationThread) -> Result<Exchange, SimError> {
        if thread.pending_question().is_none() {
            return Err(SimError::Alternation("no unanswered question".into()));
        }
        self.answer(thread)
    }

    fn answer(&self, thread: &mut ConversationThread) -> Result<Exchange, SimError> {
        let mut request = ProviderRequest {
            system_prompt: thread.system_prompt.clone(),
            messages: thread.history(),
            params: self.params.clone(),
        };
        let mut reply = self.provider.complete(&request)?;
        let mut attempts = 1;
        let mut matched = leak_scan(&reply.text, &self.guard.blocklist);
        let mut action = LeakAction::Clean;
        if !matched.is_empty() {
            action = LeakAction::Flagged;
            let mut last_matches = matched.clone();
            for _ in 0..self.guard.max_regenerations {
                request.messages.push(ChatMessage {
                    role: ChatRole::System,
                    content: reminder(&last_matches),
                });
                reply = self.provider.complete(&request)?;
                attempts += 1;
                last_matches = leak_scan(&reply.text, &self.guard.blocklist);
                if last_matches.is_empty() {
                    action = LeakAction::Regenerated;
                    break;
                }
                for t in &last_matches {
                    if !matched.contains(t) {
                        matched.push(t.clone());
                    }
                }
            }
        }
        let text = reply.text.trim();
        if text.is_empty() {
            return Err(ProviderError::Malformed("empty reply".into()).into());
        }
        let turn = Turn {
            role: Role::Client,
            text: text.to_string(),
            at: thread.next_time(self.clock.now()),
        };
        thread.turns.push(turn.clone());
        Ok(Exchange {
            reply: turn,
            leak: LeakReport {
                matched_terms: matched,
                attempt_count: attempts,
                final_action: action,
            },
        })
    }

    /// One completion producing a whole engineer/client interview.
    pub fn generate_transcript(&self, scenario: &Scenario) -> Result<Vec<Turn>, SimError> {
        let request = ProviderRequest {
            system_prompt: build_transcript_prompt(scenario),
            messages: vec![ChatMessage {
                role: ChatRole::User,
                content: TRANSCRIPT_REQUEST.into(),
            }],
            params: scenario.model_params.clone(),
        };
        let reply = self.provider.complete(&request)?;
        Ok(parse_transcript(&reply.text, self.clock.now())?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transcript line {line}: {message}")]
pub struct TranscriptError {
    pub line: usize,
    pub message: String,
}

/// Parses `Engineer: ...` / `Client: ...` lines. Blank lines are skipped; the
/// engineer speaks first and roles alternate; at least two turns.
pub fn parse_transcript(text: &str, at: DateTime<Utc>) -> Result<Vec<Turn>, TranscriptError> {
    let mut turns: Vec<Turn> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        last_line = i + 1;
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TranscriptError {
            line: i + 1,
            message,
        };
        let (role, rest) = if let Some(rest) = line.strip_prefix("Engineer:") {
            (Role::Engineer, rest)
        } else if let Some(rest) = line.strip_prefix("Client:") {
            (Role::Client, rest)
        } else {
            return Err(err("expected a line starting with `Engineer:` or `Client:`".into()));
        };
        let expected = if turns.len().is_multiple_of(2) {
            Role::Engineer
        } else {
            Role::Client
        };
        if role != expected {
            return Err(err(format!(
                "expected {} to speak, found {}",
                expected.label(),
                role.label()
            )));
        }
        let said = rest.trim();
        if said.is_empty() {
            return Err(err("empty turn".into()));
        }
        turns.push(Turn {
            role,
            text: said.to_string(),
            at,
        });
    }
    if turns.len() < 2 {
        return Err(TranscriptError {
            line: last_line.max(1),
            message: format!("a transcript needs at least two turns, found {}", turns.len()),
        });
    }
    Ok(turns)
}

/// One `Role: text` line per turn.
pub fn render_transcript(turns: &[Turn]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(t.role.label());
        out.push_str(": ");
        out.push_str(&t.text);
        out.push('\n');
    }
    out
}
