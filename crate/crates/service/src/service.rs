//! Session lifecycle independent of the HTTP layer.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use chrono::Duration;
use leia_core::analytics::{group_summary, Group};
use leia_core::client_sim::{
    parse_transcript, render_transcript, ChatProvider, ClientSimulator, LeakAction, LeakReport,
    SimError, Turn,
};
use leia_core::clock::Clock;
use leia_core::prompt::build_client_prompt;
use leia_core::scenario::{load_scenario, serialize_scenario, ComplexityReport, Scenario};
use leia_core::{evaluate, mermaid, EvaluationReport, GroupSummary64, Submission};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{apply, replay, Event, Mode, ReadingMaterial, Session, SessionDescriptor, SessionState};
use crate::store::{EventStore, StoreError};

/// Time allowed per session unless configured otherwise.
pub const DEFAULT_TIME_LIMIT_MINUTES: i64 = 105;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Bundled scenario files (`*.json`) and cached transcripts
    /// (`<id>.transcript.txt`).
    pub scenarios_dir: PathBuf,
    /// Session logs, uploaded scenarios and generated transcripts.
    pub data_dir: PathBuf,
    pub time_limit: Duration,
}

impl ServiceConfig {
    pub fn new(scenarios_dir: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenarios_dir: scenarios_dir.into(),
            data_dir: data_dir.into(),
            time_limit: Duration::minutes(DEFAULT_TIME_LIMIT_MINUTES),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("{path}: {message}")]
    Scenario { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("session {id}: {message}")]
    Replay { id: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub scenario_id: String,
    pub participant_id: String,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageOutcome {
    pub reply: Turn,
    pub leak_flagged: bool,
    pub leak: LeakReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptView {
    pub session_id: String,
    pub mode: Mode,
    pub turns: Vec<Turn>,
    /// The transcript file exactly as handed out, for reading sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// What participants may see of a scenario: no reference solution, no
/// open questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub open_question_count: usize,
    pub has_cached_transcript: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<ComplexityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsView {
    pub scenario_id: String,
    pub groups: Vec<GroupSummary64>,
}

struct Slot {
    session: Mutex<Session>,
    busy: AtomicBool,
}

impl Slot {
    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Clears the busy flag when dropped.
struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

fn claim(slot: &Slot) -> Result<BusyGuard<'_>, ApiError> {
    slot.busy
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .map(|_| BusyGuard(&slot.busy))
        .map_err(|_| ApiError::Busy)
}

pub struct Leia {
    config: ServiceConfig,
    provider: Arc<dyn ChatProvider>,
    clock: Arc<dyn Clock>,
    store: EventStore,
    scenarios: RwLock<BTreeMap<String, Arc<Scenario>>>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StartupError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let entries = fs::read_dir(dir).map_err(|source| StartupError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

impl Leia {
    /// Loads scenarios and replays every stored session.
    pub fn open(
        config: ServiceConfig,
        provider: Arc<dyn ChatProvider>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StartupError> {
        let store = EventStore::open(config.data_dir.join("sessions"))?;
        let mut scenarios = BTreeMap::new();
        let uploaded = config.data_dir.join("scenarios");
        for path in json_files(&config.scenarios_dir)?
            .into_iter()
            .chain(json_files(&uploaded)?)
        {
            let text = fs::read_to_string(&path).map_err(|source| StartupError::Io {
                path: path.clone(),
                source,
            })?;
            let s = load_scenario(&text).map_err(|e| StartupError::Scenario {
                path: path.clone(),
                message: e.to_string(),
            })?;
            if scenarios.insert(s.id.clone(), Arc::new(s)).is_some() {
                return Err(StartupError::Scenario {
                    path,
                    message: "duplicate scenario id".into(),
                });
            }
        }
        let mut sessions = BTreeMap::new();
        for (id, events) in store.load_all()? {
            let session = replay(&events).map_err(|e| StartupError::Replay {
                id: id.clone(),
                message: e.to_string(),
            })?;
            sessions.insert(
                id,
                Arc::new(Slot {
                    session: Mutex::new(session),
                    busy: AtomicBool::new(false),
                }),
            );
        }
        tracing::info!(
            scenarios = scenarios.len(),
            sessions = sessions.len(),
            "service state loaded"
        );
        Ok(Self {
            config,
            provider,
            clock,
            store,
            scenarios: RwLock::new(scenarios),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn scenario(&self, id: &str) -> Result<Arc<Scenario>, ApiError> {
        self.scenarios
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::ScenarioNotFound(id.to_string()))
    }

    fn cached_transcript_paths(&self, scenario_id: &str) -> [PathBuf; 2] {
        let name = format!("{scenario_id}.transcript.txt");
        [
            self.config.scenarios_dir.join(&name),
            self.config.data_dir.join("transcripts").join(name),
        ]
    }

    fn summary(&self, s: &Scenario) -> ScenarioSummary {
        ScenarioSummary {
            id: s.id.clone(),
            open_question_count: s.open_questions.len(),
            has_cached_transcript: self
                .cached_transcript_paths(&s.id)
                .iter()
                .any(|p| p.is_file()),
            complexity: s.complexity_report(),
        }
    }

    pub fn scenario_summary(&self, id: &str) -> Result<ScenarioSummary, ApiError> {
        Ok(self.summary(&*self.scenario(id)?))
    }

    pub fn list_scenarios(&self) -> Vec<ScenarioSummary> {
        let all: Vec<Arc<Scenario>> = self
            .scenarios
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        all.iter().map(|s| self.summary(s)).collect()
    }

    /// Validates and stores a scenario document. Returns `false` when an
    /// identical scenario was already registered.
    pub fn register_scenario(&self, document: &str) -> Result<(ScenarioSummary, bool), ApiError> {
        let scenario = load_scenario(document).map_err(ApiError::InvalidScenario)?;
        let mut all = self.scenarios.write().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = all.get(&scenario.id) {
            if serialize_scenario(existing) == serialize_scenario(&scenario) {
                return Ok((self.summary(existing), false));
            }
            return Err(ApiError::ScenarioExists(scenario.id));
        }
        let dir = self.config.data_dir.join("scenarios");
        let path = dir.join(format!("{}.json", scenario.id));
        fs::create_dir_all(&dir)
            .and_then(|_| fs::write(&path, serialize_scenario(&scenario)))
            .map_err(|source| StoreError::Io { path, source })?;
        let summary = self.summary(&scenario);
        all.insert(scenario.id.clone(), Arc::new(scenario));
        Ok((summary, true))
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::SessionNotFound(id.to_string()))
    }

    fn simulator(&self, scenario: &Scenario) -> ClientSimulator {
        ClientSimulator::for_scenario(self.provider.clone(), self.clock.clone(), scenario)
    }

    async fn reading_material(&self, scenario: Arc<Scenario>) -> Result<ReadingMaterial, ApiError> {
        let [bundled, generated] = self.cached_transcript_paths(&scenario.id);
        let cached = [&bundled, &generated]
            .into_iter()
            .find_map(|p| fs::read_to_string(p).ok());
        let text = match cached {
            Some(text) => text,
            None => {
                let sim = self.simulator(&scenario);
                let turns = tokio::task::spawn_blocking(move || sim.generate_transcript(&scenario))
                    .await
                    .map_err(|e| ApiError::Internal(e.to_string()))??;
                let text = render_transcript(&turns);
                if let Some(dir) = generated.parent() {
                    fs::create_dir_all(dir)
                        .and_then(|_| fs::write(&generated, &text))
                        .map_err(|source| StoreError::Io {
                            path: generated.clone(),
                            source,
                        })?;
                }
                text
            }
        };
        let turns = parse_transcript(&text, self.clock.now())
            .map_err(|e| ApiError::Transcript(e.to_string()))?;
        Ok(ReadingMaterial { text, turns })
    }

    pub async fn create_session(&self, request: NewSession) -> Result<SessionDescriptor, ApiError> {
        if request.participant_id.trim().is_empty() {
            return Err(ApiError::BadRequest("participant_id is empty".into()));
        }
        let scenario = self.scenario(&request.scenario_id)?;
        let (system_prompt, transcript) = match Mode::for_group(request.group) {
            Mode::Interview => (Some(build_client_prompt(&scenario)), None),
            Mode::Transcript => (None, Some(self.reading_material(scenario.clone()).await?)),
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let created = Event::Created {
            id: id.clone(),
            scenario_id: scenario.id.clone(),
            participant_id: request.participant_id,
            group: request.group,
            started_at: self.clock.now(),
            time_limit_ms: self.config.time_limit.num_milliseconds(),
            system_prompt,
            transcript,
        };
        let session = replay(std::slice::from_ref(&created))
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        self.store.append(&id, &[created])?;
        let descriptor = session.descriptor();
        self.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(
            id,
            Arc::new(Slot {
                session: Mutex::new(session),
                busy: AtomicBool::new(false),
            }),
        );
        Ok(descriptor)
    }

    pub fn session(&self, id: &str) -> Result<SessionDescriptor, ApiError> {
        Ok(self.slot(id)?.lock().descriptor())
    }

    fn record(&self, session: &mut Session, events: Vec<Event>) -> Result<(), ApiError> {
        self.store.append(&session.id, &events)?;
        for e in &events {
            apply(session, e).map_err(ApiError::Internal)?;
        }
        Ok(())
    }

    pub async fn post_message(&self, id: &str, text: &str) -> Result<MessageOutcome, ApiError> {
        let slot = self.slot(id)?;
        let _busy = claim(&slot)?;
        let text = text.trim().to_string();
        if text.is_empty() {
            return Err(ApiError::EmptyMessage);
        }
        let (thread, retry, scenario_id) = {
            let mut session = slot.lock();
            if session.mode != Mode::Interview {
                return Err(ApiError::WrongMode);
            }
            match session.state {
                SessionState::Submitted => return Err(ApiError::AlreadySubmitted),
                SessionState::Expired => return Err(ApiError::Expired),
                SessionState::Open => {}
            }
            let now = self.clock.now();
            if session.is_past_deadline(now) {
                self.record(&mut session, vec![Event::Expired { at: now }])?;
                return Err(ApiError::Expired);
            }
            let thread = session.thread.clone().expect("interview sessions carry a thread");
            let retry = match thread.pending_question() {
                Some(pending) if pending == text => true,
                Some(_) => return Err(ApiError::ReplyPending),
                None => false,
            };
            (thread, retry, session.scenario_id.clone())
        };
        let sim = self.simulator(&*self.scenario(&scenario_id)?);
        let mut worked = thread;
        let (worked, result) = tokio::task::spawn_blocking(move || {
            let r = if retry {
                sim.retry_reply(&mut worked)
            } else {
                sim.post_interviewer_message(&mut worked, &text)
            };
            (worked, r)
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;

        let mut session = slot.lock();
        let question = || {
            let turns = worked.turns();
            let i = turns.len() - if worked.pending_question().is_some() { 1 } else { 2 };
            turns[i].clone()
        };
        match result {
            Ok(exchange) => {
                let mut events = Vec::new();
                if !retry {
                    events.push(Event::Question { turn: question() });
                }
                events.push(Event::Reply {
                    turn: exchange.reply.clone(),
                    leak: exchange.leak.clone(),
                });
                self.record(&mut session, events)?;
                Ok(MessageOutcome {
                    reply: exchange.reply,
                    leak_flagged: exchange.leak.final_action == LeakAction::Flagged,
                    leak: exchange.leak,
                })
            }
            Err(e) => {
                if !retry && worked.pending_question().is_some() {
                    // keep the question so a resend retries it
                    self.record(&mut session, vec![Event::Question { turn: question() }])?;
                }
                Err(match e {
                    SimError::Provider(p) => ApiError::Provider(p),
                    other => other.into(),
                })
            }
        }
    }

    pub fn transcript(&self, id: &str) -> Result<TranscriptView, ApiError> {
        let slot = self.slot(id)?;
        let session = slot.lock();
        Ok(TranscriptView {
            session_id: session.id.clone(),
            mode: session.mode,
            turns: session.turns().to_vec(),
            text: session.transcript.as_ref().map(|r| r.text.clone()),
        })
    }

    pub async fn submit(&self, id: &str, submission: Submission) -> Result<EvaluationReport, ApiError> {
        let slot = self.slot(id)?;
        let _busy = claim(&slot)?;
        let (scenario_id, was_expired) = {
            let session = slot.lock();
            if session.state == SessionState::Submitted {
                return Err(ApiError::AlreadySubmitted);
            }
            (session.scenario_id.clone(), session.state == SessionState::Expired)
        };
        mermaid::parse(&submission.mermaid_text).map_err(ApiError::Diagram)?;
        let scenario = self.scenario(&scenario_id)?;
        let graded = submission.clone();
        let evaluation = tokio::task::spawn_blocking(move || evaluate(&scenario, &graded))
            .await
            .map_err(|e| ApiError::Internal(e.to_string()))?
            .map_err(ApiError::Diagram)?;

        let mut session = slot.lock();
        let now = self.clock.now();
        // durations must be positive even if the clock has not moved
        let at = now.max(session.started_at + Duration::milliseconds(1));
        let late = was_expired || session.is_past_deadline(now);
        self.record(
            &mut session,
            vec![Event::Submitted {
                at,
                late,
                submission,
                evaluation: evaluation.clone(),
            }],
        )?;
        Ok(evaluation)
    }

    pub fn evaluation(&self, id: &str) -> Result<EvaluationReport, ApiError> {
        self.slot(id)?
            .lock()
            .evaluation
            .clone()
            .ok_or(ApiError::NoEvaluation)
    }

    pub async fn group_analytics(&self, scenario_id: &str) -> Result<AnalyticsView, ApiError> {
        self.scenario(scenario_id)?;
        let slots: Vec<Arc<Slot>> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let mut data: BTreeMap<Group, Vec<(f64, String)>> = BTreeMap::new();
        for slot in slots {
            let s = slot.lock();
            if s.scenario_id != scenario_id {
                continue;
            }
            if let (Some(hours), Some(sub)) = (s.duration_hours(), &s.submission) {
                data.entry(s.group)
                    .or_default()
                    .push((hours, sub.mermaid_text.clone()));
            }
        }
        if data.is_empty() {
            return Err(ApiError::NoData(scenario_id.to_string()));
        }
        let groups = tokio::task::spawn_blocking(move || {
            data.into_iter()
                .map(|(group, rows)| {
                    let models = rows
                        .iter()
                        .map(|(_, text)| mermaid::parse(text))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ApiError::Internal(format!("stored diagram: {e}")))?;
                    let pairs: Vec<(f64, &leia_core::ClassModel)> =
                        rows.iter().map(|(d, _)| *d).zip(models.iter()).collect();
                    group_summary(&pairs, group).map_err(|e| ApiError::Internal(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
        Ok(AnalyticsView {
            scenario_id: scenario_id.to_string(),
            groups,
        })
    }

    /// Every session as canonical JSON, ordered by id.
    pub fn snapshot(&self) -> String {
        let slots: Vec<Arc<Slot>> = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let sessions: Vec<Session> = slots.iter().map(|s| s.lock().clone()).collect();
        serde_json::to_string_pretty(&sessions).expect("sessions always serialize")
    }

    /// Full stored record of one session.
    pub fn session_record(&self, id: &str) -> Result<Session, ApiError> {
        Ok(self.slot(id)?.lock().clone())
    }
}
