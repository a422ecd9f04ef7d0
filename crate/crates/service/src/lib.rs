//! HTTP service for interview and transcript sessions: scenarios, chat turns,
//! submissions, evaluations and group analytics, persisted as one
//! append-only event log per session.

pub mod api;
pub mod error;
pub mod service;
pub mod session;
pub mod store;

pub use api::{router, serve};
pub use error::ApiError;
pub use service::{Leia, NewSession, ServiceConfig, StartupError, DEFAULT_TIME_LIMIT_MINUTES};
pub use session::{Mode, Session, SessionDescriptor, SessionState};
