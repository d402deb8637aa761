//! HTTP front end for live conversations with the rapport engine.
//!
//! [`service`] owns the session table and the JSON API. The `rapport`
//! binary wraps it together with the offline tools (bank validation,
//! simulation, analytics and experiment reports).

pub mod service;

pub use service::{router, ApiError, AppState, ServiceConfig};
