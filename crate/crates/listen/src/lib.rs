//! XAB listening-test service.
//!
//! [`service::ListenService`] owns the state machine and its JSONL event log,
//! [`http::router`] exposes it over HTTP.

pub mod error;
pub mod http;
pub mod model;
pub mod service;

pub use error::ListenError;
pub use service::ListenService;
