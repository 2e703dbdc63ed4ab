//! Language-model side of the fulfillment copilot: the two-stage query
//! router, the synthetic dataset generator and the evaluation harness.

pub mod cli;
pub mod eval;
pub mod remote;
pub mod router;
pub mod taskgen;
pub mod templates;
pub mod tokens;

pub use router::{Answer, AnswerKind, Backend, BackendError, BackendSpec, RouteDecision, Router};
pub use templates::{TaskTemplate, TemplateLibrary};
pub use tokens::{count_tokens, TokenUsage};
