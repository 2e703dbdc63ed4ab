use std::path::PathBuf;
use std::sync::Arc;

use fulfil_core::dsl::{execute, parse_script, ExecEnv, ExecStatus, Script};
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::remote::RemoteSpec;
use crate::templates::{fill, SlotError, TemplateLibrary};
use crate::tokens::{count_tokens, TokenUsage};

pub const DEFAULT_THETA: f64 = 0.35;

/// Which backend answers gate and coder calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Remote(RemoteSpec),
    Fixture { templates: PathBuf, theta: f64 },
}

impl BackendSpec {
    pub fn validate(&self) -> Result<(), BackendError> {
        match self {
            BackendSpec::Fixture { theta, .. } if !(0.0..=1.0).contains(theta) => {
                Err(BackendError::Config(format!("theta {theta} outside [0, 1]")))
            }
            BackendSpec::Remote(r) => r.validate(),
            _ => Ok(()),
        }
    }

    /// Builds the backend. The fixture kind loads its template directory.
    pub fn build(&self) -> Result<Arc<dyn Backend>, BackendError> {
        self.validate()?;
        Ok(match self {
            BackendSpec::Fixture { templates, theta } => {
                let lib = TemplateLibrary::load_dir(templates).map_err(|e| BackendError::Config(e.to_string()))?;
                Arc::new(FixtureBackend::new(Arc::new(lib), *theta))
            }
            BackendSpec::Remote(r) => Arc::new(crate::remote::RemoteBackend::new(r.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub in_domain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub confidence: f64,
}

impl RouteDecision {
    pub fn out_of_domain(confidence: f64) -> Self {
        RouteDecision {
            in_domain: false,
            task_id: None,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Transport(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error(transparent)]
    Slot(#[from] SlotError),
    #[error("prompt has {tokens} tokens, above the {limit}-token input limit")]
    InputTooLong { tokens: u64, limit: u64 },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("no task chosen for an in-domain decision")]
    NoTask,
}

impl BackendError {
    pub fn is_transport(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// A model that can run the two pipeline stages.
pub trait Backend: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Gate stage: is the query something the copilot handles?
    fn classify(&self, query: &str) -> Result<(RouteDecision, TokenUsage), BackendError>;

    /// Coder stage: snippet text for an in-domain query.
    fn generate_snippet(&self, query: &str, decision: &RouteDecision) -> Result<(String, TokenUsage), BackendError>;

    /// Templates describing what the backend supports, when it has them.
    fn library(&self) -> Option<&TemplateLibrary> {
        None
    }
}

/// Deterministic stand-in for a model: nearest template by similarity, then
/// the template's gold snippet with slots filled from the query.
#[derive(Debug, Clone)]
pub struct FixtureBackend {
    library: Arc<TemplateLibrary>,
    theta: f64,
}

impl FixtureBackend {
    pub fn new(library: Arc<TemplateLibrary>, theta: f64) -> Self {
        FixtureBackend { library, theta }
    }
}

impl Backend for FixtureBackend {
    fn kind(&self) -> &'static str {
        "fixture"
    }

    fn classify(&self, query: &str) -> Result<(RouteDecision, TokenUsage), BackendError> {
        let usage = TokenUsage::new(count_tokens(query), 1);
        let decision = match self.library.best_match(query) {
            Some(m) if m.score >= self.theta => RouteDecision {
                in_domain: true,
                task_id: Some(m.task_id),
                confidence: m.score,
            },
            Some(m) => RouteDecision::out_of_domain(1.0 - m.score),
            None => RouteDecision::out_of_domain(1.0),
        };
        Ok((decision, usage))
    }

    fn generate_snippet(&self, query: &str, decision: &RouteDecision) -> Result<(String, TokenUsage), BackendError> {
        let task_id = decision.task_id.as_deref().ok_or(BackendError::NoTask)?;
        let template = self.library.get(task_id).ok_or(BackendError::NoTask)?;
        let slots = self.library.extract_slots(task_id, query)?;
        let snippet = fill(&template.gold_snippet, &slots);
        let usage = TokenUsage::new(count_tokens(query), count_tokens(&snippet));
        Ok((snippet, usage))
    }

    fn library(&self) -> Option<&TemplateLibrary> {
        Some(&self.library)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    TaskResult,
    DefaultResponse,
    ExecutionFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    pub kind: AnswerKind,
    pub logs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub usage: TokenUsage,
    pub gate_usage: TokenUsage,
    pub coder_usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
}

/// Result of the model stages, before anything runs against the hosts.
#[derive(Debug, Clone, PartialEq)]
pub struct Routed {
    pub decision: RouteDecision,
    pub snippet: Option<String>,
    /// Coder-stage failure (slot extraction, protocol); the query still counts
    /// as in-domain.
    pub failure: Option<String>,
    pub gate_usage: TokenUsage,
    pub coder_usage: TokenUsage,
}

impl Routed {
    /// Parsed snippet, if there is one and it parses.
    pub fn script(&self) -> Option<Script> {
        self.snippet.as_deref().and_then(|s| parse_script(s).ok())
    }

    /// Whether running this could touch model or plan state. Out-of-domain
    /// routes never do.
    pub fn may_mutate(&self) -> bool {
        self.script().is_some_and(|s| s.may_mutate())
    }
}

/// Gate, coder, execute.
#[derive(Clone)]
pub struct Router {
    backend: Arc<dyn Backend>,
    guide: String,
}

impl Router {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        let guide = default_guide(backend.library());
        Router { backend, guide }
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    /// Text returned for out-of-domain queries.
    pub fn guide(&self) -> &str {
        &self.guide
    }

    pub fn classify(&self, query: &str) -> Result<(RouteDecision, TokenUsage), BackendError> {
        self.backend.classify(query)
    }

    /// Runs the gate and, for in-domain queries, the coder. Gate errors and
    /// coder transport errors are returned as `Err`; other coder failures are
    /// kept in the result.
    pub fn route(&self, query: &str) -> Result<Routed, BackendError> {
        let (decision, gate_usage) = self.backend.classify(query)?;
        debug!(query, ?decision, "gate");
        let mut routed = Routed {
            decision,
            snippet: None,
            failure: None,
            gate_usage,
            coder_usage: TokenUsage::default(),
        };
        if !routed.decision.in_domain {
            return Ok(routed);
        }
        match self.backend.generate_snippet(query, &routed.decision) {
            Ok((snippet, usage)) => {
                routed.snippet = Some(snippet);
                routed.coder_usage = usage;
            }
            Err(e) if e.is_transport() => return Err(e),
            Err(e) => routed.failure = Some(e.to_string()),
        }
        Ok(routed)
    }

    /// Executes a routed query against the hosts in `env`.
    pub fn execute(&self, routed: Routed, env: &mut ExecEnv) -> Answer {
        let mut answer = Answer {
            kind: AnswerKind::DefaultResponse,
            logs: Vec::new(),
            snippet: routed.snippet.clone(),
            task_id: routed.decision.task_id.clone(),
            usage: routed.gate_usage + routed.coder_usage,
            gate_usage: routed.gate_usage,
            coder_usage: routed.coder_usage,
            error_detail: None,
        };
        if !routed.decision.in_domain {
            answer.logs.push(self.guide.clone());
            return answer;
        }
        answer.kind = AnswerKind::ExecutionFailure;
        if let Some(f) = routed.failure {
            answer.error_detail = Some(f);
            return answer;
        }
        let Some(text) = routed.snippet.as_deref() else {
            answer.error_detail = Some("no snippet generated".into());
            return answer;
        };
        let script = match parse_script(text) {
            Ok(s) => s,
            Err(e) => {
                answer.error_detail = Some(e.to_string());
                return answer;
            }
        };
        let result = execute(&script, env);
        answer.logs = result.logs;
        if result.status == ExecStatus::Ok {
            answer.kind = AnswerKind::TaskResult;
        } else {
            answer.error_detail = result.error_detail.or(Some(format!("{:?}", result.status)));
        }
        answer
    }

    /// The whole pipeline. Every failure ends up in the answer.
    pub fn handle_query(&self, query: &str, env: &mut ExecEnv) -> Answer {
        match self.route(query) {
            Ok(routed) => self.execute(routed, env),
            Err(e) => Answer {
                kind: AnswerKind::ExecutionFailure,
                logs: Vec::new(),
                snippet: None,
                task_id: None,
                usage: TokenUsage::default(),
                gate_usage: TokenUsage::default(),
                coder_usage: TokenUsage::default(),
                error_detail: Some(e.to_string()),
            },
        }
    }
}

fn default_guide(library: Option<&TemplateLibrary>) -> String {
    let mut out = String::from("I can only help with fulfillment planning. Supported tasks:");
    match library {
        Some(lib) => {
            for (cat, titles) in lib.capability_summary() {
                if !titles.is_empty() {
                    out.push_str(&format!(" {}: {};", cat.label(), titles.join(", ")));
                }
            }
            out.pop();
            out.push('.');
        }
        None => out.push_str(" data extraction, plan generation and what-if analysis."),
    }
    out
}
