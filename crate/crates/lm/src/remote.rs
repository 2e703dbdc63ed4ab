//! Chat-completion backend over HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::router::{Backend, BackendError, RouteDecision};
use crate::tokens::{count_tokens, TokenUsage};

pub const DEFAULT_GATE_PROMPT: &str = include_str!("../../../prompts/gate.txt");
pub const DEFAULT_CODER_PROMPT: &str = include_str!("../../../prompts/coder.txt");

fn default_output_cap() -> u32 {
    500
}

fn default_input_cap() -> u32 {
    1024
}

fn default_timeout() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteSpec {
    pub endpoint: String,
    #[serde(default)]
    pub auth_header: Option<String>,
    #[serde(default)]
    pub auth_value: Option<String>,
    pub model: String,
    #[serde(default = "default_output_cap")]
    pub max_output_tokens: u32,
    #[serde(default = "default_input_cap")]
    pub max_input_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Prompt templates with a `{query}` hole; the shipped prompts when absent.
    #[serde(default)]
    pub gate_prompt: Option<String>,
    #[serde(default)]
    pub coder_prompt: Option<String>,
}

impl RemoteSpec {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteSpec {
            endpoint: endpoint.into(),
            auth_header: None,
            auth_value: None,
            model: model.into(),
            max_output_tokens: default_output_cap(),
            max_input_tokens: default_input_cap(),
            timeout_secs: default_timeout(),
            gate_prompt: None,
            coder_prompt: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_output_tokens == 0 || self.max_input_tokens == 0 {
            return Err(BackendError::Config("token caps must be positive".into()));
        }
        if self.endpoint.is_empty() {
            return Err(BackendError::Config("empty endpoint".into()));
        }
        for p in [&self.gate_prompt, &self.coder_prompt].into_iter().flatten() {
            if !p.contains("{query}") {
                return Err(BackendError::Config("prompt template lacks a {query} hole".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<Message>,
    max_tokens: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct Message {
    role: String,
    content: String,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Usage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

pub struct RemoteBackend {
    spec: RemoteSpec,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(spec: RemoteSpec) -> Result<Self, BackendError> {
        spec.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(spec.timeout_secs)))
            .build()
            .into();
        Ok(RemoteBackend { spec, agent })
    }

    fn chat(&self, template: &str, query: &str, max_tokens: u32) -> Result<(String, TokenUsage), BackendError> {
        let prompt = template.replace("{query}", query);
        let tokens = count_tokens(&prompt);
        if tokens > self.spec.max_input_tokens as u64 {
            return Err(BackendError::InputTooLong {
                tokens,
                limit: self.spec.max_input_tokens as u64,
            });
        }
        let body = ChatRequest {
            model: &self.spec.model,
            messages: vec![Message {
                role: "user".into(),
                content: prompt,
            }],
            max_tokens,
        };
        let mut req = self.agent.post(&self.spec.endpoint);
        if let (Some(name), Some(value)) = (&self.spec.auth_header, &self.spec.auth_value) {
            req = req.header(name.as_str(), value.as_str());
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code < 500 => BackendError::Protocol(format!("HTTP {code}")),
            other => BackendError::Transport(other.to_string()),
        })?;
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
        let usage = match parsed.usage {
            Some(u) => TokenUsage::new(u.prompt_tokens, u.completion_tokens),
            None => TokenUsage::new(tokens, count_tokens(&content)),
        };
        Ok((content, usage))
    }
}

impl Backend for RemoteBackend {
    fn kind(&self) -> &'static str {
        "remote"
    }

    fn classify(&self, query: &str) -> Result<(RouteDecision, TokenUsage), BackendError> {
        let template = self.spec.gate_prompt.as_deref().unwrap_or(DEFAULT_GATE_PROMPT);
        let (text, usage) = self.chat(template, query, 1)?;
        let decision = match parse_verdict(&text) {
            Some(true) => RouteDecision {
                in_domain: true,
                task_id: None,
                confidence: 1.0,
            },
            Some(false) => RouteDecision::out_of_domain(1.0),
            None => {
                warn!(verdict = %text, "unparseable gate verdict, treating query as out of domain");
                RouteDecision::out_of_domain(0.0)
            }
        };
        Ok((decision, usage))
    }

    fn generate_snippet(&self, query: &str, _: &RouteDecision) -> Result<(String, TokenUsage), BackendError> {
        let template = self.spec.coder_prompt.as_deref().unwrap_or(DEFAULT_CODER_PROMPT);
        let (text, usage) = self.chat(template, query, self.spec.max_output_tokens)?;
        Ok((strip_fences(&text), usage))
    }
}

/// Reads a one-word gate verdict.
pub fn parse_verdict(text: &str) -> Option<bool> {
    let word = text
        .split_whitespace()
        .next()?
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '_' && c != '-')
        .to_ascii_lowercase();
    match word.as_str() {
        "in" | "yes" | "in_domain" | "in-domain" | "indomain" => Some(true),
        "out" | "no" | "ood" | "out_of_domain" | "out-of-domain" => Some(false),
        _ => None,
    }
}

/// Returns the body of the first fenced code block, or the trimmed text when
/// there is none.
pub fn strip_fences(text: &str) -> String {
    let Some(open) = text.find("```") else {
        return text.trim().to_string();
    };
    let after = &text[open + 3..];
    // skip the info string (language tag) on the opening line
    let body = match after.find('\n') {
        Some(nl) => &after[nl + 1..],
        None => return String::new(),
    };
    let inner = match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    };
    let mut out = inner.trim_end().to_string();
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("IN"), Some(true));
        assert_eq!(parse_verdict(" out."), Some(false));
        assert_eq!(parse_verdict("Yes, it is"), Some(true));
        assert_eq!(parse_verdict("maybe"), None);
        assert_eq!(parse_verdict(""), None);
    }

    #[test]
    fn fences() {
        assert_eq!(strip_fences("```python\nmodel.optimize()\n```"), "model.optimize()\n");
        assert_eq!(strip_fences("Sure:\n```\na = 1\nlogger.log(a)\n```\nDone."), "a = 1\nlogger.log(a)\n");
        assert_eq!(strip_fences("  model.optimize()  "), "model.optimize()");
    }

    #[test]
    fn spec_validation() {
        let mut s = RemoteSpec::new("http://localhost:1", "m");
        assert!(s.validate().is_ok());
        s.max_output_tokens = 0;
        assert!(s.validate().is_err());
        let mut s = RemoteSpec::new("http://localhost:1", "m");
        s.gate_prompt = Some("no hole".into());
        assert!(s.validate().is_err());
    }
}
