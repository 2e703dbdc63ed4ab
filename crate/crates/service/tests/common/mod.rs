#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fulfil_core::Hosts;
use fulfil_lm::router::{FixtureBackend, DEFAULT_THETA};
use fulfil_lm::{Router, TemplateLibrary};
use fulfil_service::{app, cors_layer, AppState, SessionStore};
use serde::de::DeserializeOwned;
use serde_json::Value;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_router() -> Router {
    let lib = TemplateLibrary::load_dir(repo_root().join("templates")).unwrap();
    Router::new(Arc::new(FixtureBackend::new(Arc::new(lib), DEFAULT_THETA)))
}

pub fn reference_hosts() -> Hosts {
    Hosts::load(repo_root().join("data/reference")).unwrap()
}

pub fn fixture_state() -> Arc<AppState> {
    Arc::new(AppState::new(fixture_router(), reference_hosts(), SessionStore::in_memory()))
}

/// Serves `state` on an ephemeral port from a background runtime.
pub fn spawn(state: Arc<AppState>) -> Client {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app(state, cors_layer(None).unwrap())).await.unwrap();
        });
    });
    Client {
        base: format!("http://{}", rx.recv().unwrap()),
        agent: ureq::Agent::config_builder().http_status_as_error(false).build().into(),
    }
}

#[derive(Clone)]
pub struct Client {
    pub base: String,
    pub agent: ureq::Agent,
}

impl Client {
    pub fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let mut r = self.agent.post(format!("{}{path}", self.base)).send_json(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        let mut r = self
            .agent
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body)
            .unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    pub fn chat(&self, session: Option<&str>, query: &str) -> (u16, Value) {
        self.post("/chat", &serde_json::json!({ "session_id": session, "query": query }))
    }
}

pub fn parse<T: DeserializeOwned>(v: &Value) -> T {
    serde_json::from_value(v.clone()).unwrap()
}
