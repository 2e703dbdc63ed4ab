#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use fulfil_core::Hosts;
use fulfil_lm::router::{FixtureBackend, DEFAULT_THETA};
use fulfil_lm::{Router, TemplateLibrary};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn library() -> Arc<TemplateLibrary> {
    Arc::new(TemplateLibrary::load_dir(repo_root().join("templates")).expect("shipped templates load"))
}

pub fn router() -> Router {
    Router::new(Arc::new(FixtureBackend::new(library(), DEFAULT_THETA)))
}

pub fn reference_hosts() -> Hosts {
    Hosts::load(repo_root().join("data/reference")).expect("reference fixture loads")
}

pub fn ood_pool() -> Vec<String> {
    fulfil_lm::taskgen::load_ood_pool(repo_root().join("data/ood_pool.txt")).unwrap()
}
