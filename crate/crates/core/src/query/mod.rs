//! The `retrieve(...)` backend: a SQL subset over in-memory tables.

pub mod ast;
pub mod eval;
pub mod parser;
pub mod store;

pub use ast::{Query, Value};
pub use eval::{eval_query, EvalError};
pub use parser::{parse_query, SyntaxError};
pub use store::{load_store, TableStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Parses and evaluates in one step.
pub fn retrieve(text: &str, store: &TableStore) -> Result<Value, QueryError> {
    Ok(eval_query(&parse_query(text)?, store)?)
}
