//! Fulfillment planning core: the domain model, an exact plan optimizer with
//! what-if support, a SQL-subset query engine, and the sandboxed snippet
//! language that ties them together.

pub mod dsl;
pub mod fixed;
pub mod hosts;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod query;

pub use fixed::Fixed;
pub use hosts::Hosts;
pub use model::{Constraint, Enforce, Plan, PlanLine, PlanningInstance, WeekPattern};
pub use optimizer::{ModelState, PlanStore, Scope, SolveOutcome};
