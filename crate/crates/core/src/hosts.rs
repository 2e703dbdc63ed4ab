use std::path::Path;
use std::sync::Arc;

use crate::dsl::ExecEnv;
use crate::io::{load_instance, LoadError};
use crate::optimizer::{ModelState, PlanStore};
use crate::query::TableStore;
use crate::PlanningInstance;

/// Everything a snippet can reach: the read-only tables, the model and the
/// committed plans. Cloning gives an independent copy of the mutable parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Hosts {
    pub store: Arc<TableStore>,
    pub model: ModelState,
    pub plans: PlanStore,
}

impl Hosts {
    pub fn from_instance(inst: PlanningInstance) -> Self {
        Hosts {
            store: Arc::new(TableStore::from_instance(&inst)),
            model: ModelState::new(Arc::new(inst)),
            plans: PlanStore::default(),
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, LoadError> {
        Ok(Self::from_instance(load_instance(dir)?))
    }

    pub fn env(&mut self) -> ExecEnv<'_> {
        ExecEnv::new(&self.store, &mut self.model, &mut self.plans)
    }

    pub fn instance(&self) -> &PlanningInstance {
        &self.model.instance
    }
}
