//! Structured-text checkpoint: named parameter groups plus metadata, written
//! as JSON with shortest round-trip decimal floats.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{NnError, ParamRecord, ParamStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Free-form metadata (dimensions, seed, training step, configs).
    pub meta: IndexMap<String, serde_json::Value>,
    pub groups: IndexMap<String, Vec<ParamRecord>>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self {
            meta: IndexMap::new(),
            groups: IndexMap::new(),
        }
    }

    pub fn add_group(&mut self, name: &str, store: &ParamStore) {
        self.groups.insert(name.to_string(), store.to_records());
    }

    pub fn group(&self, name: &str) -> Result<ParamStore, NnError> {
        let recs = self
            .groups
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing parameter group `{name}`")))?;
        ParamStore::from_records(recs.clone())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("metadata serializes");
        self.meta.insert(key.to_string(), v);
    }

    pub fn meta<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T, NnError> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| NnError::Checkpoint(format!("missing metadata `{key}`")))?;
        serde_json::from_value(v.clone()).map_err(|e| NnError::Checkpoint(format!("{key}: {e}")))
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_str(text: &str) -> Result<Self, NnError> {
        serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_string_pretty())
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NnError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }
}

impl Default for Checkpoint {
    fn default() -> Self {
        Self::new()
    }
}
