use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::NnError;

/// One named parameter tensor together with its gradient accumulator and
/// first/second optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Param {
    fn new(shape: Vec<usize>, value: Vec<f64>) -> Self {
        let n = value.len();
        Self {
            shape,
            value,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Ordered collection of named parameters updated by a single optimizer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: IndexMap<String, Param>,
    /// Number of optimizer steps taken.
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) -> Result<(), NnError> {
        let n: usize = shape.iter().product();
        if n != value.len() {
            return Err(NnError::Shape(format!(
                "{name}: shape {shape:?} holds {n} values, got {}",
                value.len()
            )));
        }
        if self.entries.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        self.entries.insert(name.to_string(), Param::new(shape, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Param, NnError> {
        self.entries
            .get(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param, NnError> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.values().map(Param::len).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|p| p.grad.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .values()
            .all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    /// `self <- tau * source + (1 - tau) * self` for every entry present in both.
    pub fn soft_update_from(&mut self, source: &ParamStore, tau: f64) -> Result<(), NnError> {
        for (name, p) in self.entries.iter_mut() {
            let src = source
                .entries
                .get(name)
                .ok_or_else(|| NnError::MissingParam(name.clone()))?;
            if src.shape != p.shape {
                return Err(NnError::Shape(format!("{name}: target/online shape mismatch")));
            }
            if tau == 1.0 {
                p.value.copy_from_slice(&src.value);
            } else {
                for (t, o) in p.value.iter_mut().zip(&src.value) {
                    *t = tau * o + (1.0 - tau) * *t;
                }
            }
        }
        Ok(())
    }

    /// Value-only copy with fresh gradient and optimizer state.
    pub fn values_only(&self) -> ParamStore {
        let mut out = ParamStore::new();
        for (name, p) in &self.entries {
            out.entries
                .insert(name.clone(), Param::new(p.shape.clone(), p.value.clone()));
        }
        out
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.entries
            .iter()
            .map(|(name, p)| ParamRecord {
                name: name.clone(),
                shape: p.shape.clone(),
                values: p.value.clone(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<ParamRecord>) -> Result<Self, NnError> {
        let mut store = ParamStore::new();
        for r in records {
            store.insert(&r.name, r.shape, r.values)?;
        }
        if !store.all_finite() {
            return Err(NnError::NonFinite("checkpoint contains non-finite values".into()));
        }
        Ok(store)
    }
}

/// Serialized form of one parameter: name, shape and row-major values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}
