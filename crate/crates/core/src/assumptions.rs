//! Assumption values keyed by dotted paths such as `upload.requestsPerMonth`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::num::Rational;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Annotation,
    Override,
    Default,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption {
    pub value: Scalar,
    pub provenance: Provenance,
}

/// Resolved assumption values. Overrides shadow annotations, which shadow defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssumptionSet {
    pub entries: BTreeMap<String, Assumption>,
}

impl AssumptionSet {
    pub fn new() -> Self {
        AssumptionSet::default()
    }

    /// Builds a set of overrides from plain values.
    pub fn from_values<K: Into<String>>(values: impl IntoIterator<Item = (K, Scalar)>) -> Self {
        let mut set = AssumptionSet::new();
        for (k, v) in values {
            set.set(k, v, Provenance::Override);
        }
        set
    }

    fn rank(p: Provenance) -> u8 {
        match p {
            Provenance::Default => 0,
            Provenance::Annotation => 1,
            Provenance::Override => 2,
        }
    }

    /// Inserts unless a higher-precedence value is already present.
    pub fn set(&mut self, key: impl Into<String>, value: Scalar, provenance: Provenance) {
        let key = key.into();
        if let Some(existing) = self.entries.get(&key) {
            if Self::rank(existing.provenance) > Self::rank(provenance) {
                return;
            }
        }
        self.entries.insert(key, Assumption { value, provenance });
    }

    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.entries.get(key).map(|a| &a.value)
    }

    pub fn number(&self, key: &str) -> Option<Rational> {
        self.get(key).and_then(Scalar::as_number)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn provenance(&self, key: &str) -> Option<Provenance> {
        self.entries.get(key).map(|a| a.provenance)
    }

    pub fn values(&self) -> BTreeMap<String, Scalar> {
        self.entries.iter().map(|(k, a)| (k.clone(), a.value.clone())).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
