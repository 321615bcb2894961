use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MethodRole, ResourceType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerEdge {
    Deferred,
    Implicit,
}

/// Calls matching `source` (or, for registrations without a data source,
/// the platform event named in `source`) flow on to handlers registered
/// with `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRule {
    pub source: (ResourceType, String),
    pub target: (ResourceType, String),
    pub edge_kind: TriggerEdge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("{0}.{1} is not a supported pattern")]
    UnsupportedPattern(ResourceType, String),
}

/// Pseudo-methods naming platform events rather than calls.
const EVENTS: [(ResourceType, &str); 2] = [(ResourceType::Api, "request"), (ResourceType::Schedule, "tick")];

impl TriggerRule {
    pub fn new(source: (ResourceType, &str), target: (ResourceType, &str), edge_kind: TriggerEdge) -> Result<Self, RuleError> {
        let source_ok = EVENTS.contains(&source) || source.0.method_role(source.1) == Some(MethodRole::Data);
        if !source_ok {
            return Err(RuleError::UnsupportedPattern(source.0, source.1.into()));
        }
        let target_ok = match edge_kind {
            TriggerEdge::Deferred => target.0.method_role(target.1) == Some(MethodRole::Registration),
            TriggerEdge::Implicit => target.0.method_role(target.1) == Some(MethodRole::Data),
        };
        if !target_ok {
            return Err(RuleError::UnsupportedPattern(target.0, target.1.into()));
        }
        Ok(TriggerRule { source: (source.0, source.1.into()), target: (target.0, target.1.into()), edge_kind })
    }

    /// `Bucket.put → Bucket.onCreate`.
    pub fn describe(&self) -> String {
        format!("{}.{} → {}.{}", self.source.0, self.source.1, self.target.0, self.target.1)
    }

    pub fn matches_target(&self, ty: ResourceType, method: &str) -> bool {
        self.target.0 == ty && self.target.1 == method
    }
}

/// Rules derived from the behavior of the supported cloud APIs.
pub fn default_rules() -> Vec<TriggerRule> {
    use ResourceType::*;
    use TriggerEdge::*;
    let mut rules = Vec::new();
    for method in ["get", "post", "put", "delete", "patch"] {
        rules.push(TriggerRule::new((Api, "request"), (Api, method), Deferred).expect("valid rule"));
    }
    rules.push(TriggerRule::new((Bucket, "put"), (Bucket, "onCreate"), Deferred).expect("valid rule"));
    rules.push(TriggerRule::new((Schedule, "tick"), (Schedule, "onTick"), Deferred).expect("valid rule"));
    rules.push(TriggerRule::new((Queue, "push"), (Queue, "pop"), Implicit).expect("valid rule"));
    rules
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_patterns() {
        assert!(TriggerRule::new((ResourceType::Bucket, "delete"), (ResourceType::Bucket, "onCreate"), TriggerEdge::Deferred).is_err());
        assert!(TriggerRule::new((ResourceType::Queue, "push"), (ResourceType::Queue, "onMessage"), TriggerEdge::Deferred).is_err());
        assert_eq!(default_rules().len(), 8);
    }
}
