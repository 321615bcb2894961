//! One analysis session: a source text, session-only overrides, and the
//! catalogs it is priced against. Every write recomputes the analysis.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use penny_core::estimate::{compare_catalogs, monthly_cost, Comparison, CostReport};
use penny_core::graph::{to_dot, to_json, NodeClass};
use penny_core::pipeline::{analyze, Analysis};
use penny_core::pricing::{bind, BoundModel, PricingCatalog};
use penny_core::scalar::Scalar;
use penny_core::syntax::{parse_text, read_annotations, write_annotation, SourceFile};

use crate::error::ApiError;

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub source: SourceFile,
    /// File that persisted annotations are written through to.
    pub path: Option<PathBuf>,
    pub overrides: BTreeMap<String, Scalar>,
    pub catalogs: Vec<(String, PricingCatalog)>,
    pub analysis: Analysis,
    /// Bumped by every committed write.
    pub version: u64,
}

/// What a snapshot keeps of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Scalar>,
    pub catalogs: Vec<String>,
    pub version: u64,
}

impl Session {
    pub fn open(
        id: String,
        text: String,
        path: Option<PathBuf>,
        catalogs: Vec<(String, PricingCatalog)>,
        overrides: BTreeMap<String, Scalar>,
    ) -> Result<Session, ApiError> {
        let source = match &path {
            Some(p) => SourceFile::new(p, text),
            None => SourceFile::in_memory(text),
        };
        let analysis = analyze(&source, &overrides)?;
        Ok(Session { id, source, path, overrides, catalogs, analysis, version: 1 })
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            text: self.source.text.clone(),
            path: self.path.clone(),
            overrides: self.overrides.clone(),
            catalogs: self.catalogs.iter().map(|(id, _)| id.clone()).collect(),
            version: self.version,
        }
    }

    /// The catalog matching `vendor` by id or vendor id; the first by default.
    pub fn catalog(&self, vendor: Option<&str>) -> Result<&PricingCatalog, ApiError> {
        match vendor {
            None => self.catalogs.first().map(|(_, c)| c).ok_or_else(|| ApiError::not_found("UnknownVendor", "session has no catalogs")),
            Some(v) => self
                .catalogs
                .iter()
                .find(|(id, c)| id == v || c.vendor_id == v)
                .map(|(_, c)| c)
                .ok_or_else(|| ApiError::not_found("UnknownVendor", format!("vendor `{v}` is not bound to this session")).with("vendor", v)),
        }
    }

    pub fn model(&self, vendor: Option<&str>) -> Result<BoundModel, ApiError> {
        let catalog = self.catalog(vendor)?;
        bind(&self.analysis.extraction.graph, catalog).map_err(|e| penny_core::estimate::EstimateError::Unpriced(e).into())
    }

    pub fn cost(&self, month: u32, vendor: Option<&str>) -> Result<CostReport, ApiError> {
        let model = self.model(vendor)?;
        Ok(monthly_cost(&model, &self.analysis.extraction.assumptions, month)?)
    }

    pub fn compare(&self, month: u32) -> Result<Comparison, ApiError> {
        let catalogs: Vec<PricingCatalog> = self.catalogs.iter().map(|(_, c)| c.clone()).collect();
        Ok(compare_catalogs(&self.analysis.extraction.graph, &self.analysis.extraction.assumptions, &catalogs, month)?)
    }

    pub fn graph_json(&self) -> Value {
        to_json(&self.analysis.extraction.graph)
    }

    pub fn graph_dot(&self) -> String {
        to_dot(&self.analysis.extraction.graph)
    }

    /// Graph, factor catalogue, unresolved keys and editable slots.
    pub fn summary(&self) -> Value {
        json!({
            "session_id": self.id,
            "version": self.version,
            "catalogs": self.catalogs.iter().map(|(id, _)| id).collect::<Vec<_>>(),
            "graph": self.graph_json(),
            "catalogue": self.analysis.catalogue(),
            "unresolved": self.analysis.unresolved(),
            "slots": self.analysis.extraction.slots,
            "assumptions": self.analysis.extraction.assumptions,
            "findings": self.analysis.validation.findings,
        })
    }

    pub fn source_view(&self) -> Result<Value, ApiError> {
        let tree = parse_text(&self.source.text).map_err(|e| ApiError::internal(e.to_string()))?;
        let annotations = read_annotations(&tree).map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(json!({
            "version": self.version,
            "path": self.path,
            "text": self.source.text,
            "annotations": annotations,
        }))
    }

    /// Month-`month` totals for every catalog; failures are reported inline.
    pub fn totals(&self, month: u32) -> Value {
        let rows: Vec<Value> = self
            .catalogs
            .iter()
            .map(|(id, _)| match self.cost(month, Some(id)) {
                Ok(r) => json!({ "catalog": id, "vendor_id": r.vendor_id, "total": r.total, "total_display": r.total_display }),
                Err(e) => json!({ "catalog": id, "error": e.body }),
            })
            .collect();
        json!({ "month": month, "vendors": rows })
    }

    /// Applies assumption values. Without `persist` they live in the session
    /// only; with it they are written into the source as annotations (and
    /// through to the file when the session has one). `null` clears a
    /// session override. Nothing changes unless every value is accepted.
    pub fn patch(&mut self, updates: &BTreeMap<String, Value>, persist: bool) -> Result<(), ApiError> {
        let mut values = BTreeMap::new();
        for (key, raw) in updates {
            let slot = self
                .analysis
                .extraction
                .slot(key)
                .ok_or_else(|| ApiError::not_found("UnknownAssumption", format!("no factor reads `{key}`")).with("key", key))?;
            let value = match raw {
                Value::Null if !persist => None,
                other => {
                    let scalar = Scalar::from_json(other)
                        .ok_or_else(|| ApiError::unprocessable("InvalidAssumption", format!("`{key}` needs a number or a string")).with("key", key))?;
                    let coerced = slot.value_type.coerce(key, &scalar).map_err(|e| ApiError::unprocessable("InvalidAssumption", e.to_string()).with("key", key))?;
                    Some(coerced)
                }
            };
            values.insert(key.clone(), value);
        }

        let mut overrides = self.overrides.clone();
        let mut source = self.source.clone();
        if persist {
            for (key, value) in &values {
                overrides.remove(key);
                let value = value.clone().expect("persisted values are present");
                // spans move after each write, so find the slot afresh
                let current = analyze(&source, &overrides)?;
                let slot = current.extraction.slot(key).expect("slots survive annotation writes").clone();
                let entries = BTreeMap::from([(slot.annotation_key.clone(), value)]);
                source = write_annotation(&source, &slot.target, &entries)
                    .map_err(|e| ApiError::unprocessable("WriteFailed", e.to_string()).with("key", key))?;
            }
        } else {
            for (key, value) in values {
                match value {
                    Some(v) => overrides.insert(key, v),
                    None => overrides.remove(&key),
                };
            }
        }
        let analysis = analyze(&source, &overrides)?;
        if persist && source.text != self.source.text {
            if let Some(path) = &self.path {
                std::fs::write(path, &source.text)
                    .map_err(|e| ApiError::unprocessable("WriteFailed", format!("{}: {e}", path.display())))?;
            }
        }
        self.overrides = overrides;
        self.source = source;
        self.analysis = analysis;
        self.version += 1;
        Ok(())
    }

    /// Declares that the external call `node` invokes the endpoint `route`.
    pub fn link(&mut self, node: &str, route: &str, persist: bool) -> Result<(), ApiError> {
        let graph = &self.analysis.extraction.graph;
        let call = graph.node(node).ok_or_else(|| ApiError::not_found("UnknownNode", format!("no node `{node}`")).with("node", node))?;
        if call.node_class != NodeClass::ExternalHttpCall {
            return Err(ApiError::unprocessable("NotAnExternalCall", format!("`{node}` is a {}", call.node_class)).with("node", node));
        }
        if !graph.nodes.iter().any(|n| n.node_class == NodeClass::Endpoint && n.label == route) {
            return Err(ApiError::not_found("UnknownRoute", format!("no endpoint `{route}`")).with("route", route));
        }
        let key = format!("{}.callsEndpoint", call.subject);
        let current = self.analysis.extraction.assumptions.get(&key);
        if current == Some(&Scalar::Text(route.to_string())) {
            return Err(ApiError::conflict("AlreadyLinked", format!("`{node}` already calls `{route}`")).with("key", key));
        }
        self.patch(&BTreeMap::from([(key, Value::String(route.to_string()))]), persist)
    }
}
