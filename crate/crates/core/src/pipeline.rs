//! Source text to cost graph in one call.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::extract::{build_graph, default_rules, find_resources, resolve_usages, Extraction, ExtractError, ResourceCall, ResourceDecl};
use crate::graph::{factor_catalogue, unresolved_keys, validate, CatalogueEntry, ValidationReport};
use crate::scalar::Scalar;
use crate::syntax::{parse, ParseError, SourceFile, SyntaxTree};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(untagged)]
pub enum AnalysisError {
    #[error("parse error at {0}")]
    Parse(ParseError),
    #[error(transparent)]
    Extract(ExtractError),
}

impl From<ParseError> for AnalysisError {
    fn from(e: ParseError) -> Self {
        AnalysisError::Parse(e)
    }
}

impl From<ExtractError> for AnalysisError {
    fn from(e: ExtractError) -> Self {
        AnalysisError::Extract(e)
    }
}

impl AnalysisError {
    /// Machine-readable diagnostic.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AnalysisError::Parse(e) => serde_json::json!({
                "error": "ParseError",
                "span": e.span,
                "expected": e.expected,
                "found": e.found,
                "message": self.to_string(),
            }),
            AnalysisError::Extract(e) => {
                let mut value = serde_json::to_value(e).expect("errors serialize");
                value["message"] = serde_json::Value::String(e.to_string());
                value
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub source: SourceFile,
    pub tree: SyntaxTree,
    pub resources: Vec<ResourceDecl>,
    pub calls: Vec<ResourceCall>,
    pub extraction: Extraction,
    pub validation: ValidationReport,
}

impl Analysis {
    pub fn catalogue(&self) -> Vec<CatalogueEntry> {
        factor_catalogue(&self.extraction.graph, &self.extraction.assumptions)
    }

    /// Assumption keys that must still be supplied before estimating.
    pub fn unresolved(&self) -> Vec<String> {
        unresolved_keys(&self.catalogue())
    }
}

/// Parses `source` and extracts its cost graph with the default trigger
/// rules, applying `overrides` above any annotations in the text.
pub fn analyze(source: &SourceFile, overrides: &BTreeMap<String, Scalar>) -> Result<Analysis, AnalysisError> {
    let tree = parse(source)?;
    let resources = find_resources(&tree)?;
    let calls = resolve_usages(&tree, &resources)?;
    let extraction = build_graph(&tree, &resources, &calls, &default_rules(), overrides)?;
    let validation = validate(&extraction.graph);
    Ok(Analysis { source: source.clone(), tree, resources, calls, extraction, validation })
}

/// Convenience for in-memory text.
pub fn analyze_text(text: &str, overrides: &BTreeMap<String, Scalar>) -> Result<Analysis, AnalysisError> {
    analyze(&SourceFile::in_memory(text), overrides)
}
