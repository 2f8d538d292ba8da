//! Parsers for provenance audit logs.
//!
//! Two serializations are accepted: W3C PROV JSON (top-level object keyed by
//! record category) and SPADE JSON (array of typed record objects, or one
//! record object per line). Both parse into the same normalized
//! [`ProvDocument`] stream of node and edge records.
//!
//! Parsing is lossy-tolerant: malformed records are skipped with a warning,
//! never silently dropped. Only structurally unusable input (not JSON, wrong
//! top-level shape) is an error.

mod normalize;
mod spade;
mod w3c;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use normalize::DanglingPolicy;

/// Serialization format of a parsed document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormatTag {
    W3cProv,
    SpadeJson,
}

/// Outcome of format sniffing; `Unknown` is the error-signaling value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SniffedFormat {
    W3cProv,
    SpadeJson,
    Unknown,
}

/// Capture layer a record originates from, when the log marks it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Layer {
    Kernel,
    Application,
    #[default]
    Unknown,
}

impl Layer {
    fn from_attr(value: &str) -> Layer {
        match value.to_ascii_lowercase().as_str() {
            "kernel" => Layer::Kernel,
            "application" => Layer::Application,
            _ => Layer::Unknown,
        }
    }
}

/// String-keyed attribute map; values are kept verbatim, no numeric coercion.
pub type AttrMap = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: String,
    pub node_type: String,
    pub attributes: AttrMap,
    pub layer: Layer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRecord {
    pub id: String,
    pub relation: String,
    pub src: String,
    pub dst: String,
    pub attributes: AttrMap,
}

/// A coded diagnostic emitted while parsing or normalizing.
///
/// Rendered on standard error by the CLI as `WARN <code> <detail>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub code: &'static str,
    pub detail: String,
}

impl Warning {
    pub(crate) fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Warning { code, detail: detail.into() }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.code, self.detail)
    }
}

/// Warning codes used by the parsers and normalizer.
pub mod warn_codes {
    pub const UNRECOGNIZED_KEY: &str = "unrecognized-key";
    pub const SKIPPED_RECORD: &str = "skipped-record";
    pub const MISSING_ID: &str = "missing-id";
    pub const MISSING_ENDPOINT: &str = "missing-endpoint";
    pub const DUPLICATE_NODE: &str = "duplicate-node";
    pub const DUPLICATE_EDGE_ID: &str = "duplicate-edge-id";
    pub const ATTR_CONFLICT: &str = "attr-conflict";
    pub const EMPTY_FIELD: &str = "empty-field";
    pub const DANGLING_ENDPOINT: &str = "dangling-endpoint";
    pub const CYCLE: &str = "cycle";
}

/// Normalized stream of typed node/edge records parsed from a provenance log.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvDocument {
    pub format_tag: FormatTag,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub warnings: Vec<Warning>,
}

impl ProvDocument {
    pub(crate) fn empty(format_tag: FormatTag) -> Self {
        ProvDocument { format_tag, nodes: Vec::new(), edges: Vec::new(), warnings: Vec::new() }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed input at line {line}, column {column}: {detail}")]
    MalformedInput { detail: String, line: usize, column: usize },
    #[error("edge `{edge}` references undeclared node `{node}`")]
    DanglingEndpoint { edge: String, node: String },
}

impl ParseError {
    fn from_json(err: &serde_json::Error) -> Self {
        ParseError::MalformedInput {
            detail: err.to_string(),
            line: err.line(),
            column: err.column(),
        }
    }

    fn shape(detail: impl Into<String>) -> Self {
        ParseError::MalformedInput { detail: detail.into(), line: 1, column: 1 }
    }
}

/// Guess the serialization format of a raw provenance log. Never fails;
/// input that matches neither format maps to [`SniffedFormat::Unknown`].
pub fn sniff_format(text: &str) -> SniffedFormat {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(map)) => {
            if map.keys().any(|k| w3c::is_w3c_key(k)) {
                SniffedFormat::W3cProv
            } else if map.values().any(spade::is_typed_array) {
                SniffedFormat::SpadeJson
            } else {
                SniffedFormat::Unknown
            }
        }
        Ok(ref value @ serde_json::Value::Array(_)) if spade::is_typed_array(value) => {
            SniffedFormat::SpadeJson
        }
        Ok(_) => SniffedFormat::Unknown,
        // Not a single JSON value; maybe a one-record-per-line SPADE stream.
        Err(_) if spade::looks_like_record_stream(text) => SniffedFormat::SpadeJson,
        Err(_) => SniffedFormat::Unknown,
    }
}

/// Parse a W3C PROV JSON document.
pub fn parse_w3c_prov(text: &str) -> Result<ProvDocument, ParseError> {
    w3c::parse(text)
}

/// Parse a SPADE JSON document (array form or one record per line).
pub fn parse_spade_json(text: &str) -> Result<ProvDocument, ParseError> {
    spade::parse(text)
}

/// Sniff the format and dispatch to the matching parser.
pub fn parse_auto(text: &str) -> Result<ProvDocument, ParseError> {
    match sniff_format(text) {
        SniffedFormat::W3cProv => parse_w3c_prov(text),
        SniffedFormat::SpadeJson => parse_spade_json(text),
        SniffedFormat::Unknown => match serde_json::from_str::<serde_json::Value>(text) {
            // Well-formed JSON of the wrong shape: a format problem.
            Ok(_) => Err(ParseError::shape(
                "input matches neither the W3C PROV JSON nor the SPADE JSON format",
            )),
            // Broken JSON: report where the syntax gave out.
            Err(e) => Err(ParseError::from_json(&e)),
        },
    }
}

/// Render a JSON attribute value as a flat string.
///
/// PROV-JSON wraps typed literals as `{"$": value, "type": ...}`; those
/// unwrap to the inner value. Other composites keep their compact JSON text.
pub(crate) fn flatten_value(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Object(map) => match map.get("$") {
            Some(inner) => flatten_value(inner),
            None => serde_json::to_string(value).unwrap_or_default(),
        },
        serde_json::Value::Null => String::new(),
        other => serde_json::to_string(other).unwrap_or_default(),
    }
}
